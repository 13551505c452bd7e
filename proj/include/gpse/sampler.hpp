#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gpse/network.hpp"
#include "gpse/sde.hpp"

namespace gpse {

enum class SamplerVariant {
  SgmsePlus,             // generative decoding only
  GpSgmse,               // generative decoding only (GP-trained checkpoint)
  GpUnified,             // first-step (alpha) + final-step (beta) fusion
  GpUnifiedNoFirstFusion,  // final-step fusion only
  GpEveryStepFusion,     // alpha fusion at every iteration (negative control)
};

std::string to_string(SamplerVariant v);
SamplerVariant sampler_variant_from_string(const std::string& s);
bool variant_needs_pred_decoder(SamplerVariant v);

struct SamplerConfig {
  int n_steps = 30;
  SamplerVariant variant = SamplerVariant::GpUnified;
  double alpha = 0.2;  // first-fusion weight on the generative state
  double beta = 0.1;   // final-fusion weight on the generative state
  int corrector_steps = 1;
  double corrector_snr = 0.5;
  uint64_t seed = 0;
  bool record_states = false;      // keep full states in the trajectory
  bool record_predictive = false;  // decode the predictive head every step

  void validate() const;
};

struct TrajectoryStep {
  int k = 0;
  double t = 0.0;
  double state_rms = 0.0;
  double score_rms = 0.0;
  std::string event;  // fusion / corrector notes, empty when none
  std::optional<ComplexSpec> state;
  std::optional<ComplexSpec> x_pre;  // predictive output at this step
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  void dump_csv(const std::string& path) const;
};

// x_T ~ y + sigma(T) z
ComplexSpec init_state(const ComplexSpec& y, const SdeParams& p, Rng& rng);

using ScoreFn = std::function<ComplexSpec(const ComplexSpec& x, double t)>;

// Reverse Euler-Maruyama step t -> t - dt (dt > 0):
//   x <- x + [-f(x, y) + g(t)^2 s(x, t)] dt + g(t) sqrt(dt) z
// Noise omitted when add_noise is false (deterministic final update).
ComplexSpec predictor_step_fn(const ScoreFn& score, const ComplexSpec& x,
                              const ComplexSpec& y, double t, double dt,
                              const SdeParams& p, bool add_noise, Rng& rng);

// Annealed Langevin refinement with step eps = 2 (snr ||z|| / ||s||)^2.
// Returns x unchanged (and sets *skipped) when the score norm vanishes.
ComplexSpec corrector_step_fn(const ScoreFn& score, const ComplexSpec& x, double t,
                              double snr, Rng& rng, bool* skipped = nullptr);

// Model-backed versions of the two steps.
ComplexSpec predictor_step(const ScoreModel& model, const ComplexSpec& x,
                           const ComplexSpec& y, double t, double dt,
                           const SdeParams& p, bool add_noise, Rng& rng);
ComplexSpec corrector_step(const ScoreModel& model, const ComplexSpec& x,
                           const ComplexSpec& y, double t,
                           const SamplerConfig& cfg, Rng& rng);

// Convex combination w * x + (1 - w) * x_pre; exact passthrough at w = 0, 1.
ComplexSpec fuse(const ComplexSpec& x, const ComplexSpec& x_pre, double w);

// Full reverse pass over the uniform grid t_k = T - k (T - t_eps) / N. The
// corrector runs after every predictor step except the final one, which is
// noise-free. Fusion inputs are decoded from the state entering the fusion
// point, so the generative and predictive branches see the same features.
std::pair<ComplexSpec, Trajectory> enhance(const ScoreModel& model,
                                           const ComplexSpec& y,
                                           const SamplerConfig& cfg,
                                           const SdeParams& params, Rng& rng);

}  // namespace gpse
