#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gpse/network.hpp"

namespace gpse {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double ema_decay = 0.999;
  double loss_weight_gen = 0.5;
  double loss_weight_pred = 0.5;
  uint64_t seed = 0;
  int crop_frames = 32;    // training crops along the frame axis; 0 = no crop
  double grad_clip = 1.0;  // global-norm clip, always applied

  void validate() const;
};

struct OptimizerState {
  std::vector<Tensor> m, v;  // first/second moment accumulators per parameter
  int64_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static OptimizerState init(const ScoreModel& model);
};

// Standard adaptive-moment update with bias correction. Non-trainable
// parameters are skipped.
void adam_update(OptimizerState& opt, ScoreModel& model, double lr);

struct EmaState {
  std::vector<Tensor> shadow;
  static EmaState init(const ScoreModel& model);
};

// shadow <- decay * shadow + (1 - decay) * params
void ema_update(EmaState& ema, const ScoreModel& model, double decay);
// Exchanges params and shadow; call twice to restore.
void swap_to_ema(ScoreModel& model, EmaState& ema);

struct LossRecord {
  double gen = 0.0;
  double pred = 0.0;
  double combined = 0.0;
  double t_mean = 0.0;
  double grad_norm = 0.0;  // pre-clip global norm
};

struct SpecPair {
  ComplexSpec x0;  // clean features
  ComplexSpec y;   // noisy features
};

// One training step over an aligned batch: per item samples t ~ U[t_eps, T],
// draws z, forms x_t = mu + sigma z, runs the shared encoder plus whichever
// heads the loss weights need, then backward + clip + adam (+ EMA).
LossRecord training_step(ScoreModel& model, const std::vector<const SpecPair*>& batch,
                         const TrainConfig& cfg, Rng& rng, OptimizerState& opt,
                         EmaState* ema);

struct TrainProgress {
  int64_t step;
  int epoch;
  LossRecord record;
};

// Full loop over in-memory pairs: deterministic shuffling and cropping,
// per-step CSV logging (step, t_mean, gen_loss, pred_loss, combined),
// checkpoint written every epoch (EMA weights when ema_decay > 0).
// Returns the final checkpoint path.
std::string train_on_pairs(ScoreModel& model, const std::vector<SpecPair>& pairs,
                           const TrainConfig& cfg, const std::string& out_dir,
                           const std::string& run_id,
                           const std::function<void(const TrainProgress&)>& on_step);

}  // namespace gpse
