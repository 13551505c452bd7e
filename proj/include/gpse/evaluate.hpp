#pragma once

#include <string>
#include <vector>

#include "gpse/metrics.hpp"
#include "gpse/network.hpp"
#include "gpse/sampler.hpp"
#include "gpse/synth.hpp"

namespace gpse {

struct EvalOptions {
  SamplerConfig sampler;
  std::string split = "test";
  int limit = 0;  // 0 = whole split
  int jobs = 1;
  bool with_final_predictive = false;  // also score the final predictive output
};

struct EvalOutput {
  EvalReport main;
  EvalReport predictive;  // populated when with_final_predictive and available
  bool has_predictive = false;
};

// Enhances every utterance of the split and computes the metric suite against
// the clean + scaled-noise references. Deterministic: utterance i uses the
// stream split(sampler.seed, i).
EvalOutput evaluate_set_full(const Manifest& manifest, const ScoreModel& model,
                             const EvalOptions& opt);
EvalReport evaluate_set(const Manifest& manifest, const ScoreModel& model,
                        const EvalOptions& opt);

// Metrics of the mixtures themselves (identity enhancer baseline).
EvalReport evaluate_mixture(const Manifest& manifest, const std::string& split,
                            int limit, const StftConfig& stft_cfg, uint64_t seed);

struct SweepRow {
  std::string variant;
  int n_steps = 0;
  double alpha = 0.0, beta = 0.0;
  Aggregate si_sdr, si_sir, si_sar, lsd;
};

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path,
                     const std::vector<std::string>& header_comments);

}  // namespace gpse
