#pragma once

#include <string>

#include "gpse/network.hpp"
#include "gpse/sampler.hpp"
#include "gpse/sde.hpp"
#include "gpse/stft.hpp"
#include "gpse/synth.hpp"
#include "gpse/trainer.hpp"

namespace gpse {

// Union of all module configs. Files are flat key = value with [sections];
// every default is materialized back out by resolved_text() so runs are
// self-describing.
struct RunConfig {
  DataConfig data;
  FeatureConfig features;
  SdeParams sde;
  NetworkConfig network;
  TrainConfig train;
  SamplerConfig sampler;
  std::string output_dir = "gpse_out";  // overridden by $GPSE_OUTPUT_DIR
  std::string run_id = "run";
  int jobs = 1;

  void validate() const;  // cross-field consistency, field-path messages

  static RunConfig defaults_with_env();
  static RunConfig from_file(const std::string& path);
  // dotted override, e.g. "train.epochs=10"
  void apply_override(const std::string& assignment);
  std::string resolved_text() const;
};

}  // namespace gpse
