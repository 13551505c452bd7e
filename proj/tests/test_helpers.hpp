#pragma once

#include "gpse/network.hpp"
#include "gpse/rng.hpp"

namespace gpse::testing {

inline NetworkConfig tiny_net(ModelVariant v = ModelVariant::Gp) {
  NetworkConfig cfg;
  cfg.base_channels = 4;
  cfg.depth = 2;
  cfg.time_embed_dim = 16;
  cfg.variant = v;
  return cfg;
}

inline ComplexSpec random_spec(int frames, int bins, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  ComplexSpec s(frames, bins);
  for (auto& c : s.data) c = scale * rng.complex_normal();
  return s;
}

inline void randomize_params(ScoreModel& model, uint64_t seed, double scale = 0.05) {
  Rng rng(seed);
  for (auto& p : model.parameters()) {
    if (!p.trainable) continue;
    for (auto& v : p.var.value().data) v += scale * rng.normal();
  }
}

}  // namespace gpse::testing
