#pragma once

#include <complex>
#include <vector>

#include "gpse/audio.hpp"

namespace gpse {

struct StftConfig {
  int window_len = 254;  // periodic Hann
  int hop = 64;
  int fft_len = 254;

  bool operator==(const StftConfig&) const = default;
  void validate() const;  // throws ConfigError
  int bins() const { return fft_len / 2 + 1; }
};

// Time-frequency grid of complex values; the state space of the diffusion
// process. Row-major frames x bins.
struct ComplexSpec {
  int frames = 0;
  int bins = 0;
  std::vector<std::complex<double>> data;
  StftConfig config;
  bool compressed = false;

  ComplexSpec() = default;
  ComplexSpec(int frames_, int bins_)
      : frames(frames_), bins(bins_),
        data(static_cast<size_t>(frames_) * bins_, {0.0, 0.0}) {}

  std::complex<double>& at(int f, int b) { return data[static_cast<size_t>(f) * bins + b]; }
  const std::complex<double>& at(int f, int b) const {
    return data[static_cast<size_t>(f) * bins + b];
  }
  size_t size() const { return data.size(); }
  bool same_shape(const ComplexSpec& o) const {
    return frames == o.frames && bins == o.bins;
  }
  bool all_finite() const;
  double rms() const;
};

// frames = 1 + floor((len - window_len) / hop); rejects signals shorter than
// one window.
ComplexSpec stft(const Waveform& w, const StftConfig& cfg);

// Overlap-add with window-sum-square normalization. Exact on the interior for
// any config whose shifted window energy stays bounded away from zero.
Waveform istft(const ComplexSpec& spec, const StftConfig& cfg, int sample_rate);

// Magnitude map |c| -> scale * |c|^exponent, phase preserved.
ComplexSpec compress(const ComplexSpec& spec, double exponent, double scale);
ComplexSpec decompress(const ComplexSpec& spec, double exponent, double scale);

// Feature-domain settings that travel with a trained model.
struct FeatureConfig {
  StftConfig stft;
  bool compress_enabled = true;
  double comp_exponent = 0.5;
  double comp_scale = 0.33;

  bool operator==(const FeatureConfig&) const = default;
};

ComplexSpec waveform_to_features(const Waveform& w, const FeatureConfig& fc);
Waveform features_to_waveform(const ComplexSpec& spec, const FeatureConfig& fc,
                              int sample_rate);

}  // namespace gpse
