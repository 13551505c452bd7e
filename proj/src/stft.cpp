#include "gpse/stft.hpp"

#include <cmath>
#include <numbers>

#include "gpse/errors.hpp"
#include "gpse/fft.hpp"

namespace gpse {

namespace {

std::vector<double> periodic_hann(int len) {
  std::vector<double> w(len);
  for (int n = 0; n < len; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / len);
  return w;
}

// Minimum of the shifted window-sum-square over one hop period in the fully
// overlapped interior. Zero means some samples are unrecoverable.
double min_window_sum_sq(const std::vector<double>& win, int hop) {
  int len = static_cast<int>(win.size());
  double min_v = -1.0;
  for (int n = 0; n < hop; ++n) {
    double acc = 0.0;
    for (int start = n; start < len; start += hop) acc += win[start] * win[start];
    if (min_v < 0.0 || acc < min_v) min_v = acc;
  }
  return min_v;
}

}  // namespace

void StftConfig::validate() const {
  if (window_len <= 0 || hop <= 0 || fft_len <= 0)
    throw ConfigError("stft: window_len, hop, fft_len must be positive");
  if (hop > window_len) throw ConfigError("stft: hop must be <= window_len");
  if (window_len > fft_len) throw ConfigError("stft: window_len must be <= fft_len");
  if (fft_len % 2 != 0) throw ConfigError("stft: fft_len must be even");
  auto win = periodic_hann(window_len);
  if (min_window_sum_sq(win, hop) < 1e-6)
    throw ConfigError("stft: window/hop violates overlap-add invertibility");
}

bool ComplexSpec::all_finite() const {
  for (const auto& c : data)
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
  return true;
}

double ComplexSpec::rms() const {
  if (data.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& c : data) acc += std::norm(c);
  return std::sqrt(acc / static_cast<double>(data.size()));
}

ComplexSpec stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  int len = static_cast<int>(w.samples.size());
  if (len < cfg.window_len)
    throw ConfigError("stft: signal shorter than one window");

  auto win = periodic_hann(cfg.window_len);
  int frames = 1 + (len - cfg.window_len) / cfg.hop;
  int bins = cfg.bins();

  ComplexSpec spec(frames, bins);
  spec.config = cfg;
  std::vector<double> buf(cfg.fft_len, 0.0);
  std::vector<std::complex<double>> fbuf(bins);
  for (int f = 0; f < frames; ++f) {
    int start = f * cfg.hop;
    for (int n = 0; n < cfg.window_len; ++n)
      buf[n] = w.samples[start + n] * win[n];
    for (int n = cfg.window_len; n < cfg.fft_len; ++n) buf[n] = 0.0;
    fft::rfft(buf.data(), cfg.fft_len, fbuf.data());
    for (int b = 0; b < bins; ++b) spec.at(f, b) = fbuf[b];
  }
  return spec;
}

Waveform istft(const ComplexSpec& spec, const StftConfig& cfg, int sample_rate) {
  cfg.validate();
  if (spec.bins != cfg.bins())
    throw ConfigError("istft: spectrogram bins do not match config");
  if (spec.frames <= 0) throw ConfigError("istft: empty spectrogram");

  auto win = periodic_hann(cfg.window_len);
  int out_len = (spec.frames - 1) * cfg.hop + cfg.window_len;
  std::vector<double> acc(out_len, 0.0), den(out_len, 0.0);
  std::vector<double> buf(cfg.fft_len);
  std::vector<std::complex<double>> fbuf(spec.bins);

  for (int f = 0; f < spec.frames; ++f) {
    for (int b = 0; b < spec.bins; ++b) fbuf[b] = spec.at(f, b);
    fft::irfft(fbuf.data(), cfg.fft_len, buf.data());
    int start = f * cfg.hop;
    for (int n = 0; n < cfg.window_len; ++n) {
      acc[start + n] += win[n] * buf[n];
      den[start + n] += win[n] * win[n];
    }
  }

  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.resize(out_len);
  for (int n = 0; n < out_len; ++n)
    out.samples[n] = den[n] > 1e-12 ? acc[n] / den[n] : 0.0;
  return out;
}

ComplexSpec compress(const ComplexSpec& spec, double exponent, double scale) {
  if (exponent <= 0.0 || exponent > 1.0)
    throw ConfigError("compress: exponent must be in (0, 1]");
  if (scale <= 0.0) throw ConfigError("compress: scale must be positive");
  ComplexSpec out = spec;
  for (auto& c : out.data) {
    double mag = std::abs(c);
    if (mag > 0.0) c *= scale * std::pow(mag, exponent) / mag;
  }
  out.compressed = true;
  return out;
}

ComplexSpec decompress(const ComplexSpec& spec, double exponent, double scale) {
  if (exponent <= 0.0 || exponent > 1.0)
    throw ConfigError("decompress: exponent must be in (0, 1]");
  if (scale <= 0.0) throw ConfigError("decompress: scale must be positive");
  ComplexSpec out = spec;
  for (auto& c : out.data) {
    double mag = std::abs(c);
    if (mag > 0.0) c *= std::pow(mag / scale, 1.0 / exponent) / mag;
  }
  out.compressed = false;
  return out;
}

ComplexSpec waveform_to_features(const Waveform& w, const FeatureConfig& fc) {
  ComplexSpec s = stft(w, fc.stft);
  if (fc.compress_enabled) s = compress(s, fc.comp_exponent, fc.comp_scale);
  return s;
}

Waveform features_to_waveform(const ComplexSpec& spec, const FeatureConfig& fc,
                              int sample_rate) {
  ComplexSpec s = spec;
  if (fc.compress_enabled) s = decompress(s, fc.comp_exponent, fc.comp_scale);
  return istft(s, fc.stft, sample_rate);
}

}  // namespace gpse
