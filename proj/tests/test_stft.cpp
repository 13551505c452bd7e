#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>

#include "gpse/errors.hpp"
#include "gpse/rng.hpp"
#include "gpse/stft.hpp"

using namespace gpse;

namespace {

Waveform make_noise(int len, uint64_t seed) {
  Rng rng(seed);
  Waveform w;
  w.sample_rate = 8000;
  w.samples.resize(len);
  for (auto& s : w.samples) s = rng.uniform(-0.5, 0.5);
  return w;
}

}  // namespace

TEST_CASE("stft: frame count arithmetic") {
  StftConfig cfg;
  Waveform w = make_noise(8000, 1);
  ComplexSpec s = stft(w, cfg);
  CHECK(s.frames == 1 + (8000 - cfg.window_len) / cfg.hop);
  CHECK(s.bins == cfg.fft_len / 2 + 1);
  CHECK(s.bins == 128);
}

TEST_CASE("stft: zero waveform gives all-zero spectrogram") {
  StftConfig cfg;
  Waveform w;
  w.sample_rate = 8000;
  w.samples.assign(2000, 0.0);
  ComplexSpec s = stft(w, cfg);
  for (const auto& c : s.data) CHECK(std::abs(c) == 0.0);
}

TEST_CASE("stft: bin-center sinusoid concentrates energy") {
  StftConfig cfg;
  // bin k corresponds to frequency k * fs / fft_len; pick k = 16
  int k = 16;
  double fs = 8000.0;
  double freq = k * fs / cfg.fft_len;
  Waveform w;
  w.sample_rate = 8000;
  w.samples.resize(4000);
  for (size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * freq * i / fs);
  ComplexSpec s = stft(w, cfg);
  // middle frame, away from boundary effects
  int f = s.frames / 2;
  double total = 0.0, at_bin = 0.0;
  for (int b = 0; b < s.bins; ++b) {
    double e = std::norm(s.at(f, b));
    total += e;
    if (std::abs(b - k) <= 1) at_bin += e;  // Hann main lobe spans +-1 bin
  }
  CHECK(at_bin / total > 0.95);
}

TEST_CASE("stft: white-noise round-trip is exact on the interior") {
  StftConfig cfg;
  Waveform w = make_noise(4 * cfg.window_len, 77);
  ComplexSpec s = stft(w, cfg);
  Waveform r = istft(s, cfg, w.sample_rate);
  REQUIRE(r.samples.size() >= w.samples.size() - cfg.hop);
  double max_err = 0.0;
  for (size_t i = cfg.window_len; i + cfg.window_len < r.samples.size(); ++i)
    max_err = std::max(max_err, std::fabs(r.samples[i] - w.samples[i]));
  CHECK(max_err < 1e-6);
}

TEST_CASE("stft: linearity") {
  StftConfig cfg;
  Waveform x = make_noise(2000, 3), y = make_noise(2000, 4);
  double a = 1.7, b = -0.3;
  Waveform mix;
  mix.sample_rate = 8000;
  mix.samples.resize(2000);
  for (int i = 0; i < 2000; ++i) mix.samples[i] = a * x.samples[i] + b * y.samples[i];
  ComplexSpec sx = stft(x, cfg), sy = stft(y, cfg), sm = stft(mix, cfg);
  double max_err = 0.0;
  for (size_t i = 0; i < sm.data.size(); ++i)
    max_err = std::max(max_err,
                       std::abs(sm.data[i] - (a * sx.data[i] + b * sy.data[i])));
  CHECK(max_err < 1e-9);
}

TEST_CASE("stft: signal shorter than one window is rejected") {
  StftConfig cfg;
  Waveform w = make_noise(cfg.window_len - 1, 5);
  CHECK_THROWS_AS(stft(w, cfg), ConfigError);
}

TEST_CASE("stft: non-invertible window/hop config is rejected") {
  StftConfig cfg;
  cfg.window_len = 254;
  cfg.hop = 254;  // periodic Hann is zero at n=0: some samples unrecoverable
  cfg.fft_len = 254;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("compress: exponent 1, scale 1 is the identity") {
  StftConfig cfg;
  Waveform w = make_noise(2000, 8);
  ComplexSpec s = stft(w, cfg);
  ComplexSpec c = compress(s, 1.0, 1.0);
  for (size_t i = 0; i < s.data.size(); ++i)
    CHECK(std::abs(c.data[i] - s.data[i]) < 1e-12);
  CHECK(c.compressed);
}

TEST_CASE("compress: sqrt of 4 is 2") {
  ComplexSpec s(1, 1);
  s.at(0, 0) = {4.0, 0.0};
  ComplexSpec c = compress(s, 0.5, 1.0);
  CHECK(c.at(0, 0).real() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(c.at(0, 0).imag() == doctest::Approx(0.0));
}

TEST_CASE("compress/decompress: exact inverse pair") {
  StftConfig cfg;
  Waveform w = make_noise(2000, 9);
  ComplexSpec s = stft(w, cfg);
  ComplexSpec back = decompress(compress(s, 0.5, 0.33), 0.5, 0.33);
  double max_rel = 0.0;
  for (size_t i = 0; i < s.data.size(); ++i) {
    double mag = std::abs(s.data[i]);
    if (mag > 1e-300)
      max_rel = std::max(max_rel, std::abs(back.data[i] - s.data[i]) / mag);
  }
  CHECK(max_rel < 1e-9);
  CHECK_FALSE(back.compressed);

  // zero maps to zero
  ComplexSpec z(2, 2);
  ComplexSpec cz = compress(z, 0.5, 0.33);
  for (const auto& v : cz.data) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("compress: parameter validation") {
  ComplexSpec s(1, 1);
  CHECK_THROWS_AS(compress(s, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(compress(s, 1.5, 1.0), ConfigError);
  CHECK_THROWS_AS(compress(s, 0.5, 0.0), ConfigError);
}

TEST_CASE("stft: property round-trip over random lengths and hops") {
  Rng rng(31337);
  for (int trial = 0; trial < 10; ++trial) {
    StftConfig cfg;
    cfg.fft_len = 2 * (32 + static_cast<int>(rng.below(200)));
    cfg.window_len = cfg.fft_len - static_cast<int>(rng.below(8));
    cfg.hop = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(cfg.window_len / 2)));
    int len = 2 * cfg.window_len + static_cast<int>(rng.below(4000));
    Waveform w = make_noise(len, 1000 + trial);
    ComplexSpec s = stft(w, cfg);
    Waveform r = istft(s, cfg, w.sample_rate);
    double max_err = 0.0;
    for (size_t i = cfg.window_len; i + cfg.window_len < r.samples.size(); ++i)
      max_err = std::max(max_err, std::fabs(r.samples[i] - w.samples[i]));
    CAPTURE(cfg.fft_len);
    CAPTURE(cfg.window_len);
    CAPTURE(cfg.hop);
    CHECK(max_err < 1e-6);
  }
}
