#pragma once

#include <string>
#include <vector>

#include "gpse/audio.hpp"
#include "gpse/rng.hpp"

namespace gpse {

enum class NoiseKind { White, Pink, Modulated };
std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

struct DataConfig {
  int n_train = 500;
  int n_test = 50;
  double duration_s = 1.0;
  int sample_rate = 8000;
  double snr_min_db = 0.0;
  double snr_max_db = 15.0;
  std::vector<NoiseKind> noise_kinds = {NoiseKind::White, NoiseKind::Pink,
                                        NoiseKind::Modulated};
  uint64_t seed = 0;

  void validate() const;
};

struct ManifestRow {
  std::string id;
  std::string clean_path, noise_path, noisy_path;
  double snr_db = 0.0;
  std::string split;  // "train" | "test"
};

struct Manifest {
  std::vector<ManifestRow> rows;
  std::string base_dir;  // paths in rows are relative to this

  std::vector<const ManifestRow*> split(const std::string& name) const;
  void save(const std::string& path) const;
  static Manifest load(const std::string& path);
};

// Speech-like signal: drifting fundamental (80-300 Hz) with decaying
// harmonics, syllable-rate amplitude envelope with silence gaps, peak 0.7.
Waveform gen_clean(Rng& rng, const DataConfig& cfg);

Waveform gen_noise(Rng& rng, NoiseKind kind, int len, int sample_rate);

// Scales noise so the clean/noise power ratio over the clean signal's
// nonsilent support is exactly snr_db. Returns the mixture and the scaled
// noise (the interference reference the metrics need). If the mixture clips,
// the triple is renormalized jointly and *renorm (when given) records the
// factor.
std::pair<Waveform, Waveform> mix_at_snr(const Waveform& clean, const Waveform& noise,
                                         double snr_db, double* renorm = nullptr);

// Sample mask of the nonsilent support (short-window RMS above -40 dB of the
// peak window RMS).
std::vector<bool> nonsilent_support(const Waveform& w);

Manifest build_dataset(const DataConfig& cfg, const std::string& out_dir);

}  // namespace gpse
