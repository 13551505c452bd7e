#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gpse/audio.hpp"
#include "gpse/stft.hpp"

namespace gpse {

class Rng;

inline constexpr double kMetricCapDb = 60.0;

struct MetricValue {
  double db = 0.0;
  bool capped = false;
};

// 10 log10(||s_t||^2 / ||est - s_t||^2) with s_t the projection of est onto
// ref. Returns the +60 dB cap (flagged) when the residual power drops below
// 1e-12 of the target power.
MetricValue si_sdr(const Waveform& est, const Waveform& ref);

// Orthogonal decomposition est = s_target + e_interf + e_artif against
// span{ref} and span{ref, noise}.
MetricValue si_sir(const Waveform& est, const Waveform& ref, const Waveform& noise);
MetricValue si_sar(const Waveform& est, const Waveform& ref, const Waveform& noise);

// RMS over frames of per-frame RMS of 20 (log10|EST| - log10|REF|), magnitudes
// floored at 1e-8.
double log_spectral_distance(const Waveform& est, const Waveform& ref,
                             const StftConfig& cfg);

struct UtteranceRecord {
  std::string id;
  double si_sdr = 0.0, si_sir = 0.0, si_sar = 0.0, lsd = 0.0;
  bool capped = false;
  int n_steps = 0;
  std::string variant;
  double alpha = 0.0, beta = 0.0;
};

struct Aggregate {
  double mean = 0.0, ci_lo = 0.0, ci_hi = 0.0;
  int n = 0;
};

struct EvalReport {
  std::vector<UtteranceRecord> records;
  Aggregate si_sdr, si_sir, si_sar, lsd;
};

// Mean plus a seeded bootstrap percentile interval (1000 resamples, 2.5/97.5).
Aggregate bootstrap_mean(const std::vector<double>& values, uint64_t seed,
                         int n_resamples = 1000);

// Fills the aggregate fields from the records (finite entries only).
void finalize_report(EvalReport& report, uint64_t seed);

// CSV with a '#'-commented header block (schema v1), one row per record.
void write_report_csv(const EvalReport& report, const std::string& path,
                      const std::vector<std::string>& header_comments);
void write_report_summary(const EvalReport& report, const std::string& path);

}  // namespace gpse
