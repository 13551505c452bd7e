#include "gpse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gpse/errors.hpp"
#include "gpse/rng.hpp"

namespace gpse {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double energy(const std::vector<double>& a) { return dot(a, a); }

void check_lengths(const Waveform& a, const Waveform& b, const char* op) {
  if (a.samples.size() != b.samples.size())
    throw ConfigError(std::string(op) + ": length mismatch");
  if (a.samples.empty()) throw ConfigError(std::string(op) + ": empty signals");
}

MetricValue ratio_db(double num, double den) {
  MetricValue v;
  if (den < 1e-12 * num) {
    v.db = kMetricCapDb;
    v.capped = true;
  } else {
    v.db = 10.0 * std::log10(num / den);
  }
  return v;
}

struct Decomposition {
  std::vector<double> s_target, e_interf, e_artif;
};

Decomposition decompose(const Waveform& est, const Waveform& ref,
                        const Waveform& noise) {
  check_lengths(est, ref, "si_sir/si_sar");
  check_lengths(est, noise, "si_sir/si_sar");
  double rr = energy(ref.samples);
  double nn = energy(noise.samples);
  double rn = dot(ref.samples, noise.samples);
  if (rr <= 0.0) throw ConfigError("si_sir/si_sar: zero reference");
  double det = rr * nn - rn * rn;
  if (det <= 1e-12 * rr * nn || nn <= 0.0)
    throw ConfigError("si_sir/si_sar: collinear or degenerate references");

  double er = dot(est.samples, ref.samples);
  double en = dot(est.samples, noise.samples);
  // projection onto span{ref}:
  double c_t = er / rr;
  // projection onto span{ref, noise} via the 2x2 Gram system
  double a = (er * nn - en * rn) / det;
  double b = (en * rr - er * rn) / det;

  Decomposition d;
  size_t n = est.samples.size();
  d.s_target.resize(n);
  d.e_interf.resize(n);
  d.e_artif.resize(n);
  for (size_t i = 0; i < n; ++i) {
    double st = c_t * ref.samples[i];
    double span = a * ref.samples[i] + b * noise.samples[i];
    d.s_target[i] = st;
    d.e_interf[i] = span - st;
    d.e_artif[i] = est.samples[i] - span;
  }
  return d;
}

}  // namespace

MetricValue si_sdr(const Waveform& est, const Waveform& ref) {
  check_lengths(est, ref, "si_sdr");
  double rr = energy(ref.samples);
  if (rr <= 0.0) throw ConfigError("si_sdr: zero reference");
  double c = dot(est.samples, ref.samples) / rr;
  double target = 0.0, resid = 0.0;
  for (size_t i = 0; i < est.samples.size(); ++i) {
    double st = c * ref.samples[i];
    double e = est.samples[i] - st;
    target += st * st;
    resid += e * e;
  }
  return ratio_db(target, resid);
}

MetricValue si_sir(const Waveform& est, const Waveform& ref, const Waveform& noise) {
  Decomposition d = decompose(est, ref, noise);
  return ratio_db(energy(d.s_target), energy(d.e_interf));
}

MetricValue si_sar(const Waveform& est, const Waveform& ref, const Waveform& noise) {
  Decomposition d = decompose(est, ref, noise);
  std::vector<double> st_plus_ei(d.s_target.size());
  for (size_t i = 0; i < st_plus_ei.size(); ++i)
    st_plus_ei[i] = d.s_target[i] + d.e_interf[i];
  return ratio_db(energy(st_plus_ei), energy(d.e_artif));
}

double log_spectral_distance(const Waveform& est, const Waveform& ref,
                             const StftConfig& cfg) {
  check_lengths(est, ref, "log_spectral_distance");
  ComplexSpec se = stft(est, cfg);
  ComplexSpec sr = stft(ref, cfg);
  constexpr double kFloor = 1e-8;
  double acc_frames = 0.0;
  for (int f = 0; f < se.frames; ++f) {
    double acc = 0.0;
    for (int b = 0; b < se.bins; ++b) {
      double me = std::max(kFloor, std::abs(se.at(f, b)));
      double mr = std::max(kFloor, std::abs(sr.at(f, b)));
      double d = 20.0 * (std::log10(me) - std::log10(mr));
      acc += d * d;
    }
    acc_frames += acc / se.bins;
  }
  return std::sqrt(acc_frames / se.frames);
}

Aggregate bootstrap_mean(const std::vector<double>& values, uint64_t seed,
                         int n_resamples) {
  Aggregate a;
  a.n = static_cast<int>(values.size());
  if (values.empty()) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());

  // resample from the sorted multiset so aggregates are invariant to the
  // utterance order
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  Rng rng(seed);
  std::vector<double> means(static_cast<size_t>(n_resamples));
  for (int r = 0; r < n_resamples; ++r) {
    double acc = 0.0;
    for (size_t i = 0; i < sorted.size(); ++i)
      acc += sorted[rng.below(sorted.size())];
    means[static_cast<size_t>(r)] = acc / static_cast<double>(sorted.size());
  }
  std::sort(means.begin(), means.end());
  auto pct = [&](double q) {
    double pos = q * (means.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    size_t hi = std::min(means.size() - 1, lo + 1);
    double frac = pos - static_cast<double>(lo);
    return means[lo] * (1.0 - frac) + means[hi] * frac;
  };
  a.ci_lo = pct(0.025);
  a.ci_hi = pct(0.975);
  return a;
}

void finalize_report(EvalReport& report, uint64_t seed) {
  auto collect = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : report.records) {
      double x = field(r);
      if (std::isfinite(x)) v.push_back(x);
    }
    return v;
  };
  report.si_sdr = bootstrap_mean(collect([](const auto& r) { return r.si_sdr; }), seed);
  report.si_sir =
      bootstrap_mean(collect([](const auto& r) { return r.si_sir; }), seed + 1);
  report.si_sar =
      bootstrap_mean(collect([](const auto& r) { return r.si_sar; }), seed + 2);
  report.lsd = bootstrap_mean(collect([](const auto& r) { return r.lsd; }), seed + 3);
}

void write_report_csv(const EvalReport& report, const std::string& path,
                      const std::vector<std::string>& header_comments) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write report csv: " + path);
  f << "# schema=gpse-eval-v1\n";
  for (const auto& line : header_comments) f << "# " << line << '\n';
  f << "id,variant,n_steps,alpha,beta,si_sdr,si_sir,si_sar,lsd,capped\n";
  f.precision(10);
  for (const auto& r : report.records)
    f << r.id << ',' << r.variant << ',' << r.n_steps << ',' << r.alpha << ','
      << r.beta << ',' << r.si_sdr << ',' << r.si_sir << ',' << r.si_sar << ','
      << r.lsd << ',' << (r.capped ? 1 : 0) << '\n';
}

void write_report_summary(const EvalReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write summary: " + path);
  f.precision(10);
  auto put = [&](const char* name, const Aggregate& a) {
    f << "  \"" << name << "\": {\"mean\": " << a.mean << ", \"ci_lo\": " << a.ci_lo
      << ", \"ci_hi\": " << a.ci_hi << ", \"n\": " << a.n << "}";
  };
  f << "{\n";
  put("si_sdr", report.si_sdr);
  f << ",\n";
  put("si_sir", report.si_sir);
  f << ",\n";
  put("si_sar", report.si_sar);
  f << ",\n";
  put("lsd", report.lsd);
  f << "\n}\n";
}

}  // namespace gpse
