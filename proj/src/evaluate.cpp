#include "gpse/evaluate.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "gpse/errors.hpp"

namespace gpse {

namespace {

struct UtteranceResult {
  UtteranceRecord main;
  UtteranceRecord pred;
  bool has_pred = false;
};

Waveform crop_to(const Waveform& w, size_t len) {
  Waveform out = w;
  out.samples.resize(len);
  return out;
}

UtteranceResult eval_one(const ManifestRow& row, const std::string& base_dir,
                         const ScoreModel& model, const EvalOptions& opt,
                         uint64_t stream) {
  Waveform clean = load_wav(base_dir + "/" + row.clean_path);
  Waveform noise = load_wav(base_dir + "/" + row.noise_path);
  Waveform noisy = load_wav(base_dir + "/" + row.noisy_path);

  ComplexSpec y = waveform_to_features(noisy, model.features());
  Rng rng = Rng(opt.sampler.seed).split(stream);
  SamplerConfig scfg = opt.sampler;
  auto [xhat, traj] = enhance(model, y, scfg, model.sde(), rng);
  Waveform est = features_to_waveform(xhat, model.features(), noisy.sample_rate);

  size_t len = std::min({est.samples.size(), clean.samples.size(),
                         noise.samples.size(), noisy.samples.size()});
  Waveform e = crop_to(est, len), c = crop_to(clean, len), n = crop_to(noise, len);

  auto fill = [&](const Waveform& signal, UtteranceRecord& rec) {
    MetricValue sdr = si_sdr(signal, c);
    MetricValue sir = si_sir(signal, c, n);
    MetricValue sar = si_sar(signal, c, n);
    rec.si_sdr = sdr.db;
    rec.si_sir = sir.db;
    rec.si_sar = sar.db;
    rec.capped = sdr.capped || sir.capped || sar.capped;
    rec.lsd = log_spectral_distance(signal, c, model.features().stft);
    rec.id = row.id;
    rec.n_steps = scfg.n_steps;
    rec.variant = to_string(scfg.variant);
    rec.alpha = scfg.alpha;
    rec.beta = scfg.beta;
  };

  UtteranceResult result;
  fill(e, result.main);

  if (opt.with_final_predictive && !traj.steps.empty() &&
      traj.steps.back().x_pre.has_value()) {
    Waveform pw = features_to_waveform(*traj.steps.back().x_pre, model.features(),
                                       noisy.sample_rate);
    fill(crop_to(pw, len), result.pred);
    result.pred.variant = "predictive-output";
    result.has_pred = true;
  }
  return result;
}

}  // namespace

EvalOutput evaluate_set_full(const Manifest& manifest, const ScoreModel& model,
                             const EvalOptions& opt) {
  auto rows = manifest.split(opt.split);
  if (rows.empty())
    throw ConfigError("evaluate: split '" + opt.split + "' is empty");
  if (opt.limit > 0 && static_cast<size_t>(opt.limit) < rows.size())
    rows.resize(static_cast<size_t>(opt.limit));

  std::vector<UtteranceResult> results(rows.size());
  int jobs = std::max(1, opt.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < rows.size(); ++i)
      results[i] = eval_one(*rows[i], manifest.base_dir, model, opt, i);
  } else {
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w]() {
        for (size_t i = static_cast<size_t>(w); i < rows.size(); i += static_cast<size_t>(jobs))
          results[i] = eval_one(*rows[i], manifest.base_dir, model, opt, i);
      });
    }
    for (auto& t : workers) t.join();
  }

  EvalOutput out;
  for (auto& r : results) out.main.records.push_back(std::move(r.main));
  finalize_report(out.main, opt.sampler.seed ^ 0xb00757a9);
  out.has_predictive = false;
  for (auto& r : results)
    if (r.has_pred) {
      out.predictive.records.push_back(std::move(r.pred));
      out.has_predictive = true;
    }
  if (out.has_predictive)
    finalize_report(out.predictive, opt.sampler.seed ^ 0xb00757aa);
  return out;
}

EvalReport evaluate_set(const Manifest& manifest, const ScoreModel& model,
                        const EvalOptions& opt) {
  return evaluate_set_full(manifest, model, opt).main;
}

EvalReport evaluate_mixture(const Manifest& manifest, const std::string& split,
                            int limit, const StftConfig& stft_cfg, uint64_t seed) {
  auto rows = manifest.split(split);
  if (rows.empty()) throw ConfigError("evaluate: split '" + split + "' is empty");
  if (limit > 0 && static_cast<size_t>(limit) < rows.size())
    rows.resize(static_cast<size_t>(limit));

  EvalReport report;
  for (const auto* row : rows) {
    Waveform clean = load_wav(manifest.base_dir + "/" + row->clean_path);
    Waveform noise = load_wav(manifest.base_dir + "/" + row->noise_path);
    Waveform noisy = load_wav(manifest.base_dir + "/" + row->noisy_path);
    size_t len =
        std::min({clean.samples.size(), noise.samples.size(), noisy.samples.size()});
    Waveform c = crop_to(clean, len), n = crop_to(noise, len), m = crop_to(noisy, len);
    UtteranceRecord rec;
    rec.id = row->id;
    rec.variant = "mixture";
    MetricValue sdr = si_sdr(m, c);
    MetricValue sir = si_sir(m, c, n);
    MetricValue sar = si_sar(m, c, n);
    rec.si_sdr = sdr.db;
    rec.si_sir = sir.db;
    rec.si_sar = sar.db;
    rec.capped = sdr.capped || sir.capped || sar.capped;
    rec.lsd = log_spectral_distance(m, c, stft_cfg);
    report.records.push_back(std::move(rec));
  }
  finalize_report(report, seed ^ 0x6d697874);
  return report;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path,
                     const std::vector<std::string>& header_comments) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write sweep csv: " + path);
  f << "# schema=gpse-sweep-v1\n";
  for (const auto& line : header_comments) f << "# " << line << '\n';
  f << "variant,n_steps,alpha,beta,si_sdr_mean,si_sdr_lo,si_sdr_hi,"
       "si_sir_mean,si_sar_mean,lsd_mean,n_utts\n";
  f.precision(10);
  for (const auto& r : rows)
    f << r.variant << ',' << r.n_steps << ',' << r.alpha << ',' << r.beta << ','
      << r.si_sdr.mean << ',' << r.si_sdr.ci_lo << ',' << r.si_sdr.ci_hi << ','
      << r.si_sir.mean << ',' << r.si_sar.mean << ',' << r.lsd.mean << ','
      << r.si_sdr.n << '\n';
}

}  // namespace gpse
