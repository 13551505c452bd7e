// gpse: score-diffusion speech enhancement experiment driver.
// Subcommands mirror the experiment lifecycle: synth -> train -> enhance /
// evaluate / sweep. Exit codes: 0 ok, 2 config error, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gpse/config.hpp"
#include "gpse/errors.hpp"
#include "gpse/evaluate.hpp"
#include "gpse/losses.hpp"
#include "gpse/trainer.hpp"

namespace fs = std::filesystem;
using namespace gpse;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
};

RunConfig resolve_config(const CommonOpts& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig::defaults_with_env()
                                        : RunConfig::from_file(c.config_path);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  cfg.validate();
  return cfg;
}

void echo_config(const RunConfig& cfg) {
  std::istringstream lines(cfg.resolved_text());
  std::string line;
  std::cout << "# resolved config\n";
  while (std::getline(lines, line)) std::cout << "#   " << line << "\n";
}

std::vector<std::string> config_header_lines(const RunConfig& cfg) {
  std::vector<std::string> out;
  std::istringstream lines(cfg.resolved_text());
  std::string line;
  while (std::getline(lines, line)) out.push_back(line);
  return out;
}

std::vector<SpecPair> load_training_pairs(const Manifest& manifest,
                                          const FeatureConfig& features) {
  std::vector<SpecPair> pairs;
  for (const auto* row : manifest.split("train")) {
    Waveform clean = load_wav(manifest.base_dir + "/" + row->clean_path);
    Waveform noisy = load_wav(manifest.base_dir + "/" + row->noisy_path);
    SpecPair p;
    p.x0 = waveform_to_features(clean, features);
    p.y = waveform_to_features(noisy, features);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  if (out.empty()) throw ConfigError("empty integer list: " + s);
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw ConfigError("empty list: " + s);
  return out;
}

int cmd_synth(const CommonOpts& common) {
  RunConfig cfg = resolve_config(common);
  echo_config(cfg);
  std::string dir = cfg.output_dir + "/" + cfg.run_id + "_data";
  Manifest m = build_dataset(cfg.data, dir);
  std::cout << "wrote " << m.rows.size() << " utterances to " << dir
            << " (manifest: " << dir << "/manifest.csv)\n";
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& manifest_path) {
  RunConfig cfg = resolve_config(common);
  echo_config(cfg);
  Manifest manifest = Manifest::load(manifest_path);
  std::vector<SpecPair> pairs = load_training_pairs(manifest, cfg.features);
  std::cout << "loaded " << pairs.size() << " training pairs\n";

  ScoreModel model(cfg.network, cfg.sde, cfg.features, cfg.train.seed);
  std::cout << "model variant=" << to_string(cfg.network.variant)
            << " params=" << model.param_scalar_count() << "\n";

  fs::create_directories(cfg.output_dir);
  std::ofstream run_log(cfg.output_dir + "/" + cfg.run_id + "_run_log.txt",
                        std::ios::trunc);
  run_log << cfg.resolved_text();

  int last_epoch = -1;
  std::string ckpt = train_on_pairs(
      model, pairs, cfg.train, cfg.output_dir, cfg.run_id,
      [&](const TrainProgress& p) {
        if (p.record.grad_norm > cfg.train.grad_clip)
          run_log << "step " << p.step << ": grad norm " << p.record.grad_norm
                  << " clipped to " << cfg.train.grad_clip << "\n";
        if (p.epoch != last_epoch) {
          last_epoch = p.epoch;
          std::cout << "epoch " << p.epoch << " step " << p.step
                    << " combined=" << p.record.combined << "\n";
        }
      });
  std::cout << "checkpoint: " << ckpt << "\n";
  return 0;
}

int cmd_enhance(const CommonOpts& common, const std::string& ckpt_path,
                const std::string& noisy_path, const std::string& out_path,
                const std::string& traj_path) {
  RunConfig cfg = resolve_config(common);
  echo_config(cfg);
  ScoreModel model = ScoreModel::load_checkpoint(ckpt_path);
  Waveform noisy = load_wav(noisy_path);
  ComplexSpec y = waveform_to_features(noisy, model.features());
  Rng rng(cfg.sampler.seed);
  SamplerConfig scfg = cfg.sampler;
  auto [xhat, traj] = enhance(model, y, scfg, model.sde(), rng);
  Waveform est = features_to_waveform(xhat, model.features(), noisy.sample_rate);
  save_wav(est, out_path);
  std::cout << "enhanced " << noisy_path << " -> " << out_path << " (variant="
            << to_string(scfg.variant) << ", N=" << scfg.n_steps << ")\n";
  if (!traj_path.empty()) {
    traj.dump_csv(traj_path);
    std::cout << "trajectory: " << traj_path << "\n";
  }
  return 0;
}

int cmd_evaluate(const CommonOpts& common, const std::string& ckpt_path,
                 const std::string& manifest_path, const std::string& split,
                 int limit) {
  RunConfig cfg = resolve_config(common);
  echo_config(cfg);
  ScoreModel model = ScoreModel::load_checkpoint(ckpt_path);
  Manifest manifest = Manifest::load(manifest_path);

  EvalOptions opt;
  opt.sampler = cfg.sampler;
  opt.split = split;
  opt.limit = limit;
  opt.jobs = cfg.jobs;
  EvalReport report = evaluate_set(manifest, model, opt);

  fs::create_directories(cfg.output_dir);
  std::string csv = cfg.output_dir + "/" + cfg.run_id + "_eval.csv";
  std::string summary = cfg.output_dir + "/" + cfg.run_id + "_eval_summary.json";
  write_report_csv(report, csv, config_header_lines(cfg));
  write_report_summary(report, summary);
  std::cout << "mean si_sdr=" << report.si_sdr.mean << " dB [" << report.si_sdr.ci_lo
            << ", " << report.si_sdr.ci_hi << "]\n"
            << "report: " << csv << "\n";
  return 0;
}

SweepRow aggregate_row(const EvalReport& r, const std::string& variant, int n_steps,
                       double alpha, double beta) {
  SweepRow row;
  row.variant = variant;
  row.n_steps = n_steps;
  row.alpha = alpha;
  row.beta = beta;
  row.si_sdr = r.si_sdr;
  row.si_sir = r.si_sir;
  row.si_sar = r.si_sar;
  row.lsd = r.lsd;
  return row;
}

int cmd_sweep(const CommonOpts& common, const std::string& ckpt_path,
              const std::string& manifest_path, const std::string& axis,
              const std::string& values_str, const std::string& steps_str,
              const std::string& variants_str, const std::string& split, int limit) {
  RunConfig cfg = resolve_config(common);
  echo_config(cfg);
  ScoreModel model = ScoreModel::load_checkpoint(ckpt_path);
  Manifest manifest = Manifest::load(manifest_path);

  std::vector<std::string> variant_names;
  {
    std::istringstream ss(variants_str);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) variant_names.push_back(item);
  }
  if (variant_names.empty()) throw ConfigError("sweep: no variants given");
  for (const auto& v : variant_names) {
    SamplerVariant sv = sampler_variant_from_string(v);
    if (variant_needs_pred_decoder(sv) && !model.has_pred_decoder())
      throw ConfigError("sweep: variant '" + v + "' incompatible with checkpoint");
  }

  std::vector<SweepRow> rows;
  // mixture baseline row for reference
  EvalReport mix = evaluate_mixture(manifest, split, limit, model.features().stft,
                                    cfg.sampler.seed);
  rows.push_back(aggregate_row(mix, "mixture", 0, 0.0, 0.0));

  auto run_point = [&](SamplerVariant sv, int n, double alpha, double beta,
                       bool want_pred) {
    EvalOptions opt;
    opt.sampler = cfg.sampler;
    opt.sampler.variant = sv;
    opt.sampler.n_steps = n;
    opt.sampler.alpha = alpha;
    opt.sampler.beta = beta;
    opt.split = split;
    opt.limit = limit;
    opt.jobs = cfg.jobs;
    opt.with_final_predictive = want_pred && variant_needs_pred_decoder(sv);
    EvalOutput out = evaluate_set_full(manifest, model, opt);
    rows.push_back(aggregate_row(out.main, to_string(sv), n, alpha, beta));
    if (out.has_predictive)
      rows.push_back(aggregate_row(out.predictive, "predictive-output", n, alpha, beta));
    std::cout << to_string(sv) << " N=" << n << " alpha=" << alpha << " beta=" << beta
              << " si_sdr=" << out.main.si_sdr.mean << "\n";
  };

  if (axis == "steps") {
    std::vector<int> steps = parse_int_list(values_str);
    for (const auto& vname : variant_names) {
      SamplerVariant sv = sampler_variant_from_string(vname);
      for (int n : steps)
        run_point(sv, n, cfg.sampler.alpha, cfg.sampler.beta,
                  sv == SamplerVariant::GpUnified);
    }
  } else if (axis == "alpha" || axis == "beta") {
    std::vector<double> values = parse_double_list(values_str);
    std::vector<int> steps = steps_str.empty() ? std::vector<int>{cfg.sampler.n_steps}
                                               : parse_int_list(steps_str);
    for (const auto& vname : variant_names) {
      SamplerVariant sv = sampler_variant_from_string(vname);
      for (int n : steps)
        for (double v : values) {
          double a = axis == "alpha" ? v : cfg.sampler.alpha;
          double b = axis == "beta" ? v : cfg.sampler.beta;
          run_point(sv, n, a, b, false);
        }
    }
  } else {
    throw ConfigError("sweep: axis must be steps, alpha, or beta");
  }

  fs::create_directories(cfg.output_dir);
  std::string csv =
      cfg.output_dir + "/" + cfg.run_id + "_sweep_" + axis + ".csv";
  write_sweep_csv(rows, csv, config_header_lines(cfg));
  std::cout << "sweep csv: " << csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"score-diffusion speech enhancement experiments"};
  app.require_subcommand(1);

  CommonOpts common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "config file (ini-style)");
    sub->add_option("--set", common.overrides,
                    "override, e.g. --set train.epochs=10 (repeatable)");
  };

  auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
  add_common(synth);

  std::string manifest_path, ckpt_path, noisy_path, out_path, traj_path;
  std::string split = "test";
  int limit = 0;

  auto* train = app.add_subcommand("train", "train a model on a manifest");
  add_common(train);
  train->add_option("--manifest", manifest_path, "dataset manifest")->required();

  auto* enh = app.add_subcommand("enhance", "enhance a single wav file");
  add_common(enh);
  enh->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
  enh->add_option("--in", noisy_path, "noisy wav")->required();
  enh->add_option("--out", out_path, "output wav")->required();
  enh->add_option("--trajectory", traj_path, "optional trajectory csv dump");

  auto* ev = app.add_subcommand("evaluate", "run the metric suite over a split");
  add_common(ev);
  ev->add_option("--checkpoint", ckpt_path)->required();
  ev->add_option("--manifest", manifest_path)->required();
  ev->add_option("--split", split, "train|test (default test)");
  ev->add_option("--limit", limit, "cap utterance count (0 = all)");

  std::string axis = "steps", values_str, steps_str,
              variants_str = "gp-sgmse+,gp-unified,gp-unified-no-first-fusion";
  auto* sw = app.add_subcommand("sweep", "step/alpha/beta sweeps");
  add_common(sw);
  sw->add_option("--checkpoint", ckpt_path)->required();
  sw->add_option("--manifest", manifest_path)->required();
  sw->add_option("--axis", axis, "steps|alpha|beta")->required();
  sw->add_option("--values", values_str,
                 "comma list; default steps grid 5,10,15,20,25,30");
  sw->add_option("--steps", steps_str, "step counts for alpha/beta grids");
  sw->add_option("--variants", variants_str, "comma list of sampler variants");
  sw->add_option("--split", split);
  sw->add_option("--limit", limit);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(common);
    if (train->parsed()) return cmd_train(common, manifest_path);
    if (enh->parsed())
      return cmd_enhance(common, ckpt_path, noisy_path, out_path, traj_path);
    if (ev->parsed())
      return cmd_evaluate(common, ckpt_path, manifest_path, split, limit);
    if (sw->parsed()) {
      if (values_str.empty())
        values_str = axis == "steps" ? "5,10,15,20,25,30" : "";
      if (values_str.empty())
        throw ConfigError("sweep: --values required for axis " + axis);
      return cmd_sweep(common, ckpt_path, manifest_path, axis, values_str, steps_str,
                       variants_str, split, limit);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
