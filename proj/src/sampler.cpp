#include "gpse/sampler.hpp"

#include <cmath>
#include <fstream>

#include "gpse/errors.hpp"

namespace gpse {

std::string to_string(SamplerVariant v) {
  switch (v) {
    case SamplerVariant::SgmsePlus: return "sgmse+";
    case SamplerVariant::GpSgmse: return "gp-sgmse+";
    case SamplerVariant::GpUnified: return "gp-unified";
    case SamplerVariant::GpUnifiedNoFirstFusion: return "gp-unified-no-first-fusion";
    case SamplerVariant::GpEveryStepFusion: return "gp-every-step-fusion";
  }
  return "?";
}

SamplerVariant sampler_variant_from_string(const std::string& s) {
  std::string l;
  for (char c : s) l.push_back(static_cast<char>(std::tolower(c)));
  if (l == "sgmse+" || l == "sgmse") return SamplerVariant::SgmsePlus;
  if (l == "gp-sgmse+" || l == "gp-sgmse") return SamplerVariant::GpSgmse;
  if (l == "gp-unified") return SamplerVariant::GpUnified;
  if (l == "gp-unified-no-first-fusion" || l == "gp-unified-w/o-first-fusion")
    return SamplerVariant::GpUnifiedNoFirstFusion;
  if (l == "gp-every-step-fusion") return SamplerVariant::GpEveryStepFusion;
  throw ConfigError("unknown sampler variant: " + s);
}

bool variant_needs_pred_decoder(SamplerVariant v) {
  switch (v) {
    case SamplerVariant::GpUnified:
    case SamplerVariant::GpUnifiedNoFirstFusion:
    case SamplerVariant::GpEveryStepFusion:
      return true;
    default:
      return false;
  }
}

void SamplerConfig::validate() const {
  if (n_steps < 1) throw ConfigError("sampler.n_steps: must be >= 1");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("sampler.alpha: must be in [0, 1]");
  if (beta < 0.0 || beta > 1.0) throw ConfigError("sampler.beta: must be in [0, 1]");
  if (corrector_steps < 0) throw ConfigError("sampler.corrector_steps: must be >= 0");
  if (corrector_snr <= 0.0) throw ConfigError("sampler.corrector_snr: must be > 0");
}

ComplexSpec init_state(const ComplexSpec& y, const SdeParams& p, Rng& rng) {
  double sigma = kernel_std(p.t_max, p);
  ComplexSpec x = y;
  for (auto& c : x.data) c += sigma * rng.complex_normal();
  return x;
}

ComplexSpec predictor_step_fn(const ScoreFn& score, const ComplexSpec& x,
                              const ComplexSpec& y, double t, double dt,
                              const SdeParams& p, bool add_noise, Rng& rng) {
  if (dt <= 0.0) throw ConfigError("predictor_step: dt must be positive");
  ComplexSpec s = score(x, t);
  if (!s.same_shape(x)) throw ConfigError("predictor_step: score shape mismatch");
  double g = diffusion_coeff(t, p);
  double g2 = g * g;
  double noise_scale = add_noise ? g * std::sqrt(dt) : 0.0;
  ComplexSpec out = x;
  for (size_t i = 0; i < out.data.size(); ++i) {
    std::complex<double> f = p.gamma * (y.data[i] - x.data[i]);
    out.data[i] += (-f + g2 * s.data[i]) * dt;
    if (add_noise) out.data[i] += noise_scale * rng.complex_normal();
  }
  if (!out.all_finite())
    throw NumericError("predictor_step: non-finite state at t=" + std::to_string(t));
  return out;
}

ComplexSpec corrector_step_fn(const ScoreFn& score, const ComplexSpec& x, double t,
                              double snr, Rng& rng, bool* skipped) {
  ComplexSpec s = score(x, t);
  ComplexSpec z(x.frames, x.bins);
  double z_norm_sq = 0.0, s_norm_sq = 0.0;
  for (size_t i = 0; i < z.data.size(); ++i) {
    z.data[i] = rng.complex_normal();
    z_norm_sq += std::norm(z.data[i]);
    s_norm_sq += std::norm(s.data[i]);
  }
  if (s_norm_sq <= 0.0) {
    if (skipped) *skipped = true;
    return x;
  }
  if (skipped) *skipped = false;
  double ratio = snr * std::sqrt(z_norm_sq / s_norm_sq);
  double eps = 2.0 * ratio * ratio;
  double noise_scale = std::sqrt(2.0 * eps);
  ComplexSpec out = x;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] += eps * s.data[i] + noise_scale * z.data[i];
  if (!out.all_finite())
    throw NumericError("corrector_step: non-finite state at t=" + std::to_string(t));
  return out;
}

namespace {

ScoreFn model_score_fn(const ScoreModel& model, const ComplexSpec& y) {
  return [&model, &y](const ComplexSpec& x, double t) { return model.score(x, y, t); };
}

}  // namespace

ComplexSpec predictor_step(const ScoreModel& model, const ComplexSpec& x,
                           const ComplexSpec& y, double t, double dt,
                           const SdeParams& p, bool add_noise, Rng& rng) {
  return predictor_step_fn(model_score_fn(model, y), x, y, t, dt, p, add_noise, rng);
}

ComplexSpec corrector_step(const ScoreModel& model, const ComplexSpec& x,
                           const ComplexSpec& y, double t,
                           const SamplerConfig& cfg, Rng& rng) {
  ComplexSpec out = x;
  for (int i = 0; i < cfg.corrector_steps; ++i)
    out = corrector_step_fn(model_score_fn(model, y), out, t, cfg.corrector_snr, rng);
  return out;
}

ComplexSpec fuse(const ComplexSpec& x, const ComplexSpec& x_pre, double w) {
  if (!x.same_shape(x_pre)) throw ConfigError("fuse: shape mismatch");
  if (w < 0.0 || w > 1.0) throw ConfigError("fuse: weight must be in [0, 1]");
  if (w == 1.0) return x;
  if (w == 0.0) return x_pre;
  ComplexSpec out = x;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = w * x.data[i] + (1.0 - w) * x_pre.data[i];
  return out;
}

void Trajectory::dump_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write trajectory csv: " + path);
  f << "k,t,state_rms,score_rms,event\n";
  f.precision(10);
  for (const auto& s : steps)
    f << s.k << ',' << s.t << ',' << s.state_rms << ',' << s.score_rms << ','
      << s.event << '\n';
}

std::pair<ComplexSpec, Trajectory> enhance(const ScoreModel& model,
                                           const ComplexSpec& y,
                                           const SamplerConfig& cfg,
                                           const SdeParams& params, Rng& rng) {
  cfg.validate();
  const SdeParams& msde = model.sde();
  if (std::fabs(msde.gamma - params.gamma) > 1e-12 ||
      std::fabs(msde.sigma_min - params.sigma_min) > 1e-12 ||
      std::fabs(msde.sigma_max - params.sigma_max) > 1e-12 ||
      std::fabs(msde.t_eps - params.t_eps) > 1e-12 ||
      std::fabs(msde.t_max - params.t_max) > 1e-12)
    throw ConfigError("enhance: sampler SDE params must match the checkpoint");
  bool needs_pred = variant_needs_pred_decoder(cfg.variant) || cfg.record_predictive;
  if (needs_pred && !model.has_pred_decoder())
    throw ConfigError("enhance: variant '" + to_string(cfg.variant) +
                      "' requires a predictive decoder (GP checkpoint)");

  const int n = cfg.n_steps;
  const double span = params.t_max - params.t_eps;
  auto t_of = [&](int k) { return params.t_max - k * span / n; };
  const double dt = span / n;

  Trajectory traj;
  ComplexSpec x = init_state(y, params, rng);
  {
    TrajectoryStep st;
    st.k = 0;
    st.t = t_of(0);
    st.state_rms = x.rms();
    st.event = "init";
    if (cfg.record_states) st.state = x;
    traj.steps.push_back(std::move(st));
  }

  for (int k = 1; k <= n; ++k) {
    double t_prev = t_of(k - 1);
    double t_cur = t_of(k);
    bool final_step = (k == n);
    TrajectoryStep st;
    st.k = k;
    st.t = t_cur;

    ComplexSpec s = model.score(x, y, t_prev);
    st.score_rms = s.rms();
    {
      double g = diffusion_coeff(t_prev, params);
      double g2 = g * g;
      double noise_scale = final_step ? 0.0 : g * std::sqrt(dt);
      for (size_t i = 0; i < x.data.size(); ++i) {
        std::complex<double> f = params.gamma * (y.data[i] - x.data[i]);
        x.data[i] += (-f + g2 * s.data[i]) * dt;
        if (!final_step) x.data[i] += noise_scale * rng.complex_normal();
      }
    }
    if (!x.all_finite())
      throw NumericError("enhance: non-finite state after predictor step k=" +
                         std::to_string(k));

    if (!final_step) {
      for (int c = 0; c < cfg.corrector_steps; ++c) {
        bool skipped = false;
        x = corrector_step_fn(model_score_fn(model, y), x, t_cur,
                              cfg.corrector_snr, rng, &skipped);
        if (skipped) st.event += "corrector-skipped;";
      }
    }

    // fusion events act on the state entering the fusion point
    bool fuse_first = (cfg.variant == SamplerVariant::GpUnified && k == 1);
    bool fuse_final = ((cfg.variant == SamplerVariant::GpUnified ||
                        cfg.variant == SamplerVariant::GpUnifiedNoFirstFusion) &&
                       k == n);
    bool fuse_every = (cfg.variant == SamplerVariant::GpEveryStepFusion);
    bool want_pre = fuse_first || fuse_final || fuse_every || cfg.record_predictive;

    if (want_pre) {
      ComplexSpec x_pre = model.predict(x, y, t_cur);
      if (fuse_first) {
        x = fuse(x, x_pre, cfg.alpha);
        st.event += "fuse-first(alpha=" + std::to_string(cfg.alpha) + ");";
      }
      if (fuse_final) {
        // at n_steps == 1 the alpha fusion above composes with this one,
        // reusing the single predictive decode of the entering state
        x = fuse(x, x_pre, cfg.beta);
        st.event += "fuse-final(beta=" + std::to_string(cfg.beta) + ");";
      }
      if (fuse_every && !fuse_first && !fuse_final) {
        x = fuse(x, x_pre, cfg.alpha);
        st.event += "fuse-every(alpha=" + std::to_string(cfg.alpha) + ");";
      }
      // the final predictive output is always kept once computed: the
      // per-step-count predictive curve reads it from the trajectory
      if (cfg.record_states || cfg.record_predictive || final_step)
        st.x_pre = std::move(x_pre);
    }

    st.state_rms = x.rms();
    if (cfg.record_states) st.state = x;
    traj.steps.push_back(std::move(st));
  }
  return {std::move(x), std::move(traj)};
}

}  // namespace gpse
