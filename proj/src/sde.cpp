#include "gpse/sde.hpp"

#include <cmath>

#include "gpse/errors.hpp"

namespace gpse {

namespace {

void require_same_shape(const ComplexSpec& a, const ComplexSpec& b, const char* op) {
  if (!a.same_shape(b))
    throw ConfigError(std::string(op) + ": shape mismatch");
}

void require_t_range(double t, const SdeParams& p, const char* op) {
  if (t < 0.0 || t > p.t_max)
    throw ConfigError(std::string(op) + ": t outside [0, T]");
}

}  // namespace

void SdeParams::validate() const {
  if (gamma <= 0.0) throw ConfigError("sde: gamma must be positive");
  if (!(0.0 < sigma_min && sigma_min < sigma_max))
    throw ConfigError("sde: need 0 < sigma_min < sigma_max");
  if (!(0.0 < t_eps && t_eps < t_max))
    throw ConfigError("sde: need 0 < t_eps < T");
}

ComplexSpec drift(const ComplexSpec& x_t, const ComplexSpec& y, const SdeParams& p) {
  require_same_shape(x_t, y, "drift");
  ComplexSpec out = x_t;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = p.gamma * (y.data[i] - x_t.data[i]);
  return out;
}

double diffusion_coeff(double t, const SdeParams& p) {
  require_t_range(t, p, "diffusion_coeff");
  double ratio = p.sigma_max / p.sigma_min;
  return p.sigma_min * std::pow(ratio, t) * std::sqrt(2.0 * std::log(ratio));
}

ComplexSpec kernel_mean(const ComplexSpec& x0, const ComplexSpec& y, double t,
                        const SdeParams& p) {
  require_same_shape(x0, y, "kernel_mean");
  double w = std::exp(-p.gamma * t);
  ComplexSpec out = x0;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = w * x0.data[i] + (1.0 - w) * y.data[i];
  return out;
}

double kernel_std(double t, const SdeParams& p) {
  require_t_range(t, p, "kernel_std");
  double logr = std::log(p.sigma_max / p.sigma_min);
  double var = p.sigma_min * p.sigma_min *
               (std::pow(p.sigma_max / p.sigma_min, 2.0 * t) -
                std::exp(-2.0 * p.gamma * t)) *
               logr / (p.gamma + logr);
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

KernelMoments kernel_moments(const ComplexSpec& x0, const ComplexSpec& y, double t,
                             const SdeParams& p) {
  return {kernel_mean(x0, y, t, p), kernel_std(t, p)};
}

std::pair<ComplexSpec, ComplexSpec> sample_perturbed(const ComplexSpec& x0,
                                                     const ComplexSpec& y, double t,
                                                     const SdeParams& p, Rng& rng) {
  ComplexSpec mu = kernel_mean(x0, y, t, p);
  double sigma = kernel_std(t, p);
  ComplexSpec z(x0.frames, x0.bins);
  z.config = x0.config;
  ComplexSpec x_t = mu;
  for (size_t i = 0; i < z.data.size(); ++i) {
    z.data[i] = rng.complex_normal();
    x_t.data[i] = mu.data[i] + sigma * z.data[i];
  }
  return {std::move(x_t), std::move(z)};
}

ComplexSpec kernel_score(const ComplexSpec& x_t, const ComplexSpec& x0,
                         const ComplexSpec& y, double t, const SdeParams& p) {
  require_same_shape(x_t, x0, "kernel_score");
  double sigma = kernel_std(t, p);
  if (sigma <= 0.0)
    throw NumericError("kernel_score: sigma(t) is zero (t too small)");
  ComplexSpec mu = kernel_mean(x0, y, t, p);
  double inv_var = 1.0 / (sigma * sigma);
  ComplexSpec out = x_t;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = -(x_t.data[i] - mu.data[i]) * inv_var;
  return out;
}

ComplexSpec forward_simulate_em(const ComplexSpec& x0, const ComplexSpec& y,
                                int n_steps, const SdeParams& p, Rng& rng) {
  require_same_shape(x0, y, "forward_simulate_em");
  if (n_steps < 100)
    throw ConfigError("forward_simulate_em: need n_steps >= 100");
  double dt = p.t_max / n_steps;
  double sqrt_dt = std::sqrt(dt);
  ComplexSpec x = x0;
  for (int k = 0; k < n_steps; ++k) {
    double t = k * dt;
    double g = diffusion_coeff(t, p);
    for (size_t i = 0; i < x.data.size(); ++i) {
      std::complex<double> dw = sqrt_dt * rng.complex_normal();
      x.data[i] += p.gamma * (y.data[i] - x.data[i]) * dt + g * dw;
    }
  }
  return x;
}

ComplexSpec analytic_posterior_score(const ComplexSpec& x_t, const ComplexSpec& y,
                                     double t, const ComplexSpec& prior_mean,
                                     double prior_var, const SdeParams& p) {
  require_same_shape(x_t, y, "analytic_posterior_score");
  require_same_shape(x_t, prior_mean, "analytic_posterior_score");
  if (prior_var < 0.0)
    throw ConfigError("analytic_posterior_score: prior_var must be >= 0");
  double w = std::exp(-p.gamma * t);
  double sigma = kernel_std(t, p);
  double var = w * w * prior_var + sigma * sigma;
  if (var <= 0.0)
    throw NumericError("analytic_posterior_score: degenerate marginal variance");
  ComplexSpec out = x_t;
  for (size_t i = 0; i < out.data.size(); ++i) {
    std::complex<double> mean = w * prior_mean.data[i] + (1.0 - w) * y.data[i];
    out.data[i] = -(x_t.data[i] - mean) / var;
  }
  return out;
}

}  // namespace gpse
