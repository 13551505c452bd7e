#pragma once

#include <utility>

#include "gpse/rng.hpp"
#include "gpse/stft.hpp"

namespace gpse {

// Ornstein-Uhlenbeck variance-exploding process: the state is pulled toward
// the noisy speech while the injected noise grows exponentially.
struct SdeParams {
  double gamma = 1.5;      // stiffness of the mean reversion
  double sigma_min = 0.05;
  double sigma_max = 0.5;
  double t_eps = 0.03;
  double t_max = 1.0;      // horizon T

  void validate() const;  // throws ConfigError
};

struct KernelMoments {
  ComplexSpec mean;
  double std = 0.0;
};

// f(x_t, y) = gamma * (y - x_t), elementwise.
ComplexSpec drift(const ComplexSpec& x_t, const ComplexSpec& y, const SdeParams& p);

// g(t) = sigma_min * (sigma_max/sigma_min)^t * sqrt(2 log(sigma_max/sigma_min))
double diffusion_coeff(double t, const SdeParams& p);

// mu(x0, y, t) = e^{-gamma t} x0 + (1 - e^{-gamma t}) y
ComplexSpec kernel_mean(const ComplexSpec& x0, const ComplexSpec& y, double t,
                        const SdeParams& p);

// sigma(t)^2 = sigma_min^2 ((sigma_max/sigma_min)^{2t} - e^{-2 gamma t})
//              * log(sigma_max/sigma_min) / (gamma + log(sigma_max/sigma_min))
double kernel_std(double t, const SdeParams& p);

KernelMoments kernel_moments(const ComplexSpec& x0, const ComplexSpec& y, double t,
                             const SdeParams& p);

// x_t = mu + sigma(t) z with z circularly symmetric complex normal (unit
// complex variance). Returns both x_t and the exact z consumed, which the
// training loss needs.
std::pair<ComplexSpec, ComplexSpec> sample_perturbed(const ComplexSpec& x0,
                                                     const ComplexSpec& y, double t,
                                                     const SdeParams& p, Rng& rng);

// Score of the perturbation kernel: -(x_t - mu) / sigma(t)^2. Equals -z/sigma
// when x_t came from sample_perturbed. Requires t > 0.
ComplexSpec kernel_score(const ComplexSpec& x_t, const ComplexSpec& x0,
                         const ComplexSpec& y, double t, const SdeParams& p);

// Euler-Maruyama forward path to t = T; Monte-Carlo oracle for the kernel
// moments. Complex Wiener increments have re/im variance dt/2 each so the
// terminal complex variance matches sigma(T)^2.
ComplexSpec forward_simulate_em(const ComplexSpec& x0, const ComplexSpec& y,
                                int n_steps, const SdeParams& p, Rng& rng);

// When x0 | y is complex Gaussian with known mean and variance, the marginal
// p_t(x_t | y) stays Gaussian; its score is closed-form. Validation oracle for
// samplers and for trained models on toy problems.
ComplexSpec analytic_posterior_score(const ComplexSpec& x_t, const ComplexSpec& y,
                                     double t, const ComplexSpec& prior_mean,
                                     double prior_var, const SdeParams& p);

}  // namespace gpse
