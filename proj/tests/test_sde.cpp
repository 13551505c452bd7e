#include "doctest.h"

#include <cmath>
#include <complex>

#include "gpse/errors.hpp"
#include "gpse/rng.hpp"
#include "gpse/sde.hpp"

using namespace gpse;

namespace {

ComplexSpec scalar_spec(std::complex<double> v) {
  ComplexSpec s(1, 1);
  s.at(0, 0) = v;
  return s;
}

ComplexSpec random_spec(int frames, int bins, Rng& rng, double scale = 1.0) {
  ComplexSpec s(frames, bins);
  for (auto& c : s.data) c = scale * rng.complex_normal();
  return s;
}

const SdeParams kRef{};  // gamma=1.5, sigma 0.05..0.5, t_eps=0.03, T=1

}  // namespace

TEST_CASE("drift: fixed point, analytic value, homogeneity") {
  Rng rng(1);
  ComplexSpec x = random_spec(3, 4, rng);
  ComplexSpec d0 = drift(x, x, kRef);
  for (const auto& c : d0.data) CHECK(std::abs(c) == 0.0);

  ComplexSpec zero = scalar_spec(0.0), one = scalar_spec(1.0);
  ComplexSpec d = drift(zero, one, kRef);
  CHECK(d.at(0, 0).real() == doctest::Approx(1.5).epsilon(1e-15));

  ComplexSpec y = random_spec(3, 4, rng);
  double a = 2.75;
  ComplexSpec xa = x, ya = y;
  for (auto& c : xa.data) c *= a;
  for (auto& c : ya.data) c *= a;
  ComplexSpec lhs = drift(xa, ya, kRef), rhs = drift(x, y, kRef);
  for (size_t i = 0; i < lhs.data.size(); ++i)
    CHECK(std::abs(lhs.data[i] - a * rhs.data[i]) < 1e-12);

  ComplexSpec bad(2, 2);
  CHECK_THROWS_AS(drift(x, bad, kRef), ConfigError);
}

TEST_CASE("diffusion_coeff: endpoints and monotonicity") {
  // t=0: sigma_min * sqrt(2 ln(sigma_max/sigma_min))
  double expect0 = 0.05 * std::sqrt(2.0 * std::log(10.0));
  CHECK(diffusion_coeff(0.0, kRef) == doctest::Approx(expect0).epsilon(1e-12));

  // t=1 evaluated independently in long double
  long double lr = std::log(10.0L);
  long double g1 = 0.5L * std::sqrt(2.0L * lr);
  CHECK(diffusion_coeff(1.0, kRef) ==
        doctest::Approx(static_cast<double>(g1)).epsilon(1e-12));
  CHECK(diffusion_coeff(1.0, kRef) == doctest::Approx(1.0730).epsilon(1e-4));

  CHECK(diffusion_coeff(0.2, kRef) < diffusion_coeff(0.8, kRef));
  for (int i = 0; i + 1 < 50; ++i) {
    double t0 = i / 49.0, t1 = (i + 1) / 49.0;
    CHECK(diffusion_coeff(t0, kRef) < diffusion_coeff(t1, kRef));
  }
  CHECK_THROWS_AS(diffusion_coeff(-0.1, kRef), ConfigError);
  CHECK_THROWS_AS(diffusion_coeff(1.1, kRef), ConfigError);
}

TEST_CASE("kernel_mean: interpolation between x0 and y") {
  ComplexSpec x0 = scalar_spec(1.0), y = scalar_spec(0.0);
  CHECK(kernel_mean(x0, y, 0.0, kRef).at(0, 0).real() == doctest::Approx(1.0));

  // gamma=1.5, t=1 -> weight e^{-1.5}
  long double w = std::exp(-1.5L);
  CHECK(kernel_mean(x0, y, 1.0, kRef).at(0, 0).real() ==
        doctest::Approx(static_cast<double>(w)).epsilon(1e-12));
  CHECK(kernel_mean(x0, y, 1.0, kRef).at(0, 0).real() ==
        doctest::Approx(0.22313).epsilon(1e-4));

  // t = 50 (outside horizon, direct weight check): e^{-75} < 1e-30
  SdeParams wide = kRef;
  wide.t_max = 100.0;
  CHECK(kernel_mean(x0, y, 50.0, wide).at(0, 0).real() < 1e-30);

  // weight on x0 decreases monotonically
  double prev = 1.0;
  for (int i = 1; i <= 20; ++i) {
    double t = i / 20.0;
    double cur = kernel_mean(x0, y, t, kRef).at(0, 0).real();
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("kernel_std: zero at origin, reference value, strictly increasing") {
  CHECK(kernel_std(0.0, kRef) == 0.0);

  // variance formula at t=1 evaluated independently in long double
  long double lr = std::log(10.0L);
  long double var = 0.0025L * (std::pow(10.0L, 2.0L) - std::exp(-3.0L)) * lr / (1.5L + lr);
  CHECK(kernel_std(1.0, kRef) ==
        doctest::Approx(static_cast<double>(std::sqrt(var))).epsilon(1e-12));
  CHECK(var == doctest::Approx(0.15131L).epsilon(1e-4));
  CHECK(kernel_std(1.0, kRef) == doctest::Approx(0.38898).epsilon(1e-4));

  double prev = 0.0;
  for (int i = 1; i <= 100; ++i) {
    double t = i / 100.0;
    double cur = kernel_std(t, kRef);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("sample_perturbed: determinism, t=0 degeneracy, moments") {
  Rng rng(5);
  ComplexSpec x0 = random_spec(2, 3, rng), y = random_spec(2, 3, rng);

  Rng r1(99), r2(99);
  auto [xa, za] = sample_perturbed(x0, y, 0.7, kRef, r1);
  auto [xb, zb] = sample_perturbed(x0, y, 0.7, kRef, r2);
  for (size_t i = 0; i < xa.data.size(); ++i) {
    CHECK(xa.data[i] == xb.data[i]);
    CHECK(za.data[i] == zb.data[i]);
  }

  Rng r3(1);
  auto [x_t0, z0] = sample_perturbed(x0, y, 0.0, kRef, r3);
  for (size_t i = 0; i < x_t0.data.size(); ++i)
    CHECK(std::abs(x_t0.data[i] - x0.data[i]) < 1e-15);

  // Monte-Carlo moments at t = 0.5 against the closed-form kernel moments
  ComplexSpec sx0 = scalar_spec({0.8, -0.3}), sy = scalar_spec({-0.2, 0.1});
  double t = 0.5;
  ComplexSpec mu = kernel_mean(sx0, sy, t, kRef);
  double sigma = kernel_std(t, kRef);
  const int n = 10000;
  Rng r4(777);
  std::complex<double> sum = 0.0;
  double sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    auto [xt, z] = sample_perturbed(sx0, sy, t, kRef, r4);
    sum += xt.at(0, 0);
    sumsq += std::norm(xt.at(0, 0) - mu.at(0, 0));
  }
  std::complex<double> emp_mean = sum / static_cast<double>(n);
  double emp_var = sumsq / n;
  // each real part has variance sigma^2/2 -> se of each mean component
  double se = sigma / std::sqrt(2.0 * n);
  CHECK(std::fabs(emp_mean.real() - mu.at(0, 0).real()) < 3.0 * se);
  CHECK(std::fabs(emp_mean.imag() - mu.at(0, 0).imag()) < 3.0 * se);
  CHECK(emp_var == doctest::Approx(sigma * sigma).epsilon(0.05));
}

TEST_CASE("kernel_score: zero at the mean and -z/sigma identity") {
  Rng rng(11);
  ComplexSpec x0 = random_spec(3, 3, rng), y = random_spec(3, 3, rng);
  double t = 0.6;
  ComplexSpec mu = kernel_mean(x0, y, t, kRef);
  ComplexSpec s_at_mu = kernel_score(mu, x0, y, t, kRef);
  for (const auto& c : s_at_mu.data) CHECK(std::abs(c) < 1e-12);

  double sigma = kernel_std(t, kRef);
  auto [xt, z] = sample_perturbed(x0, y, t, kRef, rng);
  ComplexSpec sc = kernel_score(xt, x0, y, t, kRef);
  double max_err = 0.0;
  for (size_t i = 0; i < sc.data.size(); ++i)
    max_err = std::max(max_err, std::abs(sc.data[i] + z.data[i] / sigma));
  CHECK(max_err < 1e-9);

  CHECK_THROWS_AS(kernel_score(xt, x0, y, 0.0, kRef), NumericError);
}

TEST_CASE("kernel_score: finite-difference oracle on the kernel potential") {
  // The score is the gradient of -||x - mu||^2 / (2 sigma^2) taken per real
  // coordinate; check a few random points by central differences.
  Rng rng(21);
  ComplexSpec x0 = random_spec(2, 2, rng), y = random_spec(2, 2, rng);
  double t = 0.4;
  ComplexSpec mu = kernel_mean(x0, y, t, kRef);
  double sigma = kernel_std(t, kRef);

  auto potential = [&](const ComplexSpec& x) {
    double acc = 0.0;
    for (size_t i = 0; i < x.data.size(); ++i) acc += std::norm(x.data[i] - mu.data[i]);
    return -acc / (2.0 * sigma * sigma);
  };

  ComplexSpec xt = random_spec(2, 2, rng);
  ComplexSpec sc = kernel_score(xt, x0, y, t, kRef);
  double h = 1e-6;
  double max_rel = 0.0;
  for (size_t i = 0; i < xt.data.size(); ++i) {
    ComplexSpec xp = xt, xm = xt;
    xp.data[i] += h;
    xm.data[i] -= h;
    double g_re = (potential(xp) - potential(xm)) / (2.0 * h);
    xp = xt;
    xm = xt;
    xp.data[i] += std::complex<double>(0.0, h);
    xm.data[i] -= std::complex<double>(0.0, h);
    double g_im = (potential(xp) - potential(xm)) / (2.0 * h);
    double denom = std::max(1.0, std::abs(sc.data[i]));
    max_rel = std::max(max_rel, std::abs(g_re - sc.data[i].real()) / denom);
    max_rel = std::max(max_rel, std::abs(g_im - sc.data[i].imag()) / denom);
  }
  CHECK(max_rel < 1e-5);
}

TEST_CASE("forward_simulate_em: drift fixed point keeps the mean at y") {
  ComplexSpec v = scalar_spec({0.5, -0.25});
  const int n = 2000;
  Rng rng(31);
  std::complex<double> sum = 0.0;
  for (int i = 0; i < n; ++i) {
    ComplexSpec xt = forward_simulate_em(v, v, 200, kRef, rng);
    sum += xt.at(0, 0);
  }
  std::complex<double> mean = sum / static_cast<double>(n);
  double se = kernel_std(1.0, kRef) / std::sqrt(2.0 * n);
  CHECK(std::fabs(mean.real() - 0.5) < 3.0 * se);
  CHECK(std::fabs(mean.imag() + 0.25) < 3.0 * se);
}

TEST_CASE("forward_simulate_em: gamma->0 limit matches the g^2 integral") {
  // With gamma ~ 0 the process is driven noise only; terminal complex variance
  // is int_0^1 g(t)^2 dt = sigma_min^2 (r^2 - 1) / ln r with r = sigma_max/sigma_min
  // (closed form of int 2 ln(r) r^{2t} dt).
  SdeParams p = kRef;
  p.gamma = 1e-8;
  double r = p.sigma_max / p.sigma_min;
  double expect_var = p.sigma_min * p.sigma_min * (r * r - 1.0);
  ComplexSpec x0 = scalar_spec(0.0);
  const int n = 4000;
  Rng rng(32);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    ComplexSpec xt = forward_simulate_em(x0, x0, 300, p, rng);
    acc += std::norm(xt.at(0, 0));
  }
  double emp_var = acc / n;
  CHECK(emp_var == doctest::Approx(expect_var).epsilon(0.08));
}

TEST_CASE("forward_simulate_em: ensemble moments match the closed-form kernel") {
  ComplexSpec x0 = scalar_spec({1.0, 0.0}), y = scalar_spec({-0.5, 0.5});
  ComplexSpec mu = kernel_mean(x0, y, 1.0, kRef);
  double sigma = kernel_std(1.0, kRef);
  const int n = 10000;
  Rng rng(33);
  std::complex<double> sum = 0.0;
  double sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    ComplexSpec xt = forward_simulate_em(x0, y, 1000, kRef, rng);
    sum += xt.at(0, 0);
    sumsq += std::norm(xt.at(0, 0) - mu.at(0, 0));
  }
  std::complex<double> emp_mean = sum / static_cast<double>(n);
  double emp_std = std::sqrt(sumsq / n);
  CHECK(std::abs(emp_mean - mu.at(0, 0)) / std::abs(mu.at(0, 0)) < 0.05);
  CHECK(emp_std == doctest::Approx(sigma).epsilon(0.05));

  CHECK_THROWS_AS(forward_simulate_em(x0, y, 50, kRef, rng), ConfigError);
}

TEST_CASE("analytic_posterior_score: degenerate prior reduces to kernel_score") {
  Rng rng(41);
  ComplexSpec m0 = random_spec(2, 2, rng), y = random_spec(2, 2, rng);
  ComplexSpec xt = random_spec(2, 2, rng);
  double t = 0.5;
  ComplexSpec a = analytic_posterior_score(xt, y, t, m0, 0.0, kRef);
  ComplexSpec b = kernel_score(xt, m0, y, t, kRef);
  for (size_t i = 0; i < a.data.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) < 1e-9);
}

TEST_CASE("analytic_posterior_score: zero at marginal mean, FD oracle") {
  Rng rng(42);
  ComplexSpec m0 = random_spec(1, 2, rng), y = random_spec(1, 2, rng);
  double t = 0.35, v0 = 0.2;
  double w = std::exp(-kRef.gamma * t);
  double sigma = kernel_std(t, kRef);
  double var = w * w * v0 + sigma * sigma;

  ComplexSpec mean(1, 2);
  for (size_t i = 0; i < mean.data.size(); ++i)
    mean.data[i] = w * m0.data[i] + (1.0 - w) * y.data[i];
  ComplexSpec s0 = analytic_posterior_score(mean, y, t, m0, v0, kRef);
  for (const auto& c : s0.data) CHECK(std::abs(c) < 1e-12);

  auto potential = [&](const ComplexSpec& x) {
    double acc = 0.0;
    for (size_t i = 0; i < x.data.size(); ++i) acc += std::norm(x.data[i] - mean.data[i]);
    return -acc / (2.0 * var);
  };
  ComplexSpec xt = random_spec(1, 2, rng);
  ComplexSpec sc = analytic_posterior_score(xt, y, t, m0, v0, kRef);
  double h = 1e-6, max_rel = 0.0;
  for (size_t i = 0; i < xt.data.size(); ++i) {
    ComplexSpec xp = xt, xm = xt;
    xp.data[i] += h;
    xm.data[i] -= h;
    double g_re = (potential(xp) - potential(xm)) / (2.0 * h);
    xp = xt;
    xm = xt;
    xp.data[i] += std::complex<double>(0.0, h);
    xm.data[i] -= std::complex<double>(0.0, h);
    double g_im = (potential(xp) - potential(xm)) / (2.0 * h);
    double denom = std::max(1.0, std::abs(sc.data[i]));
    max_rel = std::max(max_rel, std::abs(g_re - sc.data[i].real()) / denom);
    max_rel = std::max(max_rel, std::abs(g_im - sc.data[i].imag()) / denom);
  }
  CHECK(max_rel < 1e-6);
}

TEST_CASE("sde params validation") {
  SdeParams p = kRef;
  p.gamma = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = kRef;
  p.sigma_min = 0.6;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = kRef;
  p.t_eps = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_NOTHROW(kRef.validate());
}
