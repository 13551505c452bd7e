#include "gpse/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "gpse/errors.hpp"

namespace gpse::fft {

namespace {

// fftw planning is not thread-safe; execution via the new-array interface is.
// Plans are created FFTW_UNALIGNED so they accept any caller buffer.
struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
};

std::mutex g_plan_mutex;
std::map<size_t, PlanPair>& plan_cache() {
  static std::map<size_t, PlanPair> cache;
  return cache;
}

PlanPair get_plans(size_t n) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto& cache = plan_cache();
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  std::vector<double> re(n);
  std::vector<fftw_complex> cx(n / 2 + 1);
  PlanPair p;
  p.fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), re.data(), cx.data(),
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), cx.data(), re.data(),
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p.fwd || !p.inv) throw NumericError("fftw plan creation failed");
  cache[n] = p;
  return p;
}

}  // namespace

void rfft(const double* in, size_t n, std::complex<double>* out) {
  if (n == 0 || n % 2 != 0) throw ConfigError("rfft length must be even and > 0");
  PlanPair p = get_plans(n);
  // fftw wants mutable input for r2c even though it does not modify it here
  std::vector<double> tmp(in, in + n);
  fftw_execute_dft_r2c(p.fwd, tmp.data(), reinterpret_cast<fftw_complex*>(out));
}

void irfft(const std::complex<double>* in, size_t n, double* out) {
  if (n == 0 || n % 2 != 0) throw ConfigError("irfft length must be even and > 0");
  PlanPair p = get_plans(n);
  // c2r destroys its input; work on a copy
  std::vector<std::complex<double>> tmp(in, in + n / 2 + 1);
  fftw_execute_dft_c2r(p.inv, reinterpret_cast<fftw_complex*>(tmp.data()), out);
  double scale = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) out[i] *= scale;
}

}  // namespace gpse::fft
