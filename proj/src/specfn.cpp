#include "fvmf/specfn.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "fvmf/error.hpp"

namespace fvmf::specfn {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double lgamma_pos(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

void check_args(double nu, double kappa) {
  if (std::isnan(nu) || std::isnan(kappa)) fail(ErrorKind::Domain, "log_bessel_i: NaN argument");
  if (nu < 0.0 || !std::isfinite(nu)) fail(ErrorKind::Domain, "log_bessel_i: order must be finite and >= 0");
  if (kappa < 0.0 || !std::isfinite(kappa))
    fail(ErrorKind::Domain, "log_bessel_i: argument must be finite and >= 0");
  if (kappa == 0.0 && nu != 0.0) fail(ErrorKind::Domain, "log_bessel_i: argument 0 requires order 0");
}

// Debye polynomials u_k(p) of the uniform asymptotic expansion, as
// coefficient vectors in p, generated once from
//   u_{k+1}(p) = p^2 (1 - p^2) u_k'(p) / 2 + (1/8) int_0^p (1 - 5 t^2) u_k(t) dt.
constexpr int kDebyeTerms = 20;

const std::vector<std::vector<double>>& debye_polynomials() {
  static const std::vector<std::vector<double>> polys = [] {
    std::vector<std::vector<double>> u(kDebyeTerms);
    u[0] = {1.0};
    for (int k = 0; k + 1 < kDebyeTerms; ++k) {
      const auto& a = u[k];
      std::vector<double> next(a.size() + 3, 0.0);
      for (std::size_t j = 1; j < a.size(); ++j) {
        // p^2 (1 - p^2) * j a_j p^{j-1} / 2
        const double c = 0.5 * static_cast<double>(j) * a[j];
        next[j + 1] += c;
        next[j + 3] -= c;
      }
      for (std::size_t j = 0; j < a.size(); ++j) {
        // (1/8) * a_j (p^{j+1}/(j+1) - 5 p^{j+3}/(j+3))
        next[j + 1] += a[j] / (8.0 * static_cast<double>(j + 1));
        next[j + 3] -= 5.0 * a[j] / (8.0 * static_cast<double>(j + 3));
      }
      u[k + 1] = std::move(next);
    }
    return u;
  }();
  return polys;
}

double horner(const std::vector<double>& coeffs, double x) {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

}  // namespace

namespace detail {

double log_bessel_i_series_scaled(double nu, double kappa) {
  // sum_m (k^2/4)^m / (m! (nu+1)_m), split as 1 + tail for log1p accuracy.
  const double q = 0.25 * kappa * kappa;
  double term = 1.0;
  double tail = 0.0;
  for (int m = 1; m < 100000; ++m) {
    term *= q / (static_cast<double>(m) * (static_cast<double>(m) + nu));
    tail += term;
    if (term <= kEps * 0.125 * tail && static_cast<double>(m) > 0.5 * kappa) break;
  }
  return std::log1p(tail) - lgamma_pos(nu + 1.0);
}

double log_bessel_i_series(double nu, double kappa) {
  if (kappa == 0.0) return 0.0;
  const double lead = nu == 0.0 ? 0.0 : nu * std::log(0.5 * kappa);
  return lead + log_bessel_i_series_scaled(nu, kappa);
}

double log_bessel_i_uniform(double nu, double kappa) {
  const double z = kappa / nu;
  const double root = std::hypot(1.0, z);
  const double p = 1.0 / root;
  // eta = sqrt(1+z^2) + log(z / (1 + sqrt(1+z^2)))
  const double eta = root + std::log(z) - std::log1p(root);
  const auto& polys = debye_polynomials();
  double sum = 0.0;
  double scale = 1.0;
  // u_k(p) has sign changes inside (0, 1), so a single small term says
  // nothing about convergence; the whole budget is summed. For nu >= 15 the
  // truncation error is far below double rounding.
  for (int k = 1; k < kDebyeTerms; ++k) {
    scale /= nu;
    sum += horner(polys[k], p) * scale;
  }
  return nu * eta - 0.5 * (kLog2Pi + std::log(nu)) - 0.25 * std::log1p(z * z) + std::log1p(sum);
}

double log_bessel_i_large_argument(double nu, double kappa) {
  // I_nu(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k prod_{j<=k} (4nu^2 - (2j-1)^2) / (k! (8x)^k)
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 1000; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (8.0 * k * kappa);
    if (std::abs(term) > prev) break;
    sum += term;
    prev = std::abs(term);
    if (prev <= kEps * 0.01) break;
  }
  return kappa - 0.5 * (kLog2Pi + std::log(kappa)) + std::log1p(sum);
}

}  // namespace detail

double log_bessel_i(double nu, double kappa) {
  check_args(nu, kappa);
  if (kappa == 0.0) return 0.0;
  if (nu >= detail::kUniformOrderMin) return detail::log_bessel_i_uniform(nu, kappa);
  if (kappa >= detail::kLargeArgumentMin) return detail::log_bessel_i_large_argument(nu, kappa);
  return detail::log_bessel_i_series(nu, kappa);
}

double log_vmf_normalizer(int d, double kappa) {
  if (d < 2) fail(ErrorKind::Domain, "log_vmf_normalizer: dimension must be >= 2");
  if (!(kappa > 0.0) || !std::isfinite(kappa))
    fail(ErrorKind::Domain, "log_vmf_normalizer: kappa must be finite and > 0");
  const double nu = 0.5 * d - 1.0;
  const double half_d = 0.5 * d;
  if (nu < detail::kUniformOrderMin && kappa < detail::kLargeArgumentMin) {
    // The nu log kappa terms cancel analytically in the series region.
    return nu * std::numbers::ln2 - half_d * kLog2Pi - detail::log_bessel_i_series_scaled(nu, kappa);
  }
  return nu * std::log(kappa) - half_d * kLog2Pi - log_bessel_i(nu, kappa);
}

double mean_resultant_length(int d, double kappa) {
  if (d < 2) fail(ErrorKind::Domain, "mean_resultant_length: dimension must be >= 2");
  if (!(kappa > 0.0) || !std::isfinite(kappa))
    fail(ErrorKind::Domain, "mean_resultant_length: kappa must be finite and > 0");
  const double nu = 0.5 * d - 1.0;
  return std::exp(log_bessel_i(nu + 1.0, kappa) - log_bessel_i(nu, kappa));
}

}  // namespace fvmf::specfn
