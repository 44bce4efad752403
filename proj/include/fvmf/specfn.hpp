#pragma once

// Log-space modified Bessel function of the first kind and the vMF
// normalizing constant. Orders up to a few hundred and arguments up to 1e4
// are evaluated without overflow by never leaving log space.

namespace fvmf::specfn {

/// log I_nu(kappa). Requires nu >= 0 and kappa > 0; kappa == 0 is accepted
/// only for nu == 0 (returns 0). Throws Error(Domain) otherwise.
double log_bessel_i(double nu, double kappa);

/// log C_d(kappa) = (d/2-1) log kappa - (d/2) log 2pi - log I_{d/2-1}(kappa).
double log_vmf_normalizer(int d, double kappa);

/// Mean resultant length A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa).
double mean_resultant_length(int d, double kappa);

/// Individual evaluation branches, exposed so the seams between them can be
/// tested. Callers should use log_bessel_i.
namespace detail {

// Region boundaries of log_bessel_i.
inline constexpr double kUniformOrderMin = 15.0;   // nu >= this: uniform asymptotic
inline constexpr double kLargeArgumentMin = 100.0;  // else kappa >= this: Hankel expansion

double log_bessel_i_series(double nu, double kappa);
double log_bessel_i_uniform(double nu, double kappa);
double log_bessel_i_large_argument(double nu, double kappa);

/// log I_nu(kappa) - nu log(kappa/2), which stays finite as kappa -> 0.
double log_bessel_i_series_scaled(double nu, double kappa);

}  // namespace detail

}  // namespace fvmf::specfn
