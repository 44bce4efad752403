#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "fvmf/rng.hpp"

namespace fvmf {

/// Direction on the unit sphere; the norm invariant is checked on
/// construction to 1e-9.
class UnitVector {
 public:
  static constexpr double kNormTolerance = 1e-9;

  /// Wraps coordinates that are already unit norm.
  explicit UnitVector(std::vector<double> coords);

  /// Divides by the Euclidean norm. Throws Error(DegenerateMean) below 1e-300.
  static UnitVector normalized(std::span<const double> coords);
  static UnitVector normalized(std::span<const float> coords);

  std::size_t dim() const { return coords_.size(); }
  std::span<const double> coords() const { return coords_; }
  double operator[](std::size_t i) const { return coords_[i]; }

  friend bool operator==(const UnitVector&, const UnitVector&) = default;

 private:
  std::vector<double> coords_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

struct VmfParams {
  UnitVector mu;
  double kappa;

  VmfParams(UnitVector mean, double concentration);
  std::size_t dim() const { return mu.dim(); }
};

/// Equiprobable mixture of vMF components sharing a dimension. Log
/// normalizers are computed once per distinct kappa (keyed by bit pattern)
/// at construction, so a const mixture is safe to share across threads.
class VmfMixture {
 public:
  explicit VmfMixture(std::vector<VmfParams> components);

  std::size_t size() const { return components_.size(); }
  std::size_t dim() const { return components_.front().dim(); }
  const VmfParams& operator[](std::size_t k) const { return components_[k]; }
  double log_normalizer(std::size_t k) const { return log_norm_[k]; }
  std::size_t distinct_kappas() const { return cache_.size(); }

  /// log C_d(kappa_k) + kappa_k mu_k^T z for every component.
  std::vector<double> logits(const UnitVector& z) const;

 private:
  std::vector<VmfParams> components_;
  std::map<std::uint64_t, double> cache_;
  std::vector<double> log_norm_;
};

double vmf_log_density(const UnitVector& z, const VmfParams& p);

/// Wood's rejection sampler for the cosine to mu, plus a uniform tangent
/// direction. Deterministic in (p, n, seed) across platforms.
std::vector<UnitVector> sample_vmf(const VmfParams& p, std::size_t n, std::uint64_t seed);

/// Same sampler drawing from a caller-owned stream.
UnitVector sample_vmf(const VmfParams& p, Rng& rng);

/// Uniform direction on S^{d-1}.
UnitVector sample_uniform_sphere(std::size_t d, Rng& rng);

/// Posterior responsibility of each component for z (max-shifted softmax).
std::vector<double> mixture_posteriors(const UnitVector& z, const VmfMixture& m);

/// Numerically stable softmax / logsumexp over arbitrary logits.
std::vector<double> softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);

struct SpreadStats {
  UnitVector renormalized_mean;
  double raw_mean_norm;
  double inertia;
  std::size_t count;
};

/// Renormalized mean direction and the inertia (1/n) sum ||z_i - mean||^2.
/// Throws Error(DegenerateMean) when the raw mean norm is <= 1e-12.
SpreadStats spread_stats(std::span<const UnitVector> embeddings);

}  // namespace fvmf
