#include "fvmf/vmf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "fvmf/error.hpp"
#include "fvmf/specfn.hpp"

namespace fvmf {

namespace {

void check_dims(std::size_t a, std::size_t b, const char* where) {
  if (a != b)
    fail(ErrorKind::DimensionMismatch,
         std::string(where) + ": dimension " + std::to_string(a) + " vs " + std::to_string(b));
}

template <typename T>
UnitVector normalize_impl(std::span<const T> coords) {
  double sq = 0.0;
  for (T c : coords) sq += static_cast<double>(c) * static_cast<double>(c);
  const double n = std::sqrt(sq);
  if (!(n > 1e-300) || !std::isfinite(n)) fail(ErrorKind::DegenerateMean, "cannot normalize a zero or non-finite vector");
  std::vector<double> out(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) out[i] = static_cast<double>(coords[i]) / n;
  return UnitVector(std::move(out));
}

}  // namespace

UnitVector::UnitVector(std::vector<double> coords) : coords_(std::move(coords)) {
  if (coords_.empty()) fail(ErrorKind::Domain, "UnitVector: empty coordinates");
  if (std::abs(norm(coords_) - 1.0) > kNormTolerance) fail(ErrorKind::Domain, "UnitVector: coordinates are not unit norm");
}

UnitVector UnitVector::normalized(std::span<const double> coords) { return normalize_impl(coords); }
UnitVector UnitVector::normalized(std::span<const float> coords) { return normalize_impl(coords); }

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

VmfParams::VmfParams(UnitVector mean, double concentration) : mu(std::move(mean)), kappa(concentration) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) fail(ErrorKind::Domain, "VmfParams: kappa must be finite and > 0");
  if (mu.dim() < 2) fail(ErrorKind::Domain, "VmfParams: dimension must be >= 2");
}

VmfMixture::VmfMixture(std::vector<VmfParams> components) : components_(std::move(components)) {
  if (components_.empty()) fail(ErrorKind::Domain, "VmfMixture: needs at least one component");
  const std::size_t d = components_.front().dim();
  log_norm_.reserve(components_.size());
  for (const auto& c : components_) {
    check_dims(c.dim(), d, "VmfMixture");
    const auto key = std::bit_cast<std::uint64_t>(c.kappa);
    auto it = cache_.find(key);
    if (it == cache_.end())
      it = cache_.emplace(key, specfn::log_vmf_normalizer(static_cast<int>(d), c.kappa)).first;
    log_norm_.push_back(it->second);
  }
}

std::vector<double> VmfMixture::logits(const UnitVector& z) const {
  check_dims(z.dim(), dim(), "VmfMixture::logits");
  std::vector<double> q(components_.size());
  for (std::size_t k = 0; k < components_.size(); ++k)
    q[k] = log_norm_[k] + components_[k].kappa * dot(components_[k].mu.coords(), z.coords());
  return q;
}

double vmf_log_density(const UnitVector& z, const VmfParams& p) {
  check_dims(z.dim(), p.dim(), "vmf_log_density");
  return specfn::log_vmf_normalizer(static_cast<int>(p.dim()), p.kappa) + p.kappa * dot(p.mu.coords(), z.coords());
}

UnitVector sample_uniform_sphere(std::size_t d, Rng& rng) {
  std::vector<double> g(d);
  for (;;) {
    for (auto& x : g) x = rng.normal();
    if (norm(g) > 1e-12) return UnitVector::normalized(std::span<const double>(g));
  }
}

UnitVector sample_vmf(const VmfParams& p, Rng& rng) {
  const std::size_t d = p.dim();
  const double dm1 = static_cast<double>(d) - 1.0;
  const double kappa = p.kappa;

  // Cosine w = mu^T z by rejection from Wood (1994).
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);
  double w = 0.0;
  for (;;) {
    const double beta = rng.beta(0.5 * dm1, 0.5 * dm1);
    w = (1.0 - (1.0 + b) * beta) / (1.0 - (1.0 - b) * beta);
    const double u = rng.uniform_pos();
    if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
  }
  w = std::clamp(w, -1.0, 1.0);

  // Tangent direction: a Gaussian vector with its mu component removed.
  const auto mu = p.mu.coords();
  std::vector<double> v(d);
  double vn = 0.0;
  do {
    for (auto& x : v) x = rng.normal();
    const double proj = dot(v, mu);
    for (std::size_t i = 0; i < d; ++i) v[i] -= proj * mu[i];
    vn = norm(v);
  } while (vn <= 1e-12);

  const double s = std::sqrt(std::max(0.0, 1.0 - w * w));
  std::vector<double> z(d);
  for (std::size_t i = 0; i < d; ++i) z[i] = w * mu[i] + s * v[i] / vn;
  return UnitVector::normalized(std::span<const double>(z));
}

std::vector<UnitVector> sample_vmf(const VmfParams& p, std::size_t n, std::uint64_t seed) {
  if (n == 0) fail(ErrorKind::Domain, "sample_vmf: n must be >= 1");
  Rng rng(seed);
  std::vector<UnitVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_vmf(p, rng));
  return out;
}

double log_sum_exp(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double q : logits) s += std::exp(q - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - m);
    s += p[k];
  }
  for (auto& x : p) x /= s;
  return p;
}

std::vector<double> mixture_posteriors(const UnitVector& z, const VmfMixture& m) {
  const auto q = m.logits(z);
  return softmax(q);
}

SpreadStats spread_stats(std::span<const UnitVector> embeddings) {
  if (embeddings.empty()) fail(ErrorKind::Domain, "spread_stats: no embeddings");
  const std::size_t d = embeddings.front().dim();
  std::vector<double> mean(d, 0.0);
  for (const auto& z : embeddings) {
    check_dims(z.dim(), d, "spread_stats");
    for (std::size_t i = 0; i < d; ++i) mean[i] += z[i];
  }
  const double n = static_cast<double>(embeddings.size());
  for (auto& x : mean) x /= n;
  const double r = norm(mean);
  if (r <= 1e-12) fail(ErrorKind::DegenerateMean, "spread_stats: mean of the embeddings is (numerically) zero");
  auto center = UnitVector::normalized(std::span<const double>(mean));
  double inertia = 0.0;
  for (const auto& z : embeddings) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = z[i] - center[i];
      sq += diff * diff;
    }
    inertia += sq;
  }
  inertia /= n;
  return SpreadStats{std::move(center), r, inertia, embeddings.size()};
}

}  // namespace fvmf
