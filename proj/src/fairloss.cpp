#include "fvmf/fairloss.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <utility>

#include "fvmf/error.hpp"
#include "fvmf/kernels.hpp"
#include "fvmf/specfn.hpp"

namespace fvmf {

FairKappas::FairKappas(double k0, double k1) : kappa0(k0), kappa1(k1) {
  if (!(k0 > 0.0) || !(k1 > 0.0) || !std::isfinite(k0) || !std::isfinite(k1))
    fail(ErrorKind::Domain, "FairKappas: both concentrations must be finite and > 0");
}

IdentityTable::IdentityTable(std::size_t dim, std::vector<std::uint8_t> group_of_identity, std::vector<double> centroids)
    : dim_(dim), groups_(std::move(group_of_identity)), centroids_(std::move(centroids)) {
  if (dim_ < 2) fail(ErrorKind::Domain, "IdentityTable: dimension must be >= 2");
  if (groups_.empty()) fail(ErrorKind::Domain, "IdentityTable: no identities");
  if (centroids_.size() != groups_.size() * dim_)
    fail(ErrorKind::DimensionMismatch, "IdentityTable: centroid block size does not match K x d");
  for (auto g : groups_)
    if (g > 1) fail(ErrorKind::Domain, "IdentityTable: group labels must be 0 or 1");
}

void IdentityTable::normalized(std::vector<double>& unit, std::vector<double>& norms) const {
  const std::size_t k_count = size();
  unit.resize(k_count * dim_);
  norms.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double n = norm(centroid(k));
    if (!(n > 1e-8)) fail(ErrorKind::Domain, "IdentityTable: centroid " + std::to_string(k) + " has zero norm");
    norms[k] = n;
    for (std::size_t j = 0; j < dim_; ++j) unit[k * dim_ + j] = centroids_[k * dim_ + j] / n;
  }
}

double cached_log_normalizer(std::size_t d, double kappa) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, std::uint64_t>, double> cache;
  const auto key = std::make_pair(d, std::bit_cast<std::uint64_t>(kappa));
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double value = specfn::log_vmf_normalizer(static_cast<int>(d), kappa);
  std::lock_guard lock(mutex);
  cache.emplace(key, value);
  return value;
}

namespace {

void validate_batch(const LossBatch& batch, const IdentityTable& table) {
  if (batch.n == 0) fail(ErrorKind::Domain, "loss: empty batch");
  if (batch.d != table.dim())
    fail(ErrorKind::DimensionMismatch, "loss: embedding dimension " + std::to_string(batch.d) +
                                           " vs centroid dimension " + std::to_string(table.dim()));
  if (batch.embeddings.size() != batch.n * batch.d || batch.labels.size() != batch.n)
    fail(ErrorKind::DimensionMismatch, "loss: batch buffers do not match n x d");
  for (std::size_t i = 0; i < batch.n; ++i) {
    if (batch.labels[i] >= table.size())
      fail(ErrorKind::UnknownIdentity, "loss: label " + std::to_string(batch.labels[i]) + " not in the identity table");
    const double nz = norm(batch.embeddings.subspan(i * batch.d, batch.d));
    if (std::abs(nz - 1.0) > UnitVector::kNormTolerance)
      fail(ErrorKind::Domain, "loss: embedding " + std::to_string(i) + " is not unit norm");
  }
}

LossResult class_scaled_loss(const LossBatch& batch, const IdentityTable& table, std::span<const double> scale,
                             std::span<const double> offset) {
  validate_batch(batch, table);
  const std::size_t n = batch.n;
  const std::size_t d = batch.d;
  const std::size_t k_count = table.size();
  std::vector<double> mu, norms;
  table.normalized(mu, norms);

  const kernels::CrossEntropyInput input{batch.embeddings, mu, scale, offset, batch.labels, n, k_count, d};
  auto ce = kernels::omp::vmf_cross_entropy(input);

  LossResult result;
  result.bound_violations = ce.bound_violations;
  double total = 0.0;
  for (double l : ce.sample_loss) total += l;  // index order keeps runs reproducible
  result.loss = total / static_cast<double>(n);

  // dL/dq scaled by each class's concentration: dq_ik * kappa_k / n.
  std::vector<double> g(n * k_count);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < k_count; ++k) g[i * k_count + k] = ce.dlogits[i * k_count + k] * scale[k] * inv_n;

  result.grad_embeddings.assign(n * d, 0.0);
  kernels::omp::backprop_input(g, mu, n, k_count, d, result.grad_embeddings);

  std::vector<double> dmu(k_count * d, 0.0);
  kernels::omp::accumulate_outer(g, batch.embeddings, n, k_count, d, dmu);

  // Through mu = w / ||w||: dL/dw = (I - mu mu^T) dL/dmu / ||w||.
  result.grad_centroids.assign(k_count * d, 0.0);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto mk = std::span<const double>(mu).subspan(k * d, d);
    const auto gk = std::span<const double>(dmu).subspan(k * d, d);
    const double radial = dot(mk, gk);
    for (std::size_t j = 0; j < d; ++j) result.grad_centroids[k * d + j] = (gk[j] - radial * mk[j]) / norms[k];
  }
  return result;
}

}  // namespace

std::vector<double> logits(const UnitVector& z, const IdentityTable& table, const FairKappas& kappas) {
  if (z.dim() != table.dim())
    fail(ErrorKind::DimensionMismatch, "logits: embedding dimension does not match the identity table");
  std::vector<double> mu, norms;
  table.normalized(mu, norms);
  const double c0 = cached_log_normalizer(table.dim(), kappas.kappa0);
  const double c1 = cached_log_normalizer(table.dim(), kappas.kappa1);
  std::vector<double> q(table.size());
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto g = table.group(k);
    const double c = dot(std::span<const double>(mu).subspan(k * table.dim(), table.dim()), z.coords());
    q[k] = (g == 0 ? c0 : c1) + kappas[g] * c;
  }
  return q;
}

LossResult fair_vmf_loss(const LossBatch& batch, const IdentityTable& table, const FairKappas& kappas) {
  const double c0 = cached_log_normalizer(table.dim(), kappas.kappa0);
  const double c1 = cached_log_normalizer(table.dim(), kappas.kappa1);
  std::vector<double> scale(table.size()), offset(table.size());
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto g = table.group(k);
    scale[k] = kappas[g];
    offset[k] = g == 0 ? c0 : c1;
  }
  return class_scaled_loss(batch, table, scale, offset);
}

LossResult standard_softmax_loss(const LossBatch& batch, const IdentityTable& table, double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) fail(ErrorKind::Domain, "standard_softmax_loss: kappa must be > 0");
  std::vector<double> scale(table.size(), kappa), offset(table.size(), 0.0);
  return class_scaled_loss(batch, table, scale, offset);
}

double mixture_nll(std::span<const UnitVector> embeddings, std::span<const std::uint32_t> labels,
                   const VmfMixture& mixture) {
  if (embeddings.empty()) fail(ErrorKind::Domain, "mixture_nll: no embeddings");
  if (labels.size() != embeddings.size()) fail(ErrorKind::DimensionMismatch, "mixture_nll: label count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (labels[i] >= mixture.size()) fail(ErrorKind::UnknownIdentity, "mixture_nll: label not in the mixture");
    const auto q = mixture.logits(embeddings[i]);
    total += log_sum_exp(q) - q[labels[i]];
  }
  return total / static_cast<double>(embeddings.size());
}

}  // namespace fvmf
