#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fvmf/vmf.hpp"

namespace fvmf {

/// Per-group concentrations of the fair loss; both strictly positive.
struct FairKappas {
  double kappa0;
  double kappa1;

  FairKappas(double k0, double k1);
  double operator[](std::uint8_t group) const { return group == 0 ? kappa0 : kappa1; }
};

/// Classifier head: one unnormalized centroid parameter per identity plus the
/// identity's group. Centroids are normalized on the fly in the forward pass.
class IdentityTable {
 public:
  IdentityTable(std::size_t dim, std::vector<std::uint8_t> group_of_identity, std::vector<double> centroids);

  std::size_t size() const { return groups_.size(); }
  std::size_t dim() const { return dim_; }
  std::uint8_t group(std::size_t k) const { return groups_[k]; }
  std::span<const std::uint8_t> groups() const { return groups_; }
  std::span<const double> centroid(std::size_t k) const { return {centroids_.data() + k * dim_, dim_}; }
  std::span<const double> centroids() const { return centroids_; }
  std::span<double> mutable_centroids() { return centroids_; }

  /// Unit-norm copy of every centroid (K x d) and the norms it divided by.
  /// Throws Error(Domain) if some centroid norm is <= 1e-8.
  void normalized(std::vector<double>& unit, std::vector<double>& norms) const;

 private:
  std::size_t dim_;
  std::vector<std::uint8_t> groups_;
  std::vector<double> centroids_;
};

/// n unit-norm embeddings (row-major n x d) with dense identity labels.
struct LossBatch {
  std::span<const double> embeddings;
  std::span<const std::uint32_t> labels;
  std::size_t n;
  std::size_t d;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad_embeddings;  // n x d
  std::vector<double> grad_centroids;   // K x d, w.r.t. the unnormalized parameters
  std::size_t bound_violations = 0;
};

/// log C_d(kappa), memoized per (d, kappa bit pattern). Thread-safe.
double cached_log_normalizer(std::size_t d, double kappa);

/// q_k = log C_d(kappa_{a_k}) + kappa_{a_k} mu_k^T z for all identities.
std::vector<double> logits(const UnitVector& z, const IdentityTable& table, const FairKappas& kappas);

/// Mean cross-entropy over the batch of the vMF mixture with group-indexed
/// concentrations, and its exact gradients.
LossResult fair_vmf_loss(const LossBatch& batch, const IdentityTable& table, const FairKappas& kappas);

/// Normalized softmax loss with a single scale kappa (no normalizer terms).
LossResult standard_softmax_loss(const LossBatch& batch, const IdentityTable& table, double kappa);

/// Negative log-likelihood of labelled unit embeddings under an equiprobable
/// vMF mixture with arbitrary per-component concentrations.
double mixture_nll(std::span<const UnitVector> embeddings, std::span<const std::uint32_t> labels,
                   const VmfMixture& mixture);

}  // namespace fvmf
