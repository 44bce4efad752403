#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fvmf/dataset.hpp"

namespace fvmf {

struct ModelState;

/// Cosine similarity of two unit vectors, clamped to [-1, 1].
double cosine_score(std::span<const double> a, std::span<const double> b);

/// Genuine and impostor scores per group, each list sorted ascending.
class PairScores {
 public:
  PairScores(std::array<std::vector<double>, 2> genuine, std::array<std::vector<double>, 2> impostor);

  std::span<const double> genuine(int group) const { return genuine_[group]; }
  std::span<const double> impostor(int group) const { return impostor_[group]; }
  std::vector<double> pooled_genuine() const;
  std::vector<double> pooled_impostor() const;

 private:
  std::array<std::vector<double>, 2> genuine_;
  std::array<std::vector<double>, 2> impostor_;
};

/// Exhaustive same-group pairs unless `cap` is set, in which case each
/// category larger than the cap is replaced by a seeded uniform subset of
/// exactly `cap` pairs.
struct PairPolicy {
  std::optional<std::size_t> cap;
  std::uint64_t seed = 0;
};

/// Genuine = same identity, impostor = different identity within a group.
/// Throws Error(EmptyCategory) naming the empty (group, category).
PairScores build_pair_scores(std::span<const double> embeddings, std::size_t d, const EmbeddingDataset& labels,
                             const PairPolicy& policy = {});
/// Scores the dataset after passing it through `model` (nullptr: identity module).
PairScores build_pair_scores(const EmbeddingDataset& dataset, const ModelState* model, const PairPolicy& policy = {});

/// Fraction of impostor scores >= t and of genuine scores < t.
double far(std::span<const double> impostor, double t);
double frr(std::span<const double> genuine, double t);

/// Threshold strictly above every score: the "reject everything" candidate.
double sentinel_threshold();

struct ThresholdChoice {
  double threshold;
  double pooled_far;
  std::array<double, 2> group_far;
};

/// Smallest candidate threshold (observed impostor scores plus the sentinel)
/// whose pooled FAR is <= alpha.
ThresholdChoice threshold_at_global_far(const PairScores& scores, double alpha);
/// Smallest candidate threshold whose worst per-group FAR is <= alpha.
ThresholdChoice threshold_at_max_group_far(const PairScores& scores, double alpha);

/// Pooled FRR at the global-FAR threshold.
double frr_at_far(const PairScores& scores, double alpha);
/// |FRR_1(t) - FRR_0(t)| at the global-FAR threshold.
double eq2_gap(const PairScores& scores, double alpha);

enum class RatioKind { Finite, Infinite, Degenerate };

struct Ratio {
  double value;
  RatioKind kind;
};

/// num / den with x/0 = +inf (Infinite) and 0/0 = 1 (Degenerate).
Ratio safe_ratio(double num, double den);

struct FairnessReport {
  double alpha;
  double threshold;
  double frr_at_far;
  Ratio bfrr;
  Ratio bfar;
  std::array<double, 2> far;
  std::array<double, 2> frr;
  Ratio far_ratio;  // FAR_1 / FAR_0
  Ratio frr_ratio;  // FRR_1 / FRR_0

  /// '|' separated list of non-finite ratios, e.g. "bfar_inf|far_ratio_inf".
  std::string flags() const;
};

FairnessReport fairness_report(const PairScores& scores, double alpha);

struct CurvePoint {
  double t;
  int group;
  double far;
  double frr;
};

/// Per-group FAR/FRR at every threshold of `grid`, or at every distinct
/// observed score when no grid is given. Throws on an explicitly empty grid.
std::vector<CurvePoint> metric_curves(const PairScores& scores, std::optional<std::span<const double>> grid = std::nullopt);

/// CSV helpers. Doubles use %.17g; infinity is written as "inf".
std::string format_double(double x);
std::string report_csv_header();
std::string report_csv_row(const FairnessReport& r);
std::string curves_csv(std::span<const CurvePoint> points);

}  // namespace fvmf
