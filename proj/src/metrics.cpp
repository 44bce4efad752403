#include "fvmf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "fvmf/error.hpp"
#include "fvmf/kernels.hpp"
#include "fvmf/rng.hpp"
#include "fvmf/trainer.hpp"

namespace fvmf {

double cosine_score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::DimensionMismatch, "cosine_score: dimension mismatch");
  return std::clamp(dot(a, b), -1.0, 1.0);
}

// --- score sets ------------------------------------------------------------

PairScores::PairScores(std::array<std::vector<double>, 2> genuine, std::array<std::vector<double>, 2> impostor)
    : genuine_(std::move(genuine)), impostor_(std::move(impostor)) {
  const char* names[2] = {"genuine", "impostor"};
  for (int a = 0; a < 2; ++a) {
    std::vector<double>* lists[2] = {&genuine_[a], &impostor_[a]};
    for (int c = 0; c < 2; ++c) {
      auto& v = *lists[c];
      if (v.empty())
        fail(ErrorKind::EmptyCategory, "no " + std::string(names[c]) + " scores for group " + std::to_string(a));
      for (double s : v)
        if (!(s >= -1.0 && s <= 1.0)) fail(ErrorKind::Domain, "scores must lie in [-1, 1]");
      std::sort(v.begin(), v.end());
    }
  }
}

std::vector<double> PairScores::pooled_genuine() const {
  std::vector<double> out;
  std::merge(genuine_[0].begin(), genuine_[0].end(), genuine_[1].begin(), genuine_[1].end(), std::back_inserter(out));
  return out;
}

std::vector<double> PairScores::pooled_impostor() const {
  std::vector<double> out;
  std::merge(impostor_[0].begin(), impostor_[0].end(), impostor_[1].begin(), impostor_[1].end(),
             std::back_inserter(out));
  return out;
}

namespace {

// Pairs (a < b) over `members` in row-major order, restricted to the chosen
// ranks (sorted) of the category.
std::vector<kernels::PairIndex> select_pairs(std::span<const std::uint32_t> members,
                                             std::span<const std::uint32_t> identity, bool same_identity,
                                             std::span<const std::uint64_t> ranks) {
  std::vector<kernels::PairIndex> pairs;
  pairs.reserve(ranks.size());
  std::uint64_t rank = 0;
  std::size_t next = 0;
  for (std::size_t a = 0; a < members.size() && next < ranks.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size() && next < ranks.size(); ++b) {
      if ((identity[members[a]] == identity[members[b]]) != same_identity) continue;
      if (rank == ranks[next]) {
        pairs.push_back({members[a], members[b]});
        ++next;
      }
      ++rank;
    }
  }
  return pairs;
}

// Floyd's algorithm: `count` distinct values of [0, total), sorted.
std::vector<std::uint64_t> choose_ranks(std::uint64_t total, std::uint64_t count, Rng& rng) {
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = total - count; j < total; ++j) {
    const std::uint64_t t = rng.below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

std::uint64_t category_size(std::span<const std::uint32_t> members, std::span<const std::uint32_t> identity,
                            bool same_identity) {
  std::vector<std::uint32_t> ids;
  ids.reserve(members.size());
  for (auto m : members) ids.push_back(identity[m]);
  std::sort(ids.begin(), ids.end());
  std::uint64_t same = 0;
  for (std::size_t i = 0; i < ids.size();) {
    std::size_t j = i;
    while (j < ids.size() && ids[j] == ids[i]) ++j;
    const std::uint64_t c = j - i;
    same += c * (c - 1) / 2;
    i = j;
  }
  const std::uint64_t m = members.size();
  const std::uint64_t all = m * (m - (m > 0 ? 1 : 0)) / 2;
  return same_identity ? same : all - same;
}

}  // namespace

PairScores build_pair_scores(std::span<const double> embeddings, std::size_t d, const EmbeddingDataset& labels,
                             const PairPolicy& policy) {
  if (embeddings.size() != labels.size() * d)
    fail(ErrorKind::DimensionMismatch, "build_pair_scores: embeddings do not match the dataset size");
  std::array<std::vector<std::uint32_t>, 2> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels.group(i)].push_back(static_cast<std::uint32_t>(i));
  const auto identity = labels.identities();

  std::array<std::vector<double>, 2> genuine, impostor;
  for (int a = 0; a < 2; ++a) {
    for (int same = 1; same >= 0; --same) {
      auto& target = same ? genuine[a] : impostor[a];
      const std::uint64_t total = category_size(members[a], identity, same != 0);
      if (total == 0)
        fail(ErrorKind::EmptyCategory, std::string("no ") + (same ? "genuine" : "impostor") +
                                           " pairs for group " + std::to_string(a));
      if (policy.cap && total > *policy.cap) {
        Rng rng(policy.seed * 4 + static_cast<std::uint64_t>(2 * a + same));
        const auto ranks = choose_ranks(total, *policy.cap, rng);
        const auto pairs = select_pairs(members[a], identity, same != 0, ranks);
        target = kernels::omp::pair_dots(embeddings, d, pairs);
      } else {
        target = kernels::omp::group_pair_scores(embeddings, d, members[a], identity, same != 0);
      }
    }
  }
  return PairScores(std::move(genuine), std::move(impostor));
}

PairScores build_pair_scores(const EmbeddingDataset& dataset, const ModelState* model, const PairPolicy& policy) {
  const auto emb = embed_dataset(dataset, model);
  const std::size_t d = model ? model->mlp.config.d_out : dataset.dim();
  return build_pair_scores(emb, d, dataset, policy);
}

// --- rates and thresholds --------------------------------------------------

double far(std::span<const double> impostor, double t) {
  if (impostor.empty()) fail(ErrorKind::EmptyCategory, "far: no impostor scores");
  const auto accepted = std::count_if(impostor.begin(), impostor.end(), [t](double s) { return s >= t; });
  return static_cast<double>(accepted) / static_cast<double>(impostor.size());
}

double frr(std::span<const double> genuine, double t) {
  if (genuine.empty()) fail(ErrorKind::EmptyCategory, "frr: no genuine scores");
  const auto rejected = std::count_if(genuine.begin(), genuine.end(), [t](double s) { return s < t; });
  return static_cast<double>(rejected) / static_cast<double>(genuine.size());
}

double sentinel_threshold() { return std::nextafter(1.0, 2.0); }

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::Domain, "FAR level alpha must lie in [0, 1]");
}

double sorted_far(std::span<const double> sorted, double t) {
  const auto below = std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
  return static_cast<double>(sorted.size() - static_cast<std::size_t>(below)) / static_cast<double>(sorted.size());
}

double sorted_frr(std::span<const double> sorted, double t) {
  const auto below = std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
  return static_cast<double>(below) / static_cast<double>(sorted.size());
}

// Largest accepted count c with c / n <= alpha, using the same division the
// rate functions use so boundary cases agree exactly.
std::size_t max_accepted(std::size_t n, double alpha) {
  const auto ok = [&](std::size_t c) { return static_cast<double>(c) / static_cast<double>(n) <= alpha; };
  auto c = static_cast<std::size_t>(std::min(static_cast<double>(n), std::floor(alpha * static_cast<double>(n))));
  while (c < n && ok(c + 1)) ++c;
  while (c > 0 && !ok(c)) --c;
  return c;
}

// Smallest candidate threshold t with FAR(t) <= alpha on every list. A list
// of n sorted scores with allowance c is satisfied iff t > s[n - c - 1].
double smallest_feasible(std::span<const std::span<const double>> lists, std::span<const std::span<const double>> candidates,
                         double alpha) {
  bool bounded = false;
  double floor_score = -std::numeric_limits<double>::infinity();
  for (auto list : lists) {
    const std::size_t c = max_accepted(list.size(), alpha);
    if (c >= list.size()) continue;
    bounded = true;
    floor_score = std::max(floor_score, list[list.size() - c - 1]);
  }
  double best = sentinel_threshold();
  for (auto cand : candidates) {
    auto it = bounded ? std::upper_bound(cand.begin(), cand.end(), floor_score) : cand.begin();
    if (it != cand.end()) best = std::min(best, *it);
  }
  return best;
}

}  // namespace

ThresholdChoice threshold_at_global_far(const PairScores& scores, double alpha) {
  check_alpha(alpha);
  const auto pooled = scores.pooled_impostor();
  const std::span<const double> lists[] = {pooled};
  const double t = smallest_feasible(lists, lists, alpha);
  return {t, sorted_far(pooled, t), {sorted_far(scores.impostor(0), t), sorted_far(scores.impostor(1), t)}};
}

ThresholdChoice threshold_at_max_group_far(const PairScores& scores, double alpha) {
  check_alpha(alpha);
  const std::span<const double> lists[] = {scores.impostor(0), scores.impostor(1)};
  const double t = smallest_feasible(lists, lists, alpha);
  const auto pooled = scores.pooled_impostor();
  return {t, sorted_far(pooled, t), {sorted_far(scores.impostor(0), t), sorted_far(scores.impostor(1), t)}};
}

double frr_at_far(const PairScores& scores, double alpha) {
  const auto choice = threshold_at_global_far(scores, alpha);
  return sorted_frr(scores.pooled_genuine(), choice.threshold);
}

double eq2_gap(const PairScores& scores, double alpha) {
  const double t = threshold_at_global_far(scores, alpha).threshold;
  return std::abs(sorted_frr(scores.genuine(1), t) - sorted_frr(scores.genuine(0), t));
}

Ratio safe_ratio(double num, double den) {
  if (den > 0.0) return {num / den, RatioKind::Finite};
  if (num > 0.0) return {std::numeric_limits<double>::infinity(), RatioKind::Infinite};
  return {1.0, RatioKind::Degenerate};
}

std::string FairnessReport::flags() const {
  std::string out;
  const std::pair<const char*, const Ratio*> named[] = {
      {"bfrr", &bfrr}, {"bfar", &bfar}, {"far_ratio", &far_ratio}, {"frr_ratio", &frr_ratio}};
  for (const auto& [name, ratio] : named) {
    if (ratio->kind == RatioKind::Finite) continue;
    if (!out.empty()) out += '|';
    out += name;
    out += ratio->kind == RatioKind::Infinite ? "_inf" : "_degenerate";
  }
  return out;
}

FairnessReport fairness_report(const PairScores& scores, double alpha) {
  const auto choice = threshold_at_max_group_far(scores, alpha);
  const double t = choice.threshold;
  FairnessReport r{};
  r.alpha = alpha;
  r.threshold = t;
  r.frr_at_far = frr_at_far(scores, alpha);
  r.far = choice.group_far;
  r.frr = {sorted_frr(scores.genuine(0), t), sorted_frr(scores.genuine(1), t)};
  r.bfrr = safe_ratio(std::max(r.frr[0], r.frr[1]), std::min(r.frr[0], r.frr[1]));
  r.bfar = safe_ratio(std::max(r.far[0], r.far[1]), std::min(r.far[0], r.far[1]));
  r.far_ratio = safe_ratio(r.far[1], r.far[0]);
  r.frr_ratio = safe_ratio(r.frr[1], r.frr[0]);
  return r;
}

std::vector<CurvePoint> metric_curves(const PairScores& scores, std::optional<std::span<const double>> grid) {
  std::vector<double> thresholds;
  if (grid) {
    if (grid->empty()) fail(ErrorKind::Domain, "metric_curves: empty threshold grid");
    thresholds.assign(grid->begin(), grid->end());
    std::sort(thresholds.begin(), thresholds.end());
  } else {
    for (int a = 0; a < 2; ++a) {
      thresholds.insert(thresholds.end(), scores.genuine(a).begin(), scores.genuine(a).end());
      thresholds.insert(thresholds.end(), scores.impostor(a).begin(), scores.impostor(a).end());
    }
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  }
  std::vector<CurvePoint> points;
  points.reserve(thresholds.size() * 2);
  for (double t : thresholds)
    for (int a = 0; a < 2; ++a)
      points.push_back({t, a, sorted_far(scores.impostor(a), t), sorted_frr(scores.genuine(a), t)});
  return points;
}

// --- CSV -------------------------------------------------------------------

std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string report_csv_header() { return "alpha,threshold,frr_at_far,bfrr,bfar,far0,far1,frr0,frr1,far_ratio,frr_ratio,flags"; }

std::string report_csv_row(const FairnessReport& r) {
  std::string out;
  for (double x : {r.alpha, r.threshold, r.frr_at_far, r.bfrr.value, r.bfar.value, r.far[0], r.far[1], r.frr[0],
                   r.frr[1], r.far_ratio.value, r.frr_ratio.value}) {
    out += format_double(x);
    out += ',';
  }
  out += r.flags();
  return out;
}

std::string curves_csv(std::span<const CurvePoint> points) {
  std::string out = "t,group,far,frr\n";
  for (const auto& p : points)
    out += format_double(p.t) + ',' + std::to_string(p.group) + ',' + format_double(p.far) + ',' + format_double(p.frr) + '\n';
  return out;
}

}  // namespace fvmf
