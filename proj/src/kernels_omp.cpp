#include <algorithm>
#include <cmath>
#include <limits>

#include "fvmf/kernels.hpp"

#include "softmax_row.hpp"
#include "fvmf/parallel.hpp"

namespace fvmf::kernels::omp {

namespace {

// Row-major transpose; lets the reduction loops below walk contiguous memory
// while keeping the reference's summation order.
std::vector<double> transpose(std::span<const double> a, std::size_t rows, std::size_t cols) {
  std::vector<double> t(rows * cols);
  const auto n = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static) num_threads(parallel::max_threads())
  for (std::ptrdiff_t c = 0; c < n; ++c)
    for (std::size_t r = 0; r < rows; ++r) t[static_cast<std::size_t>(c) * rows + r] = a[r * cols + static_cast<std::size_t>(c)];
  return t;
}

}  // namespace

void affine_forward(std::span<const double> x, Shape xs, std::span<const double> w, std::span<const double> b,
                    std::size_t out, std::span<double> y) {
  const auto rows = static_cast<std::ptrdiff_t>(xs.rows);
#pragma omp parallel for schedule(static) num_threads(parallel::max_threads())
  for (std::ptrdiff_t rr = 0; rr < rows; ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    const double* xr = x.data() + r * xs.cols;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w.data() + o * xs.cols;
      double acc = 0.0;
      for (std::size_t i = 0; i < xs.cols; ++i) acc += wo[i] * xr[i];
      y[r * out + o] = acc + b[o];
    }
  }
}

void accumulate_outer(std::span<const double> g, std::span<const double> x, std::size_t n, std::size_t out,
                      std::size_t in, std::span<double> dw) {
  const auto gt = transpose(g, n, out);
  const auto xt = transpose(x, n, in);
  const auto total = static_cast<std::ptrdiff_t>(out * in);
#pragma omp parallel for schedule(static) num_threads(parallel::max_threads())
  for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
    const std::size_t o = static_cast<std::size_t>(idx) / in;
    const std::size_t i = static_cast<std::size_t>(idx) % in;
    const double* go = gt.data() + o * n;
    const double* xi = xt.data() + i * n;
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) acc += go[r] * xi[r];
    dw[static_cast<std::size_t>(idx)] += acc;
  }
}

void backprop_input(std::span<const double> g, std::span<const double> w, std::size_t n, std::size_t out,
                    std::size_t in, std::span<double> dx) {
  const auto wt = transpose(w, out, in);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) num_threads(parallel::max_threads())
  for (std::ptrdiff_t rr = 0; rr < rows; ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    const double* gr = g.data() + r * out;
    for (std::size_t i = 0; i < in; ++i) {
      const double* wi = wt.data() + i * out;
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += gr[o] * wi[o];
      dx[r * in + i] = acc;
    }
  }
}

CrossEntropyOutput vmf_cross_entropy(const CrossEntropyInput& in) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  CrossEntropyOutput out;
  out.sample_loss.assign(in.n, 0.0);
  out.dlogits.assign(in.n * in.classes, 0.0);
  std::size_t violations = 0;
  const auto rows = static_cast<std::ptrdiff_t>(in.n);
#pragma omp parallel num_threads(parallel::max_threads()) reduction(+ : violations)
  {
    std::vector<double> q(in.classes);
#pragma omp for schedule(static)
    for (std::ptrdiff_t rr = 0; rr < rows; ++rr) {
      const auto r = static_cast<std::size_t>(rr);
      const double* zr = in.z.data() + r * in.d;
      for (std::size_t k = 0; k < in.classes; ++k) {
        const double* mk = in.mu.data() + k * in.d;
        double c = 0.0;
        for (std::size_t j = 0; j < in.d; ++j) c += mk[j] * zr[j];
        q[k] = in.offset[k] + in.scale[k] * c;
        const double slack = 4.0 * kEps * (std::abs(in.offset[k]) + in.scale[k]);
        if (q[k] > in.offset[k] + in.scale[k] + slack || q[k] < in.offset[k] - in.scale[k] - slack) ++violations;
      }
      out.sample_loss[r] =
          detail::softmax_cross_entropy_row(q.data(), in.classes, in.labels[r], out.dlogits.data() + r * in.classes);
    }
  }
  out.bound_violations = violations;
  return out;
}

std::vector<double> group_pair_scores(std::span<const double> emb, std::size_t d,
                                      std::span<const std::uint32_t> members,
                                      std::span<const std::uint32_t> identity, bool same_identity) {
  const std::size_t m = members.size();
  // Row a owns the pairs (a, b > a); sizes first so each row writes its slot.
  std::vector<std::size_t> offsets(m + 1, 0);
  for (std::size_t a = 0; a < m; ++a) {
    std::size_t count = 0;
    for (std::size_t b = a + 1; b < m; ++b)
      count += (identity[members[a]] == identity[members[b]]) == same_identity ? 1 : 0;
    offsets[a + 1] = offsets[a] + count;
  }
  std::vector<double> scores(offsets[m]);
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(dynamic, 16) num_threads(parallel::max_threads())
  for (std::ptrdiff_t aa = 0; aa < rows; ++aa) {
    const auto a = static_cast<std::size_t>(aa);
    const std::uint32_t i = members[a];
    const double* ei = emb.data() + static_cast<std::size_t>(i) * d;
    std::size_t slot = offsets[a];
    for (std::size_t b = a + 1; b < m; ++b) {
      const std::uint32_t j = members[b];
      if ((identity[i] == identity[j]) != same_identity) continue;
      const double* ej = emb.data() + static_cast<std::size_t>(j) * d;
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += ei[c] * ej[c];
      scores[slot++] = std::clamp(acc, -1.0, 1.0);
    }
  }
  return scores;
}

std::vector<double> pair_dots(std::span<const double> emb, std::size_t d, std::span<const PairIndex> pairs) {
  std::vector<double> scores(pairs.size());
  const auto total = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static) num_threads(parallel::max_threads())
  for (std::ptrdiff_t pp = 0; pp < total; ++pp) {
    const auto& p = pairs[static_cast<std::size_t>(pp)];
    const double* a = emb.data() + static_cast<std::size_t>(p.first) * d;
    const double* b = emb.data() + static_cast<std::size_t>(p.second) * d;
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += a[c] * b[c];
    scores[static_cast<std::size_t>(pp)] = std::clamp(acc, -1.0, 1.0);
  }
  return scores;
}

}  // namespace fvmf::kernels::omp
