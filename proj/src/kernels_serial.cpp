#include <algorithm>
#include <cmath>
#include <limits>

#include "fvmf/kernels.hpp"

#include "softmax_row.hpp"

namespace fvmf::kernels::serial {

void affine_forward(std::span<const double> x, Shape xs, std::span<const double> w, std::span<const double> b,
                    std::size_t out, std::span<double> y) {
  for (std::size_t r = 0; r < xs.rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < xs.cols; ++i) acc += w[o * xs.cols + i] * x[r * xs.cols + i];
      y[r * out + o] = acc + b[o];
    }
  }
}

void accumulate_outer(std::span<const double> g, std::span<const double> x, std::size_t n, std::size_t out,
                      std::size_t in, std::span<double> dw) {
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += g[r * out + o] * x[r * in + i];
      dw[o * in + i] += acc;
    }
  }
}

void backprop_input(std::span<const double> g, std::span<const double> w, std::size_t n, std::size_t out,
                    std::size_t in, std::span<double> dx) {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += g[r * out + o] * w[o * in + i];
      dx[r * in + i] = acc;
    }
  }
}

CrossEntropyOutput vmf_cross_entropy(const CrossEntropyInput& in) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  CrossEntropyOutput out;
  out.sample_loss.assign(in.n, 0.0);
  out.dlogits.assign(in.n * in.classes, 0.0);
  std::vector<double> q(in.classes);
  for (std::size_t r = 0; r < in.n; ++r) {
    for (std::size_t k = 0; k < in.classes; ++k) {
      double c = 0.0;
      for (std::size_t j = 0; j < in.d; ++j) c += in.mu[k * in.d + j] * in.z[r * in.d + j];
      q[k] = in.offset[k] + in.scale[k] * c;
      const double slack = 4.0 * kEps * (std::abs(in.offset[k]) + in.scale[k]);
      if (q[k] > in.offset[k] + in.scale[k] + slack || q[k] < in.offset[k] - in.scale[k] - slack)
        ++out.bound_violations;
    }
    out.sample_loss[r] =
        detail::softmax_cross_entropy_row(q.data(), in.classes, in.labels[r], out.dlogits.data() + r * in.classes);
  }
  return out;
}

std::vector<double> group_pair_scores(std::span<const double> emb, std::size_t d,
                                      std::span<const std::uint32_t> members,
                                      std::span<const std::uint32_t> identity, bool same_identity) {
  std::vector<double> scores;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      const std::uint32_t i = members[a];
      const std::uint32_t j = members[b];
      if ((identity[i] == identity[j]) != same_identity) continue;
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += emb[i * d + c] * emb[j * d + c];
      scores.push_back(std::clamp(acc, -1.0, 1.0));
    }
  }
  return scores;
}

std::vector<double> pair_dots(std::span<const double> emb, std::size_t d, std::span<const PairIndex> pairs) {
  std::vector<double> scores(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += emb[pairs[p].first * d + c] * emb[pairs[p].second * d + c];
    scores[p] = std::clamp(acc, -1.0, 1.0);
  }
  return scores;
}

}  // namespace fvmf::kernels::serial
