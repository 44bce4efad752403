#pragma once

#include <cmath>
#include <cstddef>

namespace fvmf::kernels::detail {

// Cross-entropy of one row of logits and its gradient softmax(q) - onehot(y).
// The largest logit is factored out as 1 + rest so that a confidently
// correct row keeps full relative precision in both loss and gradient.
inline double softmax_cross_entropy_row(const double* q, std::size_t classes, std::size_t y, double* grad) {
  std::size_t top = 0;
  for (std::size_t k = 1; k < classes; ++k)
    if (q[k] > q[top]) top = k;
  const double m = q[top];
  double rest = 0.0;
  for (std::size_t k = 0; k < classes; ++k)
    if (k != top) rest += std::exp(q[k] - m);
  const double total = 1.0 + rest;
  for (std::size_t k = 0; k < classes; ++k) grad[k] = (k == top ? 1.0 : std::exp(q[k] - m)) / total;
  if (y == top) {
    grad[y] = -rest / total;
    return std::log1p(rest);
  }
  grad[y] -= 1.0;
  return (m - q[y]) + std::log1p(rest);
}

}  // namespace fvmf::kernels::detail
