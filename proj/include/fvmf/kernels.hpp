#pragma once

// Data-parallel inner loops. Each kernel has a plain serial reference and an
// OpenMP version. Parallelism is only ever across independent outputs and
// every output accumulates in the same index order as the reference, so the
// two are bit-identical for any thread count.
//
// Matrices are dense row-major spans; shapes are passed explicitly.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fvmf::kernels {

struct Shape {
  std::size_t rows;
  std::size_t cols;
};

/// Inputs of the batched vMF cross-entropy: logit q_ik = offset_k + scale_k mu_k^T z_i.
struct CrossEntropyInput {
  std::span<const double> z;        // n x d, unit rows
  std::span<const double> mu;       // K x d, unit rows
  std::span<const double> scale;    // K  (concentration of each class)
  std::span<const double> offset;   // K  (log-normalizer of each class)
  std::span<const std::uint32_t> labels;  // n, values in [0, K)
  std::size_t n;
  std::size_t classes;
  std::size_t d;
};

struct CrossEntropyOutput {
  std::vector<double> sample_loss;  // n: logsumexp(q_i) - q_i,y_i
  std::vector<double> dlogits;      // n x K: softmax(q_i) - onehot(y_i)
  std::size_t bound_violations = 0; // logits outside [offset - scale, offset + scale]
};

/// Pair (i, j) of row indices into an embedding matrix.
struct PairIndex {
  std::uint32_t first;
  std::uint32_t second;
};

namespace serial {

/// y = x w^T + b; x is n x in, w is out x in, y is n x out.
void affine_forward(std::span<const double> x, Shape xs, std::span<const double> w, std::span<const double> b,
                    std::size_t out, std::span<double> y);
/// dw += g^T x; g is n x out, x is n x in, dw is out x in.
void accumulate_outer(std::span<const double> g, std::span<const double> x, std::size_t n, std::size_t out,
                      std::size_t in, std::span<double> dw);
/// dx = g w; g is n x out, w is out x in, dx is n x in.
void backprop_input(std::span<const double> g, std::span<const double> w, std::size_t n, std::size_t out,
                    std::size_t in, std::span<double> dx);
CrossEntropyOutput vmf_cross_entropy(const CrossEntropyInput& in);
/// Scores of all pairs a < b among `members` whose identities are equal
/// (same_identity) or different (!same_identity), in row-major pair order.
std::vector<double> group_pair_scores(std::span<const double> emb, std::size_t d,
                                      std::span<const std::uint32_t> members,
                                      std::span<const std::uint32_t> identity, bool same_identity);
std::vector<double> pair_dots(std::span<const double> emb, std::size_t d, std::span<const PairIndex> pairs);

}  // namespace serial

namespace omp {

void affine_forward(std::span<const double> x, Shape xs, std::span<const double> w, std::span<const double> b,
                    std::size_t out, std::span<double> y);
void accumulate_outer(std::span<const double> g, std::span<const double> x, std::size_t n, std::size_t out,
                      std::size_t in, std::span<double> dw);
void backprop_input(std::span<const double> g, std::span<const double> w, std::size_t n, std::size_t out,
                    std::size_t in, std::span<double> dx);
CrossEntropyOutput vmf_cross_entropy(const CrossEntropyInput& in);
std::vector<double> group_pair_scores(std::span<const double> emb, std::size_t d,
                                      std::span<const std::uint32_t> members,
                                      std::span<const std::uint32_t> identity, bool same_identity);
std::vector<double> pair_dots(std::span<const double> emb, std::size_t d, std::span<const PairIndex> pairs);

}  // namespace omp

}  // namespace fvmf::kernels
