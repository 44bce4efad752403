// Serial reference vs OpenMP kernels. Thread count follows FVMF_THREADS /
// OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "fvmf/kernels.hpp"
#include "fvmf/rng.hpp"
#include "fvmf/vmf.hpp"

namespace {

using namespace fvmf;
namespace k = fvmf::kernels;

std::vector<double> unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v;
  v.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = sample_uniform_sphere(d, rng);
    v.insert(v.end(), u.coords().begin(), u.coords().end());
  }
  return v;
}

struct AffineData {
  std::size_t n, in, out;
  std::vector<double> x, w, b, y;
  AffineData(std::size_t n_, std::size_t in_, std::size_t out_)
      : n(n_), in(in_), out(out_), x(unit_rows(n_, in_, 1)), w(unit_rows(out_, in_, 2)), b(out_, 0.1), y(n_ * out_) {}
};

template <auto Kernel>
void BM_Affine(benchmark::State& state) {
  AffineData a(static_cast<std::size_t>(state.range(0)), 512, 1024);
  for (auto _ : state) {
    Kernel(a.x, {a.n, a.in}, a.w, a.b, a.out, a.y);
    benchmark::DoNotOptimize(a.y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.n));
}

struct CrossEntropyData {
  std::size_t n, classes, d;
  std::vector<double> z, mu, scale, offset;
  std::vector<std::uint32_t> labels;
  CrossEntropyData(std::size_t n_, std::size_t classes_, std::size_t d_)
      : n(n_), classes(classes_), d(d_), z(unit_rows(n_, d_, 3)), mu(unit_rows(classes_, d_, 4)),
        scale(classes_, 25.0), offset(classes_, -40.0), labels(n_) {
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i % classes);
  }
  k::CrossEntropyInput input() const { return {z, mu, scale, offset, labels, n, classes, d}; }
};

template <auto Kernel>
void BM_CrossEntropy(benchmark::State& state) {
  const CrossEntropyData c(256, static_cast<std::size_t>(state.range(0)), 64);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(c.input()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c.n * c.classes));
}

template <auto Kernel>
void BM_PairScores(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0)), d = 32;
  const auto emb = unit_rows(n, d, 5);
  std::vector<std::uint32_t> members(n), identity(n);
  for (std::size_t i = 0; i < n; ++i) {
    members[i] = static_cast<std::uint32_t>(i);
    identity[i] = static_cast<std::uint32_t>(i / 30);
  }
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(emb, d, members, identity, false));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * (n - 1) / 2));
}

BENCHMARK(BM_Affine<k::serial::affine_forward>)->Name("affine/serial")->Arg(64)->Arg(1024);
BENCHMARK(BM_Affine<k::omp::affine_forward>)->Name("affine/omp")->Arg(64)->Arg(1024);
BENCHMARK(BM_CrossEntropy<k::serial::vmf_cross_entropy>)->Name("cross_entropy/serial")->Arg(400)->Arg(4000);
BENCHMARK(BM_CrossEntropy<k::omp::vmf_cross_entropy>)->Name("cross_entropy/omp")->Arg(400)->Arg(4000);
BENCHMARK(BM_PairScores<k::serial::group_pair_scores>)->Name("pair_scores/serial")->Arg(2000)->Arg(6000);
BENCHMARK(BM_PairScores<k::omp::group_pair_scores>)->Name("pair_scores/omp")->Arg(2000)->Arg(6000);

}  // namespace

BENCHMARK_MAIN();
