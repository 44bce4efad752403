#include <gtest/gtest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <numbers>

#include "fvmf/error.hpp"
#include "fvmf/fairloss.hpp"
#include "fvmf/specfn.hpp"
#include "support/gradcheck.hpp"

using namespace fvmf;
using fvmf::check::central_difference;
using fvmf::check::relative_error;

namespace {

struct Instance {
  std::vector<double> z;
  std::vector<std::uint32_t> labels;
  std::size_t n, d;
  IdentityTable table;
  LossBatch batch() const { return {z, labels, n, d}; }
};

Instance random_instance(Rng& rng, std::size_t n, std::size_t classes, std::size_t d) {
  std::vector<double> z;
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = sample_uniform_sphere(d, rng);
    z.insert(z.end(), u.coords().begin(), u.coords().end());
  }
  std::vector<std::uint8_t> groups(classes);
  for (std::size_t k = 0; k < classes; ++k) groups[k] = static_cast<std::uint8_t>(k % 2);
  std::vector<double> c(classes * d);
  for (double& v : c) v = rng.normal();
  std::vector<std::uint32_t> labels(n);
  for (auto& y : labels) y = static_cast<std::uint32_t>(rng.below(classes));
  return {z, labels, n, d, IdentityTable(d, groups, c)};
}

}  // namespace

TEST(FairLoss, LogitHandCases) {
  const IdentityTable t(3, {0, 1}, {2.0, 0.0, 0.0, 0.0, 0.0, 5.0});
  const FairKappas k(10.0, 4.0);
  const auto q = logits(UnitVector({1.0, 0.0, 0.0}), t, k);
  EXPECT_DOUBLE_EQ(q[0], specfn::log_vmf_normalizer(3, 10.0) + 10.0);
  EXPECT_DOUBLE_EQ(q[1], specfn::log_vmf_normalizer(3, 4.0));
  const auto p = logits(UnitVector({0.0, 1.0, 0.0}), t, k);
  EXPECT_EQ(p[0], specfn::log_vmf_normalizer(3, 10.0));
  EXPECT_EQ(p[1], specfn::log_vmf_normalizer(3, 4.0));
}

TEST(FairLoss, LogitsMatchExtendedPrecision) {
  using Big = boost::multiprecision::cpp_bin_float_50;
  const IdentityTable t(2, {0, 1}, {1.0, 1.0, -2.0, 0.5});
  const FairKappas k(12.0, 3.0);
  const UnitVector z = UnitVector::normalized(std::vector<double>{0.4, -0.9});
  const auto q = logits(z, t, k);
  std::vector<double> unit, norms;
  t.normalized(unit, norms);
  for (std::size_t j = 0; j < 2; ++j) {
    const Big kap = k[t.group(j)];
    const Big c = 1 / (2 * boost::math::constants::pi<Big>() * boost::math::cyl_bessel_i(0, kap));
    const Big cosv = Big(z[0]) * Big(unit[2 * j]) + Big(z[1]) * Big(unit[2 * j + 1]);
    EXPECT_NEAR(q[j], static_cast<double>(log(c) + kap * cosv), 1e-13);
  }
}

TEST(FairLoss, SingleIdentityHasZeroLoss) {
  Rng rng(1);
  auto in = random_instance(rng, 5, 1, 4);
  const auto r = fair_vmf_loss(in.batch(), in.table, FairKappas(10.0, 20.0));
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grad_embeddings) EXPECT_EQ(g, 0.0);
  for (double g : r.grad_centroids) EXPECT_EQ(g, 0.0);
}

TEST(FairLoss, ReducesToSoftmaxLossWithEqualKappas) {
  Rng rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    auto in = random_instance(rng, 1 + rng.below(20), 1 + rng.below(30), 2 + rng.below(30));
    const double kappa = 0.5 + 60.0 * rng.uniform();
    const auto a = fair_vmf_loss(in.batch(), in.table, FairKappas(kappa, kappa));
    const auto b = standard_softmax_loss(in.batch(), in.table, kappa);
    EXPECT_NEAR(a.loss, b.loss, 1e-12);
    EXPECT_LE(relative_error(a.grad_embeddings, b.grad_embeddings), 1e-12);
    EXPECT_LE(relative_error(a.grad_centroids, b.grad_centroids), 1e-12);
  }
}

TEST(FairLoss, SmallInstanceGradients) {
  Rng rng(3);
  auto in = random_instance(rng, 4, 3, 5);
  const FairKappas k(15.0, 20.0);
  const auto r = fair_vmf_loss(in.batch(), in.table, k);
  std::vector<double> c(in.table.centroids().begin(), in.table.centroids().end());
  const auto fd = central_difference(c, [&] {
    std::copy(c.begin(), c.end(), in.table.mutable_centroids().begin());
    return fair_vmf_loss(in.batch(), in.table, k).loss;
  });
  std::copy(c.begin(), c.end(), in.table.mutable_centroids().begin());
  EXPECT_LE(relative_error(r.grad_centroids, fd), 1e-5);

  // Embeddings live on the sphere, so check directional derivatives along
  // tangent directions with the perturbed point renormalized.
  for (std::size_t i = 0; i < in.n; ++i) {
    for (int trial = 0; trial < 3; ++trial) {
      std::vector<double> v(in.d);
      for (double& x : v) x = rng.normal();
      const std::span<const double> zi(in.z.data() + i * in.d, in.d);
      const double along = dot(v, zi);
      for (std::size_t j = 0; j < in.d; ++j) v[j] -= along * zi[j];
      auto loss_at = [&](double h) {
        auto moved = in;
        std::vector<double> p(zi.begin(), zi.end());
        for (std::size_t j = 0; j < in.d; ++j) p[j] += h * v[j];
        const auto u = UnitVector::normalized(std::span<const double>(p));
        std::copy(u.coords().begin(), u.coords().end(), moved.z.begin() + static_cast<std::ptrdiff_t>(i * in.d));
        return fair_vmf_loss(moved.batch(), moved.table, k).loss;
      };
      const double fd_dir = (loss_at(1e-5) - loss_at(-1e-5)) / 2e-5;
      const double an = dot(std::span<const double>(r.grad_embeddings.data() + i * in.d, in.d), v);
      EXPECT_NEAR(an, fd_dir, 1e-5 * std::max(1.0, std::abs(fd_dir)));
    }
  }
}

TEST(FairLoss, PipelineGradientsMatchFiniteDifferences) {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = check::random_pipeline(rng);
    const auto an = check::pipeline_gradient(p);
    const auto fd = check::pipeline_fd_gradient(p);
    EXPECT_LE(relative_error(an, fd), 1e-5) << rep;
  }
}

TEST(FairLoss, LogitBoundsAndShiftInvariance) {
  Rng rng(5);
  auto in = random_instance(rng, 64, 40, 16);
  const FairKappas k(900.0, 1000.0);
  const auto r = fair_vmf_loss(in.batch(), in.table, k);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_EQ(r.bound_violations, 0u);
  for (std::size_t i = 0; i < in.n; ++i) {
    const auto q = logits(UnitVector::normalized(std::span<const double>(in.z.data() + i * in.d, in.d)), in.table, k);
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double kap = k[in.table.group(j)], c = specfn::log_vmf_normalizer(16, kap);
      EXPECT_GE(q[j], c - kap - 1e-9);
      EXPECT_LE(q[j], c + kap + 1e-9);
    }
  }
  // Equal shifts of every logit (equal normalizer change) leave the loss unchanged.
  const auto a = standard_softmax_loss(in.batch(), in.table, 20.0);
  const auto b = fair_vmf_loss(in.batch(), in.table, FairKappas(20.0, 20.0));
  EXPECT_NEAR(a.loss, b.loss, 1e-12);
}

TEST(FairLoss, PermutationInvariance) {
  Rng rng(6);
  auto in = random_instance(rng, 30, 7, 6);
  const FairKappas k(8.0, 25.0);
  const double base = fair_vmf_loss(in.batch(), in.table, k).loss;
  const auto perm = random_permutation(in.n, rng);
  auto shuffled = in;
  for (std::size_t i = 0; i < in.n; ++i) {
    shuffled.labels[i] = in.labels[perm[i]];
    std::copy_n(in.z.begin() + static_cast<std::ptrdiff_t>(perm[i] * in.d), in.d,
                shuffled.z.begin() + static_cast<std::ptrdiff_t>(i * in.d));
  }
  EXPECT_NEAR(fair_vmf_loss(shuffled.batch(), shuffled.table, k).loss, base, 1e-12);
}

TEST(FairLoss, GradientDescentDecreasesLoss) {
  Rng rng(7);
  auto in = random_instance(rng, 32, 8, 8);
  const FairKappas k(10.0, 14.0);
  double loss = fair_vmf_loss(in.batch(), in.table, k).loss;
  for (int step = 0; step < 200; ++step) {
    const auto r = fair_vmf_loss(in.batch(), in.table, k);
    std::vector<double> saved(in.table.centroids().begin(), in.table.centroids().end());
    double lr = 1.0, next = loss;
    for (int halving = 0; halving < 40; ++halving, lr *= 0.5) {
      auto c = in.table.mutable_centroids();
      for (std::size_t j = 0; j < c.size(); ++j) c[j] = saved[j] - lr * r.grad_centroids[j];
      next = fair_vmf_loss(in.batch(), in.table, k).loss;
      if (next < loss) break;
    }
    ASSERT_LT(next, loss) << step;
    loss = next;
  }
}

TEST(FairLoss, SoftmaxLossGrowsWithKappaWhenMisaligned) {
  const IdentityTable t(2, {0, 0}, {1.0, 0.0, 0.0, 1.0});
  const std::vector<double> z{0.0, 1.0};
  const std::vector<std::uint32_t> y{0};
  double prev = 0.0;
  for (double kap = 1.0; kap <= 200.0; kap *= 1.5) {
    const double l = standard_softmax_loss({z, y, 1, 2}, t, kap).loss;
    EXPECT_GT(l, prev);
    prev = l;
  }
  EXPECT_NEAR(standard_softmax_loss({z, y, 1, 2}, t, 500.0).loss, 500.0, 1e-9);
}

TEST(FairLoss, MixtureNllMatchesBatchLoss) {
  Rng rng(8);
  auto in = random_instance(rng, 25, 6, 5);
  const FairKappas k(7.0, 19.0);
  std::vector<double> unit, norms;
  in.table.normalized(unit, norms);
  std::vector<VmfParams> comps;
  for (std::size_t j = 0; j < in.table.size(); ++j)
    comps.emplace_back(UnitVector(std::vector<double>(unit.begin() + j * in.d, unit.begin() + (j + 1) * in.d)),
                       k[in.table.group(j)]);
  std::vector<UnitVector> zs;
  for (std::size_t i = 0; i < in.n; ++i)
    zs.push_back(UnitVector(std::vector<double>(in.z.begin() + i * in.d, in.z.begin() + (i + 1) * in.d)));
  EXPECT_NEAR(mixture_nll(zs, in.labels, VmfMixture(comps)), fair_vmf_loss(in.batch(), in.table, k).loss, 1e-12);
}

TEST(FairLoss, Errors) {
  Rng rng(9);
  auto in = random_instance(rng, 3, 2, 4);
  EXPECT_THROW(FairKappas(0.0, 1.0), Error);
  EXPECT_THROW(IdentityTable(2, {0}, {0.0, 0.0}).normalized(in.z, in.z), Error);
  in.labels[0] = 5;
  EXPECT_THROW(fair_vmf_loss(in.batch(), in.table, FairKappas(1.0, 1.0)), Error);
  in.labels[0] = 0;
  in.z[0] += 0.1;
  EXPECT_THROW(fair_vmf_loss(in.batch(), in.table, FairKappas(1.0, 1.0)), Error);
}
