#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "fvmf/dataset.hpp"
#include "fvmf/error.hpp"
#include "fvmf/metrics.hpp"

using namespace fvmf;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.dim = 6;
  s.identities_per_group = {3, 4};
  s.images_min = 2;
  s.images_max = 5;
  return s;
}

std::string bytes_of(const EmbeddingDataset& ds) {
  std::ostringstream out(std::ios::binary);
  write_embeddings(out, ds);
  return out.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Usage;
}

}  // namespace

TEST(Dataset, ConsolidationRule) {
  const auto r = consolidate_gender({{7, {1, 1, 1, 0}}, {8, {1, 0}}, {9, {0, 0, 0}}, {10, {0, 1, 1, 1, 1}}});
  EXPECT_EQ(r.group_of_identity.at(7), 1);
  EXPECT_EQ(r.group_of_identity.at(9), 0);
  EXPECT_EQ(r.group_of_identity.at(10), 1);
  EXPECT_EQ(r.discarded, std::vector<std::uint32_t>{8});
  EXPECT_THROW(consolidate_gender({{1, {}}}), Error);
}

TEST(Dataset, ConsolidateDatasetDropsDiscardedImages) {
  const EmbeddingDataset ds(2, {1, 1, 2, 2, 1, 1}, {1, 1, 0, 1, 0, 1}, {1, 0, 1, 1, 0, 1, 1, 2, 3, 1, 2, 2});
  GenderConsolidation rep;
  const auto out = consolidate_dataset(ds, 0.75, &rep);
  EXPECT_EQ(out.size(), 4u);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out.identity(i), 1u);
    EXPECT_EQ(out.group(i), 1);
  }
  EXPECT_EQ(rep.discarded, std::vector<std::uint32_t>{2});
}

TEST(Dataset, UnitNormAfterLoad) {
  const auto ds = generate_synthetic(small_spec());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double s = 0.0;
    for (double x : ds.unit(i)) s += x * x;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
  }
}

TEST(Dataset, GeneratorLayoutAndDeterminism) {
  const auto spec = small_spec();
  const auto a = generate_synthetic(spec);
  EXPECT_EQ(bytes_of(a), bytes_of(generate_synthetic(spec)));
  auto other = spec;
  other.sample_seed = 99;
  EXPECT_NE(bytes_of(a), bytes_of(generate_synthetic(other)));
  EXPECT_EQ(a.identity_ids().size(), 7u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.group(i), a.identity(i) < 3 ? 0 : 1);
  std::map<std::uint32_t, std::size_t> count;
  for (auto id : a.identities()) ++count[id];
  for (const auto& [id, c] : count) {
    EXPECT_GE(c, 2u);
    EXPECT_LE(c, 5u);
  }
}

TEST(Dataset, BinaryRoundTripIsByteExact) {
  const auto ds = generate_synthetic(small_spec());
  const auto bytes = bytes_of(ds);
  EXPECT_EQ(bytes.size(), 4 + 4 + 4 + 8 + ds.size() * (8 + 4 * ds.dim()));
  EXPECT_EQ(bytes.substr(0, 4), "FVMF");
  std::istringstream in(bytes, std::ios::binary);
  const auto back = read_embeddings(in);
  EXPECT_EQ(bytes_of(back), bytes);
  // Consolidating already consistent labels keeps every record.
  EXPECT_EQ(bytes_of(consolidate_dataset(back, 0.75)), bytes);
}

TEST(Dataset, BinaryRejectsMalformedInput) {
  const auto bytes = bytes_of(generate_synthetic(small_spec()));
  auto read = [](const std::string& b) {
    std::istringstream in(b, std::ios::binary);
    return read_embeddings(in);
  };
  EXPECT_EQ(kind_of([&] { read("FVMX" + bytes.substr(4)); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([&] { read(bytes.substr(0, bytes.size() - 3)); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([&] { read(bytes + "x"); }), ErrorKind::Format);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_EQ(kind_of([&] { read(bad_version); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([] { read_embeddings(std::string("/nonexistent/file.fvmf")); }), ErrorKind::Io);
}

TEST(Dataset, CsvInput) {
  std::istringstream in("identity_id,group,x1,x2\n5,1,3,4\n5,1,0,2\n6,0,1,0\n");
  const auto ds = read_embeddings_csv(in);
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.dim(), 2u);
  EXPECT_DOUBLE_EQ(ds.unit(0)[0], 0.6);
  EXPECT_EQ(ds.identity(2), 6u);
  std::istringstream ragged("1,0,1,2\n2,0,1\n");
  EXPECT_THROW(read_embeddings_csv(ragged), Error);
  std::istringstream junk("1,0,a,2\n");
  EXPECT_THROW(read_embeddings_csv(junk), Error);
}

TEST(Dataset, SymmetricGeneratorGivesFairBaseline) {
  SyntheticSpec spec;
  spec.kappa_gen = {25.0, 25.0};
  spec.images_min = spec.images_max = 50;
  const auto ds = generate_synthetic(spec);
  const auto r = fairness_report(build_pair_scores(ds, nullptr, {2'000'000, 1}), 1e-2);
  EXPECT_GE(r.bfar.value, 1.0);
  EXPECT_LE(r.bfar.value, 1.5);
  EXPECT_GE(r.bfrr.value, 1.0);
  EXPECT_LE(r.bfrr.value, 1.5);
}

TEST(Dataset, SpreadGroupHasHigherImpostorScores) {
  // Group 1 identities cluster around a pole, as in the acceptance population.
  SyntheticSpec spec;
  spec.identities_per_group = {60, 60};
  spec.images_min = spec.images_max = 10;
  spec.centroid_kappa = {0.0, 40.0};
  const auto s = build_pair_scores(generate_synthetic(spec), nullptr);
  auto mean = [](std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  EXPECT_GT(mean(s.impostor(1)), mean(s.impostor(0)));
}

TEST(Dataset, InvalidSpec) {
  auto s = small_spec();
  s.kappa_gen[1] = 0.0;
  EXPECT_THROW(generate_synthetic(s), Error);
  s = small_spec();
  s.images_min = 0;
  EXPECT_THROW(generate_synthetic(s), Error);
  EXPECT_THROW(EmbeddingDataset(2, {1}, {2}, {1.0f, 0.0f}), Error);
}
