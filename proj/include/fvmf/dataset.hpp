#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fvmf {

/// Labelled embeddings. The raw float32 coordinates are kept exactly as read
/// or generated (so files round-trip byte for byte); `unit(i)` is the double
/// precision renormalized copy every computation uses.
class EmbeddingDataset {
 public:
  EmbeddingDataset() = default;
  EmbeddingDataset(std::size_t dim, std::vector<std::uint32_t> identities, std::vector<std::uint8_t> groups,
                   std::vector<float> raw);

  std::size_t size() const { return identities_.size(); }
  std::size_t dim() const { return dim_; }
  std::uint32_t identity(std::size_t i) const { return identities_[i]; }
  std::uint8_t group(std::size_t i) const { return groups_[i]; }
  std::span<const std::uint32_t> identities() const { return identities_; }
  std::span<const std::uint8_t> groups() const { return groups_; }
  std::span<const float> raw(std::size_t i) const { return {raw_.data() + i * dim_, dim_}; }
  std::span<const float> raw() const { return raw_; }
  std::span<const double> unit(std::size_t i) const { return {unit_.data() + i * dim_, dim_}; }
  std::span<const double> unit() const { return unit_; }

  /// Sorted distinct identity ids.
  std::vector<std::uint32_t> identity_ids() const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::uint32_t> identities_;
  std::vector<std::uint8_t> groups_;
  std::vector<float> raw_;
  std::vector<double> unit_;
};

/// Binary embedding file: "FVMF", u32 version = 1, u32 d, u64 N, then N
/// records [u32 identity][u8 group][3 pad bytes][d x f32], little-endian.
void write_embeddings(std::ostream& out, const EmbeddingDataset& ds);
void write_embeddings(const std::string& path, const EmbeddingDataset& ds);
EmbeddingDataset read_embeddings(std::istream& in);
EmbeddingDataset read_embeddings(const std::string& path);

/// CSV rows `identity_id,group,x_1,...,x_d` (optional header line starting
/// with "identity"). The group column is read as a per-image vote.
EmbeddingDataset read_embeddings_csv(std::istream& in);

struct SyntheticSpec {
  std::size_t dim = 32;
  std::array<std::size_t, 2> identities_per_group{200, 200};
  std::size_t images_min = 30;
  std::size_t images_max = 30;
  std::array<double, 2> kappa_gen{40.0, 15.0};
  /// Concentration of each group's identity centroids around a group pole;
  /// 0 draws centroids uniformly on the sphere.
  std::array<double, 2> centroid_kappa{0.0, 0.0};
  std::uint64_t population_seed = 1;
  std::uint64_t centroid_seed = 2;
  std::uint64_t sample_seed = 3;
};

/// Identities 0..n0-1 belong to group 0, the next n1 to group 1. Each image is
/// a vMF(centroid, kappa_gen[group]) draw stored as float32.
EmbeddingDataset generate_synthetic(const SyntheticSpec& spec);

struct GenderConsolidation {
  std::map<std::uint32_t, std::uint8_t> group_of_identity;
  std::vector<std::uint32_t> discarded;
};

/// Keeps an identity with its majority label iff the majority fraction is at
/// least `threshold` (inclusive); otherwise the identity is discarded.
GenderConsolidation consolidate_gender(const std::map<std::uint32_t, std::vector<std::uint8_t>>& votes,
                                       double threshold = 0.75);

/// Applies consolidate_gender to a dataset whose group column holds per-image
/// votes: kept identities get their consolidated label, discarded ones drop out.
EmbeddingDataset consolidate_dataset(const EmbeddingDataset& ds, double threshold, GenderConsolidation* report = nullptr);

}  // namespace fvmf
