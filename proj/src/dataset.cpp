#include "fvmf/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "binary_io.hpp"
#include "fvmf/error.hpp"
#include "fvmf/rng.hpp"
#include "fvmf/vmf.hpp"

namespace fvmf {

EmbeddingDataset::EmbeddingDataset(std::size_t dim, std::vector<std::uint32_t> identities,
                                   std::vector<std::uint8_t> groups, std::vector<float> raw)
    : dim_(dim), identities_(std::move(identities)), groups_(std::move(groups)), raw_(std::move(raw)) {
  if (dim_ < 2) fail(ErrorKind::Domain, "dataset: dimension must be >= 2");
  if (groups_.size() != identities_.size() || raw_.size() != identities_.size() * dim_)
    fail(ErrorKind::DimensionMismatch, "dataset: record buffers disagree in length");
  unit_.resize(raw_.size());
  for (std::size_t i = 0; i < identities_.size(); ++i) {
    if (groups_[i] > 1) fail(ErrorKind::Domain, "dataset: group labels must be 0 or 1");
    const auto u = UnitVector::normalized(this->raw(i));
    std::copy(u.coords().begin(), u.coords().end(), unit_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
  }
}

std::vector<std::uint32_t> EmbeddingDataset::identity_ids() const {
  std::vector<std::uint32_t> ids(identities_.begin(), identities_.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// --- binary format ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'F', 'V', 'M', 'F'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kWhat = "embedding file";

using io::put_le;

template <typename T>
T get_le(std::istream& in) {
  return io::get_le<T>(in, kWhat);
}

}  // namespace

void write_embeddings(std::ostream& out, const EmbeddingDataset& ds) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.dim()));
  put_le<std::uint64_t>(out, ds.size());
  const char pad[3] = {0, 0, 0};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    put_le<std::uint32_t>(out, ds.identity(i));
    put_le<std::uint8_t>(out, ds.group(i));
    out.write(pad, 3);
    for (float x : ds.raw(i)) put_le<float>(out, x);
  }
  if (!out) fail(ErrorKind::Io, "embedding file: write failed");
}

void write_embeddings(const std::string& path, const EmbeddingDataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path + " for writing");
  write_embeddings(out, ds);
}

EmbeddingDataset read_embeddings(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::Format, "embedding file: bad magic");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion) fail(ErrorKind::Format, "embedding file: unsupported version " + std::to_string(version));
  const auto d = get_le<std::uint32_t>(in);
  const auto n = get_le<std::uint64_t>(in);
  if (d < 2) fail(ErrorKind::Format, "embedding file: dimension must be >= 2");
  std::vector<std::uint32_t> ids;
  std::vector<std::uint8_t> groups;
  std::vector<float> raw;
  ids.reserve(n);
  groups.reserve(n);
  raw.reserve(n * d);
  for (std::uint64_t i = 0; i < n; ++i) {
    ids.push_back(get_le<std::uint32_t>(in));
    groups.push_back(get_le<std::uint8_t>(in));
    char pad[3];
    if (!in.read(pad, 3)) fail(ErrorKind::Format, "embedding file: truncated");
    for (std::uint32_t j = 0; j < d; ++j) raw.push_back(get_le<float>(in));
  }
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorKind::Format, "embedding file: trailing bytes");
  return EmbeddingDataset(d, std::move(ids), std::move(groups), std::move(raw));
}

EmbeddingDataset read_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  return read_embeddings(in);
}

EmbeddingDataset read_embeddings_csv(std::istream& in) {
  std::vector<std::uint32_t> ids;
  std::vector<std::uint8_t> groups;
  std::vector<float> raw;
  std::size_t d = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("identity", 0) == 0)) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 4) fail(ErrorKind::Format, "csv line " + std::to_string(lineno) + ": too few columns");
    if (d == 0) d = cells.size() - 2;
    if (cells.size() - 2 != d) fail(ErrorKind::Format, "csv line " + std::to_string(lineno) + ": ragged row");
    try {
      ids.push_back(static_cast<std::uint32_t>(std::stoul(cells[0])));
      const auto g = std::stoul(cells[1]);
      if (g > 1) fail(ErrorKind::Format, "csv line " + std::to_string(lineno) + ": group must be 0 or 1");
      groups.push_back(static_cast<std::uint8_t>(g));
      for (std::size_t j = 2; j < cells.size(); ++j) raw.push_back(std::stof(cells[j]));
    } catch (const std::logic_error&) {
      fail(ErrorKind::Format, "csv line " + std::to_string(lineno) + ": not a number");
    }
  }
  if (ids.empty()) fail(ErrorKind::Format, "csv: no records");
  return EmbeddingDataset(d, std::move(ids), std::move(groups), std::move(raw));
}

// --- synthetic generation --------------------------------------------------

EmbeddingDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.dim < 2) fail(ErrorKind::Domain, "synthetic: dimension must be >= 2");
  if (spec.images_min < 1 || spec.images_max < spec.images_min)
    fail(ErrorKind::Domain, "synthetic: need 1 <= images_min <= images_max");
  for (int a = 0; a < 2; ++a) {
    if (spec.identities_per_group[a] < 1) fail(ErrorKind::Domain, "synthetic: identity counts must be positive");
    if (!(spec.kappa_gen[a] > 0.0)) fail(ErrorKind::Domain, "synthetic: generating concentrations must be > 0");
    if (spec.centroid_kappa[a] < 0.0) fail(ErrorKind::Domain, "synthetic: centroid concentration must be >= 0");
  }
  const std::size_t d = spec.dim;

  Rng population(spec.population_seed);
  const std::array<UnitVector, 2> poles{sample_uniform_sphere(d, population), sample_uniform_sphere(d, population)};

  Rng centroid_rng(spec.centroid_seed);
  std::vector<UnitVector> centroids;
  std::vector<std::uint8_t> centroid_group;
  std::vector<std::size_t> image_count;
  for (std::uint8_t a = 0; a < 2; ++a) {
    for (std::size_t j = 0; j < spec.identities_per_group[a]; ++j) {
      if (spec.centroid_kappa[a] > 0.0)
        centroids.push_back(sample_vmf(VmfParams(poles[a], spec.centroid_kappa[a]), centroid_rng));
      else
        centroids.push_back(sample_uniform_sphere(d, centroid_rng));
      centroid_group.push_back(a);
      const std::size_t spread = spec.images_max - spec.images_min;
      image_count.push_back(spec.images_min + (spread == 0 ? 0 : centroid_rng.below(spread + 1)));
    }
  }

  Rng sample_rng(spec.sample_seed);
  std::vector<std::uint32_t> ids;
  std::vector<std::uint8_t> groups;
  std::vector<float> raw;
  for (std::size_t k = 0; k < centroids.size(); ++k) {
    const VmfParams p(centroids[k], spec.kappa_gen[centroid_group[k]]);
    for (std::size_t m = 0; m < image_count[k]; ++m) {
      const auto z = sample_vmf(p, sample_rng);
      ids.push_back(static_cast<std::uint32_t>(k));
      groups.push_back(centroid_group[k]);
      for (double x : z.coords()) raw.push_back(static_cast<float>(x));
    }
  }
  return EmbeddingDataset(d, std::move(ids), std::move(groups), std::move(raw));
}

// --- gender consolidation --------------------------------------------------

GenderConsolidation consolidate_gender(const std::map<std::uint32_t, std::vector<std::uint8_t>>& votes,
                                       double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) fail(ErrorKind::Domain, "consolidate_gender: threshold must be in (0, 1]");
  GenderConsolidation result;
  for (const auto& [id, v] : votes) {
    if (v.empty()) fail(ErrorKind::Domain, "consolidate_gender: identity " + std::to_string(id) + " has no votes");
    const auto ones = static_cast<std::size_t>(std::count(v.begin(), v.end(), std::uint8_t{1}));
    const std::size_t zeros = v.size() - ones;
    const std::uint8_t label = ones > zeros ? 1 : 0;
    const double fraction = static_cast<double>(std::max(ones, zeros)) / static_cast<double>(v.size());
    // An exact tie can only pass a threshold <= 0.5; it resolves to group 0.
    if (fraction >= threshold)
      result.group_of_identity.emplace(id, label);
    else
      result.discarded.push_back(id);
  }
  return result;
}

EmbeddingDataset consolidate_dataset(const EmbeddingDataset& ds, double threshold, GenderConsolidation* report) {
  std::map<std::uint32_t, std::vector<std::uint8_t>> votes;
  for (std::size_t i = 0; i < ds.size(); ++i) votes[ds.identity(i)].push_back(ds.group(i));
  auto consolidation = consolidate_gender(votes, threshold);
  std::vector<std::uint32_t> ids;
  std::vector<std::uint8_t> groups;
  std::vector<float> raw;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto it = consolidation.group_of_identity.find(ds.identity(i));
    if (it == consolidation.group_of_identity.end()) continue;
    ids.push_back(ds.identity(i));
    groups.push_back(it->second);
    raw.insert(raw.end(), ds.raw(i).begin(), ds.raw(i).end());
  }
  if (ids.empty()) fail(ErrorKind::EmptyCategory, "consolidate: every identity was discarded");
  if (report) *report = std::move(consolidation);
  return EmbeddingDataset(ds.dim(), std::move(ids), std::move(groups), std::move(raw));
}

}  // namespace fvmf
