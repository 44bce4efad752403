#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "fvmf/error.hpp"
#include "fvmf/trainer.hpp"

namespace fvmf {

namespace {

constexpr char kMagic[9] = {'F', 'V', 'M', 'F', '-', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kWhat = "checkpoint";

template <typename T>
T get(std::istream& in) {
  return io::get_le<T>(in, kWhat);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelState& state) {
  using io::put_le;
  const auto& cfg = state.mlp.config;
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.d_in));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.hidden));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.d_out));
  put_le<std::uint64_t>(out, state.table.size());
  for (auto id : state.identity_ids) put_le<std::uint32_t>(out, id);
  for (auto g : state.table.groups()) put_le<std::uint8_t>(out, g);
  for (double w : state.mlp.params) put_le<double>(out, w);  // W1, b1, W2, b2
  for (double w : state.table.centroids()) put_le<double>(out, w);
  const auto& tc = state.config;
  put_le<std::uint64_t>(out, tc.seed);
  put_le<std::uint64_t>(out, tc.epochs);
  put_le<std::uint64_t>(out, tc.batch_size);
  put_le<double>(out, tc.learning_rate);
  put_le<double>(out, tc.beta1);
  put_le<double>(out, tc.beta2);
  put_le<double>(out, tc.epsilon);
  put_le<double>(out, tc.kappas.kappa0);
  put_le<double>(out, tc.kappas.kappa1);
  if (!out) fail(ErrorKind::Io, "checkpoint: write failed");
}

void write_checkpoint(const std::string& path, const ModelState& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path + " for writing");
  write_checkpoint(out, state);
}

ModelState read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    fail(ErrorKind::Format, "checkpoint: bad magic");
  if (const auto v = get<std::uint32_t>(in); v != kVersion)
    fail(ErrorKind::Format, "checkpoint: unsupported version " + std::to_string(v));
  MlpConfig cfg;
  cfg.d_in = get<std::uint32_t>(in);
  cfg.hidden = get<std::uint32_t>(in);
  cfg.d_out = get<std::uint32_t>(in);
  const auto k_count = get<std::uint64_t>(in);
  if (k_count == 0 || k_count > (1u << 28)) fail(ErrorKind::Format, "checkpoint: implausible identity count");
  std::vector<std::uint32_t> ids(k_count);
  for (auto& id : ids) id = get<std::uint32_t>(in);
  std::vector<std::uint8_t> groups(k_count);
  for (auto& g : groups) g = get<std::uint8_t>(in);
  MlpWeights mlp(cfg);
  for (auto& w : mlp.params) w = get<double>(in);
  std::vector<double> centroids(k_count * cfg.d_out);
  for (auto& w : centroids) w = get<double>(in);
  TrainConfig tc;
  tc.seed = get<std::uint64_t>(in);
  tc.epochs = get<std::uint64_t>(in);
  tc.batch_size = get<std::uint64_t>(in);
  tc.learning_rate = get<double>(in);
  tc.beta1 = get<double>(in);
  tc.beta2 = get<double>(in);
  tc.epsilon = get<double>(in);
  const double k0 = get<double>(in);
  const double k1 = get<double>(in);
  tc.kappas = FairKappas(k0, k1);
  IdentityTable table(cfg.d_out, std::move(groups), std::move(centroids));
  AdamState adam(mlp.params.size() + table.centroids().size());
  return ModelState{std::move(mlp), std::move(table), std::move(ids), std::move(adam), tc};
}

ModelState read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace fvmf
