#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fvmf/dataset.hpp"
#include "fvmf/fairloss.hpp"
#include "fvmf/vmf.hpp"

namespace fvmf {

/// Affine -> ReLU -> affine -> L2 normalize.
struct MlpConfig {
  std::size_t d_in = 512;
  std::size_t hidden = 1024;
  std::size_t d_out = 512;

  void validate() const;
  std::size_t parameter_count() const { return hidden * d_in + hidden + d_out * hidden + d_out; }
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 1024;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  FairKappas kappas{25.0, 20.0};

  void validate() const;
};

/// MLP weights stored flat in the order W1 (h x d_in), b1, W2 (d_out x h), b2.
struct MlpWeights {
  MlpConfig config;
  std::vector<double> params;

  explicit MlpWeights(const MlpConfig& cfg);

  std::span<const double> w1() const { return {params.data(), config.hidden * config.d_in}; }
  std::span<const double> b1() const { return {params.data() + offset_b1(), config.hidden}; }
  std::span<const double> w2() const { return {params.data() + offset_w2(), config.d_out * config.hidden}; }
  std::span<const double> b2() const { return {params.data() + offset_b2(), config.d_out}; }
  std::span<double> w1() { return {params.data(), config.hidden * config.d_in}; }
  std::span<double> b1() { return {params.data() + offset_b1(), config.hidden}; }
  std::span<double> w2() { return {params.data() + offset_w2(), config.d_out * config.hidden}; }
  std::span<double> b2() { return {params.data() + offset_b2(), config.d_out}; }

  std::size_t offset_b1() const { return config.hidden * config.d_in; }
  std::size_t offset_w2() const { return offset_b1() + config.hidden; }
  std::size_t offset_b2() const { return offset_w2() + config.d_out * config.hidden; }
};

/// Activations of a batch forward pass, kept for the backward pass.
struct ForwardCache {
  std::size_t n = 0;
  std::vector<double> input;   // n x d_in
  std::vector<double> pre;     // n x hidden, before ReLU
  std::vector<double> hidden;  // n x hidden
  std::vector<double> out;     // n x d_out, before normalization
  std::vector<double> norms;   // n
  std::vector<double> z;       // n x d_out, unit rows
};

/// Throws Error(ZeroOutput) if some pre-normalization output has norm <= 1e-12.
ForwardCache mlp_forward_batch(const MlpWeights& mlp, std::span<const double> x, std::size_t n);
UnitVector mlp_forward(const MlpWeights& mlp, std::span<const double> x);

/// Parameter gradients (same layout as MlpWeights::params) given dL/dz.
std::vector<double> mlp_backward(const MlpWeights& mlp, const ForwardCache& cache, std::span<const double> grad_z);

/// Bias-corrected Adam over a flat parameter vector.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg);

/// Trained Ethical Module: MLP weights plus the identity head it was trained with.
struct ModelState {
  MlpWeights mlp;
  IdentityTable table;
  std::vector<std::uint32_t> identity_ids;  // dense index -> dataset identity id
  AdamState adam;
  TrainConfig config;
};

struct TrainResult {
  ModelState state;
  std::vector<double> epoch_loss;     // mean sample loss per epoch
  std::size_t logit_bound_violations = 0;
  std::size_t logits_checked = 0;
};

/// Deterministic in (dataset, configs). Throws Error(NonFiniteLoss) naming the
/// batch whose loss or parameters stopped being finite.
TrainResult train(const EmbeddingDataset& dataset, const MlpConfig& mlp_config, const TrainConfig& train_config);

/// Initial state exactly as train() builds it (exposed for tests).
ModelState initial_state(const EmbeddingDataset& dataset, const MlpConfig& mlp_config, const TrainConfig& train_config);

/// Embeddings produced by the module for every record (N x d_out). With no
/// model this is the pass-through normalization of the raw coordinates.
std::vector<double> embed_dataset(const EmbeddingDataset& dataset, const ModelState* model);

/// Checkpoint container, see README for the layout.
void write_checkpoint(std::ostream& out, const ModelState& state);
void write_checkpoint(const std::string& path, const ModelState& state);
ModelState read_checkpoint(std::istream& in);
ModelState read_checkpoint(const std::string& path);

/// Loss log as CSV `epoch,mean_loss`.
void write_loss_log(std::ostream& out, std::span<const double> epoch_loss);

}  // namespace fvmf
