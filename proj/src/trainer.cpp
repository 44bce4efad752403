#include "fvmf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>

#include "fvmf/error.hpp"
#include "fvmf/kernels.hpp"
#include "fvmf/rng.hpp"

namespace fvmf {

void MlpConfig::validate() const {
  if (d_in < 1 || hidden < 1 || d_out < 2) fail(ErrorKind::Domain, "MlpConfig: dims must be >= 1 (d_out >= 2)");
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::Domain, "TrainConfig: epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::Domain, "TrainConfig: batch size must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorKind::Domain, "TrainConfig: learning rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    fail(ErrorKind::Domain, "TrainConfig: Adam betas must lie in (0, 1)");
  if (!(epsilon > 0.0)) fail(ErrorKind::Domain, "TrainConfig: Adam epsilon must be > 0");
}

MlpWeights::MlpWeights(const MlpConfig& cfg) : config(cfg) {
  config.validate();
  params.assign(config.parameter_count(), 0.0);
}

ForwardCache mlp_forward_batch(const MlpWeights& mlp, std::span<const double> x, std::size_t n) {
  const auto& cfg = mlp.config;
  if (x.size() != n * cfg.d_in) fail(ErrorKind::DimensionMismatch, "mlp_forward: input is not n x d_in");
  ForwardCache c;
  c.n = n;
  c.input.assign(x.begin(), x.end());
  c.pre.resize(n * cfg.hidden);
  c.hidden.resize(n * cfg.hidden);
  c.out.resize(n * cfg.d_out);
  c.norms.resize(n);
  c.z.resize(n * cfg.d_out);

  kernels::omp::affine_forward(x, {n, cfg.d_in}, mlp.w1(), mlp.b1(), cfg.hidden, c.pre);
  for (std::size_t i = 0; i < c.pre.size(); ++i) c.hidden[i] = c.pre[i] > 0.0 ? c.pre[i] : 0.0;
  kernels::omp::affine_forward(c.hidden, {n, cfg.hidden}, mlp.w2(), mlp.b2(), cfg.d_out, c.out);

  for (std::size_t r = 0; r < n; ++r) {
    const auto row = std::span<const double>(c.out).subspan(r * cfg.d_out, cfg.d_out);
    const double nr = norm(row);
    if (std::isnan(nr) || std::isinf(nr))
      fail(ErrorKind::NonFiniteLoss, "mlp_forward: output " + std::to_string(r) + " is not finite");
    if (!(nr > 1e-12)) fail(ErrorKind::ZeroOutput, "mlp_forward: output " + std::to_string(r) + " has zero norm");
    c.norms[r] = nr;
    for (std::size_t j = 0; j < cfg.d_out; ++j) c.z[r * cfg.d_out + j] = row[j] / nr;
  }
  return c;
}

UnitVector mlp_forward(const MlpWeights& mlp, std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) fail(ErrorKind::Domain, "mlp_forward: non-finite input");
  auto c = mlp_forward_batch(mlp, x, 1);
  return UnitVector(std::move(c.z));
}

std::vector<double> mlp_backward(const MlpWeights& mlp, const ForwardCache& cache, std::span<const double> grad_z) {
  const auto& cfg = mlp.config;
  const std::size_t n = cache.n;
  if (grad_z.size() != n * cfg.d_out) fail(ErrorKind::DimensionMismatch, "mlp_backward: gradient is not n x d_out");

  // Through z = o / ||o||: dL/do = (dL/dz - (z . dL/dz) z) / ||o||.
  std::vector<double> d_out(n * cfg.d_out);
  for (std::size_t r = 0; r < n; ++r) {
    const auto z = std::span<const double>(cache.z).subspan(r * cfg.d_out, cfg.d_out);
    const auto g = grad_z.subspan(r * cfg.d_out, cfg.d_out);
    const double radial = dot(z, g);
    for (std::size_t j = 0; j < cfg.d_out; ++j) d_out[r * cfg.d_out + j] = (g[j] - radial * z[j]) / cache.norms[r];
  }

  MlpWeights grads(cfg);
  kernels::omp::accumulate_outer(d_out, cache.hidden, n, cfg.d_out, cfg.hidden, grads.w2());
  auto gb2 = grads.b2();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < cfg.d_out; ++j) gb2[j] += d_out[r * cfg.d_out + j];

  std::vector<double> d_pre(n * cfg.hidden);
  kernels::omp::backprop_input(d_out, mlp.w2(), n, cfg.d_out, cfg.hidden, d_pre);
  for (std::size_t i = 0; i < d_pre.size(); ++i)
    if (!(cache.pre[i] > 0.0)) d_pre[i] = 0.0;

  kernels::omp::accumulate_outer(d_pre, cache.input, n, cfg.hidden, cfg.d_in, grads.w1());
  auto gb1 = grads.b1();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < cfg.hidden; ++j) gb1[j] += d_pre[r * cfg.hidden + j];
  return std::move(grads.params);
}

namespace {

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 std::uint64_t step, const TrainConfig& cfg) {
  const double t = static_cast<double>(step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    fail(ErrorKind::DimensionMismatch, "adam_step: parameter, gradient and moment sizes differ");
  ++state.step;
  adam_update(params, grads, state.m, state.v, state.step, cfg);
}

ModelState initial_state(const EmbeddingDataset& dataset, const MlpConfig& mlp_config, const TrainConfig& cfg) {
  cfg.validate();
  mlp_config.validate();
  if (dataset.size() == 0) fail(ErrorKind::Domain, "train: empty dataset");
  if (mlp_config.d_in != dataset.dim())
    fail(ErrorKind::DimensionMismatch, "train: MLP input dimension " + std::to_string(mlp_config.d_in) +
                                           " vs dataset dimension " + std::to_string(dataset.dim()));

  auto ids = dataset.identity_ids();
  std::map<std::uint32_t, std::uint8_t> group_of;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto [it, inserted] = group_of.emplace(dataset.identity(i), dataset.group(i));
    if (!inserted && it->second != dataset.group(i))
      fail(ErrorKind::Domain, "train: identity " + std::to_string(dataset.identity(i)) +
                                  " has images in both groups; consolidate labels first");
  }
  std::vector<std::uint8_t> groups;
  groups.reserve(ids.size());
  for (auto id : ids) groups.push_back(group_of.at(id));

  Rng rng(cfg.seed);
  MlpWeights mlp(mlp_config);
  const double w1_limit = std::sqrt(6.0 / static_cast<double>(mlp_config.d_in));
  const double w2_limit = std::sqrt(6.0 / static_cast<double>(mlp_config.hidden + mlp_config.d_out));
  for (auto& w : mlp.w1()) w = w1_limit * (2.0 * rng.uniform() - 1.0);
  for (auto& w : mlp.w2()) w = w2_limit * (2.0 * rng.uniform() - 1.0);

  const std::size_t d = mlp_config.d_out;
  std::vector<double> centroids;
  centroids.reserve(ids.size() * d);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto u = sample_uniform_sphere(d, rng);
    centroids.insert(centroids.end(), u.coords().begin(), u.coords().end());
  }
  IdentityTable table(d, std::move(groups), std::move(centroids));
  AdamState adam(mlp.params.size() + table.centroids().size());
  return ModelState{std::move(mlp), std::move(table), std::move(ids), std::move(adam), cfg};
}

TrainResult train(const EmbeddingDataset& dataset, const MlpConfig& mlp_config, const TrainConfig& cfg) {
  TrainResult result{initial_state(dataset, mlp_config, cfg), {}, 0, 0};
  auto& state = result.state;
  const std::size_t n_total = dataset.size();
  const std::size_t d_in = mlp_config.d_in;
  const std::size_t mlp_size = state.mlp.params.size();

  std::map<std::uint32_t, std::uint32_t> dense;
  for (std::size_t k = 0; k < state.identity_ids.size(); ++k) dense[state.identity_ids[k]] = static_cast<std::uint32_t>(k);
  std::vector<std::uint32_t> label(n_total);
  for (std::size_t i = 0; i < n_total; ++i) label[i] = dense.at(dataset.identity(i));

  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  auto m_all = std::span<double>(state.adam.m);
  auto v_all = std::span<double>(state.adam.v);
  std::size_t batch_index = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto perm = random_permutation(n_total, shuffle_rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < n_total; start += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, n_total - start);
      std::vector<double> x(n * d_in);
      std::vector<std::uint32_t> y(n);
      for (std::size_t r = 0; r < n; ++r) {
        const std::size_t src = perm[start + r];
        std::copy_n(dataset.unit(src).begin(), d_in, x.begin() + static_cast<std::ptrdiff_t>(r * d_in));
        y[r] = label[src];
      }

      ForwardCache cache;
      try {
        cache = mlp_forward_batch(state.mlp, x, n);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteLoss) throw;
        fail(ErrorKind::NonFiniteLoss, "train: batch " + std::to_string(batch_index) + ": " + e.what());
      }
      const LossBatch batch{cache.z, y, n, mlp_config.d_out};
      const auto loss = fair_vmf_loss(batch, state.table, cfg.kappas);
      if (!std::isfinite(loss.loss))
        fail(ErrorKind::NonFiniteLoss, "train: non-finite loss at batch " + std::to_string(batch_index));
      result.logit_bound_violations += loss.bound_violations;
      result.logits_checked += n * state.table.size();
      epoch_total += loss.loss * static_cast<double>(n);

      const auto grads = mlp_backward(state.mlp, cache, loss.grad_embeddings);
      ++state.adam.step;
      adam_update(state.mlp.params, grads, m_all.first(mlp_size), v_all.first(mlp_size), state.adam.step, cfg);
      adam_update(state.table.mutable_centroids(), loss.grad_centroids, m_all.subspan(mlp_size),
                  v_all.subspan(mlp_size), state.adam.step, cfg);
      if (!all_finite(state.mlp.params) || !all_finite(state.table.centroids()))
        fail(ErrorKind::NonFiniteLoss, "train: parameters became non-finite at batch " + std::to_string(batch_index));
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(n_total));
  }
  return result;
}

std::vector<double> embed_dataset(const EmbeddingDataset& dataset, const ModelState* model) {
  const std::size_t n_total = dataset.size();
  if (model == nullptr) {
    std::vector<double> out(n_total * dataset.dim());
    for (std::size_t i = 0; i < n_total; ++i) {
      const auto u = UnitVector::normalized(dataset.raw(i));
      std::copy(u.coords().begin(), u.coords().end(), out.begin() + static_cast<std::ptrdiff_t>(i * dataset.dim()));
    }
    return out;
  }
  const auto& cfg = model->mlp.config;
  if (cfg.d_in != dataset.dim()) fail(ErrorKind::DimensionMismatch, "embed: model input dimension differs from dataset");
  std::vector<double> out;
  out.reserve(n_total * cfg.d_out);
  constexpr std::size_t kChunk = 4096;
  for (std::size_t start = 0; start < n_total; start += kChunk) {
    const std::size_t n = std::min(kChunk, n_total - start);
    const auto cache = mlp_forward_batch(model->mlp, dataset.unit().subspan(start * cfg.d_in, n * cfg.d_in), n);
    out.insert(out.end(), cache.z.begin(), cache.z.end());
  }
  return out;
}

void write_loss_log(std::ostream& out, std::span<const double> epoch_loss) {
  out << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%.17g", epoch_loss[e]);
    out << e + 1 << ',' << buf << '\n';
  }
}

}  // namespace fvmf
