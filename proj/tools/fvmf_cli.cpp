// fvmf: synthetic data generation, ingestion, Ethical Module training,
// fairness evaluation and (kappa0, kappa1) grid search.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fvmf/dataset.hpp"
#include "fvmf/error.hpp"
#include "fvmf/grid.hpp"
#include "fvmf/metrics.hpp"
#include "fvmf/parallel.hpp"
#include "fvmf/specfn.hpp"
#include "fvmf/trainer.hpp"

namespace {

using namespace fvmf;

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::logic_error&) {
      fail(ErrorKind::Usage, std::string(flag) + ": not a number: '" + cell + "'");
    }
  }
  if (out.empty()) fail(ErrorKind::Usage, std::string(flag) + ": empty list");
  return out;
}

// "--dims h" or "--dims d_in,h,d_out"; d_in must match the data.
MlpConfig parse_dims(const std::string& text, std::size_t d_in) {
  const auto v = parse_list(text, "--dims");
  MlpConfig cfg;
  if (v.size() == 1) {
    cfg = {d_in, static_cast<std::size_t>(v[0]), d_in};
  } else if (v.size() == 3) {
    cfg = {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2])};
    if (cfg.d_in != d_in)
      fail(ErrorKind::Usage, "--dims: input size " + std::to_string(cfg.d_in) + " but data has d=" + std::to_string(d_in));
  } else {
    fail(ErrorKind::Usage, "--dims takes 'hidden' or 'd_in,hidden,d_out'");
  }
  cfg.validate();
  return cfg;
}

EmbeddingDataset load_any(const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path);
    return read_embeddings_csv(in);
  }
  return read_embeddings(path);
}

void warn_small_impostor_sets(const PairScores& scores, const std::vector<double>& alphas) {
  for (int a = 0; a < 2; ++a)
    for (double alpha : alphas)
      if (alpha > 0 && static_cast<double>(scores.impostor(a).size()) < 100.0 / alpha)
        std::fprintf(stderr, "warning: group %d has %zu impostor pairs, fewer than 100/alpha for alpha=%g\n", a,
                     scores.impostor(a).size(), alpha);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path + " for writing");
  out << text;
}

struct TrainFlags {
  std::string dims = "2x";
  double kappa0 = 25.0;
  double kappa1 = 20.0;
  std::size_t epochs = 50;
  std::size_t batch_size = 1024;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool kappa_scalars) {
  cmd->add_option("--dims", f.dims, "MLP sizes: 'hidden' or 'd_in,hidden,d_out' (default hidden = 2 d)");
  if (kappa_scalars) {
    cmd->add_option("--kappa0", f.kappa0, "Concentration for group 0");
    cmd->add_option("--kappa1", f.kappa1, "Concentration for group 1");
  }
  cmd->add_option("--epochs", f.epochs, "Training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", f.batch_size, "Batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", f.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Seed for initialization and shuffling");
}

MlpConfig mlp_from(const TrainFlags& f, std::size_t d) {
  if (f.dims == "2x") return {d, 2 * d, d};
  return parse_dims(f.dims, d);
}

TrainConfig train_from(const TrainFlags& f) {
  TrainConfig tc;
  tc.epochs = f.epochs;
  tc.batch_size = f.batch_size;
  tc.learning_rate = f.lr;
  tc.seed = f.seed;
  tc.kappas = FairKappas(f.kappa0, f.kappa1);
  return tc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair von Mises-Fisher toolkit: Ethical Module training and BFAR/BFRR evaluation"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic two-group embedding dataset");
  std::string gen_out;
  SyntheticSpec spec;
  std::string gen_ids = "200,200", gen_images = "30", gen_kappa = "40,15", gen_centroid = "0,0";
  std::uint64_t gen_seed = 1;
  gen->add_option("--out", gen_out, "Output embedding file")->required();
  gen->add_option("--d", spec.dim, "Embedding dimension");
  gen->add_option("--identities", gen_ids, "Identities per group 'n0,n1'");
  gen->add_option("--images", gen_images, "Images per identity 'n' or 'min,max'");
  gen->add_option("--kappa-gen", gen_kappa, "Within-identity concentration per group 'k0,k1'");
  gen->add_option("--centroid-kappa", gen_centroid, "Concentration of identity centroids around a group pole (0 = uniform)");
  gen->add_option("--seed", gen_seed, "Base seed: population = seed, centroids = seed+1, samples = seed+2");
  auto* pop_seed = gen->add_option("--population-seed", spec.population_seed, "Override the group-pole seed");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Read embeddings (.fvmf or .csv), consolidate group votes, write .fvmf");
  std::string ingest_in, ingest_out;
  double ingest_threshold = 0.75;
  ingest->add_option("--in", ingest_in, "Input file")->required();
  ingest->add_option("--out", ingest_out, "Output embedding file")->required();
  ingest->add_option("--threshold", ingest_threshold, "Majority fraction required to keep an identity");

  // train
  auto* trn = app.add_subcommand("train", "Train the Ethical Module with the fair vMF loss");
  std::string train_data, train_out, train_log;
  TrainFlags train_flags;
  trn->add_option("--data", train_data, "Training embeddings")->required();
  trn->add_option("--out", train_out, "Checkpoint path")->required();
  trn->add_option("--loss-log", train_log, "CSV epoch,mean_loss");
  add_train_flags(trn, train_flags, true);

  // eval
  auto* ev = app.add_subcommand("eval", "Fairness report of embeddings, optionally through a trained module");
  std::string eval_data, eval_model, eval_out, eval_curves, eval_alpha = "0.01,0.001";
  bool identity_module = false;
  std::size_t pair_cap = 0;
  std::uint64_t pair_seed = 0;
  ev->add_option("--data", eval_data, "Evaluation embeddings")->required();
  auto* model_opt = ev->add_option("--model", eval_model, "Checkpoint of a trained module");
  ev->add_flag("--identity-module", identity_module, "Use the pass-through (normalize-only) module")->excludes(model_opt);
  ev->add_option("--alpha", eval_alpha, "FAR levels, comma separated");
  ev->add_option("--out", eval_out, "Report CSV (default stdout)");
  ev->add_option("--curves", eval_curves, "Also write t,group,far,frr curves here");
  ev->add_option("--pair-cap", pair_cap, "Subsample each pair category to at most this many pairs (0 = all)");
  ev->add_option("--pair-seed", pair_seed, "Seed of the pair subsampling");

  // grid
  auto* grd = app.add_subcommand("grid", "Grid search over (kappa0, kappa1)");
  std::string grid_data, grid_eval, grid_out, grid_k0 = "5,10,15,20,25,30,35,40,45", grid_k1 = grid_k0,
                                              grid_alpha = "0.01,0.001";
  bool grid_resume = false;
  TrainFlags grid_flags;
  std::size_t grid_cap = 0;
  grd->add_option("--data", grid_data, "Training embeddings")->required();
  grd->add_option("--eval-data", grid_eval, "Evaluation embeddings (default: the training set)");
  grd->add_option("--kappa0", grid_k0, "Comma list of group-0 concentrations");
  grd->add_option("--kappa1", grid_k1, "Comma list of group-1 concentrations");
  grd->add_option("--alpha", grid_alpha, "FAR levels, comma separated");
  grd->add_option("--out", grid_out, "Trend CSV")->required();
  grd->add_flag("--resume", grid_resume, "Skip cells already present in --out");
  grd->add_option("--pair-cap", grid_cap, "Subsample each pair category (0 = all)");
  add_train_flags(grd, grid_flags, false);

  // specfn-probe
  auto* probe = app.add_subcommand("specfn-probe", "Print log I_nu(kappa), log C_d(kappa) and A_d(kappa)");
  double probe_kappa = 1.0;
  int probe_d = 3;
  std::optional<double> probe_nu;
  probe->add_option("--kappa", probe_kappa, "Argument / concentration")->required();
  probe->add_option("--d", probe_d, "Dimension (order nu = d/2 - 1)");
  probe->add_option("--nu", probe_nu, "Explicit Bessel order (log I only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error[usage]: %s\n", e.what());
    return 2;
  }

  try {
    if (*gen) {
      const auto ids = parse_list(gen_ids, "--identities");
      const auto images = parse_list(gen_images, "--images");
      const auto kg = parse_list(gen_kappa, "--kappa-gen");
      const auto kc = parse_list(gen_centroid, "--centroid-kappa");
      if (ids.size() != 2 || kg.size() != 2 || kc.size() != 2 || images.size() > 2)
        fail(ErrorKind::Usage, "gen: per-group options take exactly two values");
      spec.identities_per_group = {static_cast<std::size_t>(ids[0]), static_cast<std::size_t>(ids[1])};
      spec.images_min = static_cast<std::size_t>(images.front());
      spec.images_max = static_cast<std::size_t>(images.back());
      spec.kappa_gen = {kg[0], kg[1]};
      spec.centroid_kappa = {kc[0], kc[1]};
      if (!*pop_seed) spec.population_seed = gen_seed;
      spec.centroid_seed = gen_seed + 1;
      spec.sample_seed = gen_seed + 2;
      const auto ds = generate_synthetic(spec);
      write_embeddings(gen_out, ds);
      std::fprintf(stderr, "wrote %zu embeddings of dimension %zu to %s\n", ds.size(), ds.dim(), gen_out.c_str());
    } else if (*ingest) {
      const auto raw = load_any(ingest_in);
      GenderConsolidation report;
      const auto ds = consolidate_dataset(raw, ingest_threshold, &report);
      write_embeddings(ingest_out, ds);
      std::fprintf(stderr, "kept %zu identities (%zu images), discarded %zu identities (%zu images)\n",
                   report.group_of_identity.size(), ds.size(), report.discarded.size(), raw.size() - ds.size());
    } else if (*trn) {
      const auto ds = read_embeddings(train_data);
      const auto result = train(ds, mlp_from(train_flags, ds.dim()), train_from(train_flags));
      write_checkpoint(train_out, result.state);
      if (!train_log.empty()) {
        std::ofstream out(train_log, std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot open " + train_log);
        write_loss_log(out, result.epoch_loss);
      }
      std::fprintf(stderr, "final epoch loss %.6f; logit bound violations %zu\n", result.epoch_loss.back(),
                   result.logit_bound_violations);
    } else if (*ev) {
      const auto ds = read_embeddings(eval_data);
      std::optional<ModelState> model;
      if (!eval_model.empty()) model = read_checkpoint(eval_model);
      PairPolicy policy;
      if (pair_cap > 0) policy = {pair_cap, pair_seed};
      // --identity-module and raw evaluation share the pass-through path.
      const auto scores = build_pair_scores(ds, model ? &*model : nullptr, policy);
      const auto alphas = parse_list(eval_alpha, "--alpha");
      warn_small_impostor_sets(scores, alphas);
      std::string csv = report_csv_header() + '\n';
      for (double a : alphas) csv += report_csv_row(fairness_report(scores, a)) + '\n';
      if (eval_out.empty())
        std::cout << csv;
      else
        write_text(eval_out, csv);
      if (!eval_curves.empty()) write_text(eval_curves, curves_csv(metric_curves(scores)));
    } else if (*grd) {
      const auto train_set = read_embeddings(grid_data);
      const auto eval_set = grid_eval.empty() ? train_set : read_embeddings(grid_eval);
      GridConfig cfg;
      cfg.kappa0 = parse_list(grid_k0, "--kappa0");
      cfg.kappa1 = parse_list(grid_k1, "--kappa1");
      cfg.alphas = parse_list(grid_alpha, "--alpha");
      cfg.mlp = mlp_from(grid_flags, train_set.dim());
      cfg.train = train_from(grid_flags);
      if (grid_cap > 0) cfg.pairs = {grid_cap, grid_flags.seed};
      cfg.threads = parallel::max_threads();
      run_grid_to_csv(train_set, eval_set, cfg, grid_out, grid_resume,
                      [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); });
    } else if (*probe) {
      if (probe_nu) {
        std::printf("log_I(nu=%.17g, kappa=%.17g) = %.17g\n", *probe_nu, probe_kappa,
                    specfn::log_bessel_i(*probe_nu, probe_kappa));
      } else {
        std::printf("d=%d kappa=%.17g\n", probe_d, probe_kappa);
        std::printf("log_I_{d/2-1} = %.17g\n", specfn::log_bessel_i(0.5 * probe_d - 1.0, probe_kappa));
        std::printf("log_C_d       = %.17g\n", specfn::log_vmf_normalizer(probe_d, probe_kappa));
        std::printf("A_d           = %.17g\n", specfn::mean_resultant_length(probe_d, probe_kappa));
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return 1;
  }
  return 0;
}
