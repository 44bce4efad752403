#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fvmf/dataset.hpp"
#include "fvmf/metrics.hpp"
#include "fvmf/trainer.hpp"

namespace fvmf {

struct GridConfig {
  std::vector<double> kappa0;
  std::vector<double> kappa1;
  std::vector<double> alphas{1e-2, 1e-3};
  MlpConfig mlp;
  TrainConfig train;  // kappas are overwritten per cell; the seed is shared by every cell
  PairPolicy pairs;
  int threads = 1;    // concurrent cells
};

struct GridRow {
  double kappa0;
  double kappa1;
  double alpha;
  std::optional<FairnessReport> report;  // empty when the cell failed
  std::string failure;                  // "train_failed:<category>"
};

std::string grid_csv_header();
std::string grid_csv_row(const GridRow& row);

/// Key of a trend-CSV line: (kappa0, kappa1, alpha) parsed from its first
/// three fields. Returns nullopt for the header or malformed lines.
std::optional<std::array<double, 3>> grid_row_key(const std::string& line);

/// Trains one model per (kappa0, kappa1) cell on `train_set` and evaluates
/// every alpha on `eval_set`. Rows come back ordered by (kappa0, kappa1,
/// alpha). Cells are independent, so the result does not depend on `threads`.
std::vector<GridRow> run_grid(const EmbeddingDataset& train_set, const EmbeddingDataset& eval_set,
                              const GridConfig& config,
                              const std::function<void(const std::string&)>& log = nullptr);

/// run_grid writing to a trend CSV at `path`. Finished rows are appended as
/// cells complete; with `resume`, cells whose rows (all alphas, no failure)
/// are already in the file are skipped. The file is finally rewritten sorted.
void run_grid_to_csv(const EmbeddingDataset& train_set, const EmbeddingDataset& eval_set, const GridConfig& config,
                     const std::string& path, bool resume,
                     const std::function<void(const std::string&)>& log = nullptr);

}  // namespace fvmf
