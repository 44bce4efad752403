#include "fvmf/grid.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "fvmf/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fvmf {

std::string grid_csv_header() { return "kappa0,kappa1," + report_csv_header(); }

std::string grid_csv_row(const GridRow& row) {
  std::string prefix = format_double(row.kappa0) + ',' + format_double(row.kappa1) + ',';
  if (row.report) return prefix + report_csv_row(*row.report);
  prefix += format_double(row.alpha);
  for (int i = 0; i < 10; ++i) prefix += ",nan";
  return prefix + ',' + row.failure;
}

std::optional<std::array<double, 3>> grid_row_key(const std::string& line) {
  std::array<double, 3> key{};
  std::stringstream ss(line);
  std::string cell;
  for (double& k : key) {
    if (!std::getline(ss, cell, ',')) return std::nullopt;
    try {
      std::size_t used = 0;
      k = std::stod(cell, &used);
      if (used != cell.size()) return std::nullopt;
    } catch (const std::logic_error&) {
      return std::nullopt;
    }
  }
  return key;
}

namespace {

struct Cell {
  double kappa0;
  double kappa1;
};

std::vector<GridRow> run_cell(const EmbeddingDataset& train_set, const EmbeddingDataset& eval_set,
                              const GridConfig& config, const Cell& cell) {
  std::vector<GridRow> rows;
  try {
    TrainConfig tc = config.train;
    tc.kappas = FairKappas(cell.kappa0, cell.kappa1);
    const auto trained = train(train_set, config.mlp, tc);
    const auto scores = build_pair_scores(eval_set, &trained.state, config.pairs);
    for (double alpha : config.alphas) rows.push_back({cell.kappa0, cell.kappa1, alpha, fairness_report(scores, alpha), {}});
  } catch (const Error& e) {
    rows.clear();
    for (double alpha : config.alphas)
      rows.push_back({cell.kappa0, cell.kappa1, alpha, std::nullopt, "train_failed:" + std::string(to_string(e.kind()))});
  }
  return rows;
}

template <typename Fn>
void for_each_cell(std::size_t count, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
#ifdef _OPENMP
      omp_set_num_threads(1);  // cells already saturate the cores
#endif
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<Cell> cells_of(const GridConfig& config) {
  if (config.kappa0.empty() || config.kappa1.empty() || config.alphas.empty())
    fail(ErrorKind::Usage, "grid: kappa0, kappa1 and alpha lists must be nonempty");
  auto k0 = config.kappa0, k1 = config.kappa1;
  std::sort(k0.begin(), k0.end());
  std::sort(k1.begin(), k1.end());
  k0.erase(std::unique(k0.begin(), k0.end()), k0.end());
  k1.erase(std::unique(k1.begin(), k1.end()), k1.end());
  std::vector<Cell> cells;
  for (double a : k0)
    for (double b : k1) cells.push_back({a, b});
  return cells;
}

std::vector<double> sorted_alphas(const GridConfig& config) {
  auto alphas = config.alphas;
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
  return alphas;
}

}  // namespace

std::vector<GridRow> run_grid(const EmbeddingDataset& train_set, const EmbeddingDataset& eval_set,
                              const GridConfig& config, const std::function<void(const std::string&)>& log) {
  const auto cells = cells_of(config);
  GridConfig cfg = config;
  cfg.alphas = sorted_alphas(config);
  std::vector<std::vector<GridRow>> results(cells.size());
  std::mutex log_mutex;
  for_each_cell(cells.size(), config.threads, [&](std::size_t i) {
    results[i] = run_cell(train_set, eval_set, cfg, cells[i]);
    if (log) {
      std::lock_guard lock(log_mutex);
      log("cell kappa0=" + format_double(cells[i].kappa0) + " kappa1=" + format_double(cells[i].kappa1) + " done");
    }
  });
  std::vector<GridRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

void run_grid_to_csv(const EmbeddingDataset& train_set, const EmbeddingDataset& eval_set, const GridConfig& config,
                     const std::string& path, bool resume, const std::function<void(const std::string&)>& log) {
  const auto cells = cells_of(config);
  GridConfig cfg = config;
  cfg.alphas = sorted_alphas(config);

  std::map<std::array<double, 3>, std::string> done;
  if (resume) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      const auto key = grid_row_key(line);
      if (key && line.find("train_failed") == std::string::npos) done[*key] = line;
    }
  }

  std::vector<Cell> todo;
  for (const auto& c : cells) {
    const bool complete = std::all_of(cfg.alphas.begin(), cfg.alphas.end(), [&](double a) {
      return done.count({c.kappa0, c.kappa1, a}) != 0;
    });
    if (!complete) todo.push_back(c);
  }
  if (log && resume) log("resume: " + std::to_string(cells.size() - todo.size()) + " of " + std::to_string(cells.size()) + " cells already done");

  {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + path + " for writing");
    out << grid_csv_header() << '\n';
    for (const auto& [key, line] : done) out << line << '\n';
  }

  std::mutex file_mutex;
  for_each_cell(todo.size(), config.threads, [&](std::size_t i) {
    const auto rows = run_cell(train_set, eval_set, cfg, todo[i]);
    std::lock_guard lock(file_mutex);
    std::ofstream out(path, std::ios::app);
    for (const auto& r : rows) {
      const auto line = grid_csv_row(r);
      out << line << '\n';
      done[{r.kappa0, r.kappa1, r.alpha}] = line;
    }
    if (log) log("cell kappa0=" + format_double(todo[i].kappa0) + " kappa1=" + format_double(todo[i].kappa1) + " done");
  });

  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path + " for writing");
  out << grid_csv_header() << '\n';
  for (const auto& c : cells)
    for (double a : cfg.alphas)
      if (auto it = done.find({c.kappa0, c.kappa1, a}); it != done.end()) out << it->second << '\n';
}

}  // namespace fvmf
