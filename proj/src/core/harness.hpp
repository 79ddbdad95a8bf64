#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "denoiser.hpp"
#include "gnn.hpp"
#include "graph.hpp"

namespace blink {

enum class Mechanism {
  mlp,         // link-free control arm
  gcn,         // non-private upper bound
  blink_hard,
  blink_soft,
  blink_hybrid,
  rr,
  symrr,
  ldpgcn,
  dprr,
};

Mechanism mechanism_from_string(const std::string& s);
std::string to_string(Mechanism m);
bool mechanism_uses_epsilon(Mechanism m);
bool mechanism_uses_delta(Mechanism m);

struct DatasetSpec {
  enum class Kind { content, cache, synthetic };
  Kind kind = Kind::synthetic;
  std::string content_path, cites_path;  // kind == content
  std::string cache_dir;                 // kind == cache
  // kind == synthetic: a beta-model graph, optionally with random features
  // and labels so training arms can run on it.
  std::size_t n = 500;
  double beta_low = -3.5;
  double beta_high = -1.5;
  std::uint64_t seed = 7;
  std::size_t feature_dim = 0;
  std::size_t class_count = 0;

  Graph realize() const;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::vector<Mechanism> mechanisms;
  AblationMode ablation = AblationMode::full;
  std::vector<double> epsilons;
  std::vector<double> deltas;
  std::size_t trials = 10;
  bool train = true;
  ModelConfig model;
  std::uint64_t split_seed = 42;
  std::uint64_t master_seed = 1;
  double tolerance = 1e-8;
  std::size_t max_iters = 5000;
  unsigned workers = 0;
  std::string output_dir = "out";

  void validate() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct GridPoint {
  Mechanism mechanism;
  AblationMode ablation = AblationMode::full;
  double epsilon = 0.0;  // unused when the mechanism ignores the budget
  double delta = 0.0;
};

struct RunRecord {
  std::size_t grid_index = 0;
  std::size_t trial = 0;
  std::uint64_t mech_seed = 0;
  std::uint64_t model_seed = 0;
  std::size_t n = 0;
  double true_density = 0.0;
  double estimated_density = 0.0;
  double l1_error = 0.0;
  double mae = 0.0;
  double mae_bound = std::numeric_limits<double>::quiet_NaN();
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = -1;
  double wall_time_s = 0.0;  // reported via the JSON summary only
};

struct SweepResult {
  std::vector<GridPoint> grid;
  std::vector<std::vector<RunRecord>> records;  // records[grid_index][trial]
};

// Expands the (mechanism, epsilon, delta) grid; mechanisms that ignore the
// budget collapse to a single point.
std::vector<GridPoint> expand_grid(const ExperimentConfig& config);

// Runs every grid point x trial: perturb -> denoise -> reconstruct ->
// (optionally) train + evaluate. Deterministic given the config seeds;
// trials run concurrently up to the worker limit.
SweepResult run_experiment(const ExperimentConfig& config);

// runs.csv (one row per grid point x trial, fixed column order) and
// summary.json (config echo plus per-grid-point mean/stddev aggregates).
// Wall time appears only in the summary so repeated sweeps with the same
// config produce byte-identical CSVs.
void write_runs_csv(const std::string& path, const SweepResult& result);
void write_summary_json(const std::string& path, const ExperimentConfig& config,
                        const SweepResult& result);

// Convenience wrapper used by the CLI: run, then write both outputs into
// config.output_dir.
void sweep_to_files(const ExperimentConfig& config);

// Re-aggregates an existing runs.csv into a summary.json (wall-time stats
// are not recoverable from the CSV).
void report_from_csv(const std::string& runs_csv, const std::string& summary_json);

}  // namespace blink
