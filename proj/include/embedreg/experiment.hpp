#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "embedreg/featurizer.hpp"
#include "embedreg/mlp.hpp"
#include "embedreg/task.hpp"
#include "json.hpp"

namespace embedreg {

inline constexpr const char* kCodeVersion = "embedreg-0.1.0";

/// Everything that determines a run's outputs. Relative paths resolve against base_dir.
struct ExperimentConfig {
  std::vector<std::string> functions;      // synthetic functions, crossed with dofs
  std::vector<std::size_t> dofs;
  std::vector<nlohmann::json> tasks;       // inline task specs or spec file paths
  std::vector<nlohmann::json> embedders;   // make_embedder specs; names must be unique
  std::size_t samples = 500;
  std::vector<std::uint64_t> seeds;        // one repeat per entry
  std::uint64_t base_seed = 0;
  TrainConfig train;
  StringFormat format;
  SplitRatios split = kDefaultSplit;
  std::vector<std::size_t> train_sizes;    // scale-data only
  std::vector<std::string> formats{"full", "values"};  // ablate only
  std::string nlfd_split = "all";          // all | train | validation | test
  std::size_t workers = 1;                 // does not affect results
  std::filesystem::path base_dir;

  /// Missing keys take the defaults above; seeds defaults to 0..11 and may be given
  /// as a count. Throws ValidationError on unknown keys or bad values.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Canonical form; everything except `workers`.
  nlohmann::json to_json() const;
  std::vector<RegressionTask> build_tasks() const;
};

struct RunOptions {
  std::filesystem::path out_root = "out";
  bool force = false;
  std::ostream* log = nullptr;
};

struct RunSummary {
  std::string runner;
  std::filesystem::path dir;
  std::string config_hash;
  std::size_t cells = 0;
  std::size_t executed = 0;
  std::size_t reused = 0;
  std::size_t failed = 0;
  std::vector<std::filesystem::path> outputs;
};

/// Runner names accepted by run_experiment.
const std::vector<std::string>& runner_names();

/// Runs every cell of `runner` under out_root/<runner>-<hash>. Completed cells found in
/// records.jsonl are reused unless opts.force; failed cells are recorded and retried
/// on the next run. Summary CSVs are rebuilt from the records afterwards.
RunSummary run_experiment(const std::string& runner, const ExperimentConfig& cfg,
                          const RunOptions& opts);

RunSummary run_dof_sweep(const ExperimentConfig& cfg, const RunOptions& opts);
RunSummary run_comparison(const ExperimentConfig& cfg, const RunOptions& opts);
RunSummary run_nlfd_correlation(const ExperimentConfig& cfg, const RunOptions& opts);
RunSummary run_data_scaling(const ExperimentConfig& cfg, const RunOptions& opts);
RunSummary run_ablation(const ExperimentConfig& cfg, const RunOptions& opts);

/// Rebuilds the summary CSVs of an existing run directory from its records.
RunSummary regenerate_report(const std::filesystem::path& run_dir, std::ostream* log = nullptr);

/// Hash keying the output directory: config, runner, code version, embedder provenance
/// and offline data contents.
std::string experiment_hash(const std::string& runner, const ExperimentConfig& cfg);

/// Gap statistics over (task, seed) pairs, as in the scale-data output.
struct GapBands {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};
GapBands gap_bands(const std::vector<double>& gaps);

}  // namespace embedreg
