#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace embedreg {

struct ContinuousRange {
  double lo = 0.0;
  double hi = 1.0;
  // Integral values only; rendered without a fractional part when serialized.
  bool integer = false;
};

struct CategoricalChoices {
  std::vector<std::string> choices;
};

struct ParamSpec {
  std::string name;
  std::variant<ContinuousRange, CategoricalChoices> kind;

  static ParamSpec continuous(std::string name, double lo, double hi, bool integer = false);
  static ParamSpec categorical(std::string name, std::vector<std::string> choices);

  bool is_continuous() const { return std::holds_alternative<ContinuousRange>(kind); }
  const ContinuousRange& range() const { return std::get<ContinuousRange>(kind); }
  const CategoricalChoices& categories() const { return std::get<CategoricalChoices>(kind); }
};

/// A value for one parameter: real for continuous params, the choice string for categorical ones.
using ParamValue = std::variant<double, std::string>;

/// Values in the task's parameter declaration order. Positional storage makes
/// "every parameter assigned exactly once" hold by construction.
using Assignment = std::vector<ParamValue>;

struct SyntheticSource {
  std::string function_id;
};

struct OfflineSource {
  std::filesystem::path data_path;
};

using TaskSource = std::variant<SyntheticSource, OfflineSource>;

class RegressionTask {
 public:
  /// Validates every invariant; throws ValidationError.
  RegressionTask(std::string id, std::vector<ParamSpec> params, TaskSource source,
                 std::string family = {});

  const std::string& id() const { return id_; }
  /// Grouping label for cross-task summaries. Defaults to the function id or the task id.
  const std::string& family() const { return family_; }
  const std::vector<ParamSpec>& params() const { return params_; }
  const TaskSource& source() const { return source_; }
  std::size_t dof() const { return params_.size(); }
  bool is_synthetic() const { return std::holds_alternative<SyntheticSource>(source_); }
  bool is_continuous_only() const;

  /// Index of a parameter by name, or nullopt.
  std::optional<std::size_t> find_param(const std::string& name) const;

 private:
  std::string id_;
  std::string family_;
  std::vector<ParamSpec> params_;
  TaskSource source_;
};

/// Synthetic BBOB task with params x0..x{dof-1}, each continuous on [-5, 5].
RegressionTask make_bbob_task(const std::string& function_id, std::size_t dof);

/// Throws ValidationError when `x` does not satisfy the task's ParamSpecs.
void validate_assignment(const RegressionTask& task, const Assignment& x);

struct LabeledExample {
  Assignment x;
  double y = 0.0;
};

enum class Split { train, validation, test };

const char* to_string(Split split);

struct Dataset {
  std::string task_id;
  std::vector<LabeledExample> examples;
  std::optional<Split> split;

  std::size_t size() const { return examples.size(); }
  std::vector<Assignment> inputs() const;
  std::vector<double> targets() const;
};

/// Uniform sampling of a synthetic task; a pure function of (task, n, seed).
Dataset sample_uniform(const RegressionTask& task, std::size_t n, std::uint64_t seed);

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultSplit{0.8, 0.1, 0.1};

/// Seeded shuffle then contiguous train/validation/test partition.
/// Sizes are floor(n * r) for validation and test; the remainder goes to train.
std::array<Dataset, 3> split_dataset(const Dataset& ds, const SplitRatios& ratios,
                                     std::uint64_t seed);

/// Reads a delimited offline data file (header of param names plus `y`).
Dataset ingest_offline(const std::filesystem::path& path, const RegressionTask& task);

/// Writes a dataset in the offline data format, so `ingest_offline` reads it back.
void write_dataset_csv(const std::filesystem::path& path, const RegressionTask& task,
                       const Dataset& ds);

// Task spec files (JSON): {id, family?, params: [{name, kind, lo/hi[/integer] | choices}], source}.
RegressionTask task_from_json(const nlohmann::json& j,
                              const std::filesystem::path& base_dir = {});
nlohmann::json task_to_json(const RegressionTask& task);
RegressionTask load_task_spec(const std::filesystem::path& path);

}  // namespace embedreg
