#include "embedreg/task.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "embedreg/bbob.hpp"
#include "embedreg/csv.hpp"
#include "embedreg/error.hpp"
#include "embedreg/random.hpp"

namespace embedreg {
namespace {

std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void check_value(const ParamSpec& p, const ParamValue& v) {
  if (p.is_continuous()) {
    const auto* d = std::get_if<double>(&v);
    if (!d) throw ValidationError("param '" + p.name + "' expects a real value");
    const auto& r = p.range();
    if (!std::isfinite(*d) || *d < r.lo || *d > r.hi) {
      throw ValidationError("param '" + p.name + "' value " + format_real(*d) + " outside [" +
                            format_real(r.lo) + ", " + format_real(r.hi) + "]");
    }
    if (r.integer && std::floor(*d) != *d) {
      throw ValidationError("param '" + p.name + "' expects an integer, got " + format_real(*d));
    }
  } else {
    const auto* s = std::get_if<std::string>(&v);
    if (!s) throw ValidationError("param '" + p.name + "' expects a choice string");
    const auto& choices = p.categories().choices;
    if (std::find(choices.begin(), choices.end(), *s) == choices.end()) {
      throw ValidationError("param '" + p.name + "' has unknown choice '" + *s + "'");
    }
  }
}

}  // namespace

ParamSpec ParamSpec::continuous(std::string name, double lo, double hi, bool integer) {
  return ParamSpec{std::move(name), ContinuousRange{lo, hi, integer}};
}

ParamSpec ParamSpec::categorical(std::string name, std::vector<std::string> choices) {
  return ParamSpec{std::move(name), CategoricalChoices{std::move(choices)}};
}

RegressionTask::RegressionTask(std::string id, std::vector<ParamSpec> params, TaskSource source,
                               std::string family)
    : id_(std::move(id)), family_(std::move(family)), params_(std::move(params)),
      source_(std::move(source)) {
  if (id_.empty()) throw ValidationError("task id must be non-empty");
  if (params_.empty()) throw ValidationError("task '" + id_ + "' has no parameters");
  std::set<std::string> names;
  for (const auto& p : params_) {
    if (p.name.empty()) throw ValidationError("task '" + id_ + "': empty parameter name");
    if (!names.insert(p.name).second) {
      throw ValidationError("task '" + id_ + "': duplicate parameter '" + p.name + "'");
    }
    if (p.name == "y") throw ValidationError("task '" + id_ + "': 'y' is reserved for targets");
    if (p.is_continuous()) {
      const auto& r = p.range();
      if (!(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo < r.hi)) {
        throw ValidationError("param '" + p.name + "' needs finite lo < hi");
      }
    } else {
      const auto& c = p.categories().choices;
      if (c.empty()) throw ValidationError("param '" + p.name + "' has no choices");
      std::set<std::string> seen(c.begin(), c.end());
      if (seen.size() != c.size()) {
        throw ValidationError("param '" + p.name + "' has duplicate choices");
      }
    }
  }
  if (const auto* syn = std::get_if<SyntheticSource>(&source_)) {
    if (!bbob::Registry::instance().contains(syn->function_id)) {
      throw ValidationError("task '" + id_ + "': unknown function '" + syn->function_id + "'");
    }
    for (const auto& p : params_) {
      if (!p.is_continuous() || p.range().lo != bbob::kLowerBound ||
          p.range().hi != bbob::kUpperBound || p.range().integer) {
        throw ValidationError("synthetic task '" + id_ +
                              "' requires continuous params on [-5, 5]");
      }
    }
    if (family_.empty()) family_ = syn->function_id;
  }
  if (family_.empty()) family_ = id_;
}

bool RegressionTask::is_continuous_only() const {
  for (const auto& p : params_) {
    if (!p.is_continuous()) return false;
  }
  return true;
}

std::optional<std::size_t> RegressionTask::find_param(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

RegressionTask make_bbob_task(const std::string& function_id, std::size_t dof) {
  if (dof == 0) throw ValidationError("dof must be positive");
  std::vector<ParamSpec> params;
  params.reserve(dof);
  for (std::size_t i = 0; i < dof; ++i) {
    params.push_back(
        ParamSpec::continuous("x" + std::to_string(i), bbob::kLowerBound, bbob::kUpperBound));
  }
  return RegressionTask(function_id + "_dof" + std::to_string(dof), std::move(params),
                        SyntheticSource{function_id}, function_id);
}

void validate_assignment(const RegressionTask& task, const Assignment& x) {
  if (x.size() != task.dof()) {
    throw ValidationError("assignment has " + std::to_string(x.size()) + " values, task '" +
                          task.id() + "' has " + std::to_string(task.dof()) + " params");
  }
  for (std::size_t i = 0; i < x.size(); ++i) check_value(task.params()[i], x[i]);
}

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

std::vector<Assignment> Dataset::inputs() const {
  std::vector<Assignment> xs;
  xs.reserve(examples.size());
  for (const auto& e : examples) xs.push_back(e.x);
  return xs;
}

std::vector<double> Dataset::targets() const {
  std::vector<double> ys;
  ys.reserve(examples.size());
  for (const auto& e : examples) ys.push_back(e.y);
  return ys;
}

Dataset sample_uniform(const RegressionTask& task, std::size_t n, std::uint64_t seed) {
  const auto* syn = std::get_if<SyntheticSource>(&task.source());
  if (!syn) throw UnsupportedSourceError("sample_uniform: task '" + task.id() + "' is offline");
  if (n == 0) throw ValidationError("sample_uniform: n must be positive");
  const bbob::BbobFunction fn{syn->function_id, task.dof()};
  Rng rng(seed);
  Dataset ds{task.id(), {}, std::nullopt};
  ds.examples.reserve(n);
  std::vector<double> coords(task.dof());
  for (std::size_t row = 0; row < n; ++row) {
    Assignment x;
    x.reserve(task.dof());
    for (std::size_t i = 0; i < task.dof(); ++i) {
      const auto& r = task.params()[i].range();
      const double v = rng.uniform(r.lo, r.hi);
      coords[i] = v;
      x.emplace_back(v);
    }
    ds.examples.push_back({std::move(x), bbob::evaluate(fn, coords)});
  }
  return ds;
}

std::array<Dataset, 3> split_dataset(const Dataset& ds, const SplitRatios& ratios,
                                      std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ValidationError("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
  const std::size_t n = ds.size();
  if (n < 10) throw TooFewExamplesError("split_dataset: need at least 10 examples");

  // The small epsilon keeps products like 100 * 0.29 from flooring one short.
  auto part = [n](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
  };
  const std::size_t n_val = part(ratios[1]);
  const std::size_t n_test = part(ratios[2]);
  if (n_val + n_test >= n || n_val == 0 || n_test == 0) {
    throw TooFewExamplesError("split_dataset: a partition of " + std::to_string(n) +
                              " examples would be empty");
  }
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);

  std::array<Dataset, 3> out;
  const std::array<std::size_t, 3> sizes{n_train, n_val, n_test};
  const std::array<Split, 3> tags{Split::train, Split::validation, Split::test};
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    out[k].task_id = ds.task_id;
    out[k].split = tags[k];
    out[k].examples.reserve(sizes[k]);
    for (std::size_t i = 0; i < sizes[k]; ++i) out[k].examples.push_back(ds.examples[order[cursor++]]);
  }
  return out;
}

Dataset ingest_offline(const std::filesystem::path& path, const RegressionTask& task) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw SchemaError("offline data '" + path.string() + "' has no header", {});
  const auto& header = rows.front();
  if (header.empty() || header.back() != "y") {
    throw SchemaError("offline data header must end with column 'y'", {});
  }

  std::vector<std::string> unknown;
  std::vector<std::size_t> column_of(task.dof(), SIZE_MAX);
  for (std::size_t c = 0; c + 1 < header.size(); ++c) {
    auto idx = task.find_param(header[c]);
    if (!idx) {
      unknown.push_back(header[c]);
    } else if (column_of[*idx] != SIZE_MAX) {
      throw SchemaError("duplicate column '" + header[c] + "'", {header[c]});
    } else {
      column_of[*idx] = c;
    }
  }
  if (!unknown.empty()) {
    std::string names;
    for (const auto& u : unknown) names += (names.empty() ? "" : ", ") + u;
    throw SchemaError("unknown columns: " + names, unknown);
  }
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < task.dof(); ++i) {
    if (column_of[i] == SIZE_MAX) missing.push_back(task.params()[i].name);
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw SchemaError("missing columns: " + names, missing);
  }

  Dataset ds{task.id(), {}, std::nullopt};
  ds.examples.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw RowValidationError(r, "expected " + std::to_string(header.size()) + " fields, got " +
                                      std::to_string(row.size()));
    }
    Assignment x;
    x.reserve(task.dof());
    for (std::size_t i = 0; i < task.dof(); ++i) {
      const auto& p = task.params()[i];
      const std::string& field = row[column_of[i]];
      if (p.is_continuous()) {
        auto v = parse_double(field);
        if (!v) throw RowValidationError(r, "param '" + p.name + "': '" + field + "' is not a number");
        x.emplace_back(*v);
      } else {
        x.emplace_back(field);
      }
    }
    try {
      validate_assignment(task, x);
    } catch (const ValidationError& e) {
      throw RowValidationError(r, e.what());
    }
    auto y = parse_double(row.back());
    if (!y || !std::isfinite(*y)) {
      throw RowValidationError(r, "y value '" + row.back() + "' is not a finite number");
    }
    ds.examples.push_back({std::move(x), *y});
  }
  return ds;
}

void write_dataset_csv(const std::filesystem::path& path, const RegressionTask& task,
                       const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  csv::Row header;
  for (const auto& p : task.params()) header.push_back(p.name);
  header.push_back("y");
  out << csv::join(header) << '\n';
  for (const auto& e : ds.examples) {
    csv::Row row;
    for (const auto& v : e.x) {
      row.push_back(std::holds_alternative<double>(v) ? format_real(std::get<double>(v))
                                                       : std::get<std::string>(v));
    }
    row.push_back(format_real(e.y));
    out << csv::join(row) << '\n';
  }
}

RegressionTask task_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    const auto& source = j.at("source");
    const std::string type = source.at("type").get<std::string>();
    const std::string family = j.value("family", std::string{});
    if (type == "synthetic" && !j.contains("params")) {
      auto task = make_bbob_task(source.at("function").get<std::string>(),
                                 source.at("dof").get<std::size_t>());
      return RegressionTask(j.value("id", task.id()), task.params(), task.source(),
                            family.empty() ? task.family() : family);
    }
    std::vector<ParamSpec> params;
    for (const auto& p : j.at("params")) {
      const std::string kind = p.at("kind").get<std::string>();
      if (kind == "continuous") {
        params.push_back(ParamSpec::continuous(p.at("name").get<std::string>(),
                                               p.at("lo").get<double>(), p.at("hi").get<double>(),
                                               p.value("integer", false)));
      } else if (kind == "categorical") {
        params.push_back(ParamSpec::categorical(p.at("name").get<std::string>(),
                                                p.at("choices").get<std::vector<std::string>>()));
      } else {
        throw ValidationError("unknown param kind '" + kind + "'");
      }
    }
    TaskSource src;
    if (type == "synthetic") {
      src = SyntheticSource{source.at("function").get<std::string>()};
    } else if (type == "offline") {
      std::filesystem::path p = source.at("path").get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      src = OfflineSource{p};
    } else {
      throw ValidationError("unknown task source type '" + type + "'");
    }
    return RegressionTask(j.at("id").get<std::string>(), std::move(params), std::move(src), family);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("task spec: ") + e.what());
  }
}

nlohmann::json task_to_json(const RegressionTask& task) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : task.params()) {
    if (p.is_continuous()) {
      nlohmann::json item{{"name", p.name}, {"kind", "continuous"}, {"lo", p.range().lo},
                          {"hi", p.range().hi}};
      if (p.range().integer) item["integer"] = true;
      params.push_back(item);
    } else {
      params.push_back({{"name", p.name}, {"kind", "categorical"},
                        {"choices", p.categories().choices}});
    }
  }
  nlohmann::json source;
  if (const auto* syn = std::get_if<SyntheticSource>(&task.source())) {
    source = {{"type", "synthetic"}, {"function", syn->function_id}};
  } else {
    source = {{"type", "offline"},
              {"path", std::get<OfflineSource>(task.source()).data_path.generic_string()}};
  }
  return {{"id", task.id()}, {"family", task.family()}, {"params", params}, {"source", source}};
}

RegressionTask load_task_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open task spec " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("task spec " + path.string() + ": " + e.what());
  }
  return task_from_json(j, path.parent_path());
}

}  // namespace embedreg
