// embedreg command-line interface.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "embedreg/embedder.hpp"
#include "embedreg/error.hpp"
#include "embedreg/experiment.hpp"
#include "embedreg/mlp.hpp"
#include "embedreg/nlfd.hpp"
#include "embedreg/random.hpp"
#include "embedreg/task.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace embedreg;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  bool force = false;
  std::optional<std::string> string_format;
  std::optional<int> sig_digits;
  bool space_after_comma = false;
  std::size_t workers = 0;
};

struct TaskArgs {
  std::string task_spec;
  std::string function;
  std::size_t dof = 0;
  std::string data;
  std::size_t n = 500;
};

void add_task_args(CLI::App* cmd, TaskArgs& t) {
  cmd->add_option("--task", t.task_spec, "Task spec JSON file");
  cmd->add_option("--function", t.function, "Synthetic function id (with --dof)");
  cmd->add_option("--dof", t.dof, "Degrees of freedom for --function");
  cmd->add_option("--data", t.data, "Dataset CSV (header of param names plus y)");
  cmd->add_option("-n,--samples", t.n, "Uniform samples when no --data is given");
}

ExperimentConfig base_config(const Globals& g) {
  ExperimentConfig cfg = g.config.empty() ? ExperimentConfig::from_json(json::object(), fs::current_path())
                                          : ExperimentConfig::load(g.config);
  if (g.seed) cfg.base_seed = *g.seed;
  if (g.string_format) cfg.format.variant = StringFormat::parse_variant(*g.string_format);
  if (g.sig_digits) {
    if (*g.sig_digits < 1) throw ValidationError("--float-sig-digits must be positive");
    cfg.format.float_precision = *g.sig_digits;
  }
  if (g.space_after_comma) cfg.format.space_after_comma = true;
  if (g.workers > 0) cfg.workers = g.workers;
  return cfg;
}

RegressionTask resolve_task(const TaskArgs& t) {
  if (!t.task_spec.empty()) return load_task_spec(t.task_spec);
  if (t.function.empty() || t.dof == 0) {
    throw ValidationError("give --task <spec.json> or --function <id> --dof <n>");
  }
  return make_bbob_task(t.function, t.dof);
}

Dataset resolve_data(const RegressionTask& task, const TaskArgs& t, std::uint64_t seed) {
  if (!t.data.empty()) return ingest_offline(t.data, task);
  if (const auto* off = std::get_if<OfflineSource>(&task.source())) return ingest_offline(off->data_path, task);
  return sample_uniform(task, t.n, derive_seed(seed, "data"));
}

json parse_embedder_arg(const std::string& arg, const ExperimentConfig& cfg) {
  if (arg.empty()) {
    if (!cfg.embedders.empty()) return cfg.embedders.front();
    return json{{"type", "traditional"}};
  }
  if (arg.front() == '{') return json::parse(arg);
  if (fs::exists(arg)) {
    std::ifstream in(arg);
    return json::parse(in);
  }
  return json{{"type", arg}};
}

fs::path out_dir(const Globals& g) {
  fs::path dir = g.out;
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json metrics_json(const metrics::MetricBundle& m) {
  return {{"kendall_tau", m.kendall_tau}, {"spearman", m.spearman}, {"pearson", m.pearson},
          {"mse", m.mse}, {"mae", m.mae}};
}

int cmd_sample(const Globals& g, const TaskArgs& t) {
  const auto cfg = base_config(g);
  const auto task = resolve_task(t);
  const auto ds = sample_uniform(task, t.n, derive_seed(cfg.base_seed, "data"));
  const fs::path path = out_dir(g) / (task.id() + "_samples.csv");
  write_dataset_csv(path, task, ds);
  std::cout << path.string() << '\n';
  return 0;
}

int cmd_embed(const Globals& g, const TaskArgs& t, const std::string& emb_arg) {
  const auto cfg = base_config(g);
  const auto task = resolve_task(t);
  const auto ds = resolve_data(task, t, cfg.base_seed);
  const auto embedder = make_embedder(parse_embedder_arg(emb_arg, cfg), cfg.format);
  const auto m = embedder->embed(task, ds.inputs());
  const fs::path path = out_dir(g) / (task.id() + "_" + embedder->name() + "_embeddings.csv");
  std::ofstream out(path);
  out.precision(17);
  for (std::size_t c = 0; c < m.dim(); ++c) out << (c ? "," : "") << 'e' << c;
  out << ",y\n";
  const auto ys = ds.targets();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.dim(); ++c) {
      out << (c ? "," : "") << m.values()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    out << ',' << ys[r] << '\n';
  }
  std::cout << path.string() << " (" << m.rows() << " x " << m.dim() << ", " << m.provenance().str() << ")\n";
  return 0;
}

int cmd_train(const Globals& g, const TaskArgs& t, const std::string& emb_arg) {
  const auto cfg = base_config(g);
  const auto task = resolve_task(t);
  const auto ds = resolve_data(task, t, cfg.base_seed);
  const auto embedder = make_embedder(parse_embedder_arg(emb_arg, cfg), cfg.format);
  const auto parts = split_dataset(ds, cfg.split, derive_seed(cfg.base_seed, "split"));
  std::array<RowMatrix, 3> x;
  for (std::size_t k = 0; k < 3; ++k) x[k] = embedder->embed(task, parts[k].inputs()).values();
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.base_seed, "init");
  const auto result = train(x[0], parts[0].targets(), x[1], parts[1].targets(), tc);
  const auto report = make_report(result, x[2], parts[2].targets());

  const fs::path dir = out_dir(g);
  save_model(dir / "model.json", result, embedder->provenance());
  json sweep = json::array();
  for (const auto& s : report.sweep) {
    sweep.push_back({{"learning_rate", s.learning_rate}, {"weight_decay", s.weight_decay},
                     {"best_val_mse", s.diverged ? json(nullptr) : json(s.best_val_mse)},
                     {"best_epoch", s.best_epoch}, {"epochs_run", s.epochs_run}, {"diverged", s.diverged}});
  }
  write_json(dir / "report.json", {{"task", task.id()},
                                   {"embedder", embedder->provenance().str()},
                                   {"test", metrics_json(report.test)},
                                   {"learning_rate", report.learning_rate},
                                   {"weight_decay", report.weight_decay},
                                   {"epochs", report.epochs_run},
                                   {"sweep", sweep}});
  std::cout << "kendall_tau=" << report.test.kendall_tau << " lr=" << report.learning_rate
            << " wd=" << report.weight_decay << " -> " << (dir / "model.json").string() << '\n';
  return 0;
}

int cmd_nlfd(const Globals& g, const TaskArgs& t, const std::string& emb_arg,
             const std::string& against, std::size_t bins) {
  const auto cfg = base_config(g);
  const auto task = resolve_task(t);
  const auto ds = resolve_data(task, t, cfg.base_seed);
  const auto ys = ds.targets();
  const fs::path dir = out_dir(g);

  auto run_one = [&](const std::string& arg) {
    const auto embedder = make_embedder(parse_embedder_arg(arg, cfg), cfg.format);
    const auto sample = compute_nlfd(embedder->embed(task, ds.inputs()), ys);
    write_factors_csv(dir / ("nlfd_" + embedder->name() + "_factors.csv"), sample);
    write_histogram_csv(dir / ("nlfd_" + embedder->name() + "_histogram.csv"), histogram(sample, bins));
    return std::make_pair(embedder->name(), sample);
  };
  const auto [name_a, a] = run_one(emb_arg);
  json report{{"task", task.id()},
              {name_a, {{"mu", a.mu}, {"sigma", a.sigma}, {"n", a.size()}, {"d", a.d},
                        {"excluded", a.excluded_pairs}}}};
  std::cout << name_a << ": mu=" << a.mu << " sigma=" << a.sigma << " n=" << a.size()
            << " excluded=" << a.excluded_pairs << '\n';
  if (!against.empty()) {
    const auto [name_b, b] = run_one(against);
    const auto cmp = nlfd_zscore(a, b);
    report[name_b] = {{"mu", b.mu}, {"sigma", b.sigma}, {"n", b.size()}, {"d", b.d},
                      {"excluded", b.excluded_pairs}};
    report["z"] = cmp.z;
    std::cout << name_b << ": mu=" << b.mu << " sigma=" << b.sigma << " n=" << b.size()
              << " excluded=" << b.excluded_pairs << "\nz=" << cmp.z << '\n';
  }
  write_json(dir / "nlfd_report.json", report);
  return 0;
}

int cmd_runner(const Globals& g, const std::string& runner) {
  if (g.config.empty()) throw ValidationError(runner + " needs --config <file>");
  const auto cfg = base_config(g);
  RunOptions opts;
  opts.out_root = g.out;
  opts.force = g.force;
  opts.log = &std::cerr;
  const auto s = run_experiment(runner, cfg, opts);
  std::cout << s.dir.string() << '\n'
            << "cells=" << s.cells << " executed=" << s.executed << " reused=" << s.reused
            << " failed=" << s.failed << '\n';
  for (const auto& p : s.outputs) std::cout << "  " << p.string() << '\n';
  return s.failed == 0 ? 0 : 3;
}

int cmd_report(const std::string& run_dir) {
  const auto s = regenerate_report(run_dir, &std::cerr);
  std::cout << s.dir.string() << "\ncells=" << s.cells << " recorded=" << s.reused
            << " failed=" << s.failed << '\n';
  for (const auto& p : s.outputs) std::cout << "  " << p.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding-based regression benchmarks and NLFD diagnostics"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Experiment config JSON");
  app.add_option("--seed", g.seed, "Base seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--force", g.force, "Re-run cells that already have records");
  app.add_option("--string-format", g.string_format, "Serialization: full | values")
      ->check(CLI::IsMember({"full", "values"}));
  app.add_option("--float-sig-digits", g.sig_digits, "Significant digits for reals");
  app.add_flag("--space-after-comma", g.space_after_comma, "Use ', ' between serialized fields");
  app.add_option("--workers", g.workers, "Cells run concurrently");

  TaskArgs task_args;
  std::string emb_arg, against, run_dir;
  std::size_t bins = 20;

  auto* sample = app.add_subcommand("sample", "Sample a synthetic task uniformly into a CSV");
  add_task_args(sample, task_args);
  auto* embed = app.add_subcommand("embed", "Embed a dataset and write the matrix as CSV");
  add_task_args(embed, task_args);
  embed->add_option("--embedder", emb_arg, "Embedder type, spec file or inline JSON");
  auto* trn = app.add_subcommand("train", "Train the MLP head with the hyperparameter sweep");
  add_task_args(trn, task_args);
  trn->add_option("--embedder", emb_arg, "Embedder type, spec file or inline JSON");
  auto* nl = app.add_subcommand("nlfd", "Lipschitz factor distribution of one or two embedders");
  add_task_args(nl, task_args);
  nl->add_option("--embedder", emb_arg, "Embedder type, spec file or inline JSON");
  nl->add_option("--against", against, "Second embedder; reports the z-score of the pair");
  nl->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);
  for (const auto& r : runner_names()) app.add_subcommand(r, "Run the " + r + " experiment from --config");
  auto* report = app.add_subcommand("report", "Rebuild summary CSVs from a run directory");
  report->add_option("--run", run_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "sample") return cmd_sample(g, task_args);
    if (name == "embed") return cmd_embed(g, task_args, emb_arg);
    if (name == "train") return cmd_train(g, task_args, emb_arg);
    if (name == "nlfd") return cmd_nlfd(g, task_args, emb_arg, against, bins);
    if (name == "report") return cmd_report(run_dir);
    return cmd_runner(g, name);
  } catch (const json::exception& e) {
    std::cerr << "error: invalid JSON: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
