#include "embedreg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "embedreg/bbob.hpp"
#include "embedreg/csv.hpp"
#include "embedreg/embedder.hpp"
#include "embedreg/error.hpp"
#include "embedreg/hash.hpp"
#include "embedreg/metrics.hpp"
#include "embedreg/nlfd.hpp"
#include "embedreg/random.hpp"

namespace embedreg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys{
    "functions", "dofs", "tasks", "embedders", "samples", "seeds", "base_seed", "train",
    "string_format", "float_sig_digits", "space_after_comma", "split", "train_sizes",
    "formats", "nlfd_split", "workers"};

const std::set<std::string> kTrainKeys{"learning_rates", "weight_decays", "max_epochs",
                                       "patience", "batch_size", "hidden", "threads"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ValidationError(where + ": unknown key '" + k + "'");
  }
}

std::string embedder_name(const json& spec) {
  return spec.value("name", spec.value("type", std::string{}));
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

class CsvOut {
 public:
  explicit CsvOut(const fs::path& path) : path_(path), out_(path) {
    if (!out_) throw Error("cannot write " + path.string());
  }
  void row(const csv::Row& fields) { out_ << csv::join(fields) << '\n'; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::ofstream out_;
};

struct CellPlan {
  std::size_t task = 0;
  std::size_t embedder = 0;
  std::size_t format = 0;  // index into Plan::formats
  std::size_t size = 0;    // index into Plan::sizes
  std::uint64_t seed = 0;
};

struct Plan {
  std::string runner;
  ExperimentConfig cfg;
  std::vector<RegressionTask> tasks;
  std::vector<std::string> embedders;
  std::vector<std::string> formats;  // "default" unless ablating
  std::vector<std::size_t> sizes;    // 0 means the whole training split
  std::vector<CellPlan> cells;

  std::string key(const CellPlan& c) const {
    return tasks[c.task].id() + "|" + embedders[c.embedder] + "|" + formats[c.format] + "|" +
           std::to_string(sizes[c.size]) + "|" + std::to_string(c.seed);
  }
};

Plan make_plan(const std::string& runner, const ExperimentConfig& cfg) {
  Plan p;
  p.runner = runner;
  p.cfg = cfg;
  p.tasks = cfg.build_tasks();
  for (const auto& spec : cfg.embedders) p.embedders.push_back(embedder_name(spec));
  p.formats = {"default"};
  p.sizes = {0};

  const auto require_synthetic = [&] {
    for (const auto& t : p.tasks) {
      if (!t.is_synthetic()) throw ValidationError(runner + ": task '" + t.id() + "' is not synthetic");
    }
  };
  if (p.tasks.empty()) throw ValidationError(runner + ": no tasks configured");
  if (cfg.seeds.empty()) throw ValidationError(runner + ": no seeds configured");
  if (runner == "sweep-dof") {
    require_synthetic();
    if (p.embedders.empty()) throw ValidationError("sweep-dof: needs at least one embedder");
  } else if (runner == "compare") {
    if (p.embedders.size() < 2) throw ValidationError("compare: needs at least two embedders");
  } else if (runner == "nlfd-corr") {
    require_synthetic();
    if (p.embedders.size() != 2) throw ValidationError("nlfd-corr: needs exactly two embedders");
    if (p.tasks.size() < 3) {
      throw UndefinedMetricError("nlfd-corr: correlation across tasks needs at least 3 tasks");
    }
  } else if (runner == "scale-data") {
    if (p.embedders.size() < 2) throw ValidationError("scale-data: needs at least two embedders");
    if (cfg.train_sizes.empty()) throw ValidationError("scale-data: train_sizes is empty");
    p.sizes = cfg.train_sizes;
  } else if (runner == "ablate") {
    if (p.embedders.empty()) throw ValidationError("ablate: needs at least one embedder");
    if (cfg.formats.empty()) throw ValidationError("ablate: formats is empty");
    p.formats = cfg.formats;
  } else {
    throw ValidationError("unknown runner '" + runner + "'");
  }

  for (std::size_t t = 0; t < p.tasks.size(); ++t) {
    for (std::size_t s = 0; s < p.sizes.size(); ++s) {
      for (std::size_t f = 0; f < p.formats.size(); ++f) {
        for (std::size_t e = 0; e < p.embedders.size(); ++e) {
          for (auto seed : cfg.seeds) p.cells.push_back({t, e, f, s, seed});
        }
      }
    }
  }
  return p;
}

std::unique_ptr<Embedder> build_embedder(const Plan& p, std::size_t e, std::size_t f) {
  json spec = p.cfg.embedders[e];
  if (p.formats[f] != "default") spec["string_format"] = p.formats[f];
  return make_embedder(spec, p.cfg.format);
}

// Per-(task, seed) base seed; data and split streams are shared by every embedder.
std::uint64_t cell_base_seed(const ExperimentConfig& cfg, const RegressionTask& task,
                             std::uint64_t seed) {
  return derive_seed(cfg.base_seed, task.id() + "#" + std::to_string(seed));
}

RowMatrix stack_rows(const std::vector<const RowMatrix*>& parts) {
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front()->cols();
  for (const auto* m : parts) rows += m->rows();
  RowMatrix out(rows, cols);
  Eigen::Index r = 0;
  for (const auto* m : parts) {
    out.middleRows(r, m->rows()) = *m;
    r += m->rows();
  }
  return out;
}

json run_cell(const Plan& p, const CellPlan& c, const Embedder& embedder,
              const std::optional<Dataset>& offline) {
  const RegressionTask& task = p.tasks[c.task];
  const auto& cfg = p.cfg;
  json rec{{"key", p.key(c)},
           {"task", task.id()},
           {"family", task.family()},
           {"dof", task.dof()},
           {"embedder", p.embedders[c.embedder]},
           {"provenance", embedder.provenance().str()},
           {"format", p.formats[c.format]},
           {"train_size", p.sizes[c.size]},
           {"seed", c.seed}};
  try {
    const std::uint64_t base = cell_base_seed(cfg, task, c.seed);
    Dataset ds;
    if (task.is_synthetic()) {
      ds = sample_uniform(task, cfg.samples, derive_seed(base, "data"));
    } else if (offline) {
      ds = *offline;
    } else {
      throw Error("offline data for task '" + task.id() + "' could not be loaded");
    }
    auto parts = split_dataset(ds, cfg.split, derive_seed(base, "split"));
    const std::size_t want = p.sizes[c.size];
    if (want > 0) {
      if (want > parts[0].size()) {
        throw ValidationError("train_size " + std::to_string(want) + " exceeds the " +
                              std::to_string(parts[0].size()) + "-example training split");
      }
      parts[0].examples.resize(want);
    }
    std::array<RowMatrix, 3> x;
    std::array<std::vector<double>, 3> y;
    for (std::size_t k = 0; k < 3; ++k) {
      x[k] = embedder.embed(task, parts[k].inputs()).values();
      y[k] = parts[k].targets();
    }
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(base, "init");
    const TrainResult trained = train(x[0], y[0], x[1], y[1], tc);
    const RegressionReport report = make_report(trained, x[2], y[2]);

    rec["status"] = "ok";
    rec["metrics"] = {{"kendall_tau", report.test.kendall_tau},
                      {"spearman", report.test.spearman},
                      {"pearson", report.test.pearson},
                      {"mse", report.test.mse},
                      {"mae", report.test.mae}};
    rec["learning_rate"] = report.learning_rate;
    rec["weight_decay"] = report.weight_decay;
    rec["epochs"] = report.epochs_run;
    rec["sizes"] = {parts[0].size(), parts[1].size(), parts[2].size()};

    try {
      RowMatrix pool_x;
      std::vector<double> pool_y;
      if (cfg.nlfd_split == "all") {
        pool_x = stack_rows({&x[0], &x[1], &x[2]});
        for (const auto& v : y) pool_y.insert(pool_y.end(), v.begin(), v.end());
      } else {
        const std::size_t k = cfg.nlfd_split == "train" ? 0 : cfg.nlfd_split == "validation" ? 1 : 2;
        pool_x = x[k];
        pool_y = y[k];
      }
      const NlfdSample s = compute_nlfd(EmbeddingMatrix(std::move(pool_x), embedder.provenance()), pool_y);
      rec["nlfd"] = {{"mu", s.mu}, {"sigma", s.sigma}, {"n", s.size()}, {"excluded", s.excluded_pairs}};
    } catch (const Error& e) {
      rec["nlfd"] = nullptr;
      rec["nlfd_error"] = e.what();
    }
  } catch (const std::exception& e) {
    rec["status"] = "failed";
    rec["error"] = e.what();
  }
  rec["timestamp"] = timestamp_utc();
  return rec;
}

std::map<std::string, json> load_records(const fs::path& path) {
  std::map<std::string, json> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) continue;  // torn write
    const auto key = rec.find("key");
    if (key == rec.end() || !key->is_string()) continue;
    std::string k = key->get<std::string>();
    out[k] = std::move(rec);
  }
  return out;
}

bool is_ok(const json* rec) { return rec && rec->value("status", std::string{}) == "ok"; }

double kendall_of(const json& rec) { return rec.at("metrics").at("kendall_tau").get<double>(); }

// Indexed view over the results of a plan: records[i] belongs to plan.cells[i].
struct Results {
  const Plan& plan;
  std::vector<const json*> records;

  const json* find(std::size_t task, std::size_t emb, std::size_t fmt, std::size_t size,
                   std::uint64_t seed) const {
    for (std::size_t i = 0; i < plan.cells.size(); ++i) {
      const auto& c = plan.cells[i];
      if (c.task == task && c.embedder == emb && c.format == fmt && c.size == size && c.seed == seed) {
        return records[i];
      }
    }
    return nullptr;
  }

  std::vector<double> kendalls(std::size_t task, std::size_t emb, std::size_t fmt,
                               std::size_t size) const {
    std::vector<double> out;
    for (auto seed : plan.cfg.seeds) {
      const json* r = find(task, emb, fmt, size, seed);
      if (is_ok(r)) out.push_back(kendall_of(*r));
    }
    return out;
  }

  // Paired per-seed values K(b) - K(a).
  std::vector<double> gaps(std::size_t task, std::size_t a, std::size_t b, std::size_t size) const {
    std::vector<double> out;
    for (auto seed : plan.cfg.seeds) {
      const json* ra = find(task, a, 0, size, seed);
      const json* rb = find(task, b, 0, size, seed);
      if (is_ok(ra) && is_ok(rb)) out.push_back(kendall_of(*rb) - kendall_of(*ra));
    }
    return out;
  }
};

fs::path write_cells_csv(const Results& r, const fs::path& dir) {
  CsvOut out(dir / "cells.csv");
  out.row({"task", "family", "dof", "embedder", "format", "train_size", "seed", "status",
           "kendall_tau", "spearman", "pearson", "mse", "mae", "learning_rate", "weight_decay",
           "epochs", "nlfd_mu", "nlfd_sigma", "nlfd_n", "nlfd_excluded", "error"});
  const Plan& p = r.plan;
  for (std::size_t i = 0; i < p.cells.size(); ++i) {
    const auto& c = p.cells[i];
    const json* rec = r.records[i];
    const auto& task = p.tasks[c.task];
    csv::Row row{task.id(), task.family(), std::to_string(task.dof()), p.embedders[c.embedder],
                 p.formats[c.format], std::to_string(p.sizes[c.size]), std::to_string(c.seed)};
    if (!rec) {
      row.push_back("missing");
      row.resize(21);
    } else if (!is_ok(rec)) {
      row.push_back("failed");
      row.resize(20);
      row.push_back(rec->value("error", std::string{}));
    } else {
      row.push_back("ok");
      for (const auto& m : metrics::metric_names()) row.push_back(num((*rec)["metrics"][m].get<double>()));
      row.push_back(num((*rec)["learning_rate"].get<double>()));
      row.push_back(num((*rec)["weight_decay"].get<double>()));
      row.push_back(std::to_string((*rec)["epochs"].get<std::size_t>()));
      const json& nl = (*rec)["nlfd"];
      if (nl.is_object()) {
        row.push_back(num(nl["mu"].get<double>()));
        row.push_back(num(nl["sigma"].get<double>()));
        row.push_back(std::to_string(nl["n"].get<std::size_t>()));
        row.push_back(std::to_string(nl["excluded"].get<std::size_t>()));
        row.push_back("");
      } else {
        row.resize(19);
        row.push_back("");
        row.push_back(rec->value("nlfd_error", std::string{}));
      }
    }
    out.row(row);
  }
  return out.path();
}

std::vector<fs::path> summarize_sweep(const Results& r, const fs::path& dir) {
  const Plan& p = r.plan;
  CsvOut out(dir / "summary.csv");
  out.row({"function", "dof", "task", "embedder", "runs", "failed", "mean_kendall", "sd_kendall",
           "complete"});
  for (std::size_t t = 0; t < p.tasks.size(); ++t) {
    for (std::size_t e = 0; e < p.embedders.size(); ++e) {
      const auto ks = r.kendalls(t, e, 0, 0);
      const std::size_t runs = p.cfg.seeds.size();
      const bool complete = ks.size() == runs;
      out.row({p.tasks[t].family(), std::to_string(p.tasks[t].dof()), p.tasks[t].id(),
               p.embedders[e], std::to_string(runs), std::to_string(runs - ks.size()),
               ks.empty() ? "nan" : num(mean_of(ks)), ks.empty() ? "nan" : num(sd_of(ks)),
               complete ? "true" : "false"});
    }
  }
  return {out.path()};
}

std::vector<std::string> families_in_order(const Plan& p) {
  std::vector<std::string> out;
  for (const auto& t : p.tasks) {
    if (std::find(out.begin(), out.end(), t.family()) == out.end()) out.push_back(t.family());
  }
  return out;
}

std::vector<fs::path> summarize_comparison(const Results& r, const fs::path& dir) {
  const Plan& p = r.plan;
  const std::size_t n_emb = p.embedders.size();
  // Per-task mean Kendall; nullopt when no seed completed.
  std::vector<std::vector<std::optional<double>>> means(p.tasks.size(),
                                                        std::vector<std::optional<double>>(n_emb));
  CsvOut per_task(dir / "per_task.csv");
  per_task.row({"task", "family", "embedder", "runs", "mean_kendall"});
  for (std::size_t t = 0; t < p.tasks.size(); ++t) {
    for (std::size_t e = 0; e < n_emb; ++e) {
      const auto ks = r.kendalls(t, e, 0, 0);
      if (!ks.empty()) means[t][e] = mean_of(ks);
      per_task.row({p.tasks[t].id(), p.tasks[t].family(), p.embedders[e], std::to_string(ks.size()),
                    ks.empty() ? "nan" : num(mean_of(ks))});
    }
  }

  const auto families = families_in_order(p);
  CsvOut outperf(dir / "outperformance.csv");
  outperf.row({"family", "challenger", "baseline", "tasks", "outperform_pct"});
  for (const auto& fam : families) {
    for (std::size_t e = 1; e < n_emb; ++e) {
      std::vector<double> a, b;
      for (std::size_t t = 0; t < p.tasks.size(); ++t) {
        if (p.tasks[t].family() != fam || !means[t][e] || !means[t][0]) continue;
        a.push_back(*means[t][e]);
        b.push_back(*means[t][0]);
      }
      outperf.row({fam, p.embedders[e], p.embedders[0], std::to_string(a.size()),
                   a.empty() ? "nan" : num(metrics::outperformance_percentage(a, b))});
    }
  }

  CsvOut agg(dir / "mean_kendall.csv");
  agg.row({"family", "embedder", "tasks", "mean", "median", "p40", "p60"});
  auto families_all = families;
  families_all.push_back("all");
  for (const auto& fam : families_all) {
    for (std::size_t e = 0; e < n_emb; ++e) {
      std::vector<double> v;
      for (std::size_t t = 0; t < p.tasks.size(); ++t) {
        if ((fam == "all" || p.tasks[t].family() == fam) && means[t][e]) v.push_back(*means[t][e]);
      }
      if (v.empty()) {
        agg.row({fam, p.embedders[e], "0", "nan", "nan", "nan", "nan"});
        continue;
      }
      const auto d = metrics::summarize(v);
      agg.row({fam, p.embedders[e], std::to_string(d.count), num(d.mean), num(d.median), num(d.p40),
               num(d.p60)});
    }
  }
  return {per_task.path(), outperf.path(), agg.path()};
}

std::vector<fs::path> summarize_nlfd_corr(const Results& r, const fs::path& dir) {
  const Plan& p = r.plan;
  CsvOut scatter(dir / "scatter.csv");
  scatter.row({"task", "family", "dof", "pairs", "z", "gap", "kendall_a", "kendall_b", "nlfd_mu_a",
               "nlfd_mu_b"});
  std::vector<double> zs, gaps;
  for (std::size_t t = 0; t < p.tasks.size(); ++t) {
    std::vector<double> z, ka, kb, mua, mub;
    for (auto seed : p.cfg.seeds) {
      const json* ra = r.find(t, 0, 0, 0, seed);
      const json* rb = r.find(t, 1, 0, 0, seed);
      if (!is_ok(ra) || !is_ok(rb) || !(*ra)["nlfd"].is_object() || !(*rb)["nlfd"].is_object()) continue;
      const auto summary = [](const json& nl) {
        return NlfdSummary{nl["mu"].get<double>(), nl["sigma"].get<double>(), nl["n"].get<std::size_t>()};
      };
      try {
        z.push_back(nlfd_zscore(summary((*ra)["nlfd"]), summary((*rb)["nlfd"])).z);
      } catch (const Error&) {
        continue;
      }
      ka.push_back(kendall_of(*ra));
      kb.push_back(kendall_of(*rb));
      mua.push_back((*ra)["nlfd"]["mu"].get<double>());
      mub.push_back((*rb)["nlfd"]["mu"].get<double>());
    }
    const auto& task = p.tasks[t];
    if (z.empty()) {
      scatter.row({task.id(), task.family(), std::to_string(task.dof()), "0", "nan", "nan", "nan",
                   "nan", "nan", "nan"});
      continue;
    }
    const double gap = mean_of(kb) - mean_of(ka);
    zs.push_back(mean_of(z));
    gaps.push_back(gap);
    scatter.row({task.id(), task.family(), std::to_string(task.dof()), std::to_string(z.size()),
                 num(zs.back()), num(gap), num(mean_of(ka)), num(mean_of(kb)), num(mean_of(mua)),
                 num(mean_of(mub))});
  }

  CsvOut corr(dir / "correlation.csv");
  corr.row({"statistic", "value", "tasks"});
  const auto guarded = [&](double (*fn)(std::span<const double>, std::span<const double>)) {
    try {
      if (zs.size() < 3) return std::string("undefined");
      return num(fn(zs, gaps));
    } catch (const Error&) {
      return std::string("undefined");
    }
  };
  corr.row({"kendall", guarded(&metrics::kendall_tau), std::to_string(zs.size())});
  corr.row({"spearman", guarded(&metrics::spearman), std::to_string(zs.size())});
  corr.row({"pearson", guarded(&metrics::pearson), std::to_string(zs.size())});
  return {scatter.path(), corr.path()};
}

std::vector<fs::path> summarize_scaling(const Results& r, const fs::path& dir) {
  const Plan& p = r.plan;
  CsvOut out(dir / "gaps.csv");
  out.row({"train_size", "pairs", "gap_mean", "gap_sd", "lo_0.5sd", "hi_0.5sd", "lo_1sd", "hi_1sd",
           "lo_2sd", "hi_2sd", "mean_kendall_a", "mean_kendall_b"});
  for (std::size_t s = 0; s < p.sizes.size(); ++s) {
    std::vector<double> g, ka, kb;
    for (std::size_t t = 0; t < p.tasks.size(); ++t) {
      const auto gt = r.gaps(t, 0, 1, s);
      g.insert(g.end(), gt.begin(), gt.end());
      const auto a = r.kendalls(t, 0, 0, s);
      const auto b = r.kendalls(t, 1, 0, s);
      ka.insert(ka.end(), a.begin(), a.end());
      kb.insert(kb.end(), b.begin(), b.end());
    }
    csv::Row row{std::to_string(p.sizes[s]), std::to_string(g.size())};
    if (g.empty()) {
      row.resize(12, "nan");
    } else {
      const GapBands b = gap_bands(g);
      row.push_back(num(b.mean));
      row.push_back(num(b.sd));
      for (double k : {0.5, 1.0, 2.0}) {
        row.push_back(num(b.mean - k * b.sd));
        row.push_back(num(b.mean + k * b.sd));
      }
      row.push_back(ka.empty() ? "nan" : num(mean_of(ka)));
      row.push_back(kb.empty() ? "nan" : num(mean_of(kb)));
    }
    out.row(row);
  }
  return {out.path()};
}

std::vector<fs::path> summarize_ablation(const Results& r, const fs::path& dir) {
  const Plan& p = r.plan;
  CsvOut out(dir / "ablation.csv");
  out.row({"task", "embedder", "format", "runs", "mean_kendall", "delta_vs_first_format",
           "delta_vs_first_embedder"});
  for (std::size_t t = 0; t < p.tasks.size(); ++t) {
    const auto mean_or_nan = [&](std::size_t e, std::size_t f) {
      const auto ks = r.kendalls(t, e, f, 0);
      return ks.empty() ? std::nan("") : mean_of(ks);
    };
    for (std::size_t e = 0; e < p.embedders.size(); ++e) {
      for (std::size_t f = 0; f < p.formats.size(); ++f) {
        const double m = mean_or_nan(e, f);
        out.row({p.tasks[t].id(), p.embedders[e], p.formats[f],
                 std::to_string(r.kendalls(t, e, f, 0).size()), num(m), num(m - mean_or_nan(e, 0)),
                 num(m - mean_or_nan(0, f))});
      }
    }
  }
  return {out.path()};
}

std::vector<fs::path> write_summaries(const Results& r, const fs::path& dir) {
  std::vector<fs::path> out{write_cells_csv(r, dir)};
  std::vector<fs::path> more;
  const auto& runner = r.plan.runner;
  if (runner == "sweep-dof") more = summarize_sweep(r, dir);
  else if (runner == "compare") more = summarize_comparison(r, dir);
  else if (runner == "nlfd-corr") more = summarize_nlfd_corr(r, dir);
  else if (runner == "scale-data") more = summarize_scaling(r, dir);
  else if (runner == "ablate") more = summarize_ablation(r, dir);
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

void log_line(std::ostream* log, const std::string& s) {
  if (log) *log << s << std::endl;
}

fs::path run_dir_for(const std::string& runner, const std::string& hash, const fs::path& root) {
  return root / (runner + "-" + hash.substr(0, 16));
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, kConfigKeys, "experiment config");
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  try {
    cfg.functions = j.value("functions", cfg.functions);
    cfg.dofs = j.value("dofs", cfg.dofs);
    if (j.contains("tasks")) cfg.tasks = j["tasks"].get<std::vector<json>>();
    if (j.contains("embedders")) {
      cfg.embedders = j["embedders"].get<std::vector<json>>();
    } else {
      cfg.embedders = {json{{"type", "traditional"}}};
    }
    cfg.samples = j.value("samples", cfg.samples);
    if (!j.contains("seeds")) {
      for (std::uint64_t s = 0; s < 12; ++s) cfg.seeds.push_back(s);
    } else if (j["seeds"].is_number_integer()) {
      const auto n = j["seeds"].get<std::int64_t>();
      if (n <= 0) throw ValidationError("seeds count must be positive");
      for (std::int64_t s = 0; s < n; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    } else {
      cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    }
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    if (j.contains("train")) {
      const json& t = j["train"];
      check_keys(t, kTrainKeys, "train");
      cfg.train.learning_rates = t.value("learning_rates", cfg.train.learning_rates);
      cfg.train.weight_decays = t.value("weight_decays", cfg.train.weight_decays);
      cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
      cfg.train.patience = t.value("patience", cfg.train.patience);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.hidden = t.value("hidden", cfg.train.hidden);
      cfg.train.threads = t.value("threads", cfg.train.threads);
    }
    cfg.format = string_format_from_json(j);
    if (j.contains("split")) {
      const auto v = j["split"].get<std::vector<double>>();
      if (v.size() != 3) throw ValidationError("split must have three ratios");
      cfg.split = {v[0], v[1], v[2]};
    }
    cfg.train_sizes = j.value("train_sizes", cfg.train_sizes);
    cfg.formats = j.value("formats", cfg.formats);
    cfg.nlfd_split = j.value("nlfd_split", cfg.nlfd_split);
    cfg.workers = j.value("workers", cfg.workers);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }

  if (!cfg.functions.empty() && cfg.dofs.empty()) cfg.dofs = {5, 10, 25, 50, 100};
  if (cfg.functions.empty() && cfg.tasks.empty() && !cfg.dofs.empty()) cfg.functions = bbob::catalog_ids();
  for (const auto& f : cfg.functions) {
    if (!bbob::Registry::instance().contains(f)) throw ValidationError("unknown function '" + f + "'");
  }
  for (auto d : cfg.dofs) {
    if (d == 0) throw ValidationError("dofs must be positive");
  }
  if (cfg.samples < 10) throw ValidationError("samples must be at least 10");
  cfg.train.validate();
  for (const auto& f : cfg.formats) StringFormat::parse_variant(f);
  if (cfg.nlfd_split != "all" && cfg.nlfd_split != "train" && cfg.nlfd_split != "validation" &&
      cfg.nlfd_split != "test") {
    throw ValidationError("nlfd_split must be all, train, validation or test");
  }
  std::set<std::string> names;
  for (const auto& spec : cfg.embedders) {
    if (!spec.is_object() || !spec.contains("type")) throw ValidationError("embedder spec needs a type");
    if (!names.insert(embedder_name(spec)).second) {
      throw ValidationError("duplicate embedder name '" + embedder_name(spec) + "'");
    }
  }
  std::set<std::uint64_t> seen;
  for (auto s : cfg.seeds) {
    if (!seen.insert(s).second) throw ValidationError("duplicate seed " + std::to_string(s));
  }
  if (cfg.workers == 0) cfg.workers = 1;
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("config " + path.string() + " is not valid JSON");
  return from_json(j, fs::absolute(path).parent_path());
}

json ExperimentConfig::to_json() const {
  json fmt;
  fmt["string_format"] = StringFormat::variant_name(format.variant);
  fmt["float_sig_digits"] = format.float_precision;
  fmt["space_after_comma"] = format.space_after_comma;
  json j{{"functions", functions},
         {"dofs", dofs},
         {"tasks", tasks},
         {"embedders", embedders},
         {"samples", samples},
         {"seeds", seeds},
         {"base_seed", base_seed},
         {"train",
          {{"learning_rates", train.learning_rates},
           {"weight_decays", train.weight_decays},
           {"max_epochs", train.max_epochs},
           {"patience", train.patience},
           {"batch_size", train.batch_size},
           {"hidden", train.hidden}}},
         {"split", std::vector<double>(split.begin(), split.end())},
         {"train_sizes", train_sizes},
         {"formats", formats},
         {"nlfd_split", nlfd_split}};
  j.update(fmt);
  return j;
}

std::vector<RegressionTask> ExperimentConfig::build_tasks() const {
  std::vector<RegressionTask> out;
  for (const auto& f : functions) {
    for (auto d : dofs) out.push_back(make_bbob_task(f, d));
  }
  for (const auto& t : tasks) {
    if (t.is_string()) {
      fs::path path = t.get<std::string>();
      if (path.is_relative()) path = base_dir / path;
      out.push_back(load_task_spec(path));
    } else {
      out.push_back(task_from_json(t, base_dir));
    }
  }
  std::set<std::string> ids;
  for (const auto& t : out) {
    if (!ids.insert(t.id()).second) throw ValidationError("duplicate task id '" + t.id() + "'");
  }
  return out;
}

const std::vector<std::string>& runner_names() {
  static const std::vector<std::string> names{"sweep-dof", "compare", "nlfd-corr", "scale-data",
                                              "ablate"};
  return names;
}

std::string experiment_hash(const std::string& runner, const ExperimentConfig& cfg) {
  std::string material = runner + "\n" + cfg.to_json().dump() + "\n" + kCodeVersion + "\n";
  for (const auto& spec : cfg.embedders) material += make_embedder(spec, cfg.format)->provenance().str() + "\n";
  for (const auto& task : cfg.build_tasks()) {
    if (const auto* off = std::get_if<OfflineSource>(&task.source())) {
      std::ifstream in(off->data_path, std::ios::binary);
      std::ostringstream bytes;
      bytes << in.rdbuf();
      material += task.id() + ":" + sha256_hex(bytes.str()) + "\n";
    }
  }
  return sha256_hex(material);
}

GapBands gap_bands(const std::vector<double>& gaps) {
  if (gaps.empty()) throw EmptyInputError("gap_bands: no gaps");
  return {mean_of(gaps), sd_of(gaps), gaps.size()};
}

RunSummary run_experiment(const std::string& runner, const ExperimentConfig& cfg,
                          const RunOptions& opts) {
  Plan plan = make_plan(runner, cfg);
  RunSummary summary;
  summary.runner = runner;
  summary.config_hash = experiment_hash(runner, cfg);
  summary.dir = run_dir_for(runner, summary.config_hash, opts.out_root);
  summary.cells = plan.cells.size();
  fs::create_directories(summary.dir);
  const fs::path records_path = summary.dir / "records.jsonl";
  if (opts.force) fs::remove(records_path);

  {
    std::ofstream meta(summary.dir / "config.json");
    meta << json{{"runner", runner},
                 {"config", cfg.to_json()},
                 {"config_hash", summary.config_hash},
                 {"code_version", kCodeVersion},
                 {"base_dir", (cfg.base_dir.empty() ? fs::current_path() : fs::absolute(cfg.base_dir)).string()}}
                .dump(2)
         << '\n';
  }

  const auto existing = load_records(records_path);
  std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<Embedder>> embedders;
  for (std::size_t e = 0; e < plan.embedders.size(); ++e) {
    for (std::size_t f = 0; f < plan.formats.size(); ++f) embedders[{e, f}] = build_embedder(plan, e, f);
  }
  std::vector<std::optional<Dataset>> offline(plan.tasks.size());
  for (std::size_t t = 0; t < plan.tasks.size(); ++t) {
    if (const auto* off = std::get_if<OfflineSource>(&plan.tasks[t].source())) {
      try {
        offline[t] = ingest_offline(off->data_path, plan.tasks[t]);
      } catch (const Error& e) {
        log_line(opts.log, "offline data for " + plan.tasks[t].id() + " failed to load: " + e.what());
      }
    }
  }

  std::vector<json> fresh(plan.cells.size());
  std::vector<const json*> records(plan.cells.size(), nullptr);
  std::ofstream append(records_path, std::ios::app);
  if (!append) throw Error("cannot write " + records_path.string());
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;

  auto worker = [&] {
    for (std::size_t i = next++; i < plan.cells.size(); i = next++) {
      const auto& c = plan.cells[i];
      const std::string key = plan.key(c);
      const auto hit = existing.find(key);
      if (hit != existing.end() && is_ok(&hit->second)) {
        std::lock_guard lock(mu);
        records[i] = &hit->second;
        ++summary.reused;
        ++done;
        continue;
      }
      const auto t0 = std::chrono::steady_clock::now();
      json rec = run_cell(plan, c, *embedders.at({c.embedder, c.format}), offline[c.task]);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard lock(mu);
      append << rec.dump() << '\n' << std::flush;
      fresh[i] = std::move(rec);
      records[i] = &fresh[i];
      ++summary.executed;
      ++done;
      const bool ok = is_ok(records[i]);
      if (!ok) ++summary.failed;
      char timing[32];
      std::snprintf(timing, sizeof timing, "%.1fs", secs);
      log_line(opts.log, "[" + std::to_string(done) + "/" + std::to_string(plan.cells.size()) + "] " +
                             key + " " +
                             (ok ? "kendall=" + num(kendall_of(fresh[i]))
                                 : "FAILED: " + fresh[i].value("error", std::string{})) +
                             " (" + timing + ")");
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.workers, plan.cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  summary.outputs = write_summaries(Results{plan, records}, summary.dir);
  return summary;
}

RunSummary run_dof_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
  return run_experiment("sweep-dof", cfg, opts);
}
RunSummary run_comparison(const ExperimentConfig& cfg, const RunOptions& opts) {
  return run_experiment("compare", cfg, opts);
}
RunSummary run_nlfd_correlation(const ExperimentConfig& cfg, const RunOptions& opts) {
  return run_experiment("nlfd-corr", cfg, opts);
}
RunSummary run_data_scaling(const ExperimentConfig& cfg, const RunOptions& opts) {
  return run_experiment("scale-data", cfg, opts);
}
RunSummary run_ablation(const ExperimentConfig& cfg, const RunOptions& opts) {
  return run_experiment("ablate", cfg, opts);
}

RunSummary regenerate_report(const fs::path& run_dir, std::ostream* log) {
  std::ifstream in(run_dir / "config.json");
  if (!in) throw Error("no config.json in " + run_dir.string());
  const json meta = json::parse(in, nullptr, false);
  if (meta.is_discarded() || !meta.contains("runner") || !meta.contains("config")) {
    throw ValidationError(run_dir.string() + "/config.json is malformed");
  }
  const std::string runner = meta["runner"].get<std::string>();
  const auto cfg = ExperimentConfig::from_json(meta["config"], meta.value("base_dir", std::string{}));
  const Plan plan = make_plan(runner, cfg);
  const auto existing = load_records(run_dir / "records.jsonl");

  RunSummary summary;
  summary.runner = runner;
  summary.dir = run_dir;
  summary.config_hash = meta.value("config_hash", std::string{});
  summary.cells = plan.cells.size();
  std::vector<const json*> records(plan.cells.size(), nullptr);
  for (std::size_t i = 0; i < plan.cells.size(); ++i) {
    const auto hit = existing.find(plan.key(plan.cells[i]));
    if (hit == existing.end()) continue;
    records[i] = &hit->second;
    ++summary.reused;
    if (!is_ok(records[i])) ++summary.failed;
  }
  if (summary.reused < summary.cells) {
    log_line(log, std::to_string(summary.cells - summary.reused) + " of " +
                      std::to_string(summary.cells) + " cells have no record");
  }
  summary.outputs = write_summaries(Results{plan, records}, run_dir);
  return summary;
}

}  // namespace embedreg
