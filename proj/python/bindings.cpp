#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "embedreg/bbob.hpp"
#include "embedreg/embedder.hpp"
#include "embedreg/error.hpp"
#include "embedreg/experiment.hpp"
#include "embedreg/featurizer.hpp"
#include "embedreg/metrics.hpp"
#include "embedreg/mlp.hpp"
#include "embedreg/nlfd.hpp"
#include "embedreg/task.hpp"

namespace py = pybind11;
using namespace embedreg;
using nlohmann::json;

namespace {

json parse_spec(const std::string& spec) {
  if (!spec.empty() && (spec.front() == '{' || spec.front() == '[')) return json::parse(spec);
  return json{{"type", spec}};
}

StringFormat make_format(const std::string& variant, int sig_digits, bool space) {
  return {StringFormat::parse_variant(variant), sig_digits, space};
}

py::dict bundle_dict(const metrics::MetricBundle& m) {
  py::dict d;
  d["kendall_tau"] = m.kendall_tau;
  d["spearman"] = m.spearman;
  d["pearson"] = m.pearson;
  d["mse"] = m.mse;
  d["mae"] = m.mae;
  return d;
}

py::dict nlfd_dict(const NlfdSample& s) {
  py::dict d;
  d["factors"] = s.factors;
  d["mu"] = s.mu;
  d["sigma"] = s.sigma;
  d["n"] = s.size();
  d["d"] = s.d;
  d["excluded"] = s.excluded_pairs;
  return d;
}

EmbeddingMatrix from_array(const RowMatrix& m) { return {m, {"python", "array"}}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Embedding-based regression core";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
  py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", error.ptr());

  py::class_<RegressionTask>(m, "Task")
      .def_property_readonly("id", &RegressionTask::id)
      .def_property_readonly("family", &RegressionTask::family)
      .def_property_readonly("dof", &RegressionTask::dof)
      .def_property_readonly("param_names",
                             [](const RegressionTask& t) {
                               std::vector<std::string> names;
                               for (const auto& p : t.params()) names.push_back(p.name);
                               return names;
                             })
      .def("to_json", [](const RegressionTask& t) { return task_to_json(t).dump(); })
      .def("__repr__", [](const RegressionTask& t) { return "<Task " + t.id() + ">"; });

  m.def("make_bbob_task", &make_bbob_task, py::arg("function"), py::arg("dof"));
  m.def("task_from_json", [](const std::string& s) { return task_from_json(json::parse(s)); },
        py::arg("spec"));
  m.def("load_task", &load_task_spec, py::arg("path"));
  m.def("bbob_functions", &bbob::catalog_ids);

  m.def(
      "sample",
      [](const RegressionTask& task, std::size_t n, std::uint64_t seed) {
        const auto ds = sample_uniform(task, n, seed);
        return py::make_tuple(ds.inputs(), ds.targets());
      },
      py::arg("task"), py::arg("n"), py::arg("seed") = 0,
      "Uniform samples as (inputs, targets).");
  m.def("validate", &validate_assignment, py::arg("task"), py::arg("x"));

  m.def(
      "serialize",
      [](const RegressionTask& task, const Assignment& x, const std::string& variant, int digits,
         bool space) { return serialize(task, x, make_format(variant, digits, space)); },
      py::arg("task"), py::arg("x"), py::arg("variant") = "full", py::arg("float_sig_digits") = 4,
      py::arg("space_after_comma") = false);
  m.def("featurize", &featurize_traditional, py::arg("task"), py::arg("x"));

  m.def(
      "embed",
      [](const RegressionTask& task, const std::vector<Assignment>& xs, const std::string& embedder,
         const std::string& variant, int digits, bool space) -> RowMatrix {
        const auto e = make_embedder(parse_spec(embedder), make_format(variant, digits, space));
        return e->embed(task, xs).values();
      },
      py::arg("task"), py::arg("xs"), py::arg("embedder") = "traditional", py::arg("variant") = "full",
      py::arg("float_sig_digits") = 4, py::arg("space_after_comma") = false,
      "Embedder is a type name or a JSON spec.");

  m.def(
      "kendall_tau",
      [](const std::vector<double>& y, const std::vector<double>& yhat) { return metrics::kendall_tau(y, yhat); },
      py::arg("y"), py::arg("yhat"));
  m.def(
      "metrics",
      [](const std::vector<double>& y, const std::vector<double>& yhat) {
        return bundle_dict(metrics::compute_all(y, yhat));
      },
      py::arg("y"), py::arg("yhat"));

  py::class_<TrainResult>(m, "Model")
      .def_property_readonly("learning_rate", [](const TrainResult& r) { return r.chosen_entry().learning_rate; })
      .def_property_readonly("weight_decay", [](const TrainResult& r) { return r.chosen_entry().weight_decay; })
      .def_property_readonly("sweep_size", [](const TrainResult& r) { return r.sweep.size(); })
      .def(
          "predict",
          [](const TrainResult& r, const RowMatrix& x) {
            const auto p = predict(r, x);
            return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
          },
          py::arg("x"))
      .def(
          "evaluate",
          [](const TrainResult& r, const RowMatrix& x, const std::vector<double>& y) {
            return bundle_dict(make_report(r, x, y).test);
          },
          py::arg("x"), py::arg("y"));

  m.def(
      "train",
      [](const RowMatrix& xtr, const std::vector<double>& ytr, const RowMatrix& xva,
         const std::vector<double>& yva, std::uint64_t seed, std::size_t hidden, std::size_t max_epochs,
         std::size_t patience, std::vector<double> lrs, std::vector<double> wds) {
        TrainConfig cfg;
        cfg.seed = seed;
        cfg.hidden = hidden;
        cfg.max_epochs = max_epochs;
        cfg.patience = patience;
        if (!lrs.empty()) cfg.learning_rates = std::move(lrs);
        if (!wds.empty()) cfg.weight_decays = std::move(wds);
        py::gil_scoped_release release;
        return train(xtr, ytr, xva, yva, cfg);
      },
      py::arg("train_x"), py::arg("train_y"), py::arg("val_x"), py::arg("val_y"), py::arg("seed") = 0,
      py::arg("hidden") = kHiddenWidth, py::arg("max_epochs") = 300,
      py::arg("patience") = 20,      py::arg("learning_rates") = std::vector<double>{}, py::arg("weight_decays") = std::vector<double>{});

  m.def(
      "compute_nlfd", [](const RowMatrix& emb, const std::vector<double>& y) {
        return nlfd_dict(compute_nlfd(from_array(emb), y));
      },
      py::arg("embeddings"), py::arg("y"));
  m.def(
      "nlfd_zscore",
      [](const RowMatrix& a, const RowMatrix& b, const std::vector<double>& y) {
        return nlfd_zscore(compute_nlfd(from_array(a), y), compute_nlfd(from_array(b), y)).z;
      },
      py::arg("a"), py::arg("b"), py::arg("y"));

  m.def("runners", &runner_names);
  m.def(
      "run_experiment",
      [](const std::string& runner, const std::string& config, const std::string& out, bool force) {
        const auto cfg = ExperimentConfig::from_json(json::parse(config));
        RunSummary s;
        {
          py::gil_scoped_release release;
          s = run_experiment(runner, cfg, {out, force, nullptr});
        }
        py::dict d;
        d["dir"] = s.dir.string();
        d["config_hash"] = s.config_hash;
        d["cells"] = s.cells;
        d["executed"] = s.executed;
        d["reused"] = s.reused;
        d["failed"] = s.failed;
        std::vector<std::string> outputs;
        for (const auto& p : s.outputs) outputs.push_back(p.string());
        d["outputs"] = outputs;
        return d;
      },
      py::arg("runner"), py::arg("config"), py::arg("out") = "out", py::arg("force") = false,
      "Config is a JSON string.");
}
