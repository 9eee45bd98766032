// Copyright 2026 The scalefuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "scalefuse/cmsa.hpp"
#include "scalefuse/config.hpp"
#include "scalefuse/datagen.hpp"
#include "scalefuse/errors.hpp"
#include "scalefuse/harness.hpp"
#include "scalefuse/metrics.hpp"
#include "scalefuse/model.hpp"
#include "scalefuse/report.hpp"
#include "scalefuse/smil.hpp"

namespace py = pybind11;
using namespace scalefuse;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor matrix_from(const Array& a, const char* what) {
  if (a.ndim() != 2) throw py::value_error(std::string(what) + " must be 2-D");
  const auto* p = a.data();
  return Tensor::matrix(a.shape(0), a.shape(1),
                        std::vector<double>(p, p + a.shape(0) * a.shape(1)));
}

Tensor vector_from(const Array& a, const char* what) {
  if (a.ndim() != 1) throw py::value_error(std::string(what) + " must be 1-D");
  return Tensor::vector(std::vector<double>(a.data(), a.data() + a.shape(0)));
}

TokenMatrix tokens_from(const Array& a, const char* what) {
  const auto t = matrix_from(a, what);
  return {t.size(0), t.size(1), t.to_vector()};
}

Array to_array(const TokenMatrix& t) {
  Array out({t.rows, t.cols});
  std::copy(t.values.begin(), t.values.end(), out.mutable_data());
  return out;
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  const auto v = t.to_vector();
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict record_to_dict(const PatientRecord& r) {
  py::dict d;
  d["id"] = r.id;
  d["label"] = r.label;
  d["om"] = to_array(r.om);
  d["im"] = to_array(r.im);
  d["tem"] = to_array(r.tem_bag);
  return d;
}

PatientRecord record_from(const Array& om, const Array& im, const Array& tem, std::size_t label) {
  PatientRecord r;
  r.id = "py";
  r.label = label;
  r.om = tokens_from(om, "om");
  r.im = tokens_from(im, "im");
  r.tem_bag = tokens_from(tem, "tem");
  return r;
}

py::dict dataset_to_dict(const Dataset& ds) {
  py::dict d;
  d["classes"] = ds.class_names;
  py::list records;
  for (const auto& r : ds.records) records.append(record_to_dict(r));
  d["records"] = records;
  return d;
}

ExperimentConfig config_with_seed(const std::string& text, std::optional<std::uint64_t> seed) {
  auto c = parse_config(text);
  if (seed) {
    c.task.seed = *seed;
    c.train.seed = *seed;
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_scalefuse, m) {
  m.doc() = "Multi-modal fusion with bag aggregation and cross-modal attention.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  m.def("pairwise_distances",
        [](const Array& bag) { return to_array(smil::pairwise_distances(matrix_from(bag, "bag"))); },
        py::arg("bag"));

  m.def(
      "aggregate_bag",
      [](const Array& bag, double threshold, double epsilon) {
        const auto r = smil::aggregate_bag(matrix_from(bag, "bag"), {threshold, epsilon, false});
        py::dict d;
        d["feature"] = to_array(r.feature);
        d["central_index"] = r.diagnostics.central_index;
        d["mean_distance"] = r.diagnostics.mean_distance;
        d["retained"] = r.diagnostics.retained;
        d["weights"] = r.diagnostics.weights;
        d["uniform_fallback"] = r.diagnostics.uniform_fallback;
        return d;
      },
      py::arg("bag"), py::arg("threshold") = 1.5, py::arg("epsilon") = 1e-8,
      "Zero-based indices. Returns feature, central_index, mean_distance, retained, weights.");

  m.def("mean_pool",
        [](const Array& bag) { return to_array(smil::mean_pool(matrix_from(bag, "bag"))); },
        py::arg("bag"));

  m.def(
      "cross_attention",
      [](const Array& query, const Array& tokens, std::size_t heads, std::uint64_t seed) {
        Rng rng(seed);
        const auto q = vector_from(query, "query");
        const auto p = cmsa::make_attention_params(q.numel(), heads, false, rng);
        const auto out = cmsa::cross_attention_heads(q, matrix_from(tokens, "tokens"), p);
        return py::make_tuple(to_array(out.output), out.weights);
      },
      py::arg("query"), py::arg("tokens"), py::arg("heads") = 4, py::arg("seed") = 0,
      "Attention with freshly initialised projections; returns (output, per-head weights).");

  m.def(
      "macro_scores",
      [](const std::vector<std::vector<std::size_t>>& cm) {
        metrics::ConfusionMatrix m{cm.size(), {}};
        for (const auto& row : cm) {
          if (row.size() != cm.size()) throw py::value_error("confusion matrix must be square");
          m.counts.insert(m.counts.end(), row.begin(), row.end());
        }
        const auto s = metrics::macro_scores(m);
        py::dict d;
        d["acc"] = s.accuracy;
        d["pre"] = s.precision;
        d["rec"] = s.recall;
        d["spe"] = s.specificity;
        d["f1"] = s.f1;
        d["warnings"] = s.warnings;
        return d;
      },
      py::arg("confusion"), "Rows are true classes, columns predictions.");

  m.def(
      "roc_auc_macro",
      [](const std::vector<std::size_t>& truths, const std::vector<std::vector<double>>& scores) {
        return metrics::roc_auc_macro(truths, scores).macro_auc;
      },
      py::arg("truths"), py::arg("scores"));

  m.def(
      "paired_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = metrics::paired_t_test(a, b);
        return py::make_tuple(r.t, r.p);
      },
      py::arg("a"), py::arg("b"), "Two-sided; returns (t, p).");

  m.def("default_config", [] { return serialize_config({}); },
        "Every config key with its default, as key=value text.");
  m.def("normalize_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
        py::arg("text"), "Parses and validates config text; returns the full key=value form.");

  m.def(
      "generate_dataset",
      [](const std::string& config, std::optional<std::uint64_t> seed) {
        const auto c = config_with_seed(config, seed);
        return dataset_to_dict(datagen::generate_dataset(c.task));
      },
      py::arg("config") = "", py::arg("seed") = py::none());

  m.def(
      "write_dataset",
      [](const std::string& config, const std::string& out, std::optional<std::uint64_t> seed) {
        const auto c = config_with_seed(config, seed);
        datagen::write_manifest(datagen::generate_dataset(c.task), out);
      },
      py::arg("config"), py::arg("out"), py::arg("seed") = py::none());

  m.def("read_manifest",
        [](const std::string& dir) { return dataset_to_dict(datagen::read_manifest(dir)); },
        py::arg("directory"));

  m.def(
      "cross_validate",
      [](const std::string& config, std::optional<std::uint64_t> seed, std::size_t jobs) {
        const auto c = config_with_seed(config, seed);
        py::gil_scoped_release release;
        const auto ds = harness::load_dataset(c);
        return report::to_json(report::from_cv(harness::run_cross_validation(c, ds, jobs)));
      },
      py::arg("config") = "", py::arg("seed") = py::none(), py::arg("jobs") = 1,
      "Stratified k-fold run; returns the summary as JSON text.");

  m.def(
      "ablate",
      [](const std::string& suite, const std::string& config, std::optional<std::uint64_t> seed,
         std::size_t jobs) {
        const auto c = config_with_seed(config, seed);
        const auto s = harness::parse_suite(suite);
        py::gil_scoped_release release;
        const auto ds = harness::load_dataset(c);
        return report::to_json(report::from_ablation(harness::run_ablation_suite(s, c, ds, jobs)));
      },
      py::arg("suite"), py::arg("config") = "", py::arg("seed") = py::none(), py::arg("jobs") = 1);

  m.def(
      "ablation_row_names",
      [](const std::string& suite) {
        std::vector<std::string> names;
        for (const auto& r : harness::ablation_rows(harness::parse_suite(suite), {})) {
          names.push_back(r.name);
        }
        return names;
      },
      py::arg("suite"));

  m.def("render_table",
        [](const std::string& summary_json) {
          return report::render_table(report::parse_json(summary_json));
        },
        py::arg("summary_json"));

  py::class_<CmusModel>(m, "Model")
      .def_static("load", [](const std::string& path) { return load_checkpoint(path); },
                  py::arg("path"))
      .def_static(
          "train",
          [](const std::string& config, std::optional<std::uint64_t> seed) {
            const auto c = config_with_seed(config, seed);
            const auto ds = harness::load_dataset(c);
            CmusModel model(harness::model_config_for(c, ds), derive_seed(c.train.seed, 0));
            TrainOptions options = c.train;
            options.seed = derive_seed(c.train.seed, 1);
            train_model(model, ds.records, options);
            return model;
          },
          py::arg("config") = "", py::arg("seed") = py::none(),
          "Trains on every record of the configured dataset.")
      .def("save", [](const CmusModel& m, const std::string& path) { save_checkpoint(m, path); },
           py::arg("path"))
      .def(
          "predict_proba",
          [](const CmusModel& m, const Array& om, const Array& im, const Array& tem) {
            return m.predict_proba(record_from(om, im, tem, 0));
          },
          py::arg("om"), py::arg("im"), py::arg("tem"))
      .def_property_readonly("classes", [](const CmusModel& m) { return m.config().classes; })
      .def_property_readonly("parameter_count", [](CmusModel& m) {
        std::size_t n = 0;
        for (const auto& p : m.parameters()) n += p.value.numel();
        return n;
      });
}
