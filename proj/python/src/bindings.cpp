// Python surface of the creditx library; JSON travels as strings.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "creditx/evaluation.hpp"
#include "creditx/explain.hpp"
#include "creditx/pipeline.hpp"
#include "creditx/synthetic.hpp"

namespace py = pybind11;
using namespace creditx;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw DataError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

Array to_array(const std::vector<double>& v) {
  Array out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Dataset dataset(std::vector<std::string> names, const Array& x, std::vector<int> y, std::vector<double> w) {
  auto m = to_matrix(x);
  if (names.empty())
    for (std::size_t c = 0; c < m.cols(); ++c) names.push_back("x" + std::to_string(c));
  auto d = Dataset::from_arrays(std::move(names), std::move(m), std::move(y), std::move(w));
  d.validate();
  return d;
}

py::dict feature_dict(const features::FeatureMatrix& m) {
  py::dict d;
  d["row_ids"] = m.row_ids;
  d["columns"] = m.columns;
  d["values"] = to_array(m.values);
  d["labels"] = m.labels;
  return d;
}

// Boxed so pybind11's variant caster does not unpack it.
struct FittedModel {
  models::Model model;
};

const models::TreeEnsemble& ensemble_of(const models::Model& m) {
  if (const auto* e = std::get_if<models::TreeEnsemble>(&m)) return *e;
  throw ConfigError("SHAP explanations need a tree ensemble, got " + models::kind_label(m));
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Explainable credit scoring: features, resampling, models, SHAP";

  py::register_exception<ConfigError>(mod, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(mod, "DataError", PyExc_ValueError);
  py::register_exception<ComputeError>(mod, "ComputeError", PyExc_RuntimeError);

  mod.def(
      "synthesize",
      [](const std::string& out, std::size_t accounts, double bad_rate, std::size_t inactive, std::uint64_t seed) {
        synthetic::LedgerSpec s;
        s.accounts = accounts;
        s.bad_rate = bad_rate;
        s.inactive_accounts = inactive;
        s.seed = seed;
        ingest::write_bundle(synthetic::generate_ledger(s), out);
      },
      py::arg("out"), py::arg("accounts") = 50, py::arg("bad_rate") = 0.111, py::arg("inactive") = 0,
      py::arg("seed") = 0, "Write a synthetic ledger (clients/accounts/transactions/loans CSVs).");

  mod.def(
      "benchmark",
      [](std::size_t rows, std::size_t features, double bad_rate, std::uint64_t seed) {
        const auto d = synthetic::generate_benchmark({rows, features, bad_rate, seed});
        return py::make_tuple(to_array(d.x), d.y, d.feature_names);
      },
      py::arg("rows") = 2000, py::arg("features") = 20, py::arg("bad_rate") = 0.111, py::arg("seed") = 0);

  mod.def(
      "build_features",
      [](const std::string& data_dir, bool drop_inactive) {
        auto m = features::build_feature_matrix(ingest::load_bundle(data_dir));
        if (drop_inactive) m = features::drop_inactive_accounts(m);
        return feature_dict(m);
      },
      py::arg("data_dir"), py::arg("drop_inactive") = true,
      "Load a ledger directory and return {row_ids, columns, values, labels}.");

  mod.def("kpi_names", [] { return features::kpi_names(); });

  mod.def(
      "standardize",
      [](const Array& x) {
        auto [z, p] = features::standardize(to_matrix(x));
        return py::make_tuple(to_array(z), to_array(p.mean), to_array(p.stddev));
      },
      py::arg("x"));

  mod.def(
      "resample",
      [](const std::string& strategy, const Array& x, std::vector<int> y, std::size_t k, std::uint64_t seed) {
        const auto d = dataset({}, x, std::move(y), {});
        const auto r = resampling::apply({resampling::parse_kind(strategy), k, seed}, metrics::full_training_view(d));
        return py::make_tuple(to_array(r.data.x), r.data.y, to_array(r.data.w));
      },
      py::arg("strategy"), py::arg("x"), py::arg("y"), py::arg("k") = 5, py::arg("seed") = 0,
      "Resample a training set; returns (x, y, weights).");

  mod.def(
      "roc_auc", [](std::vector<int> y, std::vector<double> s) { return metrics::roc_auc(y, s); }, py::arg("y"),
      py::arg("scores"));
  mod.def("gini", &metrics::gini, py::arg("auc"));

  py::class_<FittedModel>(mod, "Model")
      .def_property_readonly("kind", [](const FittedModel& f) { return models::kind_label(f.model); })
      .def_property_readonly("feature_names", [](const FittedModel& f) { return models::feature_names(f.model); })
      .def(
          "predict_proba",
          [](const FittedModel& f, const Array& x) {
            const auto& m = f.model;
            return to_array(models::predict_proba(m, to_matrix(x), models::feature_names(m)));
          },
          py::arg("x"))
      .def(
          "predict_margin",
          [](const FittedModel& f, const Array& x) {
            const auto& m = f.model;
            return to_array(models::predict_margin(m, to_matrix(x), models::feature_names(m)));
          },
          py::arg("x"))
      .def(
          "shap",
          [](const FittedModel& f, const Array& x) {
            const auto& m = f.model;
            const auto shap = explain::tree_shap(ensemble_of(m), to_matrix(x));
            Matrix phi(shap.size(), models::feature_names(m).size());
            std::vector<double> phi0, margin;
            for (std::size_t r = 0; r < shap.size(); ++r) {
              std::copy(shap[r].phi.begin(), shap[r].phi.end(), phi.row(r).begin());
              phi0.push_back(shap[r].phi0);
              margin.push_back(shap[r].margin);
            }
            return py::make_tuple(to_array(phi), to_array(phi0), to_array(margin));
          },
          py::arg("x"), "TreeSHAP in margin space; returns (phi, phi0, margin).")
      .def("to_json", [](const FittedModel& f) { return models::to_json(f.model).dump(); })
      .def_static(
          "from_json", [](const std::string& s) { return FittedModel{models::model_from_json(nlohmann::json::parse(s))}; },
          py::arg("text"));

  mod.def(
      "fit",
      [](const std::string& family, const Array& x, std::vector<int> y, std::vector<std::string> names,
         const std::string& config, std::vector<double> w) {
        const auto d = dataset(std::move(names), x, std::move(y), std::move(w));
        const auto cfg = models::TrainConfig::from_json(nlohmann::json::parse(config.empty() ? "{}" : config));
        return FittedModel{models::fit_model(models::parse_family(family), d, cfg)};
      },
      py::arg("family"), py::arg("x"), py::arg("y"), py::arg("names") = std::vector<std::string>{},
      py::arg("config") = "", py::arg("weights") = std::vector<double>{});

  mod.def(
      "cross_validate",
      [](const std::string& family, const Array& x, std::vector<int> y, std::size_t k, std::uint64_t seed,
         const std::string& resampler, const std::string& config) {
        evaluation::ModelSpec spec;
        spec.family = models::parse_family(family);
        spec.config = models::TrainConfig::from_json(nlohmann::json::parse(config.empty() ? "{}" : config));
        const auto d = dataset({}, x, std::move(y), {});
        return evaluation::cross_validate(spec, {resampling::parse_kind(resampler), 5, seed}, d, k, seed)
            .to_json()
            .dump();
      },
      py::arg("family"), py::arg("x"), py::arg("y"), py::arg("k") = 5, py::arg("seed") = 0,
      py::arg("resampler") = "none", py::arg("config") = "");

  mod.def(
      "run_stage",
      [](const std::string& stage, const std::string& config) {
        return pipeline::run_stage(stage, pipeline::PipelineConfig::from_json(nlohmann::json::parse(config)));
      },
      py::arg("stage"), py::arg("config"), "Run a pipeline stage; returns the artifact names written.");
  mod.def("stage_names", &pipeline::stage_names);
}
