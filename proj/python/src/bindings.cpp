#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nnep/activation.hpp"
#include "nnep/errors.hpp"
#include "nnep/model_io.hpp"
#include "nnep/predict.hpp"

namespace py = pybind11;
using namespace nnep;

namespace {

Table make_table(const MatrixXd& X, const VectorXd& y) {
  if (X.rows() != y.size()) throw DimensionMismatch("X and y have different numbers of rows");
  Table t;
  t.X = X;
  t.y = y;
  for (Eigen::Index c = 0; c < X.cols(); ++c) t.featureNames.push_back("x" + std::to_string(c + 1));
  return t;
}

FitConfig config_from(const std::string& config, const std::string& preset) {
  if (!config.empty()) return parse_config(config);
  if (!preset.empty()) return preset_config(parse_synth_case(preset));
  return FitConfig{};
}

py::dict predict_raw(const Model& m, const MatrixXd& Xraw) {
  if (Xraw.cols() != m.norm.xMean.size()) throw DimensionMismatch("input has the wrong number of columns");
  const MatrixXd X = normalize_inputs(Xraw, m.norm);
  const double s = m.norm.yStd;
  VectorXd mean(X.rows()), var(X.rows()), fvar(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const PredictiveMoments p =
        predict(m.state, X.row(i).transpose(), m.config.quad.predictiveNodes, m.config.quad.activationNodes);
    mean(i) = m.norm.yMean + s * p.fMean;
    var(i) = s * s * p.yVar;
    fvar(i) = s * s * p.fVar;
  }
  py::dict out;
  out["mean"] = mean;
  out["var"] = var;
  out["f_var"] = fvar;
  return out;
}

py::dict report_dict(const FitReport& r) {
  py::dict d;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["stop_reason"] = r.stopReason;
  d["log_z_ep"] = r.logZEP;
  d["log_z_loo"] = r.logZLOO;
  d["max_moment_residual"] = r.maxMomentResidual;
  d["skips"] = r.skipCounts;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Expectation propagation for two-layer neural network regression";

  static PyObject* base = PyErr_NewException("nnep._core.NnepError", PyExc_RuntimeError, nullptr);
  static PyObject* configError = PyErr_NewException("nnep._core.ConfigError", base, nullptr);
  static PyObject* dataError = PyErr_NewException("nnep._core.DataError", base, nullptr);
  static PyObject* diverged = PyErr_NewException("nnep._core.Diverged", base, nullptr);
  m.attr("NnepError") = py::handle(base);
  m.attr("ConfigError") = py::handle(configError);
  m.attr("DataError") = py::handle(dataError);
  m.attr("Diverged") = py::handle(diverged);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(configError, e.what());
    } catch (const Diverged& e) {
      PyErr_SetString(diverged, e.what());
    } catch (const NotPositiveDefinite& e) {
      PyErr_SetString(diverged, e.what());
    } catch (const Error& e) {
      PyErr_SetString(dataError, e.what());
    }
  });

  m.def("g", &g, py::arg("x"), py::arg("K"));
  m.def("mean_g", &mean_g, py::arg("m"), py::arg("V"), py::arg("K"));
  m.def("var_g", &var_g, py::arg("m"), py::arg("V"), py::arg("K"), py::arg("nodes") = 100);

  m.def(
      "synth",
      [](const std::string& name, int n, std::uint64_t seed) {
        const Table t = synth_table(parse_synth_case(name), n, seed);
        return py::make_tuple(t.X, t.y);
      },
      py::arg("case"), py::arg("n") = 200, py::arg("seed") = 0, "raw inputs and target for a demonstration problem");

  m.def(
      "preset_config", [](const std::string& name) { return serialize_config(preset_config(parse_synth_case(name))); },
      py::arg("case"));

  py::class_<Model>(m, "Model")
      .def_property_readonly("K", [](const Model& mo) { return mo.config.K; })
      .def_property_readonly("report", [](const Model& mo) { return report_dict(mo.report); })
      .def("predict", &predict_raw, py::arg("X"), "predictive mean and variance in original units")
      .def("to_json", &serialize_model)
      .def_static("from_json", &parse_model, py::arg("text"))
      .def("save", [](const Model& mo, const std::string& path) { write_file_atomic(path, serialize_model(mo)); })
      .def_static("load", &load_model, py::arg("path"))
      .def("input_weights",
           [](const Model& mo) {
             py::list out;
             for (const GaussianDense& q : mo.state.qw)
               out.append(py::make_tuple(VectorXd(q.mean()), VectorXd(q.cov().diagonal())));
             return out;
           })
      .def("output_weights",
           [](const Model& mo) { return py::make_tuple(VectorXd(mo.state.qv.mean()), VectorXd(mo.state.qv.cov().diagonal())); });

  m.def(
      "fit",
      [](const MatrixXd& X, const VectorXd& y, const std::string& config, const std::string& preset) {
        const FitConfig cfg = config_from(config, preset);
        py::gil_scoped_release release;
        return fit_model(normalize(make_table(X, y)), cfg);
      },
      py::arg("X"), py::arg("y"), py::arg("config") = "", py::arg("preset") = "",
      "fit from raw arrays; config is JSON text, preset names a demonstration problem");
}
