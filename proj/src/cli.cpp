#include "nnep/cli.hpp"

#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nnep/errors.hpp"
#include "nnep/model_io.hpp"
#include "nnep/predict.hpp"

namespace nnep {

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::string model;
  std::string report;
  std::string summary;
  std::string target;
  std::string mode;
  std::string caseName;
  std::optional<std::uint64_t> seed;
  std::optional<double> thetaFixed;
  int n = 200;
};

int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const Diverged*>(&e) || dynamic_cast<const NotPositiveDefinite*>(&e)) return kExitDiverged;
  return kExitData;
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  nlohmann::json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
  err << j.dump() << "\n";
}

FitConfig config_for(const Options& o) {
  FitConfig cfg = o.config.empty() ? FitConfig{} : load_config(o.config);
  if (o.seed) cfg.rngSeed = *o.seed;
  if (!o.mode.empty()) {
    if (o.mode == "sequential")
      cfg.updateMode = UpdateMode::Sequential;
    else if (o.mode == "parallel")
      cfg.updateMode = UpdateMode::Parallel;
    else
      throw ConfigError("--mode must be sequential or parallel");
  }
  if (o.thetaFixed) cfg.thetaKnown = *o.thetaFixed;
  return cfg;
}

CsvOptions csv_options(const Options& o) {
  CsvOptions c;
  if (!o.target.empty()) c.target = o.target;
  return c;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const auto dot = path.rfind('.');
  const auto slash = path.find_last_of("/\\");
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + suffix;
  return path.substr(0, dot) + suffix;
}

// reads a table for an existing model; the target column is optional
Table model_table(const Model& m, const std::string& path) {
  CsvOptions c;
  c.target = m.targetName;
  c.requireTarget = false;
  Table t = read_csv(path, c);
  if (t.X.cols() != static_cast<Eigen::Index>(m.norm.xMean.size()))
    throw DimensionMismatch("data has " + std::to_string(t.X.cols()) + " input columns, model was trained on " +
                            std::to_string(m.norm.xMean.size()));
  return t;
}

int cmd_fit(const Options& o, std::ostream& out) {
  const FitConfig cfg = config_for(o);
  const Dataset data = load_csv(o.data, csv_options(o));
  const Model m = fit_model(data, cfg);
  write_file_atomic(o.out, serialize_model(m));
  const std::string reportPath = o.report.empty() ? with_suffix(o.out, ".report.json") : o.report;
  write_file_atomic(reportPath, serialize_report(m.report));
  out << "fit: " << m.report.iterations << " iterations, converged=" << (m.report.converged ? "true" : "false");
  if (!m.report.logZEP.empty()) out << ", logZ_EP=" << m.report.logZEP.back();
  out << "\n";
  return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out) {
  const Model m = load_model(o.model);
  const Table t = model_table(m, o.data);
  const MatrixXd X = normalize_inputs(t.X, m.norm);
  std::ostringstream csv;
  csv << "mean,var,f_mean,f_var" << (t.hasTarget ? ",log_density" : "") << "\n";
  const double scale = m.norm.yStd;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const PredictiveMoments p = predict(m.state, X.row(i).transpose(), m.config.quad.predictiveNodes,
                                        m.config.quad.activationNodes);
    csv << format_double(m.norm.yMean + scale * p.fMean) << ',' << format_double(scale * scale * p.yVar) << ','
        << format_double(m.norm.yMean + scale * p.fMean) << ',' << format_double(scale * scale * p.fVar);
    if (t.hasTarget) csv << ',' << format_double(p.log_density((t.y(i) - m.norm.yMean) / scale) - std::log(scale));
    csv << "\n";
  }
  write_file_atomic(o.out, csv.str());
  out << "predict: " << X.rows() << " rows\n";
  return kExitOk;
}

nlohmann::json summary_json(const MetricSummary& s) {
  return {{"lpd_mean", s.lpdMean}, {"lpd_std", s.lpdStd}, {"lpd_p1", s.lpdP1},
          {"se_mean", s.seMean},   {"se_std", s.seStd},   {"se_p99", s.seP99}};
}

int cmd_eval(const Options& o, std::ostream& out) {
  const Model m = load_model(o.model);
  const Table t = model_table(m, o.data);
  if (!t.hasTarget) throw ParseError("evaluation data lacks the target column '" + m.targetName + "'");
  const MatrixXd X = normalize_inputs(t.X, m.norm);
  const Evaluation ev = evaluate(m.state, X, t.y, m.norm.yMean, m.norm.yStd, m.config.quad.predictiveNodes);
  std::ostringstream csv;
  csv << "lpd,se,lpd_normalized,se_normalized\n";
  for (size_t i = 0; i < ev.lpd.size(); ++i)
    csv << format_double(ev.lpd[i]) << ',' << format_double(ev.se[i]) << ',' << format_double(ev.lpdNormalized[i])
        << ',' << format_double(ev.seNormalized[i]) << "\n";
  write_file_atomic(o.out, csv.str());
  nlohmann::json s = {{"n", ev.lpd.size()},
                      {"original_units", summary_json(ev.summary)},
                      {"normalized_units", summary_json(ev.summaryNormalized)}};
  const std::string summaryPath = o.summary.empty() ? with_suffix(o.out, ".summary.json") : o.summary;
  write_file_atomic(summaryPath, s.dump(1) + "\n");
  out << "eval: lpd_mean=" << ev.summary.lpdMean << " se_mean=" << ev.summary.seMean << "\n";
  return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  const SynthCase c = parse_synth_case(o.caseName);
  const Table t = synth_table(c, o.n, o.seed.value_or(0));
  write_file_atomic(o.out, format_csv(t));
  out << "synth: " << t.X.rows() << " rows\n";
  return kExitOk;
}

int cmd_inspect(const Options& o, std::ostream& out) {
  const Model m = load_model(o.model);
  constexpr double z = 1.959963984540054;
  std::ostringstream csv;
  csv << "kind,unit,input,mean,sd,lower95,upper95\n";
  auto row = [&](const std::string& kind, int unit, const std::string& input, Gaussian1D g) {
    const double sd = std::sqrt(std::max(g.var, 0.0));
    csv << kind << ',' << unit << ',' << input << ',' << format_double(g.mean) << ',' << format_double(sd) << ','
        << format_double(g.mean - z * sd) << ',' << format_double(g.mean + z * sd) << "\n";
  };
  const int K = m.config.K;
  for (int k = 0; k < K; ++k) {
    const GaussianDense& q = m.state.qw[k];
    for (Eigen::Index c = 0; c < q.dim(); ++c) {
      const std::string name =
          c < static_cast<Eigen::Index>(m.featureNames.size()) ? m.featureNames[c] : std::string("bias");
      row("w", k + 1, name, q.marginal(c));
    }
  }
  for (int k = 0; k <= K; ++k) row("v", k < K ? k + 1 : 0, k < K ? "hidden" : "bias", m.state.qv.marginal(k));
  for (size_t l = 0; l < m.state.qphi.size(); ++l) row("phi", 0, "group" + std::to_string(l + 1), m.state.qphi[l]);
  row("theta", 0, "noise", m.state.qtheta);
  write_file_atomic(o.out, csv.str());
  out << "inspect: wrote " << o.out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Expectation propagation for two-layer neural network regression", "nnep"};
  app.require_subcommand(1);
  Options o;

  auto* fit = app.add_subcommand("fit", "fit a network to a CSV file");
  fit->add_option("--config", o.config, "JSON config file");
  fit->add_option("--data", o.data, "training CSV")->required();
  fit->add_option("--out", o.out, "model file to write")->required();
  fit->add_option("--report", o.report, "fit report JSON (default <out>.report.json)");
  fit->add_option("--target", o.target, "target column name (default: last column)");
  fit->add_option("--seed", o.seed, "random seed");
  fit->add_option("--mode", o.mode, "sequential or parallel");
  fit->add_option("--theta-fixed", o.thetaFixed, "fix the log noise variance");

  auto* pred = app.add_subcommand("predict", "predictive moments for new inputs");
  pred->add_option("--model", o.model, "model file")->required();
  pred->add_option("--data", o.data, "input CSV")->required();
  pred->add_option("--out", o.out, "predictions CSV")->required();

  auto* ev = app.add_subcommand("eval", "log predictive density and squared error");
  ev->add_option("--model", o.model, "model file")->required();
  ev->add_option("--data", o.data, "test CSV with target")->required();
  ev->add_option("--out", o.out, "per-point metrics CSV")->required();
  ev->add_option("--summary", o.summary, "summary JSON (default <out>.summary.json)");

  auto* syn = app.add_subcommand("synth", "generate a synthetic data set");
  syn->add_option("--case", o.caseName, "clusters, additive or step")->required();
  syn->add_option("--n", o.n, "number of rows");
  syn->add_option("--seed", o.seed, "random seed");
  syn->add_option("--out", o.out, "CSV to write")->required();

  auto* ins = app.add_subcommand("inspect", "posterior interval table");
  ins->add_option("--model", o.model, "model file")->required();
  ins->add_option("--out", o.out, "CSV to write")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "UsageError", e.what(), kExitUsage);
    return kExitUsage;
  }

  try {
    if (fit->parsed()) return cmd_fit(o, out);
    if (pred->parsed()) return cmd_predict(o, out);
    if (ev->parsed()) return cmd_eval(o, out);
    if (syn->parsed()) return cmd_synth(o, out);
    if (ins->parsed()) return cmd_inspect(o, out);
  } catch (const Error& e) {
    const int code = exit_code_for(e);
    report_error(err, e.kind(), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error(err, "InternalError", e.what(), kExitData);
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace nnep
