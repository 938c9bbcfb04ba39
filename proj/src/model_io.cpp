#include "nnep/model_io.hpp"

#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "nnep/errors.hpp"

namespace nnep {

using json = nlohmann::json;

namespace {

json num(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

double get_num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw ParseError("expected a number, found " + j.dump());
  return j.get<double>();
}

json vec(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

VectorXd get_vec(const json& j) {
  if (!j.is_array()) throw ParseError("expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = get_num(j[i]);
  return v;
}

json mat(const MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(m.row(r).transpose()));
  return a;
}

MatrixXd get_mat(const json& j, Eigen::Index cols) {
  if (!j.is_array()) throw ParseError("expected a nested array");
  MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    const VectorXd row = get_vec(j[r]);
    if (row.size() != cols) throw ParseError("ragged matrix in model file");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

json site(NaturalSite1D s) { return json::array({num(s.tau), num(s.nu)}); }

NaturalSite1D get_site(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("expected [tau, nu] pair");
  return {get_num(j[0]), get_num(j[1])};
}

json sites_json(const std::vector<NaturalSite1D>& s) {
  json a = json::array();
  for (const auto& x : s) a.push_back(site(x));
  return a;
}

std::vector<NaturalSite1D> get_sites(const json& j) {
  std::vector<NaturalSite1D> out;
  for (const auto& x : j) out.push_back(get_site(x));
  return out;
}

json gauss1(Gaussian1D g) { return {{"mean", num(g.mean)}, {"var", num(g.var)}}; }
Gaussian1D get_gauss1(const json& j) { return {get_num(j.at("mean")), get_num(j.at("var"))}; }

json dense(const GaussianDense& g) { return {{"mean", vec(g.mean())}, {"cov", mat(g.cov())}}; }
GaussianDense get_dense(const json& j) {
  VectorXd mean = get_vec(j.at("mean"));
  MatrixXd cov = get_mat(j.at("cov"), mean.size());
  return GaussianDense(std::move(mean), std::move(cov));
}

// ---- config ----

class KeyChecker {
 public:
  KeyChecker(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }
  bool has(const std::string& key) {
    used_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }
  const json& at(const std::string& key) { return obj_.at(key); }
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where_);
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> used_;
};

template <class T>
void read(KeyChecker& kc, const std::string& key, T& out) {
  if (!kc.has(key)) return;
  try {
    out = kc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

template <class E>
void read_enum(KeyChecker& kc, const std::string& key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
  if (!kc.has(key)) return;
  const json& v = kc.at(key);
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  for (const auto& [name, value] : names)
    if (v.get<std::string>() == name) {
      out = value;
      return;
    }
  throw ConfigError("unknown value '" + v.get<std::string>() + "' for '" + key + "'");
}

template <class E>
std::string enum_name(E value, std::initializer_list<std::pair<const char*, E>> names) {
  for (const auto& [name, v] : names)
    if (v == value) return name;
  return "?";
}

const std::initializer_list<std::pair<const char*, UpdateMode>> kModes = {{"sequential", UpdateMode::Sequential},
                                                                          {"parallel", UpdateMode::Parallel}};
const std::initializer_list<std::pair<const char*, PriorFamily>> kFamilies = {
    {"laplace", PriorFamily::Laplace}, {"gaussian-ard", PriorFamily::GaussianArd}};
const std::initializer_list<std::pair<const char*, Grouping>> kGroupings = {{"shared", Grouping::Shared},
                                                                            {"ard", Grouping::Ard}};
const std::initializer_list<std::pair<const char*, OutputPrior>> kOutputPriors = {
    {"truncated-t", OutputPrior::TruncatedT}, {"fixed-gaussian", OutputPrior::FixedGaussian}};
const std::initializer_list<std::pair<const char*, InputPrior>> kInputPriors = {
    {"hierarchical", InputPrior::Hierarchical}, {"fixed", InputPrior::Fixed}};
const std::initializer_list<std::pair<const char*, PriorSchedule>> kSchedules = {
    {"run-once", PriorSchedule::RunOnce}, {"inner-iteration", PriorSchedule::InnerIteration}};

json config_json(const FitConfig& c) {
  json j;
  j["hidden_units"] = c.K;
  j["eta"] = c.eta;
  j["eta_prior"] = c.etaPrior;
  j["delta_w"] = c.deltaW;
  j["delta_v"] = c.deltaV;
  j["delta_prior"] = c.deltaPrior;
  j["update_mode"] = enum_name(c.updateMode, kModes);
  j["max_outer_iters"] = c.maxOuterIters;
  j["tol_moment_match"] = c.tolMomentMatch;
  j["init_iters"] = c.initIters;
  j["theta_known"] = c.thetaKnown ? json(*c.thetaKnown) : json(nullptr);
  j["rng_seed"] = c.rngSeed;
  j["shuffle_sites"] = c.shuffleSites;
  j["mu_theta0"] = c.muTheta0;
  j["sigma_theta0_sq"] = c.sigmaTheta0Sq;
  j["output_prior"] = enum_name(c.outputPrior, kOutputPriors);
  j["input_prior"] = enum_name(c.inputPrior, kInputPriors);
  j["prior_schedule"] = enum_name(c.priorSchedule, kSchedules);
  j["prior_max_iters"] = c.priorMaxIters;
  j["output_prior_max_iters"] = c.outputPriorMaxIters;
  j["incremental_units"] = c.incrementalUnits;
  j["units_every"] = c.unitsEvery;
  j["reassemble_every"] = c.reassembleEvery;
  j["min_delta"] = c.minDelta;
  j["skip_fraction"] = c.skipFraction;

  json p;
  p["family"] = enum_name(c.priors.family, kFamilies);
  p["grouping"] = enum_name(c.grouping, kGroupings);
  p["group_index"] = c.priors.groupIndex.empty() ? json(nullptr) : json(c.priors.groupIndex);
  p["mu_phi0"] = c.priors.muPhi0;
  p["sigma_phi0_sq"] = c.priors.sigmaPhi0Sq;
  p["nu_v"] = c.priors.nuV;
  p["sigma_v0_sq"] = c.priors.sigmaV0Sq;
  p["sigma_bias0_sq"] = c.priors.sigmaBias0Sq;
  j["prior"] = p;

  json in;
  in["w_prior_var"] = c.init.wPriorVar;
  in["w_bias_prior_var"] = c.init.wBiasPriorVar;
  in["v_mean_lo"] = c.init.vMeanLo;
  in["v_mean_hi"] = c.init.vMeanHi;
  in["v_prior_var"] = c.init.vPriorVar;
  in["theta_init"] = c.init.thetaInit;
  in["w_prior_mean"] = c.init.wPriorMean ? vec(*c.init.wPriorMean) : json(nullptr);
  in["w_prior_variance"] = c.init.wPriorVariance ? vec(*c.init.wPriorVariance) : json(nullptr);
  j["init"] = in;

  json q;
  q["tilt_nodes"] = c.quad.tiltNodes;
  q["tilt_half_width"] = c.quad.tiltHalfWidth;
  q["phi_nodes"] = c.quad.phiNodes;
  q["phi_half_width"] = c.quad.phiHalfWidth;
  q["activation_nodes"] = c.quad.activationNodes;
  q["predictive_nodes"] = c.quad.predictiveNodes;
  q["mass_floor"] = c.quad.massFloor;
  j["quadrature"] = q;
  return j;
}

FitConfig config_from(const json& j) {
  FitConfig c;
  KeyChecker kc(j, "config");
  read(kc, "hidden_units", c.K);
  read(kc, "eta", c.eta);
  read(kc, "eta_prior", c.etaPrior);
  read(kc, "delta_w", c.deltaW);
  read(kc, "delta_v", c.deltaV);
  read(kc, "delta_prior", c.deltaPrior);
  read_enum(kc, "update_mode", c.updateMode, kModes);
  read(kc, "max_outer_iters", c.maxOuterIters);
  read(kc, "tol_moment_match", c.tolMomentMatch);
  read(kc, "init_iters", c.initIters);
  if (kc.has("theta_known")) {
    double t = 0.0;
    read(kc, "theta_known", t);
    c.thetaKnown = t;
  }
  read(kc, "rng_seed", c.rngSeed);
  read(kc, "shuffle_sites", c.shuffleSites);
  read(kc, "mu_theta0", c.muTheta0);
  read(kc, "sigma_theta0_sq", c.sigmaTheta0Sq);
  read_enum(kc, "output_prior", c.outputPrior, kOutputPriors);
  read_enum(kc, "input_prior", c.inputPrior, kInputPriors);
  read_enum(kc, "prior_schedule", c.priorSchedule, kSchedules);
  read(kc, "prior_max_iters", c.priorMaxIters);
  read(kc, "output_prior_max_iters", c.outputPriorMaxIters);
  read(kc, "incremental_units", c.incrementalUnits);
  read(kc, "units_every", c.unitsEvery);
  read(kc, "reassemble_every", c.reassembleEvery);
  read(kc, "min_delta", c.minDelta);
  read(kc, "skip_fraction", c.skipFraction);
  if (kc.has("prior")) {
    KeyChecker p(kc.at("prior"), "prior");
    read_enum(p, "family", c.priors.family, kFamilies);
    read_enum(p, "grouping", c.grouping, kGroupings);
    read(p, "group_index", c.priors.groupIndex);
    read(p, "mu_phi0", c.priors.muPhi0);
    read(p, "sigma_phi0_sq", c.priors.sigmaPhi0Sq);
    read(p, "nu_v", c.priors.nuV);
    read(p, "sigma_v0_sq", c.priors.sigmaV0Sq);
    read(p, "sigma_bias0_sq", c.priors.sigmaBias0Sq);
    p.finish();
  }
  if (kc.has("init")) {
    KeyChecker in(kc.at("init"), "init");
    read(in, "w_prior_var", c.init.wPriorVar);
    read(in, "w_bias_prior_var", c.init.wBiasPriorVar);
    read(in, "v_mean_lo", c.init.vMeanLo);
    read(in, "v_mean_hi", c.init.vMeanHi);
    read(in, "v_prior_var", c.init.vPriorVar);
    read(in, "theta_init", c.init.thetaInit);
    if (in.has("w_prior_mean")) c.init.wPriorMean = get_vec(in.at("w_prior_mean"));
    if (in.has("w_prior_variance")) c.init.wPriorVariance = get_vec(in.at("w_prior_variance"));
    in.finish();
  }
  if (kc.has("quadrature")) {
    KeyChecker q(kc.at("quadrature"), "quadrature");
    read(q, "tilt_nodes", c.quad.tiltNodes);
    read(q, "tilt_half_width", c.quad.tiltHalfWidth);
    read(q, "phi_nodes", c.quad.phiNodes);
    read(q, "phi_half_width", c.quad.phiHalfWidth);
    read(q, "activation_nodes", c.quad.activationNodes);
    read(q, "predictive_nodes", c.quad.predictiveNodes);
    read(q, "mass_floor", c.quad.massFloor);
    q.finish();
  }
  kc.finish();
  c.priors.etaPrior = c.etaPrior;
  return c;
}

json report_json(const FitReport& r) {
  json j;
  json lz = json::array(), loo = json::array(), res = json::array();
  for (double x : r.logZEP) lz.push_back(num(x));
  for (double x : r.logZLOO) loo.push_back(num(x));
  for (double x : r.maxMomentResidual) res.push_back(num(x));
  j["log_z_ep"] = lz;
  j["log_z_loo"] = loo;
  j["max_moment_residual"] = res;
  j["skip_counts"] = r.skipCounts;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["final_delta_w"] = num(r.finalDeltaW);
  j["final_delta_v"] = num(r.finalDeltaV);
  j["stop_reason"] = r.stopReason;
  return j;
}

FitReport report_from(const json& j) {
  FitReport r;
  for (const auto& x : j.at("log_z_ep")) r.logZEP.push_back(get_num(x));
  for (const auto& x : j.at("log_z_loo")) r.logZLOO.push_back(get_num(x));
  for (const auto& x : j.at("max_moment_residual")) r.maxMomentResidual.push_back(get_num(x));
  r.skipCounts = j.at("skip_counts").get<std::vector<int>>();
  r.converged = j.at("converged").get<bool>();
  r.iterations = j.at("iterations").get<int>();
  r.finalDeltaW = get_num(j.at("final_delta_w"));
  r.finalDeltaV = get_num(j.at("final_delta_v"));
  r.stopReason = j.at("stop_reason").get<std::string>();
  return r;
}

}  // namespace

Model fit_model(const Dataset& data, const FitConfig& cfg) {
  Model m;
  m.config = cfg;
  m.norm = data.norm;
  m.featureNames = data.featureNames;
  m.targetName = data.targetName;
  FitResult r = fit(data.X, data.y, cfg);
  m.state = std::move(r.state);
  m.sites = std::move(r.sites);
  m.report = std::move(r.report);
  return m;
}

std::string serialize_model(const Model& m) {
  json j;
  j["format"] = "nnep-model";
  j["version"] = kModelVersion;
  j["config"] = config_json(m.config);
  j["normalization"] = {{"x_mean", vec(m.norm.xMean)},
                        {"x_std", vec(m.norm.xStd)},
                        {"y_mean", num(m.norm.yMean)},
                        {"y_std", num(m.norm.yStd)}};
  j["feature_names"] = m.featureNames;
  j["target_name"] = m.targetName;

  json post;
  json qw = json::array();
  for (const auto& q : m.state.qw) qw.push_back(dense(q));
  post["qw"] = qw;
  post["qv"] = dense(m.state.qv);
  post["qtheta"] = gauss1(m.state.qtheta);
  json qphi = json::array();
  for (const auto& q : m.state.qphi) qphi.push_back(gauss1(q));
  post["qphi"] = qphi;
  j["posterior"] = post;

  json s;
  s["likelihood"] = {{"tauw", mat(m.sites.lik.tauw)},
                     {"nuw", mat(m.sites.lik.nuw)},
                     {"alpha", mat(m.sites.lik.alpha)},
                     {"nuv", mat(m.sites.lik.nuv)},
                     {"theta", sites_json(m.sites.lik.theta)}};
  s["weight_prior"] = {{"w", sites_json(m.sites.wprior.w)}, {"phi", sites_json(m.sites.wprior.phi)}};
  s["output_prior"] = sites_json(m.sites.vprior.v);
  s["theta_active"] = m.sites.thetaActive;
  s["w_prior_active"] = m.sites.wPriorActive;
  s["v_prior_active"] = m.sites.vPriorActive;
  j["sites"] = s;
  j["report"] = report_json(m.report);
  return j.dump(1) + "\n";
}

Model parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != "nnep-model") throw ParseError("not an nnep model file");
    if (j.at("version").get<int>() != kModelVersion)
      throw ParseError("unsupported model version " + j.at("version").dump());
    Model m;
    m.config = config_from(j.at("config"));
    const json& nz = j.at("normalization");
    m.norm.xMean = get_vec(nz.at("x_mean"));
    m.norm.xStd = get_vec(nz.at("x_std"));
    m.norm.yMean = get_num(nz.at("y_mean"));
    m.norm.yStd = get_num(nz.at("y_std"));
    m.featureNames = j.at("feature_names").get<std::vector<std::string>>();
    m.targetName = j.at("target_name").get<std::string>();

    const json& post = j.at("posterior");
    for (const auto& q : post.at("qw")) m.state.qw.push_back(get_dense(q));
    m.state.qv = get_dense(post.at("qv"));
    m.state.qtheta = get_gauss1(post.at("qtheta"));
    for (const auto& q : post.at("qphi")) m.state.qphi.push_back(get_gauss1(q));

    const json& s = j.at("sites");
    const int K = m.config.K;
    const json& lik = s.at("likelihood");
    m.sites.lik.tauw = get_mat(lik.at("tauw"), K);
    m.sites.lik.nuw = get_mat(lik.at("nuw"), K);
    m.sites.lik.alpha = get_mat(lik.at("alpha"), K + 1);
    m.sites.lik.nuv = get_mat(lik.at("nuv"), K + 1);
    m.sites.lik.theta = get_sites(lik.at("theta"));
    m.sites.wprior.w = get_sites(s.at("weight_prior").at("w"));
    m.sites.wprior.phi = get_sites(s.at("weight_prior").at("phi"));
    m.sites.vprior.v = get_sites(s.at("output_prior"));
    m.sites.thetaActive = s.at("theta_active").get<bool>();
    m.sites.wPriorActive = s.at("w_prior_active").get<bool>();
    m.sites.vPriorActive = s.at("v_prior_active").get<bool>();
    m.report = report_from(j.at("report"));
    if (static_cast<int>(m.state.qw.size()) != K || m.state.qv.dim() != K + 1)
      throw ParseError("posterior shape does not match hidden_units");
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

Model load_model(const std::string& path) { return parse_model(read_file(path)); }

FitConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from(j);
}

FitConfig load_config(const std::string& path) {
  try {
    return parse_config(read_file(path));
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

std::string serialize_config(const FitConfig& cfg) { return config_json(cfg).dump(1) + "\n"; }

std::string serialize_report(const FitReport& r) { return report_json(r).dump(1) + "\n"; }

FitConfig preset_config(SynthCase c) {
  FitConfig cfg;
  cfg.K = 10;
  cfg.muTheta0 = 2.0 * std::log(0.05);
  cfg.priorSchedule = PriorSchedule::InnerIteration;
  cfg.deltaPrior = 0.3;
  switch (c) {
    case SynthCase::Clusters:
      cfg.priors.family = PriorFamily::Laplace;
      cfg.grouping = Grouping::Shared;
      cfg.priors.muPhi0 = 2.0 * std::log(0.1);
      cfg.priors.sigmaPhi0Sq = 1.5 * 1.5;
      cfg.sigmaTheta0Sq = 1.5 * 1.5;
      break;
    case SynthCase::Additive:
      cfg.priors.family = PriorFamily::GaussianArd;
      cfg.grouping = Grouping::Ard;
      cfg.init.wPriorVar = 0.4 * 0.4;
      cfg.sigmaTheta0Sq = 4.0;
      break;
    case SynthCase::Step:
      cfg.priors.family = PriorFamily::Laplace;
      cfg.grouping = Grouping::Shared;
      cfg.sigmaTheta0Sq = 4.0;
      break;
  }
  return cfg;
}

}  // namespace nnep
