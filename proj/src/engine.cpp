#include "nnep/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "nnep/errors.hpp"

namespace nnep {

void FitConfig::validate(Eigen::Index d) const {
  auto in_unit = [](double x) { return x > 0.0 && x <= 1.0; };
  if (K < 1) throw ConfigError("hidden_units must be at least 1");
  if (!in_unit(eta) || !in_unit(etaPrior)) throw ConfigError("eta and eta_prior must lie in (0, 1]");
  if (!in_unit(deltaW) || !in_unit(deltaV) || !in_unit(deltaPrior)) throw ConfigError("damping factors must lie in (0, 1]");
  if (maxOuterIters < 0 || initIters < 0) throw ConfigError("iteration counts must be non-negative");
  if (!(tolMomentMatch > 0.0)) throw ConfigError("tol_moment_match must be positive");
  if (initIters == 0 && !thetaKnown) throw ConfigError("init_iters must be positive when the noise level is inferred");
  if (!(sigmaTheta0Sq > 0.0) || !(priors.sigmaPhi0Sq > 0.0) || !(priors.sigmaV0Sq > 0.0) ||
      !(priors.sigmaBias0Sq > 0.0))
    throw ConfigError("prior variances must be positive");
  if (!(priors.nuV > 0.0)) throw ConfigError("output prior degrees of freedom must be positive");
  if (!(init.wPriorVar > 0.0) || !(init.wBiasPriorVar > 0.0) || !(init.vPriorVar > 0.0))
    throw ConfigError("initial prior variances must be positive");
  if (quad.tiltNodes < 2 || quad.phiNodes < 2 || quad.activationNodes < 1 || quad.predictiveNodes < 1)
    throw ConfigError("quadrature node counts too small");
  if (d < 1) throw ConfigError("design matrix needs at least the bias column");
  const size_t kd = static_cast<size_t>(K) * static_cast<size_t>(d);
  if (!priors.groupIndex.empty()) {
    if (priors.groupIndex.size() != kd) throw ConfigError("group_index length must equal hidden_units * columns");
    const int L = priors.num_groups();
    std::vector<char> seen(static_cast<size_t>(L) + 1, 0);
    for (int l : priors.groupIndex) {
      if (l < 0) throw ConfigError("group_index entries must be non-negative");
      seen[l] = 1;
    }
    for (int l = 1; l <= L; ++l)
      if (!seen[l]) throw ConfigError("group_index must use contiguous groups 1..L");
  }
  if (init.wPriorMean && static_cast<size_t>(init.wPriorMean->size()) != kd)
    throw ConfigError("w_prior_mean length must equal hidden_units * columns");
  if (init.wPriorVariance) {
    if (static_cast<size_t>(init.wPriorVariance->size()) != kd)
      throw ConfigError("w_prior_variance length must equal hidden_units * columns");
    if (!(init.wPriorVariance->array() > 0.0).all()) throw ConfigError("w_prior_variance must be positive");
  }
}

PriorConfig resolved_priors(const FitConfig& cfg, Eigen::Index d) {
  PriorConfig pc = cfg.priors;
  pc.etaPrior = cfg.etaPrior;
  if (pc.groupIndex.empty()) pc.groupIndex = default_groups(cfg.grouping, cfg.K, static_cast<int>(d));
  return pc;
}

std::optional<double> fixed_theta(const FitConfig& cfg, const AllSites& sites) {
  if (cfg.thetaKnown) return cfg.thetaKnown;
  if (!sites.thetaActive) return cfg.init.thetaInit;
  return std::nullopt;
}

namespace {

Gaussian1D project(const GaussianDense& q, const Eigen::Ref<const VectorXd>& x) {
  return {x.dot(q.mean()), x.dot(q.cov() * x)};
}

Gaussian1D assemble_theta(const FitConfig& cfg, const AllSites& sites) {
  if (auto th = fixed_theta(cfg, sites)) return {*th, 0.0};
  double tau = 1.0 / cfg.sigmaTheta0Sq;
  double nu = cfg.muTheta0 / cfg.sigmaTheta0Sq;
  for (const NaturalSite1D& s : sites.lik.theta) {
    tau += s.tau;
    nu += s.nu;
  }
  if (!(tau > 0.0)) throw NotPositiveDefinite("noise posterior has non-positive precision");
  return {nu / tau, 1.0 / tau};
}

GaussianDense assemble_v(const AllSites& sites) {
  const size_t p = sites.vprior.v.size();
  VectorXd tau(p), nu(p);
  for (size_t k = 0; k < p; ++k) {
    tau(k) = sites.vprior.v[k].tau;
    nu(k) = sites.vprior.v[k].nu;
  }
  return assemble_posterior_v(sites.lik.alpha, sites.lik.nuv, tau, nu);
}

TiltOptions tilt_options(const FitConfig& cfg, const AllSites& sites) {
  TiltOptions opt;
  opt.eta = cfg.eta;
  opt.grid = uniform_grid_rule(cfg.quad.tiltNodes, cfg.quad.tiltHalfWidth);
  opt.activationNodes = cfg.quad.activationNodes;
  opt.massFloor = cfg.quad.massFloor;
  opt.fixedTheta = fixed_theta(cfg, sites);
  return opt;
}

double v_residual(const VectorXd& mean, const MatrixXd& cov, const GaussianDense& q) {
  double r = 0.0;
  for (Eigen::Index c = 0; c < mean.size(); ++c) {
    const Gaussian1D tilted{mean(c), std::max(cov(c, c), kVarianceFloor)};
    r = std::max(r, moment_residual(tilted, q.marginal(c)));
  }
  return r;
}

struct SiteProposal {
  bool visited = false;
  double logZhat = 0.0;
  double residual = 0.0;
  int skipEvents = 0;
  std::vector<NaturalSite1D> h;
  std::vector<char> hOk;
  std::vector<Gaussian1D> hTilted;
  std::vector<Gaussian1D> hMarg;
  NaturalSite1D theta;
  bool thetaOk = false;
  VSite v;
  bool vOk = false;
};

CavityBundle make_cavities(Eigen::Index i, const MatrixXd& X, const PosteriorState& state, const AllSites& sites,
                           const FitConfig& cfg, bool thetaFixed, std::vector<Gaussian1D>* hMarg) {
  const int K = cfg.K;
  CavityBundle cav;
  cav.h.resize(K);
  if (hMarg) hMarg->resize(K);
  for (int k = 0; k < K; ++k) {
    const Gaussian1D marg = project(state.qw[k], X.row(i).transpose());
    if (hMarg) (*hMarg)[k] = marg;
    cav.h[k] = cavity_scalar(marg, {sites.lik.tauw(i, k), sites.lik.nuw(i, k)}, cfg.eta);
  }
  cav.v = cavity_v(state.qv, sites.lik.alpha.row(i).transpose(), sites.lik.nuv.row(i).transpose(), cfg.eta);
  if (!thetaFixed) cav.theta = cavity_scalar(state.qtheta, sites.lik.theta[i], cfg.eta);
  return cav;
}

SiteProposal propose(Eigen::Index i, const MatrixXd& X, const VectorXd& y, const PosteriorState& state,
                     const AllSites& sites, const FitConfig& cfg, const SweepControl& control, const TiltOptions& opt) {
  SiteProposal out;
  const int K = cfg.K;
  const bool thetaFixed = opt.fixedTheta.has_value();
  std::vector<Gaussian1D> hMarg;
  CavityBundle cav;
  TiltedSummary t;
  try {
    cav = make_cavities(i, X, state, sites, cfg, thetaFixed, &hMarg);
    if (control.thetaOnly) {
      VectorXd mG, vG;
      activation_vectors(cav.h, K, opt.activationNodes, mG, vG);
      const FMoments f = predictive_f_moments(cav.v, mG, vG);
      const ThetaTilt th = tilted_theta(f.mF, f.vF, y(i), cav.theta, cfg.eta, opt.grid, opt.massFloor);
      t.logZhat = th.logZhat;
      t.thetaMean = th.mean;
      t.thetaVar = th.var;
    } else {
      t = tilted_moments(cav, y(i), K, opt);
    }
  } catch (const CavityCollapse&) {
    out.skipEvents = 1;
    return out;
  } catch (const DegenerateMass&) {
    out.skipEvents = 1;
    return out;
  }
  out.visited = true;
  out.logZhat = t.logZhat;

  if (!thetaFixed) {
    const Gaussian1D tilted{t.thetaMean, t.thetaVar};
    out.residual = std::max(out.residual, moment_residual(tilted, state.qtheta));
    out.theta = site_update_scalar(tilted, state.qtheta, sites.lik.theta[i], cfg.eta, control.deltaW);
    out.thetaOk = std::isfinite(out.theta.tau) && std::isfinite(out.theta.nu);
  }
  if (control.thetaOnly) return out;

  const int active = control.activeUnits < 0 ? K : std::min(control.activeUnits, K);
  out.h.resize(K);
  out.hOk.assign(K, 0);
  out.hTilted.resize(K);
  out.hMarg = hMarg;
  for (int k = 0; k < active; ++k) {
    const Gaussian1D tilted{t.hMean[k], t.hVar[k]};
    out.hTilted[k] = tilted;
    out.residual = std::max(out.residual, moment_residual(tilted, hMarg[k]));
    out.h[k] = site_update_scalar(tilted, hMarg[k], {sites.lik.tauw(i, k), sites.lik.nuw(i, k)}, cfg.eta,
                                  control.deltaW);
    out.hOk[k] = std::isfinite(out.h[k].tau) && std::isfinite(out.h[k].nu);
  }

  out.residual = std::max(out.residual, v_residual(t.vMean, t.vCov, state.qv));
  try {
    const VSite old{sites.lik.alpha.row(i).transpose(), sites.lik.nuv.row(i).transpose()};
    out.v = site_update_v(cav.v, t.mG, t.aHat, t.bHat, y(i), t.mF, old, cfg.eta, control.deltaV);
    out.vOk = out.v.alpha.allFinite() && out.v.nuv.allFinite();
  } catch (const SkippedUpdate&) {
    out.vOk = false;
  }
  if (!out.vOk) ++out.skipEvents;
  return out;
}

constexpr int kStepHalvings = 3;

void apply_sequential(Eigen::Index i, const MatrixXd& X, const SiteProposal& p, PosteriorState& state,
                      AllSites& sites, const FitConfig& cfg, double deltaW, int& skips) {
  int events = p.skipEvents;
  if (p.thetaOk) {
    const NaturalSite1D old = sites.lik.theta[i];
    const double prec = 1.0 / state.qtheta.var + p.theta.tau - old.tau;
    if (prec > 0.0) {
      const double shift = state.qtheta.mean / state.qtheta.var + p.theta.nu - old.nu;
      state.qtheta = {shift / prec, 1.0 / prec};
      sites.lik.theta[i] = p.theta;
    } else {
      ++events;
    }
  }
  const VectorXd x = X.row(i).transpose();
  for (size_t k = 0; k < p.hOk.size(); ++k) {
    if (!p.hOk[k]) continue;
    const NaturalSite1D old{sites.lik.tauw(i, k), sites.lik.nuw(i, k)};
    const VectorXd oldTau = sites.lik.tauw.col(k);
    const VectorXd oldVar = projected_variances(X, state.qw[k].cov());
    VectorXd newTau = oldTau;
    NaturalSite1D site = p.h[k];
    double delta = deltaW;
    bool accepted = false;
    // halve the step until no other cavity of this unit collapses
    for (int attempt = 0; attempt <= kStepHalvings && !accepted; ++attempt) {
      if (attempt > 0) {
        delta *= 0.5;
        site = site_update_scalar(p.hTilted[k], p.hMarg[k], old, cfg.eta, delta);
      }
      try {
        GaussianDense updated = rank_one_update(state.qw[k], x, site.tau - old.tau, site.nu - old.nu);
        newTau(i) = site.tau;
        if (!keeps_cavities(oldVar, projected_variances(X, updated.cov()), oldTau, newTau, cfg.eta)) continue;
        state.qw[k] = std::move(updated);
        sites.lik.tauw(i, k) = site.tau;
        sites.lik.nuw(i, k) = site.nu;
        accepted = true;
      } catch (const DowndateViolation&) {
      }
    }
    if (!accepted) ++events;
  }
  if (p.vOk) {
    sites.lik.alpha.row(i) = p.v.alpha.transpose();
    sites.lik.nuv.row(i) = p.v.nuv.transpose();
  }
  if (events > 0) ++skips;
}

void apply_parallel(Eigen::Index i, const SiteProposal& p, AllSites& sites, int& skips) {
  if (p.thetaOk) sites.lik.theta[i] = p.theta;
  for (size_t k = 0; k < p.hOk.size(); ++k) {
    if (!p.hOk[k]) continue;
    sites.lik.tauw(i, k) = p.h[k].tau;
    sites.lik.nuw(i, k) = p.h[k].nu;
  }
  if (p.vOk) {
    sites.lik.alpha.row(i) = p.v.alpha.transpose();
    sites.lik.nuv.row(i) = p.v.nuv.transpose();
  }
  if (p.skipEvents > 0) ++skips;
}

bool state_finite(const PosteriorState& s) {
  for (const auto& q : s.qw)
    if (!q.mean().allFinite() || !q.cov().allFinite()) return false;
  if (!s.qv.mean().allFinite() || !s.qv.cov().allFinite()) return false;
  if (!std::isfinite(s.qtheta.mean) || !std::isfinite(s.qtheta.var)) return false;
  for (const auto& p : s.qphi)
    if (!std::isfinite(p.mean) || !std::isfinite(p.var)) return false;
  return true;
}

}  // namespace

PosteriorState assemble_state(const MatrixXd& X, const AllSites& sites, const FitConfig& cfg) {
  PosteriorState state;
  state.qw = assemble_qw(X, sites.lik, sites.wprior, cfg.K);
  state.qv = assemble_v(sites);
  state.qtheta = assemble_theta(cfg, sites);
  state.qphi = assemble_phis(resolved_priors(cfg, X.cols()), sites.wprior);
  return state;
}

FitResult initialize(const MatrixXd& X, const VectorXd& y, const FitConfig& cfg) {
  const Eigen::Index d = X.cols();
  cfg.validate(d);
  if (X.rows() != y.size()) throw DimensionMismatch("design matrix and target lengths differ");
  const int K = cfg.K;
  const PriorConfig pc = resolved_priors(cfg, d);

  FitResult r;
  AllSites& s = r.sites;
  s.lik = LikelihoodSites::zeros(X.rows(), K);
  const size_t kd = static_cast<size_t>(K) * static_cast<size_t>(d);
  s.wprior.w.resize(kd);
  s.wprior.phi.assign(kd, NaturalSite1D{});
  for (int k = 0; k < K; ++k) {
    for (Eigen::Index c = 0; c < d; ++c) {
      const size_t j = static_cast<size_t>(k) * d + c;
      double var = c + 1 == d ? cfg.init.wBiasPriorVar : cfg.init.wPriorVar;
      double mean = 0.0;
      if (cfg.init.wPriorVariance) var = (*cfg.init.wPriorVariance)(j);
      if (cfg.init.wPriorMean) mean = (*cfg.init.wPriorMean)(j);
      s.wprior.w[j] = to_natural({mean, var});
    }
  }
  s.vprior.v.resize(K + 1);
  for (int k = 0; k < K; ++k) {
    const double mean = K == 1 ? cfg.init.vMeanLo
                               : cfg.init.vMeanLo + (cfg.init.vMeanHi - cfg.init.vMeanLo) * k / (K - 1.0);
    s.vprior.v[k] = to_natural({mean, cfg.init.vPriorVar});
  }
  s.vprior.v[K] = {1.0 / pc.sigmaBias0Sq, 0.0};
  r.state = assemble_state(X, s, cfg);
  return r;
}

SweepDiagnostics sweep_likelihood(const MatrixXd& X, const VectorXd& y, PosteriorState& state, AllSites& sites,
                                  const FitConfig& cfg, const SweepControl& control) {
  const Eigen::Index n = X.rows();
  const TiltOptions opt = tilt_options(cfg, sites);
  SweepDiagnostics diag;
  diag.logZhat.assign(static_cast<size_t>(n), 0.0);

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (cfg.shuffleSites) {
    std::mt19937_64 rng(cfg.rngSeed + static_cast<std::uint64_t>(control.sweepIndex));
    std::shuffle(order.begin(), order.end(), rng);
  }

  if (cfg.updateMode == UpdateMode::Sequential) {
    for (Eigen::Index i : order) {
      const SiteProposal p = propose(i, X, y, state, sites, cfg, control, opt);
      diag.logZhat[i] = p.logZhat;
      diag.maxResidual = std::max(diag.maxResidual, p.residual);
      apply_sequential(i, X, p, state, sites, cfg, control.deltaW, diag.skips);
    }
    const bool reassemble = cfg.reassembleEvery > 0 && (control.sweepIndex + 1) % cfg.reassembleEvery == 0;
    if (reassemble) state.qw = assemble_qw(X, sites.lik, sites.wprior, cfg.K);
    for (auto& q : state.qw) q.factorize();
  } else {
    std::vector<SiteProposal> props(static_cast<size_t>(n));
    for (Eigen::Index i : order) props[i] = propose(i, X, y, state, sites, cfg, control, opt);
    for (Eigen::Index i : order) {
      diag.logZhat[i] = props[i].logZhat;
      diag.maxResidual = std::max(diag.maxResidual, props[i].residual);
      apply_parallel(i, props[i], sites, diag.skips);
    }
    state.qw = assemble_qw(X, sites.lik, sites.wprior, cfg.K);
  }
  state.qtheta = assemble_theta(cfg, sites);
  state.qv = assemble_v(sites);
  if (!state_finite(state)) throw NotPositiveDefinite("posterior became non-finite");
  return diag;
}

double loo_density(const std::vector<double>& logZhats) {
  return std::accumulate(logZhats.begin(), logZhats.end(), 0.0);
}

namespace {

struct Recorder {
  const MatrixXd& X;
  const VectorXd& y;
  const FitConfig& cfg;
  FitReport& report;

  void record(const AllSites& sites, double residual, int skips) {
    double lz = std::numeric_limits<double>::quiet_NaN();
    double loo = std::numeric_limits<double>::quiet_NaN();
    try {
      lz = marginal_likelihood(X, y, sites, cfg);
      loo = loo_density(site_log_zhats(X, y, sites, cfg));
    } catch (const Error&) {
    }
    report.logZEP.push_back(lz);
    report.logZLOO.push_back(loo);
    report.maxMomentResidual.push_back(residual);
    report.skipCounts.push_back(skips);
    report.iterations = static_cast<int>(report.logZEP.size());
  }
};

}  // namespace

FitResult fit(const MatrixXd& X, const VectorXd& y, const FitConfig& cfg) {
  FitResult r = initialize(X, y, cfg);
  const Eigen::Index n = X.rows();
  FitReport& rep = r.report;
  double deltaW = cfg.deltaW;
  double deltaV = cfg.deltaV;
  rep.finalDeltaW = deltaW;
  rep.finalDeltaV = deltaV;
  if (n == 0) {
    rep.converged = true;
    rep.stopReason = "no observations";
    return r;
  }
  const PriorConfig pc = resolved_priors(cfg, X.cols());
  const bool wantWPrior = cfg.inputPrior == InputPrior::Hierarchical && pc.num_groups() > 0;
  const bool wantVPrior = cfg.outputPrior == OutputPrior::TruncatedT;
  Recorder rec{X, y, cfg, rep};
  PriorSweepOptions wOpt;
  wOpt.delta = cfg.deltaPrior;
  wOpt.tol = cfg.tolMomentMatch;
  wOpt.maxIters = cfg.priorMaxIters;
  wOpt.phiGrid = uniform_grid_rule(cfg.quad.phiNodes, cfg.quad.phiHalfWidth);
  wOpt.massFloor = cfg.quad.massFloor;
  wOpt.likelihoodEta = cfg.eta;
  PriorSweepOptions vOpt = wOpt;
  vOpt.maxIters = cfg.outputPriorMaxIters;

  int sweepIndex = 0;
  // one sweep with rollback and damping backoff on numerical failure
  auto guarded_sweep = [&](bool thetaOnly, int activeUnits) -> SweepDiagnostics {
    for (;;) {
      PosteriorState savedState = r.state;
      AllSites savedSites = r.sites;
      SweepControl ctl;
      ctl.deltaW = deltaW;
      ctl.deltaV = deltaV;
      ctl.thetaOnly = thetaOnly;
      ctl.activeUnits = activeUnits;
      ctl.sweepIndex = sweepIndex;
      try {
        SweepDiagnostics d = sweep_likelihood(X, y, r.state, r.sites, cfg, ctl);
        ++sweepIndex;
        if (d.skips > cfg.skipFraction * static_cast<double>(n)) {
          deltaW = std::max(cfg.minDelta, 0.8 * deltaW);
          deltaV = std::max(cfg.minDelta, 0.8 * deltaV);
        }
        return d;
      } catch (const NotPositiveDefinite&) {
        r.state = std::move(savedState);
        r.sites = std::move(savedSites);
        if (deltaW <= cfg.minDelta && deltaV <= cfg.minDelta)
          throw Diverged("posterior diverged at the minimum damping factor");
        deltaW = std::max(cfg.minDelta, 0.8 * deltaW);
        deltaV = std::max(cfg.minDelta, 0.8 * deltaV);
      }
    }
  };

  auto out_of_budget = [&]() { return rep.iterations >= cfg.maxOuterIters; };

  // stage (i): likelihood sweeps with the noise level held fixed
  for (int it = 0; it < cfg.initIters && !out_of_budget(); ++it) {
    int active = -1;
    if (cfg.incrementalUnits) active = std::min(cfg.K, 1 + it / std::max(1, cfg.unitsEvery));
    const SweepDiagnostics d = guarded_sweep(false, active);
    rec.record(r.sites, d.maxResidual, d.skips);
  }

  // stage (ii): switch on the noise sites with a noise-only sweep
  if (!cfg.thetaKnown && !out_of_budget()) {
    r.sites.thetaActive = true;
    r.state.qtheta = assemble_theta(cfg, r.sites);
    const SweepDiagnostics d = guarded_sweep(true, -1);
    rec.record(r.sites, d.maxResidual, d.skips);
  }

  double lastResidual = std::numeric_limits<double>::infinity();
  int steadyLoo = 0;
  double prevLoo = std::numeric_limits<double>::quiet_NaN();
  bool wPriorRan = false;
  while (!out_of_budget()) {
    int priorSkips = 0;
    double priorResidual = 0.0;
    // stage (iv): input-prior EP once the rest has settled
    const bool vReady = !wantVPrior || r.sites.vPriorActive;
    const bool settled = lastResidual < 10.0 * cfg.tolMomentMatch || steadyLoo >= 3;
    if (wantWPrior && !wPriorRan && vReady && settled) {
      r.sites.wPriorActive = true;
      const PriorSweepStats st =
          prior_sweep_w(r.state.qw, r.state.qphi, r.sites.wprior, pc, X, r.sites.lik, wOpt);
      priorSkips += st.skips;
      wPriorRan = true;
    } else if (wPriorRan && cfg.priorSchedule == PriorSchedule::InnerIteration) {
      PriorSweepOptions once = wOpt;
      once.maxIters = 1;
      const PriorSweepStats st =
          prior_sweep_w(r.state.qw, r.state.qphi, r.sites.wprior, pc, X, r.sites.lik, once);
      priorSkips += st.skips;
      priorResidual = std::max(priorResidual, st.firstResidual);
    }

    const SweepDiagnostics d = guarded_sweep(false, -1);
    double residual = d.maxResidual;

    // stage (iii): output-prior EP after each q(v) recomputation once the fit has settled
    const double loo = loo_density(d.logZhat);
    if (std::isfinite(prevLoo) && std::abs(loo - prevLoo) < 1e-3 * std::abs(prevLoo))
      ++steadyLoo;
    else
      steadyLoo = 0;
    prevLoo = loo;
    if (wantVPrior && !r.sites.vPriorActive && steadyLoo >= 3) {
      r.sites.vPriorActive = true;
      steadyLoo = 0;
    }
    if (r.sites.vPriorActive) {
      const PriorSweepStats st = prior_sweep_v(r.state.qv, r.sites.vprior, pc, vOpt);
      priorSkips += st.skips;
      priorResidual = std::max(priorResidual, st.firstResidual);
    }
    residual = std::max(residual, priorResidual);
    rec.record(r.sites, residual, d.skips + priorSkips);
    lastResidual = residual;

    const bool stagesDone = (!wantVPrior || r.sites.vPriorActive) && (!wantWPrior || wPriorRan);
    if (stagesDone && residual < cfg.tolMomentMatch) {
      rep.converged = true;
      rep.stopReason = "moment residual below tolerance";
      break;
    }
  }
  if (!rep.converged) rep.stopReason = "iteration budget exhausted";
  r.state = assemble_state(X, r.sites, cfg);
  rep.finalDeltaW = deltaW;
  rep.finalDeltaV = deltaV;
  return r;
}

std::vector<double> site_log_zhats(const MatrixXd& X, const VectorXd& y, const AllSites& sites,
                                   const FitConfig& cfg) {
  const PosteriorState state = assemble_state(X, sites, cfg);
  const TiltOptions opt = tilt_options(cfg, sites);
  std::vector<double> out(static_cast<size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const CavityBundle cav = make_cavities(i, X, state, sites, cfg, opt.fixedTheta.has_value(), nullptr);
    VectorXd mG, vG;
    activation_vectors(cav.h, cfg.K, opt.activationNodes, mG, vG);
    const FMoments f = predictive_f_moments(cav.v, mG, vG);
    const ThetaTilt th = opt.fixedTheta ? tilted_theta_fixed(f.mF, f.vF, y(i), *opt.fixedTheta, cfg.eta)
                                        : tilted_theta(f.mF, f.vF, y(i), cav.theta, cfg.eta, opt.grid, opt.massFloor);
    out[i] = th.logZhat;
  }
  return out;
}

}  // namespace nnep
