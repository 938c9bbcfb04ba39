#include "nnep/predict.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "nnep/errors.hpp"
#include "nnep/special.hpp"

namespace nnep {

namespace {

const QuadratureRule& hermite(int n) {
  static std::mutex mu;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_hermite_rule(n)).first;
  return it->second;
}

}  // namespace

double PredictiveMoments::log_density(double y) const {
  if (!(theta.var > 0.0)) return log_normal_pdf(y, fMean, fVar + std::exp(theta.mean));
  const QuadratureRule& rule = hermite(nodes);
  const double sd = std::sqrt(theta.var);
  std::vector<double> terms(rule.nodes.size());
  for (size_t j = 0; j < terms.size(); ++j)
    terms[j] = std::log(rule.weights[j]) + log_normal_pdf(y, fMean, fVar + std::exp(theta.mean + sd * rule.nodes[j]));
  return logsumexp(terms);
}

PredictiveMoments predict(const PosteriorState& state, const VectorXd& xStar, int thetaNodes, int activationNodes) {
  const int K = static_cast<int>(state.qw.size());
  if (K == 0 || xStar.size() != state.qw[0].dim()) throw DimensionMismatch("input length does not match the model");
  std::vector<Gaussian1D> h(K);
  for (int k = 0; k < K; ++k) h[k] = {xStar.dot(state.qw[k].mean()), xStar.dot(state.qw[k].cov() * xStar)};
  VectorXd mG, vG;
  activation_vectors(h, K, activationNodes, mG, vG);
  const FMoments f = predictive_f_moments(state.qv, mG, vG);
  PredictiveMoments p;
  p.fMean = f.mF;
  p.fVar = std::max(f.vF, 0.0);
  p.theta = state.qtheta;
  p.nodes = thetaNodes;
  p.yVar = p.fVar + std::exp(state.qtheta.mean + 0.5 * std::max(state.qtheta.var, 0.0));
  return p;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double s = 0.0;
  for (double v : values) s += (v - mean) * (v - mean);
  return std::sqrt(s / (values.size() - 1.0));
}

namespace {

MetricSummary summarize(const std::vector<double>& lpd, const std::vector<double>& se) {
  MetricSummary s;
  s.lpdMean = std::accumulate(lpd.begin(), lpd.end(), 0.0) / lpd.size();
  s.lpdStd = sample_std(lpd);
  s.lpdP1 = percentile(lpd, 0.01);
  s.seMean = std::accumulate(se.begin(), se.end(), 0.0) / se.size();
  s.seStd = sample_std(se);
  s.seP99 = percentile(se, 0.99);
  return s;
}

}  // namespace

Evaluation evaluate(const PosteriorState& state, const MatrixXd& X, const VectorXd& y, double yMean, double yStd,
                    int thetaNodes) {
  if (X.rows() == 0) throw DimensionMismatch("evaluation set is empty");
  if (X.rows() != y.size()) throw DimensionMismatch("evaluation inputs and targets differ in length");
  if (state.qw.empty() || X.cols() != state.qw[0].dim())
    throw DimensionMismatch("evaluation inputs do not match the model width");
  Evaluation ev;
  const size_t n = static_cast<size_t>(X.rows());
  ev.lpd.resize(n);
  ev.se.resize(n);
  ev.lpdNormalized.resize(n);
  ev.seNormalized.resize(n);
  const double logScale = std::log(yStd);
  for (size_t i = 0; i < n; ++i) {
    const PredictiveMoments p = predict(state, X.row(static_cast<Eigen::Index>(i)).transpose(), thetaNodes);
    const double yn = (y(i) - yMean) / yStd;
    ev.lpdNormalized[i] = p.log_density(yn);
    ev.seNormalized[i] = (yn - p.fMean) * (yn - p.fMean);
    ev.lpd[i] = ev.lpdNormalized[i] - logScale;
    const double r = y(i) - (yMean + yStd * p.fMean);
    ev.se[i] = r * r;
  }
  ev.summary = summarize(ev.lpd, ev.se);
  ev.summaryNormalized = summarize(ev.lpdNormalized, ev.seNormalized);
  return ev;
}

}  // namespace nnep
