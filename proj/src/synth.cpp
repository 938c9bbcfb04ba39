#include <algorithm>
#include <cmath>
#include <random>

#include "nnep/dataset.hpp"
#include "nnep/errors.hpp"
#include "nnep/special.hpp"

namespace nnep {

SynthCase parse_synth_case(const std::string& name) {
  if (name == "clusters") return SynthCase::Clusters;
  if (name == "additive") return SynthCase::Additive;
  if (name == "step") return SynthCase::Step;
  throw ConfigError("unknown synthetic case '" + name + "' (expected clusters, additive or step)");
}

namespace {

// three square clusters on the diagonal with levels 1, 0 and 0.8
Table clusters(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  const double lower[3] = {0.5, -0.5, -1.5};
  const double level[3] = {1.0, 0.0, 0.8};
  Table t;
  t.X.resize(n, 2);
  t.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const int c = i % 3;
    t.X(i, 0) = lower[c] + unit(rng);
    t.X(i, 1) = lower[c] + unit(rng);
    t.y(i) = level[c] + noise(rng);
  }
  t.featureNames = {"x1", "x2"};
  return t;
}

// ten inputs: x1 unused, x2..x5 linear ramps, x6..x9 sines of growing
// frequency, x10 a step
double additive_effect(int j, double x) {
  switch (j) {
    case 0: return 0.0;
    case 1: return 0.1 * x;
    case 2: return 0.2 * x;
    case 3: return 0.3 * x;
    case 4: return 0.4 * x;
    case 5: return 0.5 * std::sin(0.5 * x);
    case 6: return 0.5 * std::sin(x);
    case 7: return 0.5 * std::sin(1.5 * x);
    case 8: return 0.5 * std::sin(2.0 * x);
    default: return x >= 0.0 ? 0.5 : -0.5;
  }
}

Table additive(int n, std::mt19937_64& rng) {
  constexpr int d = 10;
  std::normal_distribution<double> noise(0.0, 0.2);
  Table t;
  t.X.resize(n, d);
  t.y = VectorXd::Zero(n);
  std::vector<double> grid(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) grid[i] = -kPi + 2.0 * kPi * i / (n - 1.0);
  for (int j = 0; j < d; ++j) {
    std::shuffle(grid.begin(), grid.end(), rng);
    for (int i = 0; i < n; ++i) t.X(i, j) = grid[i];
    t.featureNames.push_back("x" + std::to_string(j + 1));
  }
  for (int i = 0; i < n; ++i) {
    double f = 0.0;
    for (int j = 0; j < d; ++j) f += additive_effect(j, t.X(i, j));
    t.y(i) = f + noise(rng);
  }
  return t;
}

Table step(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-2.0, 2.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  Table t;
  t.X.resize(n, 1);
  t.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = pos(rng);
    t.X(i, 0) = x;
    t.y(i) = (x >= 0.0 ? 1.0 : 0.0) + noise(rng);
  }
  t.featureNames = {"x"};
  return t;
}

}  // namespace

Table synth_table(SynthCase c, int n, std::uint64_t seed) {
  if (n < 10) throw ConfigError("synthetic data needs at least 10 rows");
  std::mt19937_64 rng(seed);
  switch (c) {
    case SynthCase::Clusters: return clusters(n, rng);
    case SynthCase::Additive: return additive(n, rng);
    default: return step(n, rng);
  }
}

Dataset synth_case(SynthCase c, int n, std::uint64_t seed) { return normalize(synth_table(c, n, seed)); }

}  // namespace nnep
