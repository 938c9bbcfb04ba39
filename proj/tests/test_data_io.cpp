#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "nnep/dataset.hpp"
#include "nnep/errors.hpp"
#include "nnep/model_io.hpp"

using namespace nnep;

TEST(Csv, ParsesHeaderAndTargetColumn) {
  const Table t = parse_csv("a,b,y\n1,2,3\n4,5,6\n");
  EXPECT_EQ(t.featureNames, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.targetName, "y");
  EXPECT_EQ(t.X.rows(), 2);
  EXPECT_DOUBLE_EQ(t.X(1, 1), 5.0);
  EXPECT_DOUBLE_EQ(t.y(0), 3.0);

  CsvOptions opt;
  opt.target = "a";
  const Table u = parse_csv("a,b,y\n1,2,3\n4,5,6\n", opt);
  EXPECT_EQ(u.featureNames, (std::vector<std::string>{"b", "y"}));
  EXPECT_DOUBLE_EQ(u.y(1), 4.0);
}

TEST(Csv, RejectsBadInput) {
  EXPECT_THROW(parse_csv("a,y\n1,nan\n"), NonFiniteError);
  EXPECT_THROW(parse_csv("a,y\n1,inf\n"), NonFiniteError);
  EXPECT_THROW(parse_csv("a,y\n1,abc\n"), ParseError);
  EXPECT_THROW(parse_csv("a,y\n1,2,3\n"), ParseError);
  EXPECT_THROW(parse_csv(""), ParseError);
  EXPECT_THROW(parse_csv("a,\"y\n1,2\n"), ParseError);
}

TEST(Csv, FormatRoundTrip) {
  const Table t = synth_table(SynthCase::Clusters, 30, 4);
  const Table back = parse_csv(format_csv(t));
  EXPECT_EQ(back.featureNames, t.featureNames);
  EXPECT_EQ(back.X, t.X);
  EXPECT_EQ(back.y, t.y);
}

TEST(Normalize, ZeroMeanUnitSdAndBiasColumn) {
  const Table t = synth_table(SynthCase::Additive, 100, 1);
  const Dataset d = normalize(t);
  ASSERT_EQ(d.X.cols(), t.X.cols() + 1);
  for (Eigen::Index c = 0; c + 1 < d.X.cols(); ++c) {
    EXPECT_NEAR(d.X.col(c).mean(), 0.0, 1e-12);
    const double sd = std::sqrt((d.X.col(c).array() - d.X.col(c).mean()).square().sum() / (d.X.rows() - 1.0));
    EXPECT_NEAR(sd, 1.0, 1e-12);
  }
  EXPECT_TRUE((d.X.col(d.X.cols() - 1).array() == 1.0).all());
  EXPECT_NEAR(d.y.mean(), 0.0, 1e-12);
  const MatrixXd back = denormalize_inputs(d.X, d.norm);
  EXPECT_LT((back - t.X).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((denormalize_target(d.y, d.norm) - t.y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalize, ConstantColumnThrows) {
  EXPECT_THROW(normalize(parse_csv("a,b,y\n1,2,3\n1,5,6\n1,0,1\n")), ConstantColumnError);
  EXPECT_THROW(normalize(parse_csv("a,y\n1,2\n3,2\n")), ConstantColumnError);
}

TEST(Synth, ClustersSitNearTheirLevels) {
  const Table t = synth_table(SynthCase::Clusters, 600, 1);
  int near = 0;
  for (Eigen::Index i = 0; i < t.X.rows(); ++i) {
    const double level = t.X(i, 0) > 0.5 ? 1.0 : (t.X(i, 0) > -0.5 ? 0.0 : 0.8);
    if (std::abs(t.y(i) - level) < 0.3) ++near;
  }
  EXPECT_GE(near, static_cast<int>(0.99 * 600));
}

TEST(Synth, AdditiveFirstInputIsIrrelevant) {
  const Table t = synth_table(SynthCase::Additive, 2000, 2);
  ASSERT_EQ(t.X.cols(), 10);
  const VectorXd x = t.X.col(0).array() - t.X.col(0).mean();
  const VectorXd y = t.y.array() - t.y.mean();
  const double r = x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
  EXPECT_LT(r * r, 0.02);
  EXPECT_GE(t.X.minCoeff(), -M_PI - 1e-12);
  EXPECT_LE(t.X.maxCoeff(), M_PI + 1e-12);
}

TEST(Synth, StepJumpsByOne) {
  const Table t = synth_table(SynthCase::Step, 2000, 3);
  double lo = 0.0, hi = 0.0;
  int nlo = 0, nhi = 0;
  for (Eigen::Index i = 0; i < t.X.rows(); ++i) {
    if (t.X(i, 0) >= 0.0) {
      hi += t.y(i);
      ++nhi;
    } else {
      lo += t.y(i);
      ++nlo;
    }
  }
  EXPECT_NEAR(hi / nhi - lo / nlo, 1.0, 0.03);
}

TEST(Synth, DeterministicAndValidated) {
  EXPECT_EQ(synth_table(SynthCase::Step, 50, 9).y, synth_table(SynthCase::Step, 50, 9).y);
  EXPECT_NE(synth_table(SynthCase::Step, 50, 9).y, synth_table(SynthCase::Step, 50, 10).y);
  EXPECT_THROW(synth_table(SynthCase::Step, 5, 1), ConfigError);
  EXPECT_THROW(parse_synth_case("spiral"), ConfigError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-2.0), "-2");
  std::mt19937_64 rng(14);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 1000; ++i) {
    const double x = n01(rng) * std::exp(10.0 * n01(rng));
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(Config, ParsesKnownKeysAndRejectsUnknown) {
  const FitConfig cfg = parse_config(R"({"hidden_units": 4, "delta_w": 0.5, "update_mode": "parallel"})");
  EXPECT_EQ(cfg.K, 4);
  EXPECT_DOUBLE_EQ(cfg.deltaW, 0.5);
  EXPECT_EQ(cfg.updateMode, UpdateMode::Parallel);
  EXPECT_THROW(parse_config(R"({"hidden_unitz": 4})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"update_mode": "sideways"})"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
}

TEST(Config, SerializeRoundTrip) {
  FitConfig cfg = preset_config(SynthCase::Additive);
  cfg.thetaKnown = -3.0;
  const std::string text = serialize_config(cfg);
  EXPECT_EQ(serialize_config(parse_config(text)), text);
}

TEST(ModelIo, RoundTripIsByteExact) {
  const Dataset data = synth_case(SynthCase::Clusters, 40, 5);
  FitConfig cfg = preset_config(SynthCase::Clusters);
  cfg.K = 2;
  cfg.maxOuterIters = 5;
  const Model m = fit_model(data, cfg);
  const std::string text = serialize_model(m);
  const Model back = parse_model(text);
  EXPECT_EQ(serialize_model(back), text);
  EXPECT_EQ(back.state.qv.mean(), m.state.qv.mean());
  EXPECT_EQ(back.featureNames, m.featureNames);

  const auto dir = std::filesystem::temp_directory_path() / "nnep_model_io_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.json").string();
  write_file_atomic(path, text);
  EXPECT_EQ(serialize_model(load_model(path)), text);
  std::filesystem::remove_all(dir);
}

TEST(ModelIo, RejectsMalformedModels) {
  EXPECT_THROW(parse_model("{}"), Error);
  EXPECT_THROW(parse_model("[1, 2"), Error);
}
