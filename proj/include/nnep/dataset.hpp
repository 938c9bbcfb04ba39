#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nnep/numerics.hpp"

namespace nnep {

struct NormStats {
  VectorXd xMean;
  VectorXd xStd;
  double yMean = 0.0;
  double yStd = 1.0;
};

// raw table: inputs and target in their original units
struct Table {
  MatrixXd X;
  VectorXd y;
  std::vector<std::string> featureNames;
  std::string targetName = "y";
  bool hasTarget = true;
};

// normalized inputs with a trailing bias column of ones
struct Dataset {
  MatrixXd X;
  VectorXd y;
  NormStats norm;
  std::vector<std::string> featureNames;
  std::string targetName = "y";
};

struct CsvOptions {
  std::optional<std::string> target;  // defaults to the last column
  bool requireTarget = true;
};

Table parse_csv(const std::string& text, const CsvOptions& opt = {});
Table read_csv(const std::string& path, const CsvOptions& opt = {});
std::string format_csv(const Table& t);

NormStats fit_normalization(const Table& t);
Dataset normalize(const Table& t);
Dataset normalize(const Table& t, const NormStats& stats);
MatrixXd normalize_inputs(const MatrixXd& Xraw, const NormStats& stats);
MatrixXd denormalize_inputs(const MatrixXd& X, const NormStats& stats);
VectorXd denormalize_target(const VectorXd& y, const NormStats& stats);

Dataset load_csv(const std::string& path, const CsvOptions& opt = {});

enum class SynthCase { Clusters, Additive, Step };

SynthCase parse_synth_case(const std::string& name);

// raw synthetic table for the three demonstration problems
Table synth_table(SynthCase c, int n, std::uint64_t seed);
Dataset synth_case(SynthCase c, int n, std::uint64_t seed);

// writes through a temporary file and renames it into place
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

// shortest text that parses back to the same double
std::string format_double(double x);

}  // namespace nnep
