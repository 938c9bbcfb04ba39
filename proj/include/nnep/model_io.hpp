#pragma once

#include <string>
#include <vector>

#include "nnep/dataset.hpp"
#include "nnep/engine.hpp"

namespace nnep {

inline constexpr int kModelVersion = 1;

struct Model {
  FitConfig config;
  NormStats norm;
  std::vector<std::string> featureNames;
  std::string targetName = "y";
  PosteriorState state;
  AllSites sites;
  FitReport report;
};

Model fit_model(const Dataset& data, const FitConfig& cfg);

// JSON text with sorted keys; parse then serialize reproduces the bytes
std::string serialize_model(const Model& m);
Model parse_model(const std::string& text);
Model load_model(const std::string& path);

// unknown keys raise ConfigError
FitConfig parse_config(const std::string& text);
FitConfig load_config(const std::string& path);
std::string serialize_config(const FitConfig& cfg);

std::string serialize_report(const FitReport& r);

// presets for the three demonstration problems
FitConfig preset_config(SynthCase c);

}  // namespace nnep
