#pragma once

// Seeded toy data: three 2-D clusters, a noisy 1-D regression, and plain
// Gaussian instances for property tests and benchmarks.

#include <cstdint>
#include <string_view>
#include <vector>

#include "evidencerank/types.hpp"

namespace evidencerank::synthetic {

enum class ToyKind { kClassification3, kRegression1d, kRandom };

struct ToyConfig {
  std::uint64_t seed = 0;
  std::size_t n = 300;
  double noise_level = 0.0;  // std of the Gaussian noise added to features
  ToyKind kind = ToyKind::kRandom;
};

struct ClassificationData {
  FeatureMatrix features;
  std::vector<std::int64_t> labels;
  std::int64_t classes = 0;
};

struct RegressionData {
  FeatureMatrix features;
  TargetMatrix targets;
};

// Cluster geometry: centers on an equilateral triangle of side 1 centered at
// the origin, per-cluster std 0.1, labels assigned round-robin.
inline constexpr double kClusterSide = 1.0;
inline constexpr double kClusterStd = 0.1;

// Regression geometry: x ~ U[0, 1], y = 2x + eps, eps ~ N(0, 0.1^2).
inline constexpr double kRegressionSlope = 2.0;
inline constexpr double kRegressionNoiseStd = 0.1;

// Three clusters in the plane with N(0, t^2) noise added to every feature. The
// clean points depend only on the seed, so a noise sweep perturbs one fixed
// dataset.
ClassificationData gen_clusters(const ToyConfig& cfg);

// Features x' = x + N(0, t^2); targets y = 2x + eps are identical across t for
// a given seed.
RegressionData gen_regression(const ToyConfig& cfg);

// i.i.d. standard normal features (n x dims) and targets (n x outputs).
RegressionData gen_random(const ToyConfig& cfg, std::size_t dims, std::size_t outputs);

// Targets with a planted linear signal, Y = F W + noise (W ~ N(0, 1/D),
// noise std = cfg.noise_level), for benchmarking on realistic spectra.
RegressionData gen_planted(const ToyConfig& cfg, std::size_t dims, std::size_t outputs);

std::string_view kind_name(ToyKind kind);
ToyKind parse_kind(std::string_view name);  // throws InvalidInput

}  // namespace evidencerank::synthetic
