#include "evidencerank/synthetic.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "evidencerank/error.hpp"
#include "evidencerank/random.hpp"

namespace evidencerank::synthetic {
namespace {

void check(const ToyConfig& cfg, ToyKind expected, const char* what) {
  if (cfg.kind != expected) {
    throw InvalidInput(std::string(what) + ": config kind is " +
                       std::string(kind_name(cfg.kind)));
  }
  if (cfg.n < 2) throw InvalidInput(std::string(what) + ": need n >= 2");
  if (!(cfg.noise_level >= 0.0) || !std::isfinite(cfg.noise_level)) {
    throw InvalidInput(std::string(what) + ": noise level must be nonnegative");
  }
}

void fill_normal(Rng& rng, double* data, std::size_t count, double scale) {
  for (std::size_t i = 0; i < count; ++i) data[i] = scale * rng.normal();
}

}  // namespace

ClassificationData gen_clusters(const ToyConfig& cfg) {
  check(cfg, ToyKind::kClassification3, "gen_clusters");
  const double radius = kClusterSide / std::sqrt(3.0);
  std::array<std::array<double, 2>, 3> centers{};
  for (int c = 0; c < 3; ++c) {
    const double angle = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * c / 3.0;
    centers[c] = {radius * std::cos(angle), radius * std::sin(angle)};
  }

  Rng points = Rng::stream(cfg.seed, "cluster-points");
  Rng noise = Rng::stream(cfg.seed, "feature-noise");
  ClassificationData data;
  data.classes = 3;
  data.features.resize(static_cast<Eigen::Index>(cfg.n), 2);
  data.labels.resize(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const auto c = static_cast<std::int64_t>(i % 3);
    data.labels[i] = c;
    for (int d = 0; d < 2; ++d) {
      const double clean = centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] +
                           kClusterStd * points.normal();
      data.features(static_cast<Eigen::Index>(i), d) = clean + cfg.noise_level * noise.normal();
    }
  }
  return data;
}

RegressionData gen_regression(const ToyConfig& cfg) {
  check(cfg, ToyKind::kRegression1d, "gen_regression");
  Rng xs = Rng::stream(cfg.seed, "x");
  Rng label_noise = Rng::stream(cfg.seed, "label-noise");
  Rng feature_noise = Rng::stream(cfg.seed, "feature-noise");
  const auto n = static_cast<Eigen::Index>(cfg.n);
  RegressionData data;
  data.features.resize(n, 1);
  data.targets.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = xs.uniform();
    data.targets(i, 0) = kRegressionSlope * x + kRegressionNoiseStd * label_noise.normal();
    data.features(i, 0) = x + cfg.noise_level * feature_noise.normal();
  }
  return data;
}

RegressionData gen_random(const ToyConfig& cfg, std::size_t dims, std::size_t outputs) {
  if (dims < 1 || outputs < 1 || cfg.n < 1) {
    throw InvalidInput("gen_random: sizes must be positive");
  }
  Rng feature_rng = Rng::stream(cfg.seed, "random-features");
  Rng target_rng = Rng::stream(cfg.seed, "random-targets");
  RegressionData data;
  data.features.resize(static_cast<Eigen::Index>(cfg.n), static_cast<Eigen::Index>(dims));
  data.targets.resize(static_cast<Eigen::Index>(cfg.n), static_cast<Eigen::Index>(outputs));
  fill_normal(feature_rng, data.features.data(), cfg.n * dims, 1.0);
  fill_normal(target_rng, data.targets.data(), cfg.n * outputs, 1.0);
  return data;
}

RegressionData gen_planted(const ToyConfig& cfg, std::size_t dims, std::size_t outputs) {
  if (dims < 1 || outputs < 1 || cfg.n < 1) {
    throw InvalidInput("gen_planted: sizes must be positive");
  }
  Rng feature_rng = Rng::stream(cfg.seed, "planted-features");
  Rng weight_rng = Rng::stream(cfg.seed, "planted-weights");
  Rng noise_rng = Rng::stream(cfg.seed, "planted-noise");
  RegressionData data;
  const auto n = static_cast<Eigen::Index>(cfg.n);
  const auto d = static_cast<Eigen::Index>(dims);
  const auto k = static_cast<Eigen::Index>(outputs);
  data.features.resize(n, d);
  fill_normal(feature_rng, data.features.data(), cfg.n * dims, 1.0);
  Matrix weights(d, k);
  fill_normal(weight_rng, weights.data(), dims * outputs, 1.0 / std::sqrt(static_cast<double>(dims)));
  Matrix noise(n, k);
  fill_normal(noise_rng, noise.data(), cfg.n * outputs, cfg.noise_level);
  data.targets = data.features * weights + noise;
  return data;
}

std::string_view kind_name(ToyKind kind) {
  switch (kind) {
    case ToyKind::kClassification3:
      return "classification";
    case ToyKind::kRegression1d:
      return "regression";
    case ToyKind::kRandom:
      return "random";
  }
  return "unknown";
}

ToyKind parse_kind(std::string_view name) {
  if (name == "classification" || name == "classification3" || name == "clusters") {
    return ToyKind::kClassification3;
  }
  if (name == "regression" || name == "regression1d") return ToyKind::kRegression1d;
  if (name == "random") return ToyKind::kRandom;
  throw InvalidInput("unknown toy kind '" + std::string(name) +
                     "' (expected classification, regression or random)");
}

}  // namespace evidencerank::synthetic
