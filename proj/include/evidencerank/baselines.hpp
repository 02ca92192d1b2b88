#pragma once

// Reference transferability scores: LEEP, NCE and a ridge linear probe.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evidencerank/types.hpp"

namespace evidencerank::baselines {

// n x Z source-model class probabilities; rows nonnegative, summing to 1.
using SourcePredictions = RowMatrix;

// Checks row sums (within 1e-6) and nonnegativity; throws InvalidInput.
void validate_source_predictions(const SourcePredictions& theta);

// Log expected empirical prediction. labels are target classes in [0, C).
double leep(const SourcePredictions& theta, std::span<const std::int64_t> labels);

// Negative conditional entropy -H(Y | Z) of the empirical joint.
double nce(std::span<const std::int64_t> pseudo_labels,
           std::span<const std::int64_t> labels);

// Row-wise argmax, ties to the lowest index.
std::vector<std::int64_t> argmax_pseudo_labels(const SourcePredictions& theta);

struct ProbeOptions {
  std::vector<double> lambdas = {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3};
  int folds = 5;
  std::uint64_t seed = 0;
  // Treat targets as one-hot classes and score by accuracy. Otherwise score by
  // negative mean squared error.
  bool classification = true;
  // Unpenalized intercept, fitted by centering on the training fold.
  bool fit_intercept = true;
};

struct ProbeResult {
  double best_lambda = 0.0;
  double score = 0.0;
  std::vector<double> scores;  // cross-validated score per lambda, grid order
  std::vector<std::string> warnings;
};

// Cross-validated closed-form ridge head W = (F^T F + lambda I)^-1 F^T Y.
// One eigendecomposition per fold makes each additional lambda cost O(D) per
// projected coefficient.
ProbeResult linear_probe_score(const FeatureMatrix& features,
                               const TargetMatrix& targets,
                               const ProbeOptions& opts = {});

// Fold index (0..folds-1) per sample. Stratified round-robin over a seeded
// shuffle when class labels are given, contiguous blocks of a seeded shuffle
// otherwise.
std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed,
                              std::span<const std::int64_t> classes = {});

}  // namespace evidencerank::baselines
