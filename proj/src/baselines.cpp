#include "evidencerank/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "evidencerank/error.hpp"
#include "evidencerank/linalg.hpp"
#include "evidencerank/random.hpp"

namespace evidencerank::baselines {
namespace {

constexpr double kRowSumTolerance = 1e-6;

std::int64_t check_labels(std::span<const std::int64_t> labels, const char* what) {
  std::int64_t max_label = -1;
  for (std::int64_t v : labels) {
    if (v < 0) throw InvalidInput(std::string(what) + ": negative class label");
    max_label = std::max(max_label, v);
  }
  return max_label + 1;
}

Eigen::Index argmax_row(const auto& row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = j;
  }
  return best;
}

std::vector<Eigen::Index> indices_where(const std::vector<int>& folds, int fold,
                                        bool equal) {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if ((folds[i] == fold) == equal) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace

void validate_source_predictions(const SourcePredictions& theta) {
  if (theta.rows() < 1 || theta.cols() < 1) {
    throw InvalidInput("theta: need at least one sample and one source class");
  }
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    const auto row = theta.row(i);
    if (!row.allFinite() || (row.array() < 0.0).any()) {
      throw InvalidInput("theta: row " + std::to_string(i) +
                         " has negative or non-finite entries");
    }
    if ((row.array() == 0.0).all()) {
      throw InvalidInput("theta: row " + std::to_string(i) + " is all zero");
    }
    if (std::abs(row.sum() - 1.0) > kRowSumTolerance) {
      throw InvalidInput("theta: row " + std::to_string(i) + " sums to " +
                         std::to_string(row.sum()) + ", expected 1");
    }
  }
}

double leep(const SourcePredictions& theta, std::span<const std::int64_t> labels) {
  validate_source_predictions(theta);
  const auto n = static_cast<std::size_t>(theta.rows());
  if (labels.size() != n) throw InvalidInput("leep: label count does not match theta rows");
  const auto classes = static_cast<Eigen::Index>(check_labels(labels, "leep"));
  const Eigen::Index z_count = theta.cols();

  // joint(y, z) = sum_i [y_i = y] theta_i(z)
  Matrix joint = Matrix::Zero(classes, z_count);
  for (std::size_t i = 0; i < n; ++i) {
    joint.row(static_cast<Eigen::Index>(labels[i])) += theta.row(static_cast<Eigen::Index>(i));
  }
  const Vector column_mass = joint.colwise().sum().transpose();

  Matrix conditional = Matrix::Zero(classes, z_count);
  for (Eigen::Index z = 0; z < z_count; ++z) {
    if (column_mass(z) > 0.0) conditional.col(z) = joint.col(z) / column_mass(z);
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double expected =
        conditional.row(static_cast<Eigen::Index>(labels[i])).dot(theta.row(row));
    total += std::log(expected);
  }
  return total / static_cast<double>(n);
}

double nce(std::span<const std::int64_t> pseudo_labels,
           std::span<const std::int64_t> labels) {
  if (labels.empty()) throw InvalidInput("nce: need at least one sample");
  if (pseudo_labels.size() != labels.size()) {
    throw InvalidInput("nce: pseudo-label count does not match label count");
  }
  check_labels(labels, "nce");
  check_labels(pseudo_labels, "nce");

  std::map<std::pair<std::int64_t, std::int64_t>, double> joint;
  std::map<std::int64_t, double> marginal;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    joint[{labels[i], pseudo_labels[i]}] += 1.0;
    marginal[pseudo_labels[i]] += 1.0;
  }
  const double n = static_cast<double>(labels.size());
  double total = 0.0;
  for (const auto& [key, count] : joint) {
    total += (count / n) * std::log(count / marginal[key.second]);
  }
  return total;
}

std::vector<std::int64_t> argmax_pseudo_labels(const SourcePredictions& theta) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(theta.rows()));
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = argmax_row(theta.row(i));
  }
  return out;
}

std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed,
                              std::span<const std::int64_t> classes) {
  if (folds < 2) throw InvalidInput("assign_folds: need at least 2 folds");
  if (n < static_cast<std::size_t>(folds)) {
    throw InvalidInput("assign_folds: fewer samples than folds");
  }
  if (!classes.empty() && classes.size() != n) {
    throw InvalidInput("assign_folds: class count does not match sample count");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::stream(seed, "folds");
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<int> fold_of(n, 0);
  if (classes.empty()) {
    for (std::size_t pos = 0; pos < n; ++pos) {
      fold_of[order[pos]] = static_cast<int>(pos * static_cast<std::size_t>(folds) / n);
    }
    return fold_of;
  }
  // Round-robin within each class, continuing the rotation across classes so
  // fold sizes stay balanced.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return classes[a] < classes[b];
  });
  for (std::size_t pos = 0; pos < n; ++pos) {
    fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

ProbeResult linear_probe_score(const FeatureMatrix& features,
                               const TargetMatrix& targets,
                               const ProbeOptions& opts) {
  if (opts.lambdas.empty()) throw InvalidInput("linear_probe_score: empty lambda grid");
  for (double l : opts.lambdas) {
    if (!(l > 0.0) || !std::isfinite(l)) {
      throw InvalidInput("linear_probe_score: lambdas must be positive and finite");
    }
  }
  if (targets.rows() != features.rows()) {
    throw InvalidInput("linear_probe_score: targets and features differ in rows");
  }
  if (targets.cols() < 1) throw InvalidInput("linear_probe_score: no target columns");
  const auto n = static_cast<std::size_t>(features.rows());

  std::vector<std::int64_t> classes;
  if (opts.classification) {
    classes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      classes[i] = argmax_row(targets.row(static_cast<Eigen::Index>(i)));
    }
  }
  const std::vector<int> folds = assign_folds(n, opts.folds, opts.seed, classes);
  const std::set<std::int64_t> all_classes(classes.begin(), classes.end());

  ProbeResult result;
  result.scores.assign(opts.lambdas.size(), 0.0);
  const Eigen::Index dims = features.cols();

  for (int fold = 0; fold < opts.folds; ++fold) {
    const auto train = indices_where(folds, fold, false);
    const auto test = indices_where(folds, fold, true);

    FeatureMatrix f_train = features(train, Eigen::all);
    Matrix y_train = targets(train, Eigen::all);
    FeatureMatrix f_test = features(test, Eigen::all);
    const Matrix y_test = targets(test, Eigen::all);

    Eigen::RowVectorXd f_mean = Eigen::RowVectorXd::Zero(dims);
    Eigen::RowVectorXd y_mean = Eigen::RowVectorXd::Zero(targets.cols());
    if (opts.fit_intercept) {
      f_mean = f_train.colwise().mean();
      y_mean = y_train.colwise().mean();
      f_train.rowwise() -= f_mean;
      y_train.rowwise() -= y_mean;
      f_test.rowwise() -= f_mean;
    }

    const linalg::EigenSystem eig = linalg::sym_eig(linalg::gram(f_train));
    // W(lambda) = V diag(1 / (sigma + lambda)) V^T F^T Y
    const Matrix projected = eig.vectors.transpose() * (f_train.transpose() * y_train);
    const Matrix test_basis = f_test * eig.vectors;

    if (opts.classification) {
      std::set<std::int64_t> present;
      for (Eigen::Index t : test) present.insert(classes[static_cast<std::size_t>(t)]);
      if (present.size() < all_classes.size()) {
        result.warnings.push_back("fold " + std::to_string(fold) + " holds out " +
                                  std::to_string(present.size()) + " of " +
                                  std::to_string(all_classes.size()) +
                                  " classes; accuracy is over the present classes");
      }
    }

    for (std::size_t l = 0; l < opts.lambdas.size(); ++l) {
      const Vector shrink = (eig.sigma.array() + opts.lambdas[l]).inverse();
      Matrix predicted = test_basis * shrink.asDiagonal() * projected;
      predicted.rowwise() += y_mean;

      double fold_score = 0.0;
      if (opts.classification) {
        std::size_t correct = 0;
        for (Eigen::Index r = 0; r < predicted.rows(); ++r) {
          const auto truth = classes[static_cast<std::size_t>(test[static_cast<std::size_t>(r)])];
          if (argmax_row(predicted.row(r)) == truth) ++correct;
        }
        fold_score = static_cast<double>(correct) / static_cast<double>(predicted.rows());
      } else {
        fold_score = -(predicted - y_test).squaredNorm() /
                     static_cast<double>(predicted.size());
      }
      result.scores[l] += fold_score / static_cast<double>(opts.folds);
    }
  }

  const auto best = std::max_element(result.scores.begin(), result.scores.end());
  result.score = *best;
  result.best_lambda = opts.lambdas[static_cast<std::size_t>(best - result.scores.begin())];
  return result;
}

}  // namespace evidencerank::baselines
