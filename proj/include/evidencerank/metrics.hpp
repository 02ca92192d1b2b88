#pragma once

// Rank correlation between assessment scores S and ground-truth transfer
// performance T.

#include <optional>
#include <span>
#include <vector>

namespace evidencerank::metrics {

// Kendall's tau by exact pairwise enumeration; tied pairs contribute 0.
double kendall_tau(std::span<const double> scores, std::span<const double> truths);

// Weighted tau with additive hyperbolic weights. Items are ranked descending
// (largest gets rank 0) by one array, ties broken by the other array's value
// (larger first) and then by index. Pair (i, j) carries weight
// 1/(1 + r_i) + 1/(1 + r_j) and
//   tau_w = sum w_ij sgn(S_i - S_j) sgn(T_i - T_j) / sum w_ij.
// The result averages the value under S-derived ranks and T-derived ranks.
double weighted_tau(std::span<const double> scores, std::span<const double> truths);

// Single-ordering half of weighted_tau; rank_by_scores selects the ordering.
double weighted_tau_one_side(std::span<const double> scores,
                             std::span<const double> truths, bool rank_by_scores);

// Descending ranks (0 = largest) of `primary`, ties broken by `secondary`
// descending and then by index.
std::vector<std::size_t> descending_ranks(std::span<const double> primary,
                                          std::span<const double> secondary);

// T unchanged when higher is better, otherwise -T.
std::vector<double> direction_normalize(std::span<const double> truths,
                                        bool higher_truth_better = true);

struct RankingReport {
  std::vector<double> scores;
  std::vector<double> truths;  // as given, before direction normalization
  bool higher_truth_better = true;
  double tau = 0.0;
  double tau_w = 0.0;
  // Fraction of concordant pairs; present only when neither side has ties.
  std::optional<double> concordant_fraction;
};

RankingReport evaluate_ranking(std::span<const double> scores,
                               std::span<const double> truths,
                               bool higher_truth_better = true);

}  // namespace evidencerank::metrics
