#include "evidencerank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "evidencerank/error.hpp"

namespace evidencerank::metrics {
namespace {

int sgn(double x) { return (x > 0.0) - (x < 0.0); }

void check_pair(std::span<const double> s, std::span<const double> t,
                const char* what) {
  if (s.size() != t.size()) {
    throw InvalidInput(std::string(what) + ": score and truth lengths differ");
  }
  if (s.size() < 2) throw InvalidInput(std::string(what) + ": need at least 2 items");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i]) || !std::isfinite(t[i])) {
      throw InvalidInput(std::string(what) + ": non-finite value at index " +
                         std::to_string(i));
    }
  }
}

bool has_ties(std::span<const double> v) {
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

}  // namespace

double kendall_tau(std::span<const double> scores, std::span<const double> truths) {
  check_pair(scores, truths, "kendall_tau");
  const std::size_t m = scores.size();
  long long sum = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      sum += sgn(truths[i] - truths[j]) * sgn(scores[i] - scores[j]);
    }
  }
  return 2.0 * static_cast<double>(sum) / (static_cast<double>(m) * static_cast<double>(m - 1));
}

std::vector<std::size_t> descending_ranks(std::span<const double> primary,
                                          std::span<const double> secondary) {
  std::vector<std::size_t> order(primary.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (primary[a] != primary[b]) return primary[a] > primary[b];
    if (secondary[a] != secondary[b]) return secondary[a] > secondary[b];
    return a < b;
  });
  std::vector<std::size_t> rank(primary.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

double weighted_tau_one_side(std::span<const double> scores,
                             std::span<const double> truths, bool rank_by_scores) {
  check_pair(scores, truths, "weighted_tau");
  const auto rank = rank_by_scores ? descending_ranks(scores, truths)
                                   : descending_ranks(truths, scores);
  const std::size_t m = scores.size();
  std::vector<double> weight(m);
  for (std::size_t i = 0; i < m; ++i) weight[i] = 1.0 / (1.0 + static_cast<double>(rank[i]));

  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double w = weight[i] + weight[j];
      numerator += w * sgn(scores[i] - scores[j]) * sgn(truths[i] - truths[j]);
      denominator += w;
    }
  }
  return numerator / denominator;
}

double weighted_tau(std::span<const double> scores, std::span<const double> truths) {
  return 0.5 * (weighted_tau_one_side(scores, truths, true) +
                weighted_tau_one_side(scores, truths, false));
}

std::vector<double> direction_normalize(std::span<const double> truths,
                                        bool higher_truth_better) {
  std::vector<double> out(truths.begin(), truths.end());
  if (!higher_truth_better) {
    for (double& v : out) v = -v;
  }
  return out;
}

RankingReport evaluate_ranking(std::span<const double> scores,
                               std::span<const double> truths,
                               bool higher_truth_better) {
  RankingReport report;
  report.scores.assign(scores.begin(), scores.end());
  report.truths.assign(truths.begin(), truths.end());
  report.higher_truth_better = higher_truth_better;
  const std::vector<double> t = direction_normalize(truths, higher_truth_better);
  report.tau = kendall_tau(scores, t);
  report.tau_w = weighted_tau(scores, t);

  if (!has_ties(scores) && !has_ties(t)) {
    const std::size_t m = scores.size();
    std::size_t concordant = 0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        if (sgn(scores[i] - scores[j]) * sgn(t[i] - t[j]) > 0) ++concordant;
      }
    }
    report.concordant_fraction =
        static_cast<double>(concordant) / static_cast<double>(m * (m - 1) / 2);
  }
  return report;
}

}  // namespace evidencerank::metrics
