// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "evidencerank/baselines.hpp"
#include "evidencerank/error.hpp"
#include "evidencerank/evidence.hpp"
#include "evidencerank/io.hpp"
#include "evidencerank/metrics.hpp"
#include "evidencerank/random.hpp"
#include "evidencerank/simd/kernels.hpp"
#include "evidencerank/synthetic.hpp"
#include "oracles.hpp"

using namespace evidencerank;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr double kPathRelTol = 1e-8;
constexpr double kQuadratureAbsTol = 1e-4;
constexpr double kFixedPointRelTol = 1e-3;
constexpr double kSpeedupMaxRatio = 0.2;
constexpr double kRankOracleTol = 1e-12;
constexpr double kBaselineOracleTol = 1e-12;
constexpr double kChanceLow = 0.45;
constexpr double kChanceHigh = 0.55;
constexpr double kA1BudgetS = 300;
constexpr double kA2BudgetS = 60;
constexpr double kA4BudgetS = 120;
constexpr double kA5BudgetS = 1800;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> problems;

  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      if (problems.size() < 5) problems.push_back(why);
    }
  }
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

double median(std::vector<double> v) { return cli::median(std::move(v)); }

int failures = 0;

void report(const std::string& id, const std::string& title, Outcome& o, double secs) {
  std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << title << " (" << std::fixed
            << std::setprecision(1) << secs << " s): " << std::defaultfloat << std::setprecision(6)
            << o.detail.str() << std::endl;
  for (const auto& p : o.problems) std::cout << "     " << id << ": " << p << std::endl;
  if (!o.pass) ++failures;
}

// Optimized-path states from A1, reused by A3. well_posed marks planted
// targets with n > D, where a finite evidence maximum is expected.
struct SolvedColumn {
  std::size_t n = 0;
  bool well_posed = false;
  evidence::EvidenceState state;
};
std::vector<SolvedColumn> a1_states;

void a1_path_equivalence() {
  const auto start = Clock::now();
  Outcome o;
  const std::size_t ns[] = {10, 200, 2000};
  const std::size_t ds[] = {4, 64, 512};
  const std::size_t ks[] = {1, 5, 50};
  double worst = 0.0;
  int deficient = 0;
  int degenerate = 0;
  long dims = 0;
  for (int i = 0; i < 50; ++i) {
    const int combo = i % 27;
    const std::size_t n = ns[combo / 9];
    const std::size_t d = ds[(combo / 3) % 3];
    const std::size_t k = ks[combo % 3];
    const auto seed = static_cast<std::uint64_t>(1000 + i);
    const synthetic::ToyConfig cfg{seed, n, 0.5, synthetic::ToyKind::kRandom};
    const auto data = i % 2 == 0 ? synthetic::gen_planted(cfg, d, k) : synthetic::gen_random(cfg, d, k);
    deficient += n < d;
    evidence::SolverOptions naive_opts;
    naive_opts.path = evidence::MStepPath::kNaive;
    evidence::SolverOptions fast_opts;
    fast_opts.path = evidence::MStepPath::kOptimized;
    const auto naive = evidence::logme(data.features, data.targets, naive_opts);
    const auto fast = evidence::logme(data.features, data.targets, fast_opts);
    for (Eigen::Index j = 0; j < naive.per_dim.size(); ++j) {
      const double r = rel_diff(naive.per_dim(j), fast.per_dim(j));
      worst = std::max(worst, r);
      ++dims;
      if (r > kPathRelTol) {
        std::ostringstream why;
        why << "instance " << i << " (n=" << n << ", D=" << d << ", K=" << k << ") dim " << j
            << " differs by " << r;
        o.require(false, why.str());
      }
    }
    for (const auto& s : fast.states) {
      degenerate += s.degenerate();
      a1_states.push_back({n, i % 2 == 0 && n > d, s});
    }
  }
  const double secs = seconds_since(start);
  o.require(secs <= kA1BudgetS, "runtime over budget");
  o.detail << "50 instances, " << dims << " target columns, " << deficient
           << " with n<D, " << degenerate << " degenerate columns; max relative difference "
           << worst << " (tol " << kPathRelTol << ")";
  report("A1", "path equivalence", o, secs);
}

void a2_quadrature() {
  const auto start = Clock::now();
  Outcome o;
  double worst = 0.0;
  Rng rng = Rng::stream(7, "a2");
  for (int i = 0; i < 30; ++i) {
    const std::size_t n = 3 + rng.below(120);
    const double w = 3.0 * rng.normal();
    const double noise = 0.05 + 2.0 * rng.uniform();
    const double scale = 0.2 + 3.0 * rng.uniform();
    FeatureMatrix f(static_cast<Eigen::Index>(n), 1);
    Vector y(static_cast<Eigen::Index>(n));
    std::vector<double> fv(n), yv(n);
    for (std::size_t r = 0; r < n; ++r) {
      fv[r] = scale * rng.normal();
      yv[r] = w * fv[r] + noise * rng.normal();
      f(static_cast<Eigen::Index>(r), 0) = fv[r];
      y(static_cast<Eigen::Index>(r)) = yv[r];
    }
    const auto eig = linalg::sym_eig(linalg::gram(f));
    const auto s = evidence::maximize_evidence(f, y, eig);
    const double want = oracle::quadrature_evidence_1d(s.alpha, s.beta, fv, yv);
    const double err = std::abs(s.log_evidence - want);
    worst = std::max(worst, err);
    if (!(err <= kQuadratureAbsTol)) {
      std::ostringstream why;
      why << "instance " << i << " (n=" << n << ") off by " << err;
      o.require(false, why.str());
    }
  }
  const double secs = seconds_since(start);
  o.require(secs <= kA2BudgetS, "runtime over budget");
  o.detail << "30 one-dimensional instances; max |L - quadrature| " << worst << " (tol "
           << kQuadratureAbsTol << ")";
  report("A2", "evidence vs Gauss-Hermite quadrature", o, secs);
}

void a3_fixed_point() {
  const auto start = Clock::now();
  Outcome o;
  std::size_t checked = 0;
  std::size_t unconverged = 0;
  std::size_t degenerate = 0;
  std::size_t within_three = 0;
  std::size_t well_posed = 0;
  std::vector<double> well_posed_iterations;
  int max_iter = 0;
  double worst_alpha = 0.0;
  double worst_beta = 0.0;
  std::vector<double> iterations;
  for (const auto& [n, posed, s] : a1_states) {
    iterations.push_back(s.iterations);
    max_iter = std::max(max_iter, s.iterations);
    if (posed) {
      ++well_posed;
      well_posed_iterations.push_back(s.iterations);
      within_three += s.iterations <= 3;
    }
    if (!s.converged) {
      ++unconverged;
      continue;
    }
    if (s.degenerate()) {
      ++degenerate;
      continue;
    }
    ++checked;
    const double ra = std::abs(s.alpha * s.m.squaredNorm() - s.gamma) / s.gamma;
    const double nb = static_cast<double>(n) - s.gamma;
    const double rb = std::abs(s.beta * s.residual_sq - nb) / nb;
    worst_alpha = std::max(worst_alpha, ra);
    worst_beta = std::max(worst_beta, rb);
    if (!(ra <= kFixedPointRelTol) || !(rb <= kFixedPointRelTol)) {
      std::ostringstream why;
      why << "state with n=" << n << " has residuals " << ra << ", " << rb;
      o.require(false, why.str());
    }
  }
  o.require(max_iter <= 100, "iteration cap exceeded");
  o.require(checked > 0, "no converged runs to check");
  o.detail << checked << " converged non-degenerate states checked (" << degenerate
           << " degenerate excluded, " << unconverged << " unconverged); worst relative residuals "
           << worst_alpha << " (alpha) and " << worst_beta << " (beta), tol " << kFixedPointRelTol
           << "; iterations median " << median(iterations) << ", max " << max_iter
           << "; soft report on planted n>D columns: median " << median(well_posed_iterations)
           << " updates, " << within_three << "/" << well_posed << " within 3 (pure-noise and n<D "
           << "columns drift toward the caps and account for the long runs)";
  report("A3", "fixed-point residuals", o, seconds_since(start));
}

void a4_monotonicity() {
  const auto start = Clock::now();
  Outcome o;
  const double grid[] = {0.0, 0.5, 1.0, 2.0};
  for (auto kind : {synthetic::ToyKind::kClassification3, synthetic::ToyKind::kRegression1d}) {
    std::vector<double> medians;
    for (double t : grid) {
      std::vector<double> scores;
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        if (kind == synthetic::ToyKind::kClassification3) {
          const auto d = synthetic::gen_clusters({seed, 300, t, kind});
          scores.push_back(evidence::logme(d.features, io::one_hot(d.labels, d.classes)).score);
        } else {
          const auto d = synthetic::gen_regression({seed, 1000, t, kind});
          scores.push_back(evidence::logme(d.features, d.targets).score);
        }
      }
      medians.push_back(median(scores));
    }
    o.detail << synthetic::kind_name(kind) << " medians";
    for (double m : medians) o.detail << " " << m;
    o.detail << "; ";
    for (std::size_t i = 1; i < medians.size(); ++i) {
      o.require(medians[i] < medians[i - 1],
                std::string(synthetic::kind_name(kind)) + " median not strictly decreasing");
    }
  }
  const double secs = seconds_since(start);
  o.require(secs <= kA4BudgetS, "runtime over budget");
  o.detail << "20 seeds, noise grid {0, 0.5, 1, 2}";
  report("A4", "noise monotonicity", o, secs);
}

void a5_speedup() {
  const auto start = Clock::now();
  Outcome o;
  cli::BenchConfig cfg;  // n = 5000, D = 1024, K = 100
  // One naive run already costs several minutes on one core; the optimized
  // path is far below the threshold, so a single repeat decides the outcome.
  cfg.repeats = 1;
  const auto r = cli::run_bench(cfg);
  o.require(r.ratio <= kSpeedupMaxRatio, "optimized/naive ratio above threshold");
  o.require(r.scores_agree, "paths disagree");
  const double secs = seconds_since(start);
  o.require(secs <= kA5BudgetS, "runtime over budget");
  o.detail << "n=" << cfg.n << " D=" << cfg.dims << " K=" << cfg.outputs << " threads=" << cfg.threads
           << " simd=" << simd::isa_name(simd::kernels().isa) << "; naive " << r.naive_median_ms
           << " ms, optimized " << r.optimized_median_ms << " ms, ratio " << r.ratio << " (max "
           << kSpeedupMaxRatio << "), speedup " << r.speedup << "x; max per-dim relative difference "
           << r.max_relative_difference << " (tol " << cli::kBenchAgreementTolerance << ")";
  report("A5", "optimized m-step speedup", o, secs);
}

void a6_rank_metrics() {
  const auto start = Clock::now();
  Outcome o;
  Rng rng = Rng::stream(6, "a6");
  double worst = 0.0;
  bool identity_exact = true;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> s(10), t(10);
    for (auto& v : s) v = rng.normal();
    for (auto& v : t) v = rng.normal();
    worst = std::max(worst, std::abs(metrics::kendall_tau(s, t) - oracle::brute_kendall(s, t)));
    worst = std::max(worst, std::abs(metrics::weighted_tau(s, t) - oracle::brute_weighted(s, t)));
    const auto rep_report = metrics::evaluate_ranking(s, t);
    if (!rep_report.concordant_fraction) {
      identity_exact = false;
      continue;
    }
    // Exact check on the pair counts behind both ratios (45 pairs).
    const double concordant = *rep_report.concordant_fraction * 45.0;
    const double net = rep_report.tau * 45.0;
    const bool integral = std::abs(concordant - std::round(concordant)) < 1e-9 &&
                          std::abs(net - std::round(net)) < 1e-9;
    if (!integral || 2 * std::llround(concordant) - 45 != std::llround(net)) identity_exact = false;
  }
  o.require(worst <= kRankOracleTol, "oracle mismatch");
  o.require(identity_exact, "concordant fraction differs from (tau+1)/2");
  const std::vector<double> up{1, 2, 3, 4, 5}, down{5, 4, 3, 2, 1};
  const bool trivial = metrics::kendall_tau(up, up) == 1.0 && metrics::kendall_tau(up, down) == -1.0 &&
                       metrics::weighted_tau(up, up) == 1.0 && metrics::weighted_tau(up, down) == -1.0;
  o.require(trivial, "trivial orderings not exactly +-1");
  o.detail << "100 random M=10 pairs; max oracle difference " << worst << " (tol " << kRankOracleTol
           << "); trivial cases exact: " << (trivial ? "yes" : "no")
           << "; concordant fraction = (tau+1)/2 on pair counts: " << (identity_exact ? "yes" : "no");
  report("A6", "rank correlation oracles", o, seconds_since(start));
}

void a7_baselines() {
  const auto start = Clock::now();
  Outcome o;
  // Aligned one-hot theta: each source class maps to one target class.
  std::vector<std::int64_t> y{0, 1, 2, 1, 0, 2, 2};
  const std::vector<std::int64_t> source{3, 0, 1, 0, 3, 1, 1};
  baselines::SourcePredictions theta = baselines::SourcePredictions::Zero(7, 4);
  for (std::size_t i = 0; i < 7; ++i) theta(static_cast<Eigen::Index>(i), source[i]) = 1.0;
  const double aligned = baselines::leep(theta, y);
  o.require(std::abs(aligned) <= kBaselineOracleTol, "LEEP not zero on aligned one-hot theta");
  const double same = baselines::nce(y, y);
  o.require(std::abs(same) <= kBaselineOracleTol, "NCE not zero when z = y");
  std::vector<std::int64_t> zi, yi;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 3; ++b) {
      for (int rep = 0; rep < 2; ++rep) {
        zi.push_back(a);
        yi.push_back(b);
      }
    }
  }
  const double indep = baselines::nce(zi, yi);
  o.require(std::abs(indep + std::log(3.0)) <= kBaselineOracleTol, "NCE not -log C under independence");

  Rng rng = Rng::stream(7, "a7");
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.below(30);
    const std::size_t z = 1 + rng.below(5);
    const std::uint64_t c = 1 + rng.below(4);
    std::vector<std::vector<double>> t(n, std::vector<double>(z));
    baselines::SourcePredictions tm(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(z));
    std::vector<std::int64_t> labels(n), pseudo(n);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (auto& v : t[i]) sum += (v = rng.uniform() + 1e-3);
      for (std::size_t j = 0; j < z; ++j) {
        t[i][j] /= sum;
        tm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t[i][j];
      }
      labels[i] = static_cast<std::int64_t>(rng.below(c));
      pseudo[i] = static_cast<std::int64_t>(rng.below(z));
    }
    worst = std::max(worst, std::abs(baselines::leep(tm, labels) - oracle::direct_leep(t, labels)));
    worst = std::max(worst, std::abs(baselines::nce(pseudo, labels) - oracle::direct_nce(pseudo, labels)));
  }
  o.require(worst <= kBaselineOracleTol, "direct-definition oracle mismatch");
  o.detail << "LEEP aligned " << aligned << ", NCE(z=y) " << same << ", NCE independent " << indep
           << " vs " << -std::log(3.0) << "; 100 random joints, max oracle difference " << worst
           << " (tol " << kBaselineOracleTol << ")";
  report("A7", "baseline identities", o, seconds_since(start));
}

io::FeatPack random_pack(std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "a8-pack");
  const auto n = static_cast<Eigen::Index>(1 + rng.below(25));
  const auto d = static_cast<Eigen::Index>(1 + rng.below(12));
  io::FeatPack p;
  p.features.resize(n, d);
  for (auto& v : p.features.reshaped()) v = rng.normal() * std::pow(10.0, rng.normal());
  if (seed % 2 == 0) {
    p.classes = static_cast<std::int64_t>(1 + rng.below(6));
    for (Eigen::Index i = 0; i < n; ++i) {
      p.labels.push_back(static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(p.classes))));
    }
  } else {
    p.targets.resize(n, static_cast<Eigen::Index>(1 + rng.below(5)));
    for (auto& v : p.targets.reshaped()) v = rng.normal();
  }
  if (seed % 4 != 3) {
    RowMatrix t(n, static_cast<Eigen::Index>(1 + rng.below(7)));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = rng.uniform();
      t(i, 0) += 1e-3;
      t.row(i) /= t.row(i).sum();
    }
    p.theta = std::move(t);
  }
  return p;
}

void a8_format() {
  const auto start = Clock::now();
  Outcome o;
  int with_theta = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = random_pack(seed);
    with_theta += p.theta.has_value();
    const auto bytes = io::encode_featpack(p);
    const auto back = io::encode_featpack(io::decode_featpack(bytes));
    o.require(back == bytes, "pack " + std::to_string(seed) + " does not round-trip bitwise");
  }

  const auto base = random_pack(2);  // labels and theta
  const auto good = io::encode_featpack(base);
  const std::size_t n = base.samples();
  const std::size_t d = static_cast<std::size_t>(base.features.cols());
  auto put64 = [](std::vector<std::byte> b, std::size_t at, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b[at + static_cast<std::size_t>(i)] = std::byte((v >> (8 * i)) & 0xff);
    return b;
  };
  struct Case {
    std::string name;
    std::vector<std::byte> bytes;
    io::FeatPackErrorKind kind;
    std::size_t offset;
  };
  std::vector<Case> cases;
  {
    auto b = good;
    b[0] = std::byte{'G'};
    cases.push_back({"magic", b, io::FeatPackErrorKind::kBadMagic, 0});
  }
  cases.push_back({"short header", {good.begin(), good.begin() + 30}, io::FeatPackErrorKind::kTruncated, 30});
  cases.push_back({"truncated payload", {good.begin(), good.end() - 1}, io::FeatPackErrorKind::kTruncated,
                   good.size() - 1});
  {
    auto b = good;
    b.push_back(std::byte{1});
    cases.push_back({"trailing bytes", b, io::FeatPackErrorKind::kTrailingBytes, good.size()});
  }
  {
    auto b = good;
    b[9] = std::byte{1};
    cases.push_back({"unknown flags", b, io::FeatPackErrorKind::kBadFlags, 8});
  }
  cases.push_back({"zero n", put64(good, 12, 0), io::FeatPackErrorKind::kBadShape, 12});
  cases.push_back({"theta flag without Z", put64(good, 36, 0), io::FeatPackErrorKind::kBadShape, 36});
  cases.push_back({"non-finite feature", put64(good, 44, std::bit_cast<std::uint64_t>(std::numeric_limits<double>::infinity())),
                   io::FeatPackErrorKind::kInvalidValue, 44});
  const std::size_t labels_at = 44 + 8 * n * d;
  cases.push_back({"label out of range", put64(good, labels_at, 99), io::FeatPackErrorKind::kInvalidValue,
                   labels_at});
  const std::size_t theta_at = labels_at + 8 * n;
  cases.push_back({"theta row sum", put64(good, theta_at, std::bit_cast<std::uint64_t>(3.0)),
                   io::FeatPackErrorKind::kInvalidValue, theta_at});

  int typed = 0;
  for (const auto& c : cases) {
    try {
      io::decode_featpack(c.bytes);
      o.require(false, c.name + " accepted");
    } catch (const io::FeatPackError& e) {
      const bool ok = e.kind() == c.kind && e.offset() == c.offset &&
                      std::string(e.what()).find("byte offset " + std::to_string(c.offset)) != std::string::npos;
      o.require(ok, c.name + " raised the wrong kind or offset (" + e.what() + ")");
      typed += ok;
    } catch (const std::exception& e) {
      o.require(false, c.name + " raised an untyped error: " + e.what());
    }
  }
  o.detail << "20 random packs (" << with_theta << " with theta) round-trip bitwise; " << typed << "/"
           << cases.size() << " corruption cases raised typed errors at the expected byte offset";
  report("A8", "FeatPack format", o, seconds_since(start));
}

void a9_probe() {
  const auto start = Clock::now();
  Outcome o;
  const auto clusters = synthetic::gen_clusters({0, 300, 0.0, synthetic::ToyKind::kClassification3});
  const double separable =
      baselines::linear_probe_score(clusters.features, io::one_hot(clusters.labels, 3)).score;
  o.require(separable == 1.0, "separable clusters below perfect accuracy");

  const auto noise = synthetic::gen_random({9, 2000, 0.0, synthetic::ToyKind::kRandom}, 16, 1);
  std::vector<std::int64_t> labels(2000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::int64_t>(i % 2);
  const double chance = baselines::linear_probe_score(noise.features, io::one_hot(labels, 2)).score;
  o.require(chance >= kChanceLow && chance <= kChanceHigh, "noise accuracy outside chance band");
  o.detail << "separable 3-cluster accuracy " << separable << "; pure-noise balanced binary (n=2000) "
           << chance << " in [" << kChanceLow << ", " << kChanceHigh << "]";
  report("A9", "linear probe sanity", o, seconds_since(start));
}

}  // namespace

// With arguments, only the named criteria run (A3 needs A1 to have run).
int main(int argc, char** argv) {
  std::cout << "acceptance suite, dispatched kernels: " << simd::isa_name(simd::kernels().isa) << std::endl;
  const std::vector<std::pair<std::string, std::function<void()>>> criteria{
      {"A1", a1_path_equivalence}, {"A2", a2_quadrature}, {"A3", a3_fixed_point},
      {"A4", a4_monotonicity},     {"A5", a5_speedup},    {"A6", a6_rank_metrics},
      {"A7", a7_baselines},        {"A8", a8_format},     {"A9", a9_probe}};
  const std::vector<std::string> only(argv + 1, argv + argc);
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    try {
      run();
    } catch (const std::exception& e) {
      std::cout << "FAIL criterion aborted with an exception: " << e.what() << std::endl;
      ++failures;
    }
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
