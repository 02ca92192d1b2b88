#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace evidencerank::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;  // a requested assertion did not hold
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;

// Entry point behind the evidencerank binary; argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct BenchConfig {
  std::size_t n = 5000;
  std::size_t dims = 1024;
  std::size_t outputs = 100;
  int repeats = 3;
  std::uint64_t seed = 0;
  double noise = 0.5;
  unsigned threads = 1;
};

struct BenchReport {
  BenchConfig config;
  std::vector<double> naive_ms;
  std::vector<double> optimized_ms;
  double naive_median_ms = 0.0;
  double optimized_median_ms = 0.0;
  double ratio = 0.0;    // optimized / naive
  double speedup = 0.0;  // naive / optimized
  double max_relative_difference = 0.0;  // per-dimension, between paths
  double median_iterations = 0.0;
  double naive_score = 0.0;
  double optimized_score = 0.0;
  bool scores_agree = false;
};

// Path agreement threshold used by the benchmark.
inline constexpr double kBenchAgreementTolerance = 1e-8;

BenchReport run_bench(const BenchConfig& config);

// Median wall time of one m-step plus residual for each path at a single size.
struct LoopTiming {
  std::size_t dims = 0;
  double naive_ms = 0.0;
  double optimized_ms = 0.0;
};

LoopTiming time_single_loop(std::size_t n, std::size_t dims, int repeats,
                            std::uint64_t seed);

double median(std::vector<double> values);

}  // namespace evidencerank::cli
