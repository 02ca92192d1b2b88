#pragma once

// Log maximum evidence of a linear head on fixed features.
//
// For each target column y the Gaussian-prior linear model
//   w ~ N(0, 1/alpha I),  y_i | f_i, w ~ N(w^T f_i, 1/beta)
// has a closed-form log marginal likelihood L(alpha, beta). The solver
// maximizes it by the fixed-point scheme
//   gamma = sum_i beta s_i / (alpha + beta s_i),  m = beta A^-1 F^T y,
//   alpha <- gamma / m^T m,  beta <- (n - gamma) / |F m - y|^2
// with A = alpha I + beta F^T F, and reports L(alpha*, beta*) / n. The score
// is the mean of that quantity over target columns.
//
// Two computation paths exist for the m update. The naive path forms A from F
// and factorizes it every iteration. The optimized path reuses one
// eigendecomposition F^T F = V diag(s) V^T and evaluates
// m = beta V (Lambda^-1 (V^T (F^T y))) with matrix-vector products only.

#include <cstdint>
#include <span>
#include <vector>

#include "evidencerank/linalg.hpp"
#include "evidencerank/types.hpp"

namespace evidencerank::evidence {

enum class MStepPath { kNaive, kOptimized };

struct SolverOptions {
  double rel_tol = 1e-3;
  int max_iter = 100;
  double alpha_cap = 1e10;
  double beta_cap = 1e10;
  MStepPath path = MStepPath::kOptimized;
  // Per-feature standardization before scoring. Off by default; turning it on
  // changes the score from the plain evidence of the raw features.
  bool standardize = false;
  // Worker threads for the per-column solves. 0 picks EVIDENCERANK_THREADS or
  // the hardware concurrency.
  unsigned threads = 0;
  // Record L(alpha, beta) after every update in EvidenceState::trace.
  bool record_trace = false;
};

// Bit flags describing which guard fired.
enum Degeneracy : std::uint8_t {
  kNone = 0,
  kAlphaCapped = 1,  // m^T m vanished (F^T y = 0) or alpha exceeded the cap
  kBetaCapped = 2,   // residual vanished (interpolation) or beta exceeded the cap
};

struct EvidenceState {
  double alpha = 1.0;
  double beta = 1.0;
  Vector m;
  double gamma = 0.0;
  double residual_sq = 0.0;
  double log_evidence = 0.0;  // unnormalized L(alpha, beta)
  int iterations = 0;
  bool converged = false;
  std::uint8_t degeneracy = kNone;
  std::vector<double> trace;

  bool degenerate() const { return degeneracy != kNone; }
};

struct LogMEResult {
  Vector per_dim;  // L_k / n for each target column
  double score = 0.0;
  std::vector<EvidenceState> states;

  bool any_degenerate() const;
};

// L(alpha, beta) evaluated in the eigenbasis:
//   n/2 log b + D/2 log a - n/2 log 2pi - b/2 r - a/2 m^T m
//   - 1/2 sum_i log(a + b s_i)
double log_evidence(double alpha, double beta, std::span<const double> sigma,
                    const Vector& m, double residual_sq, std::size_t n);

// gamma = sum_i beta s_i / (alpha + beta s_i)
double effective_dimension(double alpha, double beta,
                           std::span<const double> sigma);

// m = beta (alpha I + beta F^T F)^-1 F^T y. Forms F^T F from F and factorizes
// A on every call.
Vector m_step_naive(double alpha, double beta, const FeatureMatrix& features,
                    const Vector& y);

// m = beta V Lambda^-1 V^T (F^T y) with Lambda = diag(alpha + beta sigma).
Vector m_step_optimized(double alpha, double beta,
                        const linalg::EigenSystem& eig, const Vector& fty);

EvidenceState maximize_evidence(const FeatureMatrix& features, const Vector& y,
                                const linalg::EigenSystem& eig,
                                const SolverOptions& opts = {});

LogMEResult logme(const FeatureMatrix& features, const TargetMatrix& targets,
                  const SolverOptions& opts = {});

// Per-column z-scoring; constant columns are only centered.
FeatureMatrix standardize_features(const FeatureMatrix& features);

// Worker count honoring EVIDENCERANK_THREADS.
unsigned resolve_threads(unsigned requested);

}  // namespace evidencerank::evidence
