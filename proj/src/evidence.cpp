#include "evidencerank/evidence.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

#include "evidencerank/error.hpp"

namespace evidencerank::evidence {
namespace {

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

double residual_sq(const FeatureMatrix& features, const Vector& m,
                   const Vector& y) {
  const Vector fitted = linalg::multiply(features, m);
  return linalg::squared_distance(as_span(fitted), as_span(y));
}

// Clamps a precision update into (0, cap]; reports whether the cap bound.
double guard_precision(double value, double cap, bool& capped) {
  if (!(value < cap)) {  // also catches +inf and NaN from 0/0
    capped = true;
    return cap;
  }
  return std::max(value, std::numeric_limits<double>::min());
}

}  // namespace

bool LogMEResult::any_degenerate() const {
  return std::any_of(states.begin(), states.end(),
                     [](const EvidenceState& s) { return s.degenerate(); });
}

double log_evidence(double alpha, double beta, std::span<const double> sigma,
                    const Vector& m, double residual_sq, std::size_t n) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) ||
      !std::isfinite(beta)) {
    throw InvalidInput("log_evidence: alpha and beta must be positive and finite");
  }
  if (!(residual_sq >= 0.0)) {
    throw InvalidInput("log_evidence: residual_sq must be nonnegative");
  }
  if (static_cast<std::size_t>(m.size()) != sigma.size()) {
    throw InvalidInput("log_evidence: m and sigma differ in length");
  }
  const double nd = static_cast<double>(n);
  const double dd = static_cast<double>(sigma.size());
  double log_det = 0.0;
  for (double s : sigma) log_det += std::log(alpha + beta * s);
  return 0.5 * nd * std::log(beta) + 0.5 * dd * std::log(alpha) -
         0.5 * nd * std::log(2.0 * std::numbers::pi) - 0.5 * beta * residual_sq -
         0.5 * alpha * m.squaredNorm() - 0.5 * log_det;
}

double effective_dimension(double alpha, double beta,
                           std::span<const double> sigma) {
  double gamma = 0.0;
  for (double s : sigma) {
    const double bs = beta * s;
    gamma += bs / (alpha + bs);
  }
  return gamma;
}

Vector m_step_naive(double alpha, double beta, const FeatureMatrix& features,
                    const Vector& y) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw InvalidInput("m_step_naive: alpha and beta must be positive");
  }
  if (features.rows() != y.size()) throw InvalidInput("m_step_naive: shape mismatch");
  Matrix a = beta * linalg::gram(features);
  a.diagonal().array() += alpha;
  const Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericFailure("m_step_naive: Cholesky factorization of A failed (alpha=" +
                         std::to_string(alpha) + ", beta=" + std::to_string(beta) +
                         ")");
  }
  const Vector fty = linalg::multiply_transposed(features, y);
  return beta * llt.solve(fty);
}

Vector m_step_optimized(double alpha, double beta,
                        const linalg::EigenSystem& eig, const Vector& fty) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw InvalidInput("m_step_optimized: alpha and beta must be positive");
  }
  if (static_cast<std::size_t>(fty.size()) != eig.dims()) {
    throw InvalidInput("m_step_optimized: F^T y length does not match eigensystem");
  }
  Vector z = linalg::project(eig.vectors, fty);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z(i) *= beta / (alpha + beta * eig.sigma(i));
  }
  return linalg::unproject(eig.vectors, z);
}

EvidenceState maximize_evidence(const FeatureMatrix& features, const Vector& y,
                                const linalg::EigenSystem& eig,
                                const SolverOptions& opts) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (static_cast<std::size_t>(y.size()) != n) {
    throw InvalidInput("maximize_evidence: target length does not match features");
  }
  if (eig.dims() != static_cast<std::size_t>(features.cols())) {
    throw InvalidInput("maximize_evidence: eigensystem does not match features");
  }
  if (!y.allFinite()) throw InvalidInput("maximize_evidence: target has non-finite entries");

  const std::span<const double> sigma = as_span(eig.sigma);
  const Vector fty = opts.path == MStepPath::kOptimized
                         ? linalg::multiply_transposed(features, y)
                         : Vector();
  auto solve_m = [&](double alpha, double beta) {
    return opts.path == MStepPath::kNaive
               ? m_step_naive(alpha, beta, features, y)
               : m_step_optimized(alpha, beta, eig, fty);
  };

  EvidenceState state;
  double alpha = 1.0;
  double beta = 1.0;
  for (;;) {
    state.gamma = effective_dimension(alpha, beta, sigma);
    state.m = solve_m(alpha, beta);
    state.residual_sq = residual_sq(features, state.m, y);
    if (opts.record_trace) {
      state.trace.push_back(
          log_evidence(alpha, beta, sigma, state.m, state.residual_sq, n));
    }
    if (state.converged || state.iterations >= opts.max_iter) break;

    bool alpha_capped = false;
    bool beta_capped = false;
    const double mtm = state.m.squaredNorm();
    const double next_alpha = guard_precision(
        mtm > 0.0 ? state.gamma / mtm : opts.alpha_cap, opts.alpha_cap, alpha_capped);
    const double next_beta = guard_precision(
        state.residual_sq > 0.0
            ? (static_cast<double>(n) - state.gamma) / state.residual_sq
            : opts.beta_cap,
        opts.beta_cap, beta_capped);
    state.degeneracy = (alpha_capped ? kAlphaCapped : 0) | (beta_capped ? kBetaCapped : 0);

    const double change = std::max(std::abs(next_alpha - alpha) / alpha,
                                   std::abs(next_beta - beta) / beta);
    alpha = next_alpha;
    beta = next_beta;
    ++state.iterations;
    state.converged = change < opts.rel_tol;
  }

  state.alpha = alpha;
  state.beta = beta;
  state.log_evidence = log_evidence(alpha, beta, sigma, state.m, state.residual_sq, n);
  return state;
}

FeatureMatrix standardize_features(const FeatureMatrix& features) {
  FeatureMatrix out = features;
  const double n = static_cast<double>(features.rows());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double mean = features.col(c).mean();
    out.col(c).array() -= mean;
    const double sd = std::sqrt(out.col(c).squaredNorm() / n);
    if (sd > 0.0) out.col(c) /= sd;
  }
  return out;
}

unsigned resolve_threads(unsigned requested) {
  unsigned threads = requested > 0 ? requested : std::thread::hardware_concurrency();
  if (const char* env = std::getenv("EVIDENCERANK_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) threads = std::min<unsigned>(threads, static_cast<unsigned>(cap));
  }
  return std::max(threads, 1u);
}

LogMEResult logme(const FeatureMatrix& features, const TargetMatrix& targets,
                  const SolverOptions& opts) {
  if (features.rows() < 2) throw InvalidInput("logme: need at least 2 samples");
  if (features.cols() < 1) throw InvalidInput("logme: need at least 1 feature");
  if (targets.rows() != features.rows()) {
    throw InvalidInput("logme: targets have " + std::to_string(targets.rows()) +
                       " rows but features have " + std::to_string(features.rows()));
  }
  if (targets.cols() < 1) throw InvalidInput("logme: need at least 1 target column");
  if (!targets.allFinite()) throw InvalidInput("logme: targets contain NaN or infinity");

  FeatureMatrix standardized;
  if (opts.standardize) standardized = standardize_features(features);
  const FeatureMatrix& f = opts.standardize ? standardized : features;

  const linalg::EigenSystem eig = linalg::sym_eig(linalg::gram(f));

  const auto k_total = static_cast<std::size_t>(targets.cols());
  LogMEResult result;
  result.states.resize(k_total);
  std::vector<std::exception_ptr> errors(k_total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < k_total; k = next++) {
      try {
        const Vector y = targets.col(static_cast<Eigen::Index>(k));
        result.states[k] = maximize_evidence(f, y, eig, opts);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };

  const unsigned threads =
      std::min<unsigned>(resolve_threads(opts.threads), static_cast<unsigned>(k_total));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const double n = static_cast<double>(features.rows());
  result.per_dim.resize(static_cast<Eigen::Index>(k_total));
  double sum = 0.0;
  for (std::size_t k = 0; k < k_total; ++k) {
    const double value = result.states[k].log_evidence / n;
    result.per_dim(static_cast<Eigen::Index>(k)) = value;
    sum += value;
  }
  result.score = sum / static_cast<double>(k_total);
  return result;
}

}  // namespace evidencerank::evidence
