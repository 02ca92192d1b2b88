#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cli.hpp"
#include "evidencerank/baselines.hpp"
#include "evidencerank/error.hpp"
#include "evidencerank/evidence.hpp"
#include "evidencerank/io.hpp"
#include "evidencerank/metrics.hpp"
#include "evidencerank/simd/kernels.hpp"
#include "evidencerank/synthetic.hpp"
#include "json.hpp"

namespace evidencerank::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr int kSchemaVersion = 1;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

json envelope(const std::string& command) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  return j;
}

struct SolverFlags {
  bool naive = false;
  double rel_tol = 1e-3;
  int max_iter = 100;
  bool standardize = false;
  unsigned threads = 0;

  evidence::SolverOptions options() const {
    evidence::SolverOptions opts;
    opts.path = naive ? evidence::MStepPath::kNaive : evidence::MStepPath::kOptimized;
    opts.rel_tol = rel_tol;
    opts.max_iter = max_iter;
    opts.standardize = standardize;
    opts.threads = threads;
    return opts;
  }

  void add_to(CLI::App& app) {
    app.add_flag("--naive", naive, "Use the naive m-step (factorize A every iteration)");
    app.add_option("--rel-tol", rel_tol, "Relative change of alpha and beta that ends the iteration")
        ->check(CLI::PositiveNumber);
    app.add_option("--max-iter", max_iter, "Iteration cap per target column")
        ->check(CLI::Range(1, 1000000));
    app.add_flag("--standardize", standardize,
                 "z-score every feature before scoring (changes the score; off by default)");
    app.add_option("--threads", threads, "Worker threads (0 = EVIDENCERANK_THREADS or all cores)");
  }
};

struct ProbeFlags {
  std::vector<double> lambdas;
  int folds = 5;
  std::uint64_t seed = 0;

  void add_to(CLI::App& app) {
    app.add_option("--lambdas", lambdas, "Ridge strengths for the probe grid")->delimiter(',');
    app.add_option("--folds", folds, "Cross-validation folds for the probe")->check(CLI::Range(2, 1000));
    app.add_option("--seed", seed, "Fold shuffling seed for the probe");
  }
};

enum class Method { kLogme, kLeep, kNce, kProbe };

const std::map<std::string, Method> kMethods{
    {"logme", Method::kLogme}, {"leep", Method::kLeep}, {"nce", Method::kNce}, {"probe", Method::kProbe}};

std::string method_name(Method m) {
  for (const auto& [name, value] : kMethods) {
    if (value == m) return name;
  }
  return "unknown";
}

struct ScoreOutcome {
  Method method = Method::kLogme;
  double score = 0.0;
  double wall_ms = 0.0;
  bool degenerate = false;
  std::optional<evidence::LogMEResult> logme;
  std::optional<baselines::ProbeResult> probe;
};

ScoreOutcome score_pack(const io::FeatPack& pack, Method method, const SolverFlags& solver,
                        const ProbeFlags& probe_flags) {
  ScoreOutcome outcome;
  outcome.method = method;
  const auto start = Clock::now();
  switch (method) {
    case Method::kLogme: {
      outcome.logme = evidence::logme(pack.features, pack.target_matrix(), solver.options());
      outcome.score = outcome.logme->score;
      outcome.degenerate = outcome.logme->any_degenerate();
      break;
    }
    case Method::kLeep:
    case Method::kNce: {
      if (!pack.theta) {
        throw InvalidInput(method_name(method) +
                           ": theta block required (source-model predictions)");
      }
      if (!pack.has_class_labels()) {
        throw InvalidInput(method_name(method) + ": class-label targets required");
      }
      if (method == Method::kLeep) {
        outcome.score = baselines::leep(*pack.theta, pack.labels);
      } else {
        baselines::validate_source_predictions(*pack.theta);
        outcome.score = baselines::nce(baselines::argmax_pseudo_labels(*pack.theta), pack.labels);
      }
      break;
    }
    case Method::kProbe: {
      baselines::ProbeOptions opts;
      if (!probe_flags.lambdas.empty()) opts.lambdas = probe_flags.lambdas;
      opts.folds = probe_flags.folds;
      opts.seed = probe_flags.seed;
      opts.classification = pack.has_class_labels();
      outcome.probe = baselines::linear_probe_score(pack.features, pack.target_matrix(), opts);
      outcome.score = outcome.probe->score;
      break;
    }
  }
  outcome.wall_ms = elapsed_ms(start);
  return outcome;
}

json outcome_json(const ScoreOutcome& o) {
  json j;
  j["method"] = method_name(o.method);
  j["score"] = o.score;
  j["wall_ms"] = o.wall_ms;
  j["degenerate"] = o.degenerate;
  if (o.logme) {
    json dims = json::array();
    for (std::size_t k = 0; k < o.logme->states.size(); ++k) {
      const auto& s = o.logme->states[k];
      dims.push_back({{"value", o.logme->per_dim(static_cast<Eigen::Index>(k))},
                      {"alpha", s.alpha},
                      {"beta", s.beta},
                      {"iterations", s.iterations},
                      {"converged", s.converged},
                      {"degenerate", s.degenerate()}});
    }
    j["per_dim"] = std::move(dims);
  }
  if (o.probe) {
    j["best_lambda"] = o.probe->best_lambda;
    j["lambda_scores"] = o.probe->scores;
    j["warnings"] = o.probe->warnings;
  }
  return j;
}

void print_outcome(std::ostream& out, const ScoreOutcome& o) {
  out << std::setprecision(10);
  out << "method     " << method_name(o.method) << "\n";
  out << "score      " << o.score << "\n";
  out << "wall_ms    " << std::fixed << std::setprecision(3) << o.wall_ms
      << std::defaultfloat << std::setprecision(10) << "\n";
  if (o.logme) {
    out << "degenerate " << (o.degenerate ? "yes" : "no") << "\n";
    out << "dim  log_evidence/n  alpha  beta  iterations  converged\n";
    for (std::size_t k = 0; k < o.logme->states.size(); ++k) {
      const auto& s = o.logme->states[k];
      out << k << "  " << o.logme->per_dim(static_cast<Eigen::Index>(k)) << "  " << s.alpha
          << "  " << s.beta << "  " << s.iterations << "  " << (s.converged ? "yes" : "no")
          << (s.degenerate() ? "  degenerate" : "") << "\n";
    }
  }
  if (o.probe) {
    out << "best_lambda " << o.probe->best_lambda << "\n";
    for (const auto& w : o.probe->warnings) out << "warning: " << w << "\n";
  }
}

Method parse_method(const std::string& name) {
  const auto it = kMethods.find(name);
  if (it == kMethods.end()) throw InvalidInput("unknown method '" + name + "'");
  return it->second;
}

// ---- score ---------------------------------------------------------------

int cmd_score(const std::string& pack_path, const std::string& method_str,
              const SolverFlags& solver, const ProbeFlags& probe, bool as_json,
              std::ostream& out) {
  const Method method = parse_method(method_str);
  const io::FeatPack pack = io::read_featpack(pack_path);
  const ScoreOutcome outcome = score_pack(pack, method, solver, probe);
  if (as_json) {
    json j = envelope("score");
    j["pack"] = pack_path;
    const json body = outcome_json(outcome);
    for (const auto& [key, value] : body.items()) j[key] = value;
    out << j.dump(2) << "\n";
  } else {
    out << "pack       " << pack_path << "\n";
    print_outcome(out, outcome);
  }
  return kExitOk;
}

// ---- rank ----------------------------------------------------------------

struct ManifestEntry {
  std::string name;
  fs::path path;
};

std::vector<ManifestEntry> read_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw InvalidInput("cannot open manifest '" + manifest.string() + "'");
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw InvalidInput("manifest line " + std::to_string(line_no) +
                         ": expected 'name<TAB>path'");
    }
    ManifestEntry entry{line.substr(0, tab), fs::path(line.substr(tab + 1))};
    if (entry.path.is_relative()) entry.path = manifest.parent_path() / entry.path;
    if (!seen.insert(entry.name).second) {
      throw InvalidInput("manifest: duplicate model name '" + entry.name + "'");
    }
    entries.push_back(std::move(entry));
  }
  if (entries.size() < 2) throw InvalidInput("manifest: need >= 2 models to rank");
  return entries;
}

int cmd_rank(const std::string& manifest_path, const std::string& method_str,
             const SolverFlags& solver, const ProbeFlags& probe, bool as_json,
             std::ostream& out) {
  const auto start = Clock::now();
  const Method method = parse_method(method_str);
  const auto entries = read_manifest(manifest_path);
  for (const auto& e : entries) {
    if (!fs::exists(e.path)) {
      throw InvalidInput("manifest entry '" + e.name + "': pack file '" + e.path.string() +
                         "' does not exist");
    }
  }

  std::vector<ScoreOutcome> outcomes(entries.size());
  std::vector<std::exception_ptr> errors(entries.size());
  const unsigned threads = std::min<unsigned>(evidence::resolve_threads(solver.threads),
                                              static_cast<unsigned>(entries.size()));
  SolverFlags inner = solver;
  inner.threads = 1;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      try {
        outcomes[i] = score_pack(io::read_featpack(entries[i].path), method, inner, probe);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const InvalidInput& e) {
      throw InvalidInput("manifest entry '" + entries[i].name + "': " + e.what());
    } catch (const NumericFailure& e) {
      throw NumericFailure("manifest entry '" + entries[i].name + "': " + e.what());
    }
  }

  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (outcomes[a].score != outcomes[b].score) return outcomes[a].score > outcomes[b].score;
    return entries[a].name < entries[b].name;
  });

  if (as_json) {
    json j = envelope("rank");
    j["method"] = method_name(method);
    json ranked = json::array();
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto i = order[r];
      ranked.push_back({{"rank", r + 1},
                        {"model_name", entries[i].name},
                        {"featpack_path", entries[i].path.string()},
                        {"score", outcomes[i].score},
                        {"method", method_name(method)},
                        {"degenerate", outcomes[i].degenerate},
                        {"wall_ms", outcomes[i].wall_ms}});
    }
    j["ranking"] = std::move(ranked);
    j["wall_ms"] = elapsed_ms(start);
    out << j.dump(2) << "\n";
  } else {
    out << "rank\tmodel\tscore\twall_ms\tdegenerate\n" << std::setprecision(10);
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto i = order[r];
      out << r + 1 << "\t" << entries[i].name << "\t" << outcomes[i].score << "\t"
          << std::fixed << std::setprecision(3) << outcomes[i].wall_ms << std::defaultfloat
          << std::setprecision(10) << "\t" << (outcomes[i].degenerate ? "yes" : "no") << "\n";
    }
  }
  return kExitOk;
}

// ---- eval ----------------------------------------------------------------

std::vector<double> read_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string token;
    std::string last;
    while (tokens >> token) last = token;
    if (last.empty() || line.front() == '#') continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(last, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != last.size() || !std::isfinite(v)) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": '" + last +
                         "' is not a number");
    }
    values.push_back(v);
  }
  return values;
}

int cmd_eval(const std::string& scores_path, const std::string& truths_path,
             bool lower_truth_better, bool as_json, std::ostream& out) {
  const auto start = Clock::now();
  const auto scores = read_values(scores_path);
  const auto truths = read_values(truths_path);
  if (scores.size() != truths.size()) {
    throw InvalidInput("length mismatch: " + std::to_string(scores.size()) + " scores vs " +
                       std::to_string(truths.size()) + " truths");
  }
  const auto report = metrics::evaluate_ranking(scores, truths, !lower_truth_better);
  const double selection = (report.tau + 1.0) / 2.0;
  if (as_json) {
    json j = envelope("eval");
    j["m"] = scores.size();
    j["higher_truth_better"] = report.higher_truth_better;
    j["tau"] = report.tau;
    j["tau_w"] = report.tau_w;
    j["concordant_fraction"] =
        report.concordant_fraction ? json(*report.concordant_fraction) : json(nullptr);
    j["selection_probability"] = selection;
    j["wall_ms"] = elapsed_ms(start);
    out << j.dump(2) << "\n";
  } else {
    out << std::setprecision(10);
    out << "models               " << scores.size() << "\n";
    out << "truth direction      " << (report.higher_truth_better ? "higher is better" : "lower is better") << "\n";
    out << "tau                  " << report.tau << "\n";
    out << "tau_w                " << report.tau_w << "\n";
    out << "concordant fraction  ";
    if (report.concordant_fraction) {
      out << *report.concordant_fraction << "\n";
    } else {
      out << "n/a (ties present)\n";
    }
    out << "interpretation       when S_i > S_j, T_i beats T_j with probability (tau+1)/2 = "
        << selection << "\n";
  }
  return kExitOk;
}

// ---- bench ---------------------------------------------------------------

int cmd_bench(const BenchConfig& config, bool scaling, bool as_json, std::ostream& out) {
  const BenchReport r = run_bench(config);
  std::optional<LoopTiming> base;
  std::optional<LoopTiming> doubled;
  if (scaling) {
    base = time_single_loop(config.n, config.dims, config.repeats, config.seed);
    doubled = time_single_loop(config.n, 2 * config.dims, config.repeats, config.seed);
  }
  if (as_json) {
    json j = envelope("bench");
    j["n"] = config.n;
    j["D"] = config.dims;
    j["K"] = config.outputs;
    j["repeats"] = config.repeats;
    j["threads"] = config.threads;
    j["simd"] = std::string(simd::isa_name(simd::kernels().isa));
    j["naive_ms"] = r.naive_ms;
    j["optimized_ms"] = r.optimized_ms;
    j["naive_median_ms"] = r.naive_median_ms;
    j["optimized_median_ms"] = r.optimized_median_ms;
    j["ratio"] = r.ratio;
    j["speedup"] = r.speedup;
    j["median_iterations"] = r.median_iterations;
    j["naive_score"] = r.naive_score;
    j["optimized_score"] = r.optimized_score;
    j["max_relative_difference"] = r.max_relative_difference;
    j["scores_agree"] = r.scores_agree;
    j["wall_ms"] = r.naive_median_ms + r.optimized_median_ms;
    if (scaling) {
      j["scaling"] = {{"dims", {base->dims, doubled->dims}},
                      {"naive_loop_ms", {base->naive_ms, doubled->naive_ms}},
                      {"optimized_loop_ms", {base->optimized_ms, doubled->optimized_ms}},
                      {"naive_growth", doubled->naive_ms / base->naive_ms},
                      {"optimized_growth", doubled->optimized_ms / base->optimized_ms}};
    }
    out << j.dump(2) << "\n";
  } else {
    out << std::setprecision(6);
    out << "instance   n=" << config.n << " D=" << config.dims << " K=" << config.outputs
        << " repeats=" << config.repeats << " threads=" << config.threads
        << " simd=" << simd::isa_name(simd::kernels().isa) << "\n";
    out << "path        median_ms   score\n";
    out << "naive       " << r.naive_median_ms << "   " << std::setprecision(12) << r.naive_score
        << std::setprecision(6) << "\n";
    out << "optimized   " << r.optimized_median_ms << "   " << std::setprecision(12)
        << r.optimized_score << std::setprecision(6) << "\n";
    out << "ratio       " << r.ratio << " (optimized/naive), speedup " << r.speedup << "x\n";
    out << "iterations  median " << r.median_iterations << " per target column\n";
    out << "agreement   max relative difference " << r.max_relative_difference
        << (r.scores_agree ? " (ok)" : " (MISMATCH)") << "\n";
    if (scaling) {
      out << "per-loop    D=" << base->dims << ": naive " << base->naive_ms << " ms, optimized "
          << base->optimized_ms << " ms\n";
      out << "per-loop    D=" << doubled->dims << ": naive " << doubled->naive_ms
          << " ms, optimized " << doubled->optimized_ms << " ms\n";
      out << "growth      naive " << doubled->naive_ms / base->naive_ms << "x, optimized "
          << doubled->optimized_ms / base->optimized_ms << "x\n";
    }
  }
  if (!r.scores_agree) {
    throw NumericFailure("bench: naive and optimized paths disagree (max relative difference " +
                         std::to_string(r.max_relative_difference) + ")");
  }
  return kExitOk;
}

// ---- toy -----------------------------------------------------------------

std::string noise_tag(double t) {
  std::ostringstream s;
  s << t;
  return s.str();
}

int cmd_toy(const std::string& kind_str, std::uint64_t seed, std::vector<double> grid,
            std::size_t n, const std::string& out_dir, bool assert_monotone, bool as_json,
            std::ostream& out) {
  const auto start = Clock::now();
  const synthetic::ToyKind kind = synthetic::parse_kind(kind_str);
  if (kind == synthetic::ToyKind::kRandom) {
    throw InvalidInput("toy: kind must be classification or regression");
  }
  if (grid.empty()) throw InvalidInput("toy: empty noise grid");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw InvalidInput("toy: cannot create output directory '" + out_dir + "'");
  }

  std::vector<double> scores;
  json packs = json::array();
  for (double t : grid) {
    synthetic::ToyConfig cfg{seed, n, t, kind};
    io::FeatPack pack;
    if (kind == synthetic::ToyKind::kClassification3) {
      auto data = synthetic::gen_clusters(cfg);
      pack.features = std::move(data.features);
      pack.labels = std::move(data.labels);
      pack.classes = data.classes;
    } else {
      auto data = synthetic::gen_regression(cfg);
      pack.features = std::move(data.features);
      pack.targets = std::move(data.targets);
    }
    const fs::path path =
        fs::path(out_dir) / (std::string(synthetic::kind_name(kind)) + "_noise" + noise_tag(t) + ".featpack");
    io::write_featpack(path, pack);
    const double score = evidence::logme(pack.features, pack.target_matrix()).score;
    scores.push_back(score);
    packs.push_back({{"noise", t}, {"path", path.string()}, {"logme", score}});
  }

  const fs::path summary = fs::path(out_dir) / (std::string(synthetic::kind_name(kind)) + "_summary.csv");
  {
    std::ofstream csv(summary);
    if (!csv) throw InvalidInput("toy: cannot write '" + summary.string() + "'");
    csv << "noise,logme\n" << std::setprecision(17);
    for (std::size_t i = 0; i < grid.size(); ++i) csv << grid[i] << "," << scores[i] << "\n";
  }

  // Strictly decreasing in noise; a repeated level can never satisfy that.
  std::vector<std::size_t> by_noise(grid.size());
  for (std::size_t i = 0; i < by_noise.size(); ++i) by_noise[i] = i;
  std::stable_sort(by_noise.begin(), by_noise.end(),
                   [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  bool monotone = true;
  for (std::size_t i = 1; i < by_noise.size(); ++i) {
    if (!(scores[by_noise[i]] < scores[by_noise[i - 1]])) monotone = false;
  }

  if (as_json) {
    json j = envelope("toy");
    j["kind"] = std::string(synthetic::kind_name(kind));
    j["seed"] = seed;
    j["n"] = n;
    j["packs"] = std::move(packs);
    j["summary_csv"] = summary.string();
    j["monotone_decreasing"] = monotone;
    j["wall_ms"] = elapsed_ms(start);
    out << j.dump(2) << "\n";
  } else {
    out << "noise\tlogme\n" << std::setprecision(10);
    for (std::size_t i = 0; i < grid.size(); ++i) out << grid[i] << "\t" << scores[i] << "\n";
    out << "summary " << summary.string() << "\n";
    out << "monotone decreasing: " << (monotone ? "yes" : "no") << "\n";
  }
  return assert_monotone && !monotone ? kExitFailed : kExitOk;
}

// ---- pack ----------------------------------------------------------------

int cmd_pack(const std::string& csv_path, const std::string& out_path, const std::string& label,
             bool no_header, bool classes, std::ostream& out) {
  io::ColumnRef column = label;
  if (no_header || std::all_of(label.begin(), label.end(), ::isdigit)) {
    if (label.empty() || !std::all_of(label.begin(), label.end(), ::isdigit)) {
      throw InvalidInput("pack: header-less files need a numeric --label-column");
    }
    column = static_cast<std::size_t>(std::stoull(label));
  }
  // A purely numeric name that matches a header cell wins over the index reading.
  io::CsvTable table;
  try {
    table = io::read_csv_features(csv_path, !no_header, column);
  } catch (const io::CsvError&) {
    if (no_header || std::holds_alternative<std::string>(column)) throw;
    table = io::read_csv_features(csv_path, true, io::ColumnRef(label));
  }
  io::FeatPack pack;
  pack.features = std::move(table.features);
  if (classes) {
    pack.labels = io::labels_from_values(table.label);
    pack.classes = *std::max_element(pack.labels.begin(), pack.labels.end()) + 1;
  } else {
    pack.targets = Eigen::Map<const Vector>(table.label.data(),
                                            static_cast<Eigen::Index>(table.label.size()));
  }
  io::write_featpack(out_path, pack);
  out << "wrote " << out_path << " (n=" << pack.features.rows() << ", D=" << pack.features.cols()
      << ", K=" << pack.outputs() << (classes ? " classes" : " targets") << ")\n";
  return kExitOk;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

BenchReport run_bench(const BenchConfig& config) {
  if (config.n < 2 || config.dims < 1 || config.outputs < 1 || config.repeats < 1) {
    throw InvalidInput("bench: sizes and repeats must be positive (n >= 2)");
  }
  const auto data = synthetic::gen_planted(
      {config.seed, config.n, config.noise, synthetic::ToyKind::kRandom}, config.dims, config.outputs);

  BenchReport report;
  report.config = config;
  evidence::SolverOptions opts;
  opts.threads = config.threads;
  evidence::LogMEResult naive;
  evidence::LogMEResult optimized;
  for (int rep = 0; rep < config.repeats; ++rep) {
    opts.path = evidence::MStepPath::kOptimized;
    auto start = Clock::now();
    optimized = evidence::logme(data.features, data.targets, opts);
    report.optimized_ms.push_back(elapsed_ms(start));

    opts.path = evidence::MStepPath::kNaive;
    start = Clock::now();
    naive = evidence::logme(data.features, data.targets, opts);
    report.naive_ms.push_back(elapsed_ms(start));
  }
  report.naive_median_ms = median(report.naive_ms);
  report.optimized_median_ms = median(report.optimized_ms);
  report.ratio = report.optimized_median_ms / report.naive_median_ms;
  report.speedup = report.naive_median_ms / report.optimized_median_ms;
  report.naive_score = naive.score;
  report.optimized_score = optimized.score;

  std::vector<double> iterations;
  for (Eigen::Index k = 0; k < naive.per_dim.size(); ++k) {
    const double a = naive.per_dim(k);
    const double b = optimized.per_dim(k);
    const double rel = std::abs(a - b) / std::max(std::abs(a), std::abs(b));
    report.max_relative_difference = std::max(report.max_relative_difference, rel);
    iterations.push_back(optimized.states[static_cast<std::size_t>(k)].iterations);
  }
  report.median_iterations = median(iterations);
  report.scores_agree = report.max_relative_difference <= kBenchAgreementTolerance;
  return report;
}

LoopTiming time_single_loop(std::size_t n, std::size_t dims, int repeats, std::uint64_t seed) {
  const auto data = synthetic::gen_planted({seed, n, 0.5, synthetic::ToyKind::kRandom}, dims, 1);
  const Vector y = data.targets.col(0);
  const auto eig = linalg::sym_eig(linalg::gram(data.features));
  const Vector fty = linalg::multiply_transposed(data.features, y);
  std::vector<double> naive_ms;
  std::vector<double> optimized_ms;
  volatile double sink = 0.0;
  for (int rep = 0; rep < std::max(repeats, 1); ++rep) {
    auto start = Clock::now();
    Vector m = evidence::m_step_naive(1.0, 1.0, data.features, y);
    sink = sink + (linalg::multiply(data.features, m) - y).squaredNorm();
    naive_ms.push_back(elapsed_ms(start));

    start = Clock::now();
    m = evidence::m_step_optimized(1.0, 1.0, eig, fty);
    sink = sink + (linalg::multiply(data.features, m) - y).squaredNorm();
    optimized_ms.push_back(elapsed_ms(start));
  }
  return {dims, median(naive_ms), median(optimized_ms)};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transferability scoring by log maximum evidence", "evidencerank"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "evidencerank 1.0");

  bool as_json = false;
  SolverFlags solver;
  ProbeFlags probe;

  std::string pack_path;
  std::string method = "logme";
  auto* score = app.add_subcommand("score", "Score one feature pack");
  score->add_option("pack", pack_path, "FeatPack file")->required();
  score->add_option("--method", method, "logme | leep | nce | probe")
      ->check(CLI::IsMember({"logme", "leep", "nce", "probe"}));
  score->add_flag("--json", as_json, "Machine-readable output");
  solver.add_to(*score);
  probe.add_to(*score);

  std::string manifest;
  auto* rank = app.add_subcommand("rank", "Rank candidate models listed in a manifest");
  rank->add_option("manifest", manifest, "File of 'name<TAB>pack' lines")->required();
  rank->add_option("--method", method, "logme | leep | nce | probe")
      ->check(CLI::IsMember({"logme", "leep", "nce", "probe"}));
  rank->add_flag("--json", as_json, "Machine-readable output");
  solver.add_to(*rank);
  probe.add_to(*rank);

  std::string scores_file;
  std::string truths_file;
  bool lower_better = false;
  auto* eval = app.add_subcommand("eval", "Correlate scores with ground-truth transfer performance");
  eval->add_option("scores", scores_file, "One score per line")->required();
  eval->add_option("truths", truths_file, "One ground-truth value per line, same order")->required();
  eval->add_flag("--lower-truth-better", lower_better, "Truths are errors (e.g. MSE): negate before ranking");
  eval->add_flag("--json", as_json, "Machine-readable output");

  BenchConfig bench_cfg;
  bool scaling = false;
  auto* bench = app.add_subcommand("bench", "Time the naive and optimized m-step paths");
  bench->add_option("--n", bench_cfg.n, "Samples")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40));
  bench->add_option("--D", bench_cfg.dims, "Feature dimension")->check(CLI::PositiveNumber);
  bench->add_option("--K", bench_cfg.outputs, "Target columns")->check(CLI::PositiveNumber);
  bench->add_option("--repeats", bench_cfg.repeats, "Timed runs per path")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_cfg.seed, "Instance seed");
  bench->add_option("--threads", bench_cfg.threads, "Worker threads for both paths");
  bench->add_flag("--scaling", scaling, "Also time a single loop at D and 2D");
  bench->add_flag("--json", as_json, "Machine-readable output");

  std::string kind = "regression";
  std::uint64_t seed = 0;
  std::vector<double> grid{0.0, 0.5, 1.0, 2.0};
  std::size_t toy_n = 0;
  std::string out_dir;
  bool assert_monotone = false;
  auto* toy = app.add_subcommand("toy", "Generate the toy noise-sweep experiments");
  toy->add_option("--kind", kind, "classification | regression");
  toy->add_option("--seed", seed, "Generator seed");
  toy->add_option("--noise", grid, "Comma-separated noise grid")->delimiter(',');
  toy->add_option("--n", toy_n, "Samples (default 300 classification, 1000 regression)");
  toy->add_option("--out-dir", out_dir, "Directory for packs and the summary CSV")->required();
  toy->add_flag("--assert-monotone", assert_monotone, "Exit 1 unless LogME strictly decreases with noise");
  toy->add_flag("--json", as_json, "Machine-readable output");

  std::string csv_path;
  std::string pack_out;
  std::string label_column;
  bool no_header = false;
  bool classes = false;
  auto* pack = app.add_subcommand("pack", "Convert a numeric CSV into a FeatPack");
  pack->add_option("csv", csv_path, "Input CSV")->required();
  pack->add_option("--out", pack_out, "Output FeatPack")->required();
  pack->add_option("--label-column", label_column, "Label column name or zero-based index")->required();
  pack->add_flag("--no-header", no_header, "The CSV has no header row");
  pack->add_flag("--classes", classes, "Labels are integer classes (default: regression target)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*score) return cmd_score(pack_path, method, solver, probe, as_json, out);
    if (*rank) return cmd_rank(manifest, method, solver, probe, as_json, out);
    if (*eval) return cmd_eval(scores_file, truths_file, lower_better, as_json, out);
    if (*bench) return cmd_bench(bench_cfg, scaling, as_json, out);
    if (*toy) {
      const synthetic::ToyKind k = synthetic::parse_kind(kind);
      const std::size_t n =
          toy_n > 0 ? toy_n : (k == synthetic::ToyKind::kClassification3 ? 300 : 1000);
      return cmd_toy(kind, seed, grid, n, out_dir, assert_monotone, as_json, out);
    }
    if (*pack) return cmd_pack(csv_path, pack_out, label_column, no_header, classes, out);
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitInput;
}

}  // namespace evidencerank::cli
