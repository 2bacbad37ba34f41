#include "coreset/cli.hpp"

#include <sys/stat.h>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coreset/coverage.hpp"
#include "coreset/data_model.hpp"
#include "coreset/io.hpp"
#include "coreset/selection.hpp"
#include "coreset/synthbench.hpp"

namespace coreset::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };
Level g_level = Level::warn;

void log(Level level, const std::string& msg) {
  static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
  if (level <= g_level) std::cerr << "coreset: " << kNames[static_cast<int>(level)] << ": " << msg << "\n";
}

void require_input(const std::string& flag, const std::string& path) {
  if (!fs::is_regular_file(path)) throw DataError(flag + ": no such file '" + path + "'");
}

void require_output(const std::string& flag, const std::string& path) {
  const fs::path p(path);
  if (fs::is_directory(p)) throw DataError(flag + ": '" + path + "' is a directory");
  const auto dir = p.parent_path();
  if (!dir.empty() && !fs::is_directory(dir)) {
    throw DataError(flag + ": directory '" + dir.string() + "' does not exist");
  }
}

void emit(const std::string& path, const std::string& contents) {
  if (path.empty() || path == "-") {
    std::cout << contents;
  } else {
    write_file_atomic(path, contents);
  }
}

// Reproducible timestamp: SOURCE_DATE_EPOCH when set, else the input's mtime.
std::string stamp(const std::string& input) {
  std::time_t t = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env != nullptr && *env != '\0') {
    t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
  } else {
    struct stat st {};
    if (::stat(input.c_str(), &st) == 0) t = st.st_mtime;
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Method method_or_usage(const std::string& name) {
  auto m = parse_method(name);
  if (!m) throw UsageError("--method: unknown method '" + name + "'");
  return *m;
}

struct Globals {
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string log_level = "warn";
};

struct SelectArgs {
  std::string method, scores, embeddings, out;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t strata = 50;
};

int do_select(const SelectArgs& a, const Globals& g, const CLI::App& cmd) {
  const Method method = method_or_usage(a.method);
  const bool has_beta = cmd.count("--beta") > 0;
  const bool has_strata = cmd.count("--strata") > 0;
  if (has_beta && method != Method::ccs) {
    throw UsageError("--beta applies to --method ccs only");
  }
  if (has_strata && method != Method::ccs && method != Method::stratified) {
    throw UsageError("--strata applies to --method ccs or stratified only");
  }
  if (!a.embeddings.empty() && method != Method::moderate) {
    throw UsageError("--embeddings applies to --method moderate only");
  }
  if (a.embeddings.empty() && method == Method::moderate) {
    throw UsageError("--method moderate requires --embeddings");
  }
  require_input("--scores", a.scores);
  if (!a.embeddings.empty()) require_input("--embeddings", a.embeddings);
  require_output("--out", a.out);

  const auto loaded = load_scores(a.scores);
  const auto table = loaded.is_canonical() ? loaded : canonicalize_scores(loaded);
  std::optional<EmbeddingMatrix> emb;
  if (!a.embeddings.empty()) emb = load_embeddings(a.embeddings);
  log(Level::info, "loaded " + std::to_string(table.size()) + " scores from " + a.scores);

  const SelectorConfig config{method, a.alpha, a.beta, a.strata, g.seed};
  auto result = run_selector(config, table, emb ? &*emb : nullptr);
  result.created_at = stamp(a.scores);
  for (const auto& w : result.warnings) log(Level::warn, w);
  save_selection(result, a.out);
  log(Level::info, "selected " + std::to_string(result.size()) + " of " +
                       std::to_string(table.size()) + " into " + a.out);
  return 0;
}

struct CoverageArgs {
  std::string train_emb, eval_emb, exclude, curve_out, report_out, out;
  std::vector<std::string> selections;
};

int do_coverage(const CoverageArgs& a, const Globals& g) {
  if (a.selections.size() != 1 && (!a.curve_out.empty() || !a.report_out.empty())) {
    throw UsageError("--curve-out and --report-out need exactly one --selection");
  }
  require_input("--train-emb", a.train_emb);
  require_input("--eval-emb", a.eval_emb);
  for (const auto& s : a.selections) require_input("--selection", s);
  if (!a.exclude.empty()) require_input("--exclude", a.exclude);
  if (!a.curve_out.empty()) require_output("--curve-out", a.curve_out);
  if (!a.report_out.empty()) require_output("--report-out", a.report_out);
  if (!a.out.empty() && a.out != "-") require_output("--out", a.out);

  const auto train = load_embeddings(a.train_emb);
  const auto eval = load_embeddings(a.eval_emb);
  std::vector<std::size_t> excluded;
  if (!a.exclude.empty()) excluded = resolve_exclusions(eval, load_id_list(a.exclude));
  std::vector<SelectionResult> sels;
  for (const auto& s : a.selections) {
    try {
      sels.push_back(load_selection(s));
    } catch (const DataError& e) {
      throw DataError("--selection " + s + ": " + e.what());
    }
  }

  if (!a.curve_out.empty() || !a.report_out.empty()) {
    if (sels.front().source_n != train.rows()) {
      throw DataError("--selection " + a.selections.front() + ": source_n=" +
                      std::to_string(sels.front().source_n) + " but --train-emb has " +
                      std::to_string(train.rows()) + " rows");
    }
    const auto report =
        coverage_report(train.select_rows(sels.front().selected), eval, excluded, g.threads);
    if (!a.curve_out.empty()) write_file_atomic(a.curve_out, format_curve_csv(report.curve));
    if (!a.report_out.empty()) write_file_atomic(a.report_out, format_report_json(report));
  }
  const auto rows = compare_coverage(sels, train, eval, excluded, g.threads);
  emit(a.out, format_coverage_table_csv(rows));
  return 0;
}

struct BenchArgs {
  std::string preset = "default", classifier = "knn", out, beta_search;
  std::vector<std::string> methods{"ccs", "random", "topk-hard"};
  std::vector<double> alphas{0.3, 0.5, 0.7, 0.9};
  std::vector<double> betas{0.0};
  std::vector<std::size_t> strata{50};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t knn_k = 5;
  std::size_t epochs = 200;
  double learning_rate = 0.5;
};

int do_bench(const BenchArgs& a, const Globals& g, const CLI::App& cmd) {
  auto spec = preset(a.preset);
  if (!spec) throw UsageError("--preset: unknown preset '" + a.preset + "'");
  std::vector<Method> methods;
  for (const auto& name : a.methods) methods.push_back(method_or_usage(name));
  Classifier classifier;
  if (a.classifier == "knn") {
    classifier = KnnClassifier{a.knn_k};
  } else if (a.classifier == "logreg") {
    classifier = LogRegClassifier{a.epochs, a.learning_rate};
  } else {
    throw UsageError("--classifier: unknown classifier '" + a.classifier + "'");
  }
  require_output("--out", a.out);
  if (!a.beta_search.empty()) require_output("--beta-search", a.beta_search);

  spec->seed = g.seed;
  const auto ds = generate_mixture(*spec);
  log(Level::info, "generated preset " + a.preset + ": " + std::to_string(ds.train_size()) +
                       " train, " + std::to_string(ds.test_size()) + " test");

  SweepConfig config;
  config.methods = methods;
  config.alphas = a.alphas;
  config.betas = a.betas;
  config.ks = a.strata;
  config.seeds = a.seeds;
  config.classifier = classifier;
  config.threads = g.threads;
  const auto result = sweep(ds, config);

  std::string search_csv;
  if (!a.beta_search.empty()) {
    const bool explicit_betas = cmd.count("--betas") > 0;
    for (double alpha : a.alphas) {
      std::vector<double> grid;
      if (explicit_betas) {
        for (double b : a.betas) {
          if (b <= alpha) grid.push_back(b);
        }
      } else {
        grid = default_beta_grid(alpha);
      }
      if (grid.empty()) throw UsageError("--betas has no value feasible at alpha=" + format_double(alpha));
      for (std::size_t k : a.strata) {
        const auto found = beta_grid_search(ds, alpha, k, grid, a.seeds, classifier, g.threads);
        auto block = format_beta_search_csv(alpha, k, found);
        if (!search_csv.empty()) block.erase(0, block.find('\n') + 1);
        search_csv += block;
        log(Level::info, "alpha=" + format_double(alpha) + " k=" + std::to_string(k) +
                             " best beta=" + format_double(found.best_beta));
      }
    }
  }
  write_file_atomic(a.out, format_sweep_csv(result));
  if (!a.beta_search.empty()) write_file_atomic(a.beta_search, search_csv);
  return 0;
}

struct InspectArgs {
  std::string scores, out;
  std::size_t strata = 50;
  double beta = 0.0;
};

int do_inspect(const InspectArgs& a) {
  require_input("--scores", a.scores);
  if (!a.out.empty() && a.out != "-") require_output("--out", a.out);
  if (a.strata == 0) throw UsageError("--strata must be >= 1");
  if (!(a.beta >= 0.0 && a.beta < 1.0)) throw UsageError("--beta must be in [0, 1)");
  const auto table = load_scores(a.scores);
  const auto canonical = table.is_canonical() ? table : canonicalize_scores(table);
  const auto survivors = prune_hardest(canonical, a.beta);
  const auto part = partition_strata(canonical, survivors, a.strata);
  const double n = static_cast<double>(survivors.size());
  std::string csv = "stratum,lower,upper,count,density\n";
  for (std::size_t j = 0; j < part.k(); ++j) {
    const double count = static_cast<double>(part.members[j].size());
    // Histogram density: integrates to 1 over the score range.
    const double density = part.width > 0.0 ? count / (n * part.width) : count / n;
    csv += std::to_string(j) + "," + format_double(part.edges[j]) + "," +
           format_double(part.edges[j + 1]) + "," + std::to_string(part.members[j].size()) + "," +
           format_double(density) + "\n";
  }
  emit(a.out, csv);
  return 0;
}

std::string version_text() {
  return "coreset " + std::string(kToolkitVersion) + " (embedding format " +
         std::to_string(kEmbeddingFormatVersion) + ", manifest format " +
         std::to_string(kManifestFormatVersion) + ")";
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Coverage-centric coreset selection toolkit", "coreset"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", version_text());

  Globals g;
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--threads", g.threads, "worker threads (0: all cores)");
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  SelectArgs sa;
  auto* select = app.add_subcommand("select", "choose a coreset from a score table");
  select->add_option("--method", sa.method, "ccs, random, topk-hard, prune-hard, stratified, importance, moderate")
      ->required();
  select->add_option("--scores", sa.scores, "score table (.csv or .jsonl)")->required();
  select->add_option("--embeddings", sa.embeddings, "embedding matrix (moderate only)");
  select->add_option("--alpha", sa.alpha, "pruning rate")->required();
  select->add_option("--beta", sa.beta, "hard cutoff rate (ccs)");
  select->add_option("--strata", sa.strata, "number of strata");
  select->add_option("--out", sa.out, "selection manifest path")->required();

  CoverageArgs ca;
  auto* coverage = app.add_subcommand("coverage", "measure AUC_pr of selections");
  coverage->add_option("--train-emb", ca.train_emb, "training embeddings")->required();
  coverage->add_option("--eval-emb", ca.eval_emb, "evaluation embeddings")->required();
  coverage->add_option("--selection", ca.selections, "selection manifest (repeatable)")->required();
  coverage->add_option("--exclude", ca.exclude, "newline-separated evaluation ids to drop");
  coverage->add_option("--curve-out", ca.curve_out, "CSV p,r for one selection");
  coverage->add_option("--report-out", ca.report_out, "JSON report for one selection");
  coverage->add_option("--out", ca.out, "comparison table CSV (default: stdout)");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "run the synthetic benchmark sweep");
  bench->add_option("--preset", ba.preset, "default, separable or noisy");
  bench->add_option("--methods", ba.methods, "comma-separated methods")->delimiter(',');
  bench->add_option("--alphas", ba.alphas, "comma-separated pruning rates")->delimiter(',');
  bench->add_option("--betas", ba.betas, "comma-separated ccs cutoff rates")->delimiter(',');
  bench->add_option("--strata", ba.strata, "comma-separated strata counts")->delimiter(',');
  bench->add_option("--seeds", ba.seeds, "comma-separated selection seeds")->delimiter(',');
  bench->add_option("--classifier", ba.classifier, "knn or logreg");
  bench->add_option("--knn-k", ba.knn_k, "neighbours for knn");
  bench->add_option("--epochs", ba.epochs, "gradient steps for logreg");
  bench->add_option("--learning-rate", ba.learning_rate, "step size for logreg");
  bench->add_option("--beta-search", ba.beta_search,
                    "also write a ccs beta grid search CSV to this path");
  bench->add_option("--out", ba.out, "sweep CSV path")->required();

  InspectArgs ia;
  auto* inspect = app.add_subcommand("inspect", "per-stratum score density as CSV");
  inspect->add_option("--scores", ia.scores, "score table")->required();
  inspect->add_option("--strata", ia.strata, "number of strata");
  inspect->add_option("--beta", ia.beta, "drop this fraction of hardest examples first");
  inspect->add_option("--out", ia.out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << version_text() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "coreset: error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  if (g.log_level == "error") g_level = Level::error;
  if (g.log_level == "info") g_level = Level::info;
  if (g.log_level == "debug") g_level = Level::debug;

  try {
    if (*select) return do_select(sa, g, *select);
    if (*coverage) return do_coverage(ca, g);
    if (*bench) return do_bench(ba, g, *bench);
    return do_inspect(ia);
  } catch (const UsageError& e) {
    std::cerr << "coreset: error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return 1;
  } catch (const DataError& e) {
    log(Level::error, e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    log(Level::error, e.what());
    return 1;
  } catch (const std::exception& e) {
    log(Level::error, e.what());
    return 2;
  }
}

}  // namespace coreset::cli
