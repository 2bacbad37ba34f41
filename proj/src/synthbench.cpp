#include "coreset/synthbench.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "coreset/coverage.hpp"
#include "coreset/io.hpp"
#include "coreset/parallel.hpp"
#include "coreset/random.hpp"

namespace coreset {

namespace {

constexpr double kRateSlack = 1e-12;

// Largest-remainder split of n over real weights; ties to the lower class.
std::vector<std::size_t> split_counts(std::size_t n, std::span<const double> weights) {
  std::vector<std::size_t> counts(weights.size());
  std::vector<double> frac(weights.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const double exact = static_cast<double>(n) * weights[c];
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    frac[c] = exact - std::floor(exact);
    assigned += counts[c];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % order.size()]];
  return counts;
}

std::vector<double> posteriors(std::span<const std::vector<double>> means,
                               std::span<const double> weights, double sigma,
                               std::span<const float> x) {
  const std::size_t classes = means.size();
  std::vector<double> logit(classes);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double top = -INFINITY;
  for (std::size_t c = 0; c < classes; ++c) {
    double sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = static_cast<double>(x[j]) - means[c][j];
      sq += diff * diff;
    }
    logit[c] = std::log(weights[c]) - sq * inv;
    top = std::max(top, logit[c]);
  }
  double total = 0.0;
  for (double& v : logit) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : logit) v /= total;
  return logit;
}

double difficulty_of(std::span<const double> post, std::uint32_t label) {
  // Sum of the other classes keeps precision when the posterior is close to 1.
  double other = 0.0;
  for (std::size_t c = 0; c < post.size(); ++c) {
    if (c != label) other += post[c];
  }
  return other;
}

std::uint64_t row_seed(std::uint64_t seed, double alpha, double beta, std::size_t k) {
  return stream_key({seed, std::bit_cast<std::uint64_t>(alpha), std::bit_cast<std::uint64_t>(beta),
                     static_cast<std::uint64_t>(k)});
}

template <typename Fn>
auto with_coordinates(const std::string& where, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(where + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
}

std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

SyntheticDataset generate_mixture(const MixtureSpec& spec) {
  const std::size_t classes = spec.classes;
  if (classes < 2) throw std::invalid_argument("mixture needs at least 2 classes");
  if (spec.dims == 0) throw std::invalid_argument("mixture dimension must be >= 1");
  if (spec.n < 2 * classes) {
    throw std::invalid_argument("mixture size n=" + std::to_string(spec.n) +
                                " must be at least 2 * classes");
  }
  if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
    throw std::invalid_argument("mixture sigma must be positive");
  }
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must be in (0, 1)");
  }
  if (!(spec.label_noise >= 0.0 && spec.label_noise <= 1.0)) {
    throw std::invalid_argument("label_noise must be in [0, 1]");
  }
  std::vector<double> weights = spec.class_weights;
  if (weights.empty()) weights.assign(classes, 1.0);
  if (weights.size() != classes) {
    throw std::invalid_argument("class_weights has " + std::to_string(weights.size()) +
                                " entries for " + std::to_string(classes) + " classes");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("class weights must be positive and finite");
    }
    wsum += w;
  }
  for (double& w : weights) w /= wsum;

  const auto counts = split_counts(spec.n, weights);
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] < 2) {
      throw std::invalid_argument("class " + std::to_string(c) + " receives " +
                                  std::to_string(counts[c]) +
                                  " points; each class needs one train and one test point");
    }
  }

  const Rng root(spec.seed);
  SyntheticDataset ds;
  ds.sigma = spec.sigma;
  ds.class_weights = weights;
  ds.means.assign(classes, std::vector<double>(spec.dims));
  {
    Rng rng = root.child(1);
    for (auto& mean : ds.means) {
      double norm = 0.0;
      while (norm == 0.0) {
        for (double& v : mean) v = rng.normal();
        norm = std::sqrt(std::inner_product(mean.begin(), mean.end(), mean.begin(), 0.0));
      }
      for (double& v : mean) v *= spec.mean_radius / norm;
    }
  }

  struct Point {
    std::vector<float> x;
    std::uint32_t label;
  };
  std::vector<Point> train, test;
  {
    Rng rng = root.child(2);
    for (std::size_t c = 0; c < classes; ++c) {
      const double test_share = static_cast<double>(counts[c]) * (1.0 - spec.train_fraction);
      const std::size_t n_test =
          std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(test_share)), 1,
                                  counts[c] - 1);
      for (std::size_t i = 0; i < counts[c]; ++i) {
        Point p{std::vector<float>(spec.dims), static_cast<std::uint32_t>(c)};
        for (std::size_t j = 0; j < spec.dims; ++j) {
          p.x[j] = static_cast<float>(ds.means[c][j] + spec.sigma * rng.normal());
        }
        (i < n_test ? test : train).push_back(std::move(p));
      }
    }
  }
  {
    Rng rng = root.child(3);
    shuffle(train, rng);
    shuffle(test, rng);
  }

  auto pack = [&](const std::vector<Point>& pts, std::vector<std::uint32_t>& labels) {
    std::vector<float> values;
    values.reserve(pts.size() * spec.dims);
    labels.clear();
    for (const auto& p : pts) {
      values.insert(values.end(), p.x.begin(), p.x.end());
      labels.push_back(p.label);
    }
    return EmbeddingMatrix(pts.size(), spec.dims, std::move(values));
  };
  ds.train_points = pack(train, ds.train_clean_labels);
  ds.test_points = pack(test, ds.test_labels);
  ds.train_labels = ds.train_clean_labels;

  const std::size_t n_flip = floor_count(ds.train_size(), spec.label_noise);
  if (n_flip > 0) {
    const auto clean = analytic_difficulty(ds);
    std::vector<std::size_t> order(ds.train_size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto s = clean.scores();
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    Rng rng = root.child(4);
    for (std::size_t t = 0; t < n_flip; ++t) {
      const std::size_t i = order[t];
      auto other = static_cast<std::uint32_t>(rng.below(classes - 1));
      if (other >= ds.train_labels[i]) ++other;
      ds.train_labels[i] = other;
      ds.flipped.push_back(i);
    }
    std::sort(ds.flipped.begin(), ds.flipped.end());
  }
  return ds;
}

std::optional<MixtureSpec> preset(std::string_view name) {
  MixtureSpec spec;
  if (name == "default") return spec;
  if (name == "separable") {
    spec.sigma = 0.15;
    return spec;
  }
  if (name == "noisy") {
    spec.label_noise = 0.1;
    return spec;
  }
  return std::nullopt;
}

std::vector<double> class_posteriors(const SyntheticDataset& ds, std::span<const float> x) {
  if (x.size() != ds.dims()) throw std::invalid_argument("class_posteriors: dimension mismatch");
  return posteriors(ds.means, ds.class_weights, ds.sigma, x);
}

ScoreTable analytic_difficulty(const SyntheticDataset& ds) {
  std::vector<double> scores(ds.train_size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto post = posteriors(ds.means, ds.class_weights, ds.sigma, ds.train_points.row(i));
    scores[i] = difficulty_of(post, ds.train_labels[i]);
  }
  return ScoreTable::from_scores(std::move(scores), ds.train_labels, ScoreKind::synthetic,
                                 Orientation::higher_is_harder);
}

double evaluate_accuracy(const Classifier& classifier, const SelectionResult& subset,
                         const SyntheticDataset& ds, std::uint64_t seed, std::size_t threads) {
  if (const auto* knn = std::get_if<KnnClassifier>(&classifier)) {
    return knn_accuracy(subset, ds, knn->k, threads);
  }
  const auto& lr = std::get<LogRegClassifier>(classifier);
  return logreg_accuracy(subset, ds, lr.epochs, lr.learning_rate, seed);
}

SweepResult sweep(const SyntheticDataset& ds, const SweepConfig& config) {
  if (config.methods.empty() || config.alphas.empty() || config.seeds.empty()) {
    throw std::invalid_argument("sweep grid needs at least one method, alpha and seed");
  }
  const auto table = analytic_difficulty(ds);

  SweepResult result;
  for (Method method : config.methods) {
    for (double alpha : config.alphas) {
      std::vector<std::pair<double, std::size_t>> cells;
      if (method == Method::ccs) {
        for (double beta : config.betas) {
          if (beta > alpha + kRateSlack) continue;
          for (std::size_t k : config.ks) cells.emplace_back(beta, k);
        }
      } else if (method == Method::stratified) {
        for (std::size_t k : config.ks) cells.emplace_back(0.0, k);
      } else {
        cells.emplace_back(0.0, 0);
      }
      for (const auto& [beta, k] : cells) {
        for (std::uint64_t seed : config.seeds) {
          result.rows.push_back({method, alpha, beta, k, seed, 0.0, 0.0});
        }
      }
    }
  }

  parallel_for(result.rows.size(), config.threads, [&](std::size_t r) {
    auto& row = result.rows[r];
    const std::string where = "sweep row method=" + std::string(to_string(row.method)) +
                              " alpha=" + shortest(row.alpha) + " beta=" + shortest(row.beta) +
                              " k=" + std::to_string(row.k) + " seed=" + std::to_string(row.seed);
    with_coordinates(where, [&] {
      const std::uint64_t sel_seed = row_seed(row.seed, row.alpha, row.beta, row.k);
      const SelectorConfig sc{row.method, row.alpha, row.beta, row.k, sel_seed};
      const auto selection = run_selector(sc, table, &ds.train_points);
      row.accuracy = evaluate_accuracy(config.classifier, selection, ds, sel_seed, 1);
      row.auc_pr = auc_pr_direct(ds.train_points.select_rows(selection.selected), ds.test_points);
      return 0;
    });
  });
  return result;
}

std::string format_sweep_csv(const SweepResult& result) {
  std::string out = "method,alpha,beta,k,seed,accuracy,auc_pr\n";
  for (const auto& row : result.rows) {
    out += std::string(to_string(row.method)) + "," + shortest(row.alpha) + "," +
           shortest(row.beta) + "," + std::to_string(row.k) + "," + std::to_string(row.seed) +
           "," + shortest(row.accuracy) + "," + shortest(row.auc_pr) + "\n";
  }
  return out;
}

std::vector<double> default_beta_grid(double alpha) {
  std::vector<double> grid;
  const std::size_t steps = floor_count(10, alpha);
  for (std::size_t j = 0; j <= steps; ++j) grid.push_back(static_cast<double>(j) / 10.0);
  return grid;
}

BetaSearchResult beta_grid_search(const SyntheticDataset& ds, double alpha, std::size_t k,
                                  std::span<const double> beta_grid,
                                  std::span<const std::uint64_t> seeds,
                                  const Classifier& classifier, std::size_t threads) {
  if (beta_grid.empty()) throw std::invalid_argument("beta grid is empty");
  if (seeds.empty()) throw std::invalid_argument("beta grid search needs at least one seed");
  for (double beta : beta_grid) {
    CcsParams{alpha, beta, k, 0}.validate();
  }
  const auto table = analytic_difficulty(ds);
  BetaSearchResult result;
  for (double beta : beta_grid) {
    result.candidates.push_back({beta, 0.0, std::vector<double>(seeds.size())});
  }
  parallel_for(beta_grid.size() * seeds.size(), threads, [&](std::size_t cell) {
    auto& cand = result.candidates[cell / seeds.size()];
    const std::size_t s = cell % seeds.size();
    const std::uint64_t sel_seed = row_seed(seeds[s], alpha, cand.beta, k);
    const auto selection = ccs_select(table, CcsParams{alpha, cand.beta, k, sel_seed});
    cand.accuracies[s] = evaluate_accuracy(classifier, selection, ds, sel_seed, 1);
  });
  const BetaCandidate* best = nullptr;
  for (auto& cand : result.candidates) {
    cand.median_accuracy = median(cand.accuracies);
    if (best == nullptr || cand.median_accuracy > best->median_accuracy ||
        (cand.median_accuracy == best->median_accuracy && cand.beta < best->beta)) {
      best = &cand;
    }
  }
  result.best_beta = best->beta;
  return result;
}

std::string format_beta_search_csv(double alpha, std::size_t k, const BetaSearchResult& result) {
  std::string out = "alpha,k,beta,median_accuracy,best\n";
  for (const auto& cand : result.candidates) {
    out += shortest(alpha) + "," + std::to_string(k) + "," + shortest(cand.beta) + "," +
           shortest(cand.median_accuracy) + "," + (cand.beta == result.best_beta ? "1" : "0") +
           "\n";
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sequence");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  return values.size() % 2 == 1 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

}  // namespace coreset
