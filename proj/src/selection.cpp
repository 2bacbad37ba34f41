#include "coreset/selection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "coreset/random.hpp"

namespace coreset {

__extension__ using u128 = unsigned __int128;

namespace {

constexpr double kRateSlack = 1e-12;

void require_canonical(const ScoreTable& table, const char* who) {
  if (!table.is_canonical()) {
    throw std::invalid_argument(std::string(who) +
                                ": score table must be canonical (higher_is_harder); "
                                "call canonicalize_scores first");
  }
}

void require_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must be in [0, 1), got " + std::to_string(alpha));
  }
}

std::size_t checked_budget(std::size_t n, double alpha) {
  require_alpha(alpha);
  const std::size_t m = coreset_budget(n, alpha);
  if (m == 0) {
    throw std::invalid_argument("coreset budget floor(n(1-alpha)) is 0 for n=" +
                                std::to_string(n) + ", alpha=" + std::to_string(alpha));
  }
  return m;
}

// Indices ordered hardest first: score descending, index ascending.
std::vector<std::size_t> hardness_order(const ScoreTable& table) {
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto scores = table.scores();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Indices ordered easiest first: score ascending, index ascending.
std::vector<std::size_t> easiness_order(const ScoreTable& table) {
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto scores = table.scores();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

SelectionResult make_result(std::vector<std::size_t> selected, std::string method,
                            const ScoreTable& table, ParamMap params) {
  std::sort(selected.begin(), selected.end());
  params["score_kind"] = std::string(to_string(table.kind()));
  SelectionResult result;
  result.selected = std::move(selected);
  result.method = std::move(method);
  result.params = std::move(params);
  result.source_n = table.size();
  return result;
}

}  // namespace

void CcsParams::validate() const {
  require_alpha(alpha);
  if (!(beta >= 0.0 && beta <= alpha + kRateSlack)) {
    throw std::invalid_argument("beta must be in [0, alpha] for a feasible budget, got beta=" +
                                std::to_string(beta) + ", alpha=" + std::to_string(alpha));
  }
  if (k == 0) throw std::invalid_argument("number of strata k must be >= 1");
}

std::vector<std::size_t> StrataPartition::sizes() const {
  std::vector<std::size_t> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.size());
  return out;
}

std::vector<std::size_t> prune_hardest(const ScoreTable& table, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("beta must be in [0, 1], got " + std::to_string(beta));
  }
  const std::size_t cut = floor_count(table.size(), beta);
  auto order = hardness_order(table);
  std::vector<std::size_t> survivors(order.begin() + static_cast<std::ptrdiff_t>(cut),
                                     order.end());
  std::sort(survivors.begin(), survivors.end());
  return survivors;
}

StrataPartition partition_strata(const ScoreTable& table,
                                 std::span<const std::size_t> survivors, std::size_t k) {
  if (survivors.empty()) throw std::invalid_argument("partition_strata: no survivors");
  if (k == 0) throw std::invalid_argument("partition_strata: k must be >= 1");
  auto scores = table.scores();
  double lo = scores[survivors.front()];
  double hi = lo;
  for (std::size_t i : survivors) {
    lo = std::min(lo, scores[i]);
    hi = std::max(hi, scores[i]);
  }
  StrataPartition part;
  part.width = (hi - lo) / static_cast<double>(k);
  part.edges.resize(k + 1);
  for (std::size_t j = 0; j < k; ++j) part.edges[j] = lo + static_cast<double>(j) * part.width;
  part.edges[k] = hi;
  part.members.assign(k, {});

  std::vector<std::size_t> sorted(survivors.begin(), survivors.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i : sorted) {
    std::size_t b = 0;
    if (part.width > 0.0) {
      const double raw = std::floor((scores[i] - lo) / part.width);
      b = raw <= 0.0 ? 0 : std::min(k - 1, static_cast<std::size_t>(raw));
      // Make membership agree with the stored edges under rounding.
      while (b > 0 && scores[i] < part.edges[b]) --b;
      while (b + 1 < k && scores[i] >= part.edges[b + 1]) ++b;
    }
    part.members[b].push_back(i);
  }
  return part;
}

BudgetPlan plan_stratum_budgets(std::span<const std::size_t> sizes, std::size_t budget) {
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Sizes never change inside the loop, so the argmin sequence is a stable sort.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sizes[a] < sizes[b]; });
  BudgetPlan plan;
  std::size_t remaining_strata = sizes.size();
  std::size_t m = budget;
  for (std::size_t j : order) {
    const std::size_t share = m / remaining_strata;
    const std::size_t mb = std::min(sizes[j], share);
    plan.steps.push_back({j, sizes[j], mb});
    m -= mb;
    --remaining_strata;
  }
  plan.unallocated = m;
  return plan;
}

CcsOutcome ccs_run(const ScoreTable& table, const CcsParams& params) {
  require_canonical(table, "ccs_select");
  params.validate();
  const std::size_t n = table.size();
  const std::size_t m = checked_budget(n, params.alpha);

  auto survivors = prune_hardest(table, params.beta);
  if (m > survivors.size()) {
    throw std::invalid_argument("infeasible budget: m=" + std::to_string(m) + " exceeds " +
                                std::to_string(survivors.size()) +
                                " survivors after the hard cutoff (beta=" +
                                std::to_string(params.beta) + ")");
  }

  CcsOutcome out;
  out.strata = partition_strata(table, survivors, params.k);
  const auto sizes = out.strata.sizes();
  out.plan = plan_stratum_budgets(sizes, m);

  const Rng root(params.seed);
  std::vector<std::size_t> selected;
  selected.reserve(m);
  for (const auto& step : out.plan.steps) {
    if (step.budget == 0) continue;
    Rng stream = root.child(step.stratum);
    auto picked = sample_without_replacement(out.strata.members[step.stratum], step.budget, stream);
    selected.insert(selected.end(), picked.begin(), picked.end());
  }

  std::vector<std::string> warnings;
  if (out.plan.unallocated > 0) {
    std::sort(selected.begin(), selected.end());
    std::vector<std::size_t> pool;
    std::set_difference(survivors.begin(), survivors.end(), selected.begin(), selected.end(),
                        std::back_inserter(pool));
    Rng stream = root.child(params.k);
    auto extra = sample_without_replacement(pool, out.plan.unallocated, stream);
    selected.insert(selected.end(), extra.begin(), extra.end());
    warnings.push_back("stratum budget loop left " + std::to_string(out.plan.unallocated) +
                       " unallocated; filled uniformly from remaining survivors");
  }

  out.result = make_result(std::move(selected), "ccs", table,
                           {{"alpha", params.alpha},
                            {"beta", params.beta},
                            {"k", static_cast<std::uint64_t>(params.k)},
                            {"seed", params.seed}});
  out.result.warnings = std::move(warnings);
  return out;
}

SelectionResult ccs_select(const ScoreTable& table, const CcsParams& params) {
  return ccs_run(table, params).result;
}

SelectionResult random_select(const ScoreTable& table, double alpha, std::uint64_t seed) {
  const std::size_t m = checked_budget(table.size(), alpha);
  std::vector<std::size_t> pool(table.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng stream = Rng(seed).child(0);
  auto picked = sample_without_replacement(pool, m, stream);
  return make_result(std::move(picked), "random", table, {{"alpha", alpha}, {"seed", seed}});
}

SelectionResult topk_hard_select(const ScoreTable& table, double alpha) {
  require_canonical(table, "topk_hard_select");
  const std::size_t m = checked_budget(table.size(), alpha);
  auto order = hardness_order(table);
  order.resize(m);
  return make_result(std::move(order), "topk-hard", table, {{"alpha", alpha}});
}

SelectionResult prune_hard_select(const ScoreTable& table, double alpha) {
  require_canonical(table, "prune_hard_select");
  const std::size_t m = checked_budget(table.size(), alpha);
  auto order = easiness_order(table);
  order.resize(m);
  return make_result(std::move(order), "prune-hard", table, {{"alpha", alpha}});
}

SelectionResult stratified_only_select(const ScoreTable& table, double alpha, std::size_t k,
                                       std::uint64_t seed) {
  auto result = ccs_select(table, CcsParams{alpha, 0.0, k, seed});
  result.method = "stratified";
  result.params.erase("beta");
  return result;
}

std::vector<double> importance_probabilities(const ScoreTable& table) {
  require_canonical(table, "importance_sampling_select");
  auto scores = table.scores();
  // Back to the raw lower-is-harder scale.
  double raw_max = -scores[0];
  for (double s : scores) raw_max = std::max(raw_max, -s);
  if (!(raw_max > 0.0)) {
    throw DataError("importance-sampling weights undefined for non-positive score maximum");
  }
  std::vector<double> log_w(scores.size());
  double top = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    log_w[i] = (raw_max - (-scores[i])) / raw_max;
    top = std::max(top, log_w[i]);
  }
  double total = 0.0;
  std::vector<double> p(scores.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_w[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

SelectionResult importance_sampling_select(const ScoreTable& table, double alpha,
                                           std::uint64_t seed) {
  const std::size_t m = checked_budget(table.size(), alpha);
  const auto p = importance_probabilities(table);
  Rng stream = Rng(seed).child(0);
  // Smallest E_i / p_i with E_i ~ Exp(1) reproduces sequential weighted draws
  // without replacement; compared as log(E_i) − log(p_i).
  std::vector<double> key(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = -std::log(stream.uniform_open_zero());
    key[i] = p[i] > 0.0 ? std::log(e) - std::log(p[i]) : INFINITY;
  }
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  order.resize(m);
  return make_result(std::move(order), "importance", table, {{"alpha", alpha}, {"seed", seed}});
}

std::vector<std::size_t> apportion(std::span<const std::size_t> weights, std::size_t total) {
  const std::size_t sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  std::vector<std::size_t> quota(weights.size(), 0);
  if (sum == 0) {
    if (total > 0) throw std::invalid_argument("apportion: all weights are zero");
    return quota;
  }
  std::vector<u128> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const auto scaled = static_cast<u128>(total) * weights[c];
    quota[c] = static_cast<std::size_t>(scaled / sum);
    remainder[c] = scaled % sum;
    assigned += quota[c];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; ++i) {
    const std::size_t c = order[i % order.size()];
    if (weights[c] == 0) continue;
    ++quota[c];
    ++assigned;
  }
  return quota;
}

SelectionResult moderate_select(const ScoreTable& table, const EmbeddingMatrix& embeddings,
                                double alpha) {
  check_alignment(table, embeddings);
  const std::size_t n = table.size();
  const std::size_t m = checked_budget(n, alpha);
  const std::size_t d = embeddings.cols();
  const std::uint32_t classes = table.num_classes();

  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < n; ++i) members[table.label(i)].push_back(i);

  std::vector<std::size_t> class_sizes(classes);
  for (std::uint32_t c = 0; c < classes; ++c) class_sizes[c] = members[c].size();
  const auto quota = apportion(class_sizes, m);

  std::vector<std::size_t> selected;
  selected.reserve(m);
  std::vector<double> centroid(d);
  for (std::uint32_t c = 0; c < classes; ++c) {
    const auto& rows = members[c];
    if (rows.empty() || quota[c] == 0) continue;
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i : rows) {
      auto r = embeddings.row(i);
      for (std::size_t j = 0; j < d; ++j) centroid[j] += r[j];
    }
    for (double& v : centroid) v /= static_cast<double>(rows.size());

    std::vector<double> dist(rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
      auto r = embeddings.row(rows[t]);
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = static_cast<double>(r[j]) - centroid[j];
        acc += diff * diff;
      }
      dist[t] = std::sqrt(acc);
    }
    std::vector<double> sorted = dist;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    const double median = sorted.size() % 2 == 1 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);

    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(dist[a] - median) < std::abs(dist[b] - median);
    });
    for (std::size_t t = 0; t < quota[c]; ++t) selected.push_back(rows[order[t]]);
  }
  return make_result(std::move(selected), "moderate", table, {{"alpha", alpha}});
}

namespace {
constexpr std::array<Method, 7> kMethods = {Method::ccs,        Method::random,
                                            Method::topk_hard,  Method::prune_hard,
                                            Method::stratified, Method::importance,
                                            Method::moderate};
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::ccs: return "ccs";
    case Method::random: return "random";
    case Method::topk_hard: return "topk-hard";
    case Method::prune_hard: return "prune-hard";
    case Method::stratified: return "stratified";
    case Method::importance: return "importance";
    case Method::moderate: return "moderate";
  }
  return "ccs";
}

std::optional<Method> parse_method(std::string_view text) {
  for (Method m : kMethods) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

std::span<const Method> all_methods() { return kMethods; }

SelectionResult run_selector(const SelectorConfig& config, const ScoreTable& table,
                             const EmbeddingMatrix* embeddings) {
  switch (config.method) {
    case Method::ccs:
      return ccs_select(table, CcsParams{config.alpha, config.beta, config.k, config.seed});
    case Method::random: return random_select(table, config.alpha, config.seed);
    case Method::topk_hard: return topk_hard_select(table, config.alpha);
    case Method::prune_hard: return prune_hard_select(table, config.alpha);
    case Method::stratified:
      return stratified_only_select(table, config.alpha, config.k, config.seed);
    case Method::importance: return importance_sampling_select(table, config.alpha, config.seed);
    case Method::moderate:
      if (embeddings == nullptr) {
        throw std::invalid_argument("moderate selector requires embeddings");
      }
      return moderate_select(table, *embeddings, config.alpha);
  }
  throw std::invalid_argument("unknown selection method");
}

}  // namespace coreset
