#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coreset/data_model.hpp"

namespace coreset {

// Inputs of coverage-centric coreset selection.
//   alpha: pruning rate in [0, 1); the coreset keeps ⌊n(1 − alpha)⌋ examples.
//   beta:  hard cutoff rate; the ⌊n·beta⌋ hardest examples are dropped first.
//          Feasibility requires n − ⌊n·beta⌋ ≥ ⌊n(1 − alpha)⌋, i.e. beta ≤ alpha.
//   k:     number of equal-width score strata, ≥ 1.
struct CcsParams {
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t k = 50;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument.
  void validate() const;
};

// k equal-width score intervals over [s_min, s_max] of the survivors.
// Interval j is [edges[j], edges[j+1]); the last one is closed on the right.
struct StrataPartition {
  std::vector<double> edges;                      // k + 1 entries
  double width = 0.0;                             // (s_max − s_min) / k
  std::vector<std::vector<std::size_t>> members;  // ascending indices per stratum

  [[nodiscard]] std::size_t k() const { return members.size(); }
  [[nodiscard]] std::vector<std::size_t> sizes() const;
};

// One step of the smallest-stratum-first budget loop.
struct StratumAllocation {
  std::size_t stratum = 0;
  std::size_t size = 0;
  std::size_t budget = 0;
};

struct BudgetPlan {
  std::vector<StratumAllocation> steps;  // processing order
  std::size_t unallocated = 0;           // budget left after the loop
};

// Survivors (ascending) after dropping the ⌊n·beta⌋ highest scores; ties at
// the cutoff remove the lower index first.
std::vector<std::size_t> prune_hardest(const ScoreTable& table, double beta);

// Throws std::invalid_argument for an empty survivor set or k = 0.
StrataPartition partition_strata(const ScoreTable& table,
                                 std::span<const std::size_t> survivors, std::size_t k);

// Budget loop over stratum sizes: repeatedly take the smallest remaining
// stratum (ties: lowest index) and give it min(|B|, ⌊m / #remaining⌋).
BudgetPlan plan_stratum_budgets(std::span<const std::size_t> sizes, std::size_t budget);

struct CcsOutcome {
  SelectionResult result;
  StrataPartition strata;
  BudgetPlan plan;
};

// Full trace of one CCS run. Stratum j samples from Rng(seed).child(j); a
// top-up (only if the loop leaves budget behind) uses Rng(seed).child(k).
CcsOutcome ccs_run(const ScoreTable& table, const CcsParams& params);
SelectionResult ccs_select(const ScoreTable& table, const CcsParams& params);

// Uniform sample of ⌊n(1 − alpha)⌋ indices from Rng(seed).child(0). With
// k = 1 and beta = 0, ccs_select draws the identical sample.
SelectionResult random_select(const ScoreTable& table, double alpha, std::uint64_t seed);

// The m hardest examples (highest canonical score), ties to the lower index.
SelectionResult topk_hard_select(const ScoreTable& table, double alpha);

// The m easiest examples (lowest canonical score), ties to the lower index.
SelectionResult prune_hard_select(const ScoreTable& table, double alpha);

// ccs_select with beta = 0.
SelectionResult stratified_only_select(const ScoreTable& table, double alpha, std::size_t k,
                                       std::uint64_t seed);

// Softmax sampling probabilities over the raw lower-is-harder scale
// s' = −s: p_i ∝ exp((s'_max − s'_i) / s'_max). Throws DataError when s'_max ≤ 0.
std::vector<double> importance_probabilities(const ScoreTable& table);

// m draws without replacement, each proportional to p_i among the examples
// not yet drawn (Efraimidis-Spirakis exponential keys, Rng(seed).child(0)).
SelectionResult importance_sampling_select(const ScoreTable& table, double alpha,
                                           std::uint64_t seed);

// Per class: distance of every row to its class centroid; keep the rows whose
// distance is closest to the class median. Class quotas are proportional to
// class size (largest remainder, ties to the lower class).
SelectionResult moderate_select(const ScoreTable& table, const EmbeddingMatrix& embeddings,
                                double alpha);

// Largest-remainder split of `total` proportionally to `weights` (integers).
std::vector<std::size_t> apportion(std::span<const std::size_t> weights, std::size_t total);

enum class Method { ccs, random, topk_hard, prune_hard, stratified, importance, moderate };

std::string_view to_string(Method method);
// Accepts the CLI spellings: ccs, random, topk-hard, prune-hard, stratified,
// importance, moderate.
std::optional<Method> parse_method(std::string_view text);
std::span<const Method> all_methods();

struct SelectorConfig {
  Method method = Method::ccs;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t k = 50;
  std::uint64_t seed = 0;
};

// Dispatches to the selector; `embeddings` is required for moderate only.
SelectionResult run_selector(const SelectorConfig& config, const ScoreTable& table,
                             const EmbeddingMatrix* embeddings = nullptr);

}  // namespace coreset
