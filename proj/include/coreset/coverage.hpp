#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "coreset/data_model.hpp"

namespace coreset {

// For each evaluation row, the exact L2 distance to its nearest coreset row.
// Squared differences accumulate in double; one sqrt per evaluation row.
std::vector<double> min_distances(const EmbeddingMatrix& coreset_points,
                                  const EmbeddingMatrix& eval_points, std::size_t threads = 1);

// Drop `exclude` (evaluation row positions), sort the rest ascending:
// radii[i] is the i-th smallest distance and coverage[i] = (i + 1) / n_eval.
PRCurve pr_curve_from_distances(std::span<const double> distances,
                                std::span<const std::size_t> exclude = {});
PRCurve pr_curve(const EmbeddingMatrix& coreset_points, const EmbeddingMatrix& eval_points,
                 std::span<const std::size_t> exclude = {}, std::size_t threads = 1);

// Area under the empirical step curve: the equal-weight mean of the radii.
double auc_pr(const PRCurve& curve);
// Mean nearest-coreset distance over the kept evaluation rows, computed
// without sorting or building a curve. Agrees with auc_pr(pr_curve(...)).
double auc_pr_direct(const EmbeddingMatrix& coreset_points, const EmbeddingMatrix& eval_points,
                     std::span<const std::size_t> exclude = {}, std::size_t threads = 1);

// Smallest radius whose coverage reaches p, for 0 < p <= 1.
double partial_cover_radius(const PRCurve& curve, double p);

struct CoverageReport {
  double auc_pr = 0.0;
  PRCurve curve;
  std::size_t n_eval = 0;
  std::size_t n_excluded = 0;
  std::string metric = "l2";
};

CoverageReport coverage_report(const EmbeddingMatrix& coreset_points,
                               const EmbeddingMatrix& eval_points,
                               std::span<const std::size_t> exclude = {},
                               std::size_t threads = 1);

struct CoverageRow {
  std::string method;
  double alpha = 0.0;
  std::size_t coreset_size = 0;
  double auc_pr = 0.0;
};

// One row per selection: restrict train rows to the selection and measure
// AUC_pr against the evaluation rows.
std::vector<CoverageRow> compare_coverage(std::span<const SelectionResult> selections,
                                          const EmbeddingMatrix& train_embeddings,
                                          const EmbeddingMatrix& eval_embeddings,
                                          std::span<const std::size_t> exclude = {},
                                          std::size_t threads = 1);

std::string format_coverage_table_csv(std::span<const CoverageRow> rows);
std::string format_curve_csv(const PRCurve& curve);
std::string format_report_json(const CoverageReport& report);

// Map ids from an exclusion list to evaluation row positions: through the
// matrix ids when present, otherwise ids are row positions.
std::vector<std::size_t> resolve_exclusions(const EmbeddingMatrix& eval_points,
                                            std::span<const std::uint64_t> ids);

}  // namespace coreset
