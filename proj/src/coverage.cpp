#include "coreset/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "coreset/io.hpp"
#include "coreset/parallel.hpp"

namespace coreset {

namespace {

// Neumaier summation; both AUC routes use it so they differ only in order.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

void check_pair(const EmbeddingMatrix& coreset_points, const EmbeddingMatrix& eval_points) {
  if (coreset_points.empty()) throw DataError("coreset point set is empty");
  if (eval_points.empty()) throw DataError("evaluation point set is empty");
  if (coreset_points.cols() != eval_points.cols()) {
    throw DataError("dimension mismatch: coreset d=" + std::to_string(coreset_points.cols()) +
                    ", evaluation d=" + std::to_string(eval_points.cols()));
  }
}

std::vector<char> exclusion_mask(std::size_t n, std::span<const std::size_t> exclude) {
  std::vector<char> mask(n, 0);
  for (std::size_t i : exclude) {
    if (i >= n) {
      throw DataError("excluded evaluation index " + std::to_string(i) + " out of range for " +
                      std::to_string(n) + " rows");
    }
    mask[i] = 1;
  }
  return mask;
}

}  // namespace

std::vector<double> min_distances(const EmbeddingMatrix& coreset_points,
                                  const EmbeddingMatrix& eval_points, std::size_t threads) {
  check_pair(coreset_points, eval_points);
  const std::size_t d = eval_points.cols();
  const std::size_t nc = coreset_points.rows();
  std::vector<double> out(eval_points.rows());
  parallel_for(eval_points.rows(), threads, [&](std::size_t e) {
    const float* x = eval_points.row(e).data();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < nc; ++c) {
      const float* y = coreset_points.row(c).data();
      double acc = 0.0;
      for (std::size_t j = 0; j < d && acc < best; ++j) {
        const double diff = static_cast<double>(x[j]) - static_cast<double>(y[j]);
        acc += diff * diff;
      }
      best = std::min(best, acc);
    }
    out[e] = std::sqrt(best);
  });
  return out;
}

PRCurve pr_curve_from_distances(std::span<const double> distances,
                                std::span<const std::size_t> exclude) {
  const auto mask = exclusion_mask(distances.size(), exclude);
  PRCurve curve;
  curve.radii.reserve(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (!mask[i]) curve.radii.push_back(distances[i]);
  }
  curve.excluded_count = distances.size() - curve.radii.size();
  if (curve.radii.empty()) {
    throw DataError("exclusion list removes every evaluation point");
  }
  std::sort(curve.radii.begin(), curve.radii.end());
  const double n_eval = static_cast<double>(curve.radii.size());
  curve.coverage.resize(curve.radii.size());
  for (std::size_t i = 0; i < curve.coverage.size(); ++i) {
    curve.coverage[i] = static_cast<double>(i + 1) / n_eval;
  }
  return curve;
}

PRCurve pr_curve(const EmbeddingMatrix& coreset_points, const EmbeddingMatrix& eval_points,
                 std::span<const std::size_t> exclude, std::size_t threads) {
  const auto dist = min_distances(coreset_points, eval_points, threads);
  return pr_curve_from_distances(dist, exclude);
}

double auc_pr(const PRCurve& curve) {
  if (curve.radii.empty()) throw DataError("auc_pr of an empty curve");
  // Step p_i - p_{i-1} = 1/n_eval for every radius.
  CompensatedSum sum;
  for (double r : curve.radii) sum.add(r);
  return sum.value() / static_cast<double>(curve.radii.size());
}

double auc_pr_direct(const EmbeddingMatrix& coreset_points, const EmbeddingMatrix& eval_points,
                     std::span<const std::size_t> exclude, std::size_t threads) {
  const auto dist = min_distances(coreset_points, eval_points, threads);
  const auto mask = exclusion_mask(dist.size(), exclude);
  CompensatedSum sum;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (mask[i]) continue;
    sum.add(dist[i]);
    ++kept;
  }
  if (kept == 0) throw DataError("exclusion list removes every evaluation point");
  return sum.value() / static_cast<double>(kept);
}

double partial_cover_radius(const PRCurve& curve, double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument("target coverage p must be in (0, 1], got " + std::to_string(p));
  }
  if (curve.radii.empty()) throw DataError("partial_cover_radius of an empty curve");
  auto it = std::lower_bound(curve.coverage.begin(), curve.coverage.end(), p);
  if (it == curve.coverage.end()) return curve.radii.back();
  return curve.radii[static_cast<std::size_t>(it - curve.coverage.begin())];
}

CoverageReport coverage_report(const EmbeddingMatrix& coreset_points,
                               const EmbeddingMatrix& eval_points,
                               std::span<const std::size_t> exclude, std::size_t threads) {
  CoverageReport report;
  report.curve = pr_curve(coreset_points, eval_points, exclude, threads);
  report.auc_pr = auc_pr(report.curve);
  report.n_eval = report.curve.size();
  report.n_excluded = report.curve.excluded_count;
  return report;
}

std::vector<CoverageRow> compare_coverage(std::span<const SelectionResult> selections,
                                          const EmbeddingMatrix& train_embeddings,
                                          const EmbeddingMatrix& eval_embeddings,
                                          std::span<const std::size_t> exclude,
                                          std::size_t threads) {
  std::vector<CoverageRow> rows;
  rows.reserve(selections.size());
  for (const auto& sel : selections) {
    if (sel.source_n != train_embeddings.rows()) {
      throw DataError("selection '" + sel.method + "' references source_n=" +
                      std::to_string(sel.source_n) + " but train embeddings have " +
                      std::to_string(train_embeddings.rows()) + " rows");
    }
    sel.validate();
    CoverageRow row;
    row.method = sel.method;
    if (auto it = sel.params.find("alpha"); it != sel.params.end()) {
      if (const double* a = std::get_if<double>(&it->second)) row.alpha = *a;
    }
    row.coreset_size = sel.size();
    row.auc_pr = auc_pr_direct(train_embeddings.select_rows(sel.selected), eval_embeddings,
                               exclude, threads);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_coverage_table_csv(std::span<const CoverageRow> rows) {
  std::string out = "method,alpha,coreset_size,auc_pr\n";
  for (const auto& r : rows) {
    out += r.method + "," + format_double(r.alpha) + "," + std::to_string(r.coreset_size) + "," +
           format_double(r.auc_pr) + "\n";
  }
  return out;
}

std::string format_curve_csv(const PRCurve& curve) {
  std::string out = "p,r\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out += format_double(curve.coverage[i]) + "," + format_double(curve.radii[i]) + "\n";
  }
  return out;
}

std::string format_report_json(const CoverageReport& report) {
  nlohmann::json doc;
  doc["auc_pr"] = report.auc_pr;
  doc["n_eval"] = report.n_eval;
  doc["n_excluded"] = report.n_excluded;
  doc["metric"] = report.metric;
  doc["curve"] = {{"p", report.curve.coverage}, {"r", report.curve.radii}};
  return doc.dump(2) + "\n";
}

std::vector<std::size_t> resolve_exclusions(const EmbeddingMatrix& eval_points,
                                            std::span<const std::uint64_t> ids) {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  if (!eval_points.has_ids()) {
    for (auto id : ids) {
      if (id >= eval_points.rows()) {
        throw DataError("excluded id " + std::to_string(id) + " out of range for " +
                        std::to_string(eval_points.rows()) + " evaluation rows");
      }
      rows.push_back(static_cast<std::size_t>(id));
    }
    return rows;
  }
  std::unordered_map<std::uint64_t, std::size_t> position;
  for (std::size_t i = 0; i < eval_points.rows(); ++i) position[eval_points.ids()[i]] = i;
  for (auto id : ids) {
    auto it = position.find(id);
    if (it == position.end()) {
      throw DataError("excluded id " + std::to_string(id) + " not present in evaluation ids");
    }
    rows.push_back(it->second);
  }
  return rows;
}

}  // namespace coreset
