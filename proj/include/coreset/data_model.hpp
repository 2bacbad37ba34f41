#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace coreset {

// Raised for malformed or inconsistent input data (files, tables, matrices).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ScoreKind { forgetting, aum, el2n, entropy, synthetic, custom };
enum class Orientation { higher_is_harder, lower_is_harder };

std::string_view to_string(ScoreKind kind);
std::string_view to_string(Orientation orientation);
ScoreKind parse_score_kind(std::string_view text);
Orientation parse_orientation(std::string_view text);

// Per-example difficulty scores. Positions 0..n-1 are the example identity
// used by every selector; `ids` are carried along as metadata.
class ScoreTable {
 public:
  ScoreTable(std::vector<std::uint64_t> ids, std::vector<std::uint32_t> labels,
             std::vector<double> scores, ScoreKind kind = ScoreKind::custom,
             Orientation orientation = Orientation::higher_is_harder);

  // ids default to 0..n-1.
  static ScoreTable from_scores(std::vector<double> scores,
                                std::vector<std::uint32_t> labels = {},
                                ScoreKind kind = ScoreKind::custom,
                                Orientation orientation = Orientation::higher_is_harder);

  [[nodiscard]] std::size_t size() const { return scores_.size(); }
  [[nodiscard]] std::span<const std::uint64_t> ids() const { return ids_; }
  [[nodiscard]] std::span<const std::uint32_t> labels() const { return labels_; }
  [[nodiscard]] std::span<const double> scores() const { return scores_; }
  [[nodiscard]] double score(std::size_t i) const { return scores_[i]; }
  [[nodiscard]] std::uint32_t label(std::size_t i) const { return labels_[i]; }
  [[nodiscard]] ScoreKind kind() const { return kind_; }
  [[nodiscard]] Orientation orientation() const { return orientation_; }
  [[nodiscard]] bool is_canonical() const {
    return orientation_ == Orientation::higher_is_harder;
  }
  // One past the largest label.
  [[nodiscard]] std::uint32_t num_classes() const;

  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;

 private:
  std::vector<std::uint64_t> ids_;
  std::vector<std::uint32_t> labels_;
  std::vector<double> scores_;
  ScoreKind kind_;
  Orientation orientation_;
};

// Flip to higher_is_harder. Throws DataError naming the first non-finite index.
ScoreTable canonicalize_scores(const ScoreTable& table);

// Row-major n x d float32 matrix.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> values,
                  std::vector<std::uint64_t> ids = {});

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] bool empty() const { return rows_ == 0; }
  [[nodiscard]] std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  [[nodiscard]] std::span<const float> values() const { return values_; }
  [[nodiscard]] bool has_ids() const { return !ids_.empty(); }
  [[nodiscard]] std::span<const std::uint64_t> ids() const { return ids_; }

  // Rows at `indices`, in the given order; ids follow when present.
  [[nodiscard]] EmbeddingMatrix select_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
  std::vector<std::uint64_t> ids_;
};

// Throws DataError when the score table and embedding rows disagree in size or ids.
void check_alignment(const ScoreTable& table, const EmbeddingMatrix& embeddings);

using ParamValue = std::variant<double, std::uint64_t, std::string>;
using ParamMap = std::map<std::string, ParamValue>;

struct SelectionResult {
  std::vector<std::size_t> selected;  // sorted, unique
  std::string method;
  ParamMap params;
  std::size_t source_n = 0;
  std::string created_at;             // ISO-8601 UTC, stamped by the caller
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t size() const { return selected.size(); }
  // Throws DataError on unsorted, duplicate, or out-of-range indices.
  void validate() const;

  friend bool operator==(const SelectionResult&, const SelectionResult&) = default;
};

// Empirical p-r curve: radii ascending, coverage[i] = (i + 1) / n_eval.
struct PRCurve {
  std::vector<double> radii;
  std::vector<double> coverage;
  std::size_t excluded_count = 0;

  [[nodiscard]] std::size_t size() const { return radii.size(); }
};

// ⌊n·rate⌋, snapping to the nearest integer when the product is within
// floating noise of it (0.7 * 100 evaluates to 69.99999999999999).
std::size_t floor_count(std::size_t n, double rate);

// Coreset budget m = ⌊n(1 − α)⌋.
inline std::size_t coreset_budget(std::size_t n, double alpha) {
  return floor_count(n, 1.0 - alpha);
}

}  // namespace coreset
