#include "coreset/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace coreset {

namespace {

template <typename T>
void require_unique_ids(std::span<const T> ids, const char* what) {
  std::unordered_set<T> seen;
  seen.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!seen.insert(ids[i]).second) {
      throw DataError(std::string(what) + ": duplicate id " + std::to_string(ids[i]) +
                      " at index " + std::to_string(i));
    }
  }
}

}  // namespace

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::forgetting: return "forgetting";
    case ScoreKind::aum: return "aum";
    case ScoreKind::el2n: return "el2n";
    case ScoreKind::entropy: return "entropy";
    case ScoreKind::synthetic: return "synthetic";
    case ScoreKind::custom: return "custom";
  }
  return "custom";
}

std::string_view to_string(Orientation orientation) {
  return orientation == Orientation::higher_is_harder ? "higher_is_harder"
                                                      : "lower_is_harder";
}

ScoreKind parse_score_kind(std::string_view text) {
  for (auto kind : {ScoreKind::forgetting, ScoreKind::aum, ScoreKind::el2n,
                    ScoreKind::entropy, ScoreKind::synthetic, ScoreKind::custom}) {
    if (to_string(kind) == text) return kind;
  }
  throw DataError("unknown score_kind '" + std::string(text) + "'");
}

Orientation parse_orientation(std::string_view text) {
  if (text == "higher_is_harder") return Orientation::higher_is_harder;
  if (text == "lower_is_harder") return Orientation::lower_is_harder;
  throw DataError("unknown orientation '" + std::string(text) + "'");
}

ScoreTable::ScoreTable(std::vector<std::uint64_t> ids, std::vector<std::uint32_t> labels,
                       std::vector<double> scores, ScoreKind kind, Orientation orientation)
    : ids_(std::move(ids)),
      labels_(std::move(labels)),
      scores_(std::move(scores)),
      kind_(kind),
      orientation_(orientation) {
  if (scores_.empty()) throw DataError("score table is empty");
  if (ids_.size() != scores_.size() || labels_.size() != scores_.size()) {
    throw DataError("score table columns differ in length: ids=" +
                    std::to_string(ids_.size()) + " labels=" + std::to_string(labels_.size()) +
                    " scores=" + std::to_string(scores_.size()));
  }
  require_unique_ids<std::uint64_t>(ids_, "score table");
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    if (!std::isfinite(scores_[i])) {
      throw DataError("non-finite score at index " + std::to_string(i));
    }
  }
}

ScoreTable ScoreTable::from_scores(std::vector<double> scores,
                                   std::vector<std::uint32_t> labels, ScoreKind kind,
                                   Orientation orientation) {
  std::vector<std::uint64_t> ids(scores.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  if (labels.empty()) labels.assign(scores.size(), 0);
  return ScoreTable(std::move(ids), std::move(labels), std::move(scores), kind, orientation);
}

std::uint32_t ScoreTable::num_classes() const {
  return *std::max_element(labels_.begin(), labels_.end()) + 1;
}

ScoreTable canonicalize_scores(const ScoreTable& table) {
  std::vector<double> scores(table.scores().begin(), table.scores().end());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw DataError("non-finite score at index " + std::to_string(i));
    }
  }
  if (table.orientation() == Orientation::lower_is_harder) {
    for (double& s : scores) s = -s;
  }
  return ScoreTable({table.ids().begin(), table.ids().end()},
                    {table.labels().begin(), table.labels().end()}, std::move(scores),
                    table.kind(), Orientation::higher_is_harder);
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> values,
                                 std::vector<std::uint64_t> ids)
    : rows_(rows), cols_(cols), values_(std::move(values)), ids_(std::move(ids)) {
  if (cols_ == 0) throw DataError("embedding dimension is 0");
  if (values_.size() != rows_ * cols_) {
    throw DataError("embedding payload has " + std::to_string(values_.size()) +
                    " values, expected " + std::to_string(rows_ * cols_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DataError("non-finite embedding value at row " + std::to_string(i / cols_) +
                      ", column " + std::to_string(i % cols_));
    }
  }
  if (!ids_.empty()) {
    if (ids_.size() != rows_) {
      throw DataError("embedding id block has " + std::to_string(ids_.size()) +
                      " ids for " + std::to_string(rows_) + " rows");
    }
    require_unique_ids<std::uint64_t>(ids_, "embedding matrix");
  }
}

EmbeddingMatrix EmbeddingMatrix::select_rows(std::span<const std::size_t> indices) const {
  std::vector<float> values;
  values.reserve(indices.size() * cols_);
  std::vector<std::uint64_t> ids;
  for (std::size_t idx : indices) {
    if (idx >= rows_) {
      throw DataError("row index " + std::to_string(idx) + " out of range for " +
                      std::to_string(rows_) + " rows");
    }
    auto r = row(idx);
    values.insert(values.end(), r.begin(), r.end());
    if (has_ids()) ids.push_back(ids_[idx]);
  }
  return EmbeddingMatrix(indices.size(), cols_, std::move(values), std::move(ids));
}

void check_alignment(const ScoreTable& table, const EmbeddingMatrix& embeddings) {
  if (table.size() != embeddings.rows()) {
    throw DataError("score table has " + std::to_string(table.size()) +
                    " rows but embeddings have " + std::to_string(embeddings.rows()));
  }
  if (!embeddings.has_ids()) return;
  auto ids = table.ids();
  auto emb_ids = embeddings.ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != emb_ids[i]) {
      throw DataError("id mismatch at row " + std::to_string(i) + ": scores carry " +
                      std::to_string(ids[i]) + ", embeddings carry " +
                      std::to_string(emb_ids[i]));
    }
  }
}

void SelectionResult::validate() const {
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (selected[i] >= source_n) {
      throw DataError("selected index " + std::to_string(selected[i]) +
                      " out of range for source_n " + std::to_string(source_n));
    }
    if (i > 0 && selected[i] == selected[i - 1]) {
      throw DataError("duplicate selected index " + std::to_string(selected[i]));
    }
    if (i > 0 && selected[i] < selected[i - 1]) {
      throw DataError("selected indices are not sorted at position " + std::to_string(i));
    }
  }
}

std::size_t floor_count(std::size_t n, double rate) {
  const double exact = static_cast<double>(n) * rate;
  const double nearest = std::round(exact);
  if (std::abs(exact - nearest) <= 1e-9 * std::max(1.0, std::abs(exact))) {
    return nearest <= 0.0 ? 0 : static_cast<std::size_t>(nearest);
  }
  const double floored = std::floor(exact);
  return floored <= 0.0 ? 0 : static_cast<std::size_t>(floored);
}

}  // namespace coreset
