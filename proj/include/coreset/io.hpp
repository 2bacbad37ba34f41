#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "coreset/data_model.hpp"

namespace coreset {

inline constexpr std::string_view kToolkitVersion = "0.1.0";
inline constexpr std::uint8_t kEmbeddingFormatVersion = 0x01;
inline constexpr int kManifestFormatVersion = 1;

enum class ScoreFormat { csv, jsonl };

// Picks jsonl for *.jsonl / *.ndjson, csv otherwise.
ScoreFormat score_format_for(const std::filesystem::path& path);

// CSV: `# score_kind=...` / `# orientation=...` comment lines, then a header
// naming at least id,label,score. JSONL: one {"id","label","score"} object per
// line; a line without "id" carries score_kind/orientation metadata.
// Errors carry the 1-based line number.
ScoreTable load_scores(const std::filesystem::path& path, ScoreFormat format);
ScoreTable load_scores(const std::filesystem::path& path);
void save_scores(const ScoreTable& table, const std::filesystem::path& path,
                 ScoreFormat format);

ScoreTable parse_scores_csv(std::string_view text);
ScoreTable parse_scores_jsonl(std::string_view text);
std::string format_scores_csv(const ScoreTable& table);
std::string format_scores_jsonl(const ScoreTable& table);

// Binary layout (all little-endian):
//   "CSEM" | u8 version | u64 n | u64 d | n*d f32 row-major | [u8 0x01 | n u64 ids]
// CSV fallback: one row of comma-separated floats per line.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix decode_embeddings(std::string_view bytes);
std::string encode_embeddings(const EmbeddingMatrix& matrix);
EmbeddingMatrix parse_embeddings_csv(std::string_view text);

// JSON manifest {"method","params","source_n","selected","created_at"}.
std::string format_selection(const SelectionResult& result);
SelectionResult parse_selection(std::string_view text);
void save_selection(const SelectionResult& result, const std::filesystem::path& path);
SelectionResult load_selection(const std::filesystem::path& path);

// Newline-separated unsigned ids; blank lines and `#` comments are skipped.
std::vector<std::uint64_t> load_id_list(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// 17 significant digits; parses back to the identical double.
std::string format_double(double value);

}  // namespace coreset
