#include "coreset/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace coreset {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "CSEM";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
std::optional<T> parse_number(std::string_view text) {
  T value{};
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    return std::nullopt;
  }
  return value;
}

[[noreturn]] void line_error(std::size_t line, const std::string& message) {
  throw DataError("line " + std::to_string(line) + ": " + message);
}

struct ScoreColumns {
  std::vector<std::uint64_t> ids;
  std::vector<std::uint32_t> labels;
  std::vector<double> scores;
  std::vector<std::size_t> lines;  // source line of each row
  ScoreKind kind = ScoreKind::custom;
  Orientation orientation = Orientation::higher_is_harder;

  ScoreTable build() {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!std::isfinite(scores[i])) line_error(lines[i], "non-finite score");
    }
    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (ids[order[i]] == ids[order[i - 1]]) {
        line_error(lines[order[i]], "duplicate id " + std::to_string(ids[order[i]]));
      }
    }
    if (scores.empty()) throw DataError("score file contains no rows");
    return ScoreTable(std::move(ids), std::move(labels), std::move(scores), kind, orientation);
  }
};

std::uint32_t checked_label(std::int64_t value, std::size_t line) {
  if (value < 0 || value > static_cast<std::int64_t>(UINT32_MAX)) {
    line_error(line, "label " + std::to_string(value) + " is not a class index");
  }
  return static_cast<std::uint32_t>(value);
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::string_view bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

void put_f32(std::string& out, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float get_f32(std::string_view bytes, std::size_t offset) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) {
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return std::bit_cast<float>(bits);
}

json param_to_json(const ParamValue& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

ParamValue param_from_json(const json& value, const std::string& key) {
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer()) {
    auto v = value.get<std::int64_t>();
    if (v < 0) return static_cast<double>(v);
    return static_cast<std::uint64_t>(v);
  }
  if (value.is_number_float()) return value.get<double>();
  if (value.is_string()) return value.get<std::string>();
  throw DataError("manifest param '" + key + "' has unsupported type");
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

ScoreFormat score_format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return (ext == ".jsonl" || ext == ".ndjson") ? ScoreFormat::jsonl : ScoreFormat::csv;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw DataError("read failure on " + path.string());
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto dir = path.parent_path();
  if (dir.empty()) dir = ".";
  std::random_device rd;
  auto tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot create " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw DataError("write failure on " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot move output into place at " + path.string());
  }
}

ScoreTable parse_scores_csv(std::string_view text) {
  ScoreColumns cols;
  std::optional<std::size_t> id_col, label_col, score_col;
  std::size_t width = 0;
  bool have_header = false;
  auto lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    auto line = trim(lines[ln]);
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto body = trim(line.substr(1));
      auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      auto key = trim(body.substr(0, eq));
      auto value = trim(body.substr(eq + 1));
      try {
        if (key == "score_kind") cols.kind = parse_score_kind(value);
        if (key == "orientation") cols.orientation = parse_orientation(value);
      } catch (const DataError& e) {
        line_error(line_no, e.what());
      }
      continue;
    }
    auto fields = split_fields(line);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "id") id_col = i;
        if (fields[i] == "label") label_col = i;
        if (fields[i] == "score") score_col = i;
      }
      if (!id_col) line_error(line_no, "missing column 'id'");
      if (!label_col) line_error(line_no, "missing column 'label'");
      if (!score_col) line_error(line_no, "missing column 'score'");
      width = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != width) {
      line_error(line_no, "expected " + std::to_string(width) + " fields, found " +
                              std::to_string(fields.size()));
    }
    auto id = parse_number<std::uint64_t>(fields[*id_col]);
    auto label = parse_number<std::int64_t>(fields[*label_col]);
    auto score = parse_number<double>(fields[*score_col]);
    if (!id) line_error(line_no, "unparseable id '" + std::string(fields[*id_col]) + "'");
    if (!label) line_error(line_no, "unparseable label '" + std::string(fields[*label_col]) + "'");
    if (!score) line_error(line_no, "unparseable score '" + std::string(fields[*score_col]) + "'");
    cols.ids.push_back(*id);
    cols.labels.push_back(checked_label(*label, line_no));
    cols.scores.push_back(*score);
    cols.lines.push_back(line_no);
  }
  if (!have_header) throw DataError("score CSV has no header line");
  return cols.build();
}

ScoreTable parse_scores_jsonl(std::string_view text) {
  ScoreColumns cols;
  auto lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    auto line = trim(lines[ln]);
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      line_error(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) line_error(line_no, "expected a JSON object");
    try {
      if (record.contains("score_kind")) {
        cols.kind = parse_score_kind(record.at("score_kind").get<std::string>());
      }
      if (record.contains("orientation")) {
        cols.orientation = parse_orientation(record.at("orientation").get<std::string>());
      }
      if (!record.contains("id")) {
        if (record.contains("label") || record.contains("score")) {
          line_error(line_no, "missing key 'id'");
        }
        continue;
      }
      for (const char* key : {"label", "score"}) {
        if (!record.contains(key)) line_error(line_no, std::string("missing key '") + key + "'");
      }
      const auto& id = record.at("id");
      const auto& label = record.at("label");
      const auto& score = record.at("score");
      if (!id.is_number_unsigned()) line_error(line_no, "id must be an unsigned integer");
      if (!label.is_number_integer()) line_error(line_no, "label must be an integer");
      if (!score.is_number()) line_error(line_no, "score must be a number");
      cols.ids.push_back(id.get<std::uint64_t>());
      cols.labels.push_back(checked_label(label.get<std::int64_t>(), line_no));
      cols.scores.push_back(score.get<double>());
      cols.lines.push_back(line_no);
    } catch (const json::exception& e) {
      line_error(line_no, e.what());
    } catch (const DataError& e) {
      if (std::string_view(e.what()).starts_with("line ")) throw;
      line_error(line_no, e.what());
    }
  }
  return cols.build();
}

std::string format_scores_csv(const ScoreTable& table) {
  std::string out;
  out += "# score_kind=" + std::string(to_string(table.kind())) + "\n";
  out += "# orientation=" + std::string(to_string(table.orientation())) + "\n";
  out += "id,label,score\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += std::to_string(table.ids()[i]) + "," + std::to_string(table.label(i)) + "," +
           format_double(table.score(i)) + "\n";
  }
  return out;
}

std::string format_scores_jsonl(const ScoreTable& table) {
  std::string out = "{\"score_kind\":\"" + std::string(to_string(table.kind())) +
                    "\",\"orientation\":\"" + std::string(to_string(table.orientation())) +
                    "\"}\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += "{\"id\":" + std::to_string(table.ids()[i]) +
           ",\"label\":" + std::to_string(table.label(i)) +
           ",\"score\":" + format_double(table.score(i)) + "}\n";
  }
  return out;
}

ScoreTable load_scores(const std::filesystem::path& path, ScoreFormat format) {
  const auto text = read_file(path);
  try {
    return format == ScoreFormat::csv ? parse_scores_csv(text) : parse_scores_jsonl(text);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

ScoreTable load_scores(const std::filesystem::path& path) {
  return load_scores(path, score_format_for(path));
}

void save_scores(const ScoreTable& table, const std::filesystem::path& path,
                 ScoreFormat format) {
  write_file_atomic(path, format == ScoreFormat::csv ? format_scores_csv(table)
                                                     : format_scores_jsonl(table));
}

std::string encode_embeddings(const EmbeddingMatrix& matrix) {
  std::string out;
  out.reserve(kMagic.size() + 17 + matrix.values().size() * 4 +
              (matrix.has_ids() ? 1 + matrix.rows() * 8 : 0));
  out += kMagic;
  out.push_back(static_cast<char>(kEmbeddingFormatVersion));
  put_u64(out, matrix.rows());
  put_u64(out, matrix.cols());
  for (float v : matrix.values()) put_f32(out, v);
  if (matrix.has_ids()) {
    out.push_back(0x01);
    for (auto id : matrix.ids()) put_u64(out, id);
  }
  return out;
}

EmbeddingMatrix decode_embeddings(std::string_view bytes) {
  constexpr std::size_t header = 4 + 1 + 8 + 8;
  if (bytes.size() < 4 || bytes.substr(0, 4) != kMagic) {
    throw DataError("embedding file: magic mismatch (expected CSEM)");
  }
  if (bytes.size() < header) throw DataError("embedding file: truncated header");
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kEmbeddingFormatVersion) {
    throw DataError("embedding file: unsupported version " + std::to_string(version));
  }
  const std::uint64_t n = get_u64(bytes, 5);
  const std::uint64_t d = get_u64(bytes, 13);
  if (d == 0) throw DataError("embedding file: dimension 0");
  const std::size_t remaining = bytes.size() - header;
  if (n > remaining / 4 / d) {
    throw DataError("embedding file: truncated payload, expected " + std::to_string(n * d * 4) +
                    " bytes of floats, found " + std::to_string(remaining));
  }
  const std::size_t count = n * d;
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = get_f32(bytes, header + 4 * i);
  std::size_t pos = header + 4 * count;
  std::vector<std::uint64_t> ids;
  if (pos < bytes.size()) {
    if (static_cast<std::uint8_t>(bytes[pos]) != 0x01) {
      throw DataError("embedding file: unknown trailing block flag");
    }
    ++pos;
    if ((bytes.size() - pos) != n * 8) {
      throw DataError("embedding file: id block holds " + std::to_string(bytes.size() - pos) +
                      " bytes, expected " + std::to_string(n * 8));
    }
    ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = get_u64(bytes, pos + 8 * i);
  }
  return EmbeddingMatrix(n, d, std::move(values), std::move(ids));
}

EmbeddingMatrix parse_embeddings_csv(std::string_view text) {
  std::vector<float> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  auto lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    auto line = trim(lines[ln]);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_fields(line);
    if (rows == 0) cols = fields.size();
    if (fields.size() != cols) {
      line_error(ln + 1, "expected " + std::to_string(cols) + " values, found " +
                             std::to_string(fields.size()));
    }
    for (auto field : fields) {
      auto v = parse_number<float>(field);
      if (!v) line_error(ln + 1, "unparseable value '" + std::string(field) + "'");
      values.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError("embedding CSV contains no rows");
  return EmbeddingMatrix(rows, cols, std::move(values));
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    if (bytes.size() >= 4 && std::string_view(bytes).substr(0, 4) == kMagic) {
      return decode_embeddings(bytes);
    }
    auto ext = path.extension().string();
    if (ext == ".csv" || ext == ".txt") return parse_embeddings_csv(bytes);
    return decode_embeddings(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  write_file_atomic(path, encode_embeddings(matrix));
}

std::string format_selection(const SelectionResult& result) {
  json params = json::object();
  for (const auto& [key, value] : result.params) params[key] = param_to_json(value);
  json doc = json::object();
  doc["method"] = result.method;
  doc["params"] = params;
  doc["source_n"] = result.source_n;
  doc["selected"] = result.selected;
  doc["created_at"] = result.created_at;
  if (!result.warnings.empty()) doc["warnings"] = result.warnings;
  return doc.dump(2) + "\n";
}

SelectionResult parse_selection(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("selection manifest: invalid JSON: ") + e.what());
  }
  SelectionResult result;
  try {
    for (const char* key : {"method", "params", "source_n", "selected", "created_at"}) {
      if (!doc.contains(key)) {
        throw DataError(std::string("selection manifest: missing key '") + key + "'");
      }
    }
    result.method = doc.at("method").get<std::string>();
    result.source_n = doc.at("source_n").get<std::size_t>();
    result.created_at = doc.at("created_at").get<std::string>();
    for (const auto& [key, value] : doc.at("params").items()) {
      result.params[key] = param_from_json(value, key);
    }
    for (const auto& v : doc.at("selected")) {
      if (!v.is_number_unsigned()) {
        throw DataError("selection manifest: selected entries must be non-negative integers");
      }
      result.selected.push_back(v.get<std::size_t>());
    }
    if (doc.contains("warnings")) {
      result.warnings = doc.at("warnings").get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("selection manifest: ") + e.what());
  }
  std::sort(result.selected.begin(), result.selected.end());
  try {
    result.validate();
  } catch (const DataError& e) {
    throw DataError(std::string("selection manifest: ") + e.what());
  }
  return result;
}

void save_selection(const SelectionResult& result, const std::filesystem::path& path) {
  write_file_atomic(path, format_selection(result));
}

SelectionResult load_selection(const std::filesystem::path& path) {
  try {
    return parse_selection(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint64_t> load_id_list(const std::filesystem::path& path) {
  const auto text = read_file(path);
  std::vector<std::uint64_t> ids;
  auto lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    auto line = trim(lines[ln]);
    if (line.empty() || line.front() == '#') continue;
    auto id = parse_number<std::uint64_t>(line);
    if (!id) {
      throw DataError(path.string() + ": line " + std::to_string(ln + 1) +
                      ": unparseable id '" + std::string(line) + "'");
    }
    ids.push_back(*id);
  }
  return ids;
}

}  // namespace coreset
