#pragma once

// Document ingestion, whitespace tokenization, fixed-size chunking and
// annotated-dataset handling.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragsynth/detail/io.hpp"
#include "ragsynth/detail/utf8.hpp"
#include "ragsynth/entity.hpp"
#include "ragsynth/error.hpp"

namespace ragsynth {

struct Document {
  std::string id;
  std::string source;
  std::string text;
};

struct Chunk {
  std::string doc_id;
  std::size_t index = 0;
  std::string text;
  std::size_t token_count = 0;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct AnnotatedRecord {
  std::string text;
  std::vector<EntitySpan> gold_spans;
};

/// Maximal runs of non-whitespace code points. Joining with single spaces is
/// the canonical join rule.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  std::size_t token_start = std::string_view::npos;
  while (pos < text.size()) {
    const std::size_t at = pos;
    const char32_t cp = utf8::next(text, pos);
    if (utf8::is_space(cp)) {
      if (token_start != std::string_view::npos) {
        tokens.emplace_back(text.substr(token_start, at - token_start));
        token_start = std::string_view::npos;
      }
    } else if (token_start == std::string_view::npos) {
      token_start = at;
    }
  }
  if (token_start != std::string_view::npos) tokens.emplace_back(text.substr(token_start));
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens, std::size_t first,
                               std::size_t last) {
  std::string out;
  for (std::size_t i = first; i < last; ++i) {
    if (i > first) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

/// Greedy, non-overlapping packing of whitespace tokens: every chunk holds
/// exactly `chunk_size` tokens except possibly the last.
inline std::vector<Chunk> chunk_document(const Document& doc, std::size_t chunk_size) {
  if (chunk_size == 0) throw InvalidArgument("chunk_size must be >= 1");
  const auto tokens = tokenize(doc.text);
  std::vector<Chunk> chunks;
  chunks.reserve((tokens.size() + chunk_size - 1) / chunk_size);
  for (std::size_t first = 0; first < tokens.size(); first += chunk_size) {
    const std::size_t last = std::min(tokens.size(), first + chunk_size);
    chunks.push_back(Chunk{doc.id, chunks.size(), join_tokens(tokens, first, last), last - first});
  }
  return chunks;
}

inline std::vector<Chunk> chunk_corpus(const std::vector<Document>& docs, std::size_t chunk_size) {
  std::vector<Chunk> out;
  for (const auto& d : docs) {
    auto c = chunk_document(d, chunk_size);
    out.insert(out.end(), std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()));
  }
  return out;
}

namespace detail {

inline void load_corpus_file(const std::filesystem::path& path, std::vector<Document>& out) {
  if (path.extension() == ".jsonl") {
    io::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
      Document d{io::field<std::string>(j, "id", line), path.string() + ":" + std::to_string(line),
                 io::field<std::string>(j, "text", line)};
      if (!utf8::is_valid(d.text)) throw DataError("text is not valid UTF-8", line);
      out.push_back(std::move(d));
    });
    return;
  }
  Document d{path.stem().string(), path.string(), io::read_file(path)};
  if (!utf8::is_valid(d.text)) throw DataError(path.string() + " is not valid UTF-8");
  out.push_back(std::move(d));
}

}  // namespace detail

/// Loads a plain-text file (one document, id = file stem), a JSONL file of
/// {"id", "text"} records, or a directory of such files (sorted by path).
inline std::vector<Document> load_corpus(const std::filesystem::path& path,
                                         bool allow_empty_text = false) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) throw DataError("input not found: " + path.string());
  std::vector<Document> docs;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(path)) {
      const auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".txt" || ext == ".jsonl")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) detail::load_corpus_file(f, docs);
  } else {
    detail::load_corpus_file(path, docs);
  }
  std::set<std::string> seen;
  for (const auto& d : docs) {
    if (d.id.empty()) throw DataError("document with empty id in " + d.source);
    if (!seen.insert(d.id).second) throw DataError("duplicate document id '" + d.id + "'");
    if (!allow_empty_text && d.text.empty()) throw DataError("document '" + d.id + "' is empty");
  }
  return docs;
}

/// Checks the AnnotatedRecord invariants; throws DataError carrying `line`.
inline void validate_record(const AnnotatedRecord& rec, std::size_t line = 0) {
  const utf8::OffsetMap map(rec.text);
  const std::size_t len = map.length();
  std::vector<const EntitySpan*> sorted;
  for (const auto& s : rec.gold_spans) {
    if (s.start >= s.end || s.end > len) {
      throw DataError("span (" + std::to_string(s.start) + "," + std::to_string(s.end) +
                          ") out of bounds for text of length " + std::to_string(len),
                      line);
    }
    const auto b0 = map.to_byte(s.start);
    if (rec.text.compare(b0, map.to_byte(s.end) - b0, s.surface) != 0) {
      throw DataError("span surface does not match text", line);
    }
    sorted.push_back(&s);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const EntitySpan* a, const EntitySpan* b) { return a->start < b->start; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1]->overlaps(*sorted[i])) throw DataError("overlapping gold spans", line);
  }
}

inline AnnotatedRecord parse_annotated_record(const nlohmann::json& j, std::size_t line = 0) {
  AnnotatedRecord rec;
  rec.text = io::field<std::string>(j, "text", line);
  if (!utf8::is_valid(rec.text)) throw DataError("text is not valid UTF-8", line);
  const auto spans = io::field<nlohmann::json>(j, "spans", line);
  if (!spans.is_array()) throw DataError("'spans' must be an array", line);
  const utf8::OffsetMap map(rec.text);
  for (const auto& s : spans) {
    const auto type = io::field<std::string>(s, "type", line);
    const auto start = io::field<long long>(s, "start", line);
    const auto end = io::field<long long>(s, "end", line);
    if (!EntityType::valid_name(type)) throw DataError("invalid entity type '" + type + "'", line);
    if (start < 0 || end <= start || static_cast<std::size_t>(end) > map.length()) {
      throw DataError("span (" + std::to_string(start) + "," + std::to_string(end) +
                          ") out of bounds for text of length " + std::to_string(map.length()),
                      line);
    }
    const auto b0 = map.to_byte(static_cast<std::size_t>(start));
    const auto b1 = map.to_byte(static_cast<std::size_t>(end));
    rec.gold_spans.push_back(EntitySpan{EntityType(type), static_cast<std::size_t>(start),
                                        static_cast<std::size_t>(end), rec.text.substr(b0, b1 - b0),
                                        "gold"});
  }
  validate_record(rec, line);
  return rec;
}

inline nlohmann::ordered_json to_json(const AnnotatedRecord& rec) {
  nlohmann::ordered_json spans = nlohmann::ordered_json::array();
  for (const auto& s : rec.gold_spans) {
    spans.push_back({{"type", s.type.name()}, {"start", s.start}, {"end", s.end}});
  }
  return {{"text", rec.text}, {"spans", std::move(spans)}};
}

/// Reads line-delimited {"text", "spans": [{"type", "start", "end"}]} records
/// in file order.
inline std::vector<AnnotatedRecord> load_annotated_dataset(const std::filesystem::path& path) {
  std::vector<AnnotatedRecord> out;
  io::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    out.push_back(parse_annotated_record(j, line));
  });
  return out;
}

/// Concatenates consecutive groups of `group_size` records with `separator`,
/// shifting gold spans into the paragraph. A trailing partial group is kept.
inline std::vector<AnnotatedRecord> build_privacy_paragraphs(
    const std::vector<AnnotatedRecord>& records, std::size_t group_size,
    std::string_view separator) {
  if (group_size == 0) throw InvalidArgument("group_size must be >= 1");
  const std::size_t sep_len = utf8::length(separator);
  std::vector<AnnotatedRecord> out;
  for (std::size_t first = 0; first < records.size(); first += group_size) {
    const std::size_t last = std::min(records.size(), first + group_size);
    AnnotatedRecord para;
    std::size_t offset = 0;
    for (std::size_t i = first; i < last; ++i) {
      if (i > first) {
        para.text += separator;
        offset += sep_len;
      }
      para.text += records[i].text;
      for (auto s : records[i].gold_spans) {
        s.start += offset;
        s.end += offset;
        para.gold_spans.push_back(std::move(s));
      }
      offset += utf8::length(records[i].text);
    }
    out.push_back(std::move(para));
  }
  return out;
}

struct DatasetStats {
  std::size_t records = 0;
  std::size_t entities = 0;
  double entities_per_record = 0.0;
};

inline DatasetStats dataset_stats(const std::vector<AnnotatedRecord>& records) {
  DatasetStats st;
  st.records = records.size();
  for (const auto& r : records) st.entities += r.gold_spans.size();
  st.entities_per_record =
      st.records ? static_cast<double>(st.entities) / static_cast<double>(st.records) : 0.0;
  return st;
}

}  // namespace ragsynth
