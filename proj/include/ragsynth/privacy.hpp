#pragma once

// Privacy stage: rule-based and provider-backed entity detection, span
// resolution, placeholder pseudonymization, the privacy report, and
// span-level masking evaluation against gold annotations.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragsynth/corpus.hpp"
#include "ragsynth/detail/concurrency.hpp"
#include "ragsynth/detail/utf8.hpp"
#include "ragsynth/entity.hpp"
#include "ragsynth/error.hpp"
#include "ragsynth/gazetteer_data.hpp"
#include "ragsynth/llm.hpp"
#include "ragsynth/prompts.hpp"

namespace ragsynth {

class Detector {
 public:
  virtual ~Detector() = default;

  virtual std::string id() const = 0;
  /// Candidate spans in code point offsets. May overlap; resolution happens later.
  virtual std::vector<EntitySpan> detect(std::string_view text) const = 0;
};

using DetectorSet = std::vector<std::shared_ptr<const Detector>>;

namespace detail {

inline bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' ||
         c >= 0x80;
}

inline bool bounded(std::string_view text, std::size_t b0, std::size_t b1) {
  const bool left = b0 == 0 || !is_word_byte(static_cast<unsigned char>(text[b0 - 1])) ||
                    !is_word_byte(static_cast<unsigned char>(text[b0]));
  const bool right = b1 == text.size() || !is_word_byte(static_cast<unsigned char>(text[b1])) ||
                     !is_word_byte(static_cast<unsigned char>(text[b1 - 1]));
  return left && right;
}

inline EntitySpan make_span(std::string_view text, const utf8::OffsetMap& map, const EntityType& type,
                            std::size_t b0, std::size_t b1, const std::string& detector) {
  return EntitySpan{type, map.to_char(b0), map.to_char(b1), std::string(text.substr(b0, b1 - b0)),
                    detector};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Regex detector

struct RegexRule {
  EntityType type;
  std::string pattern;
  /// Capture group that delimits the entity; 0 = whole match.
  std::size_t group = 0;
  bool case_insensitive = false;
};

class RegexDetector final : public Detector {
 public:
  RegexDetector(std::string id, std::vector<RegexRule> rules) : id_(std::move(id)) {
    for (auto& r : rules) {
      auto flags = std::regex::ECMAScript | std::regex::optimize;
      if (r.case_insensitive) flags |= std::regex::icase;
      compiled_.push_back({std::move(r), std::regex()});
      compiled_.back().second.assign(compiled_.back().first.pattern, flags);
    }
  }

  std::string id() const override { return id_; }

  std::vector<EntitySpan> detect(std::string_view text) const override {
    std::vector<EntitySpan> out;
    if (text.empty()) return out;
    const utf8::OffsetMap map(text);
    for (const auto& [rule, re] : compiled_) {
      using It = std::regex_iterator<std::string_view::const_iterator>;
      for (It it(text.begin(), text.end(), re), end; it != end; ++it) {
        const auto& m = *it;
        if (!m[rule.group].matched || m[rule.group].length() == 0) continue;
        const auto b0 = static_cast<std::size_t>(m.position(rule.group));
        const auto b1 = b0 + static_cast<std::size_t>(m.length(rule.group));
        out.push_back(detail::make_span(text, map, rule.type, b0, b1, id_));
      }
    }
    return out;
  }

 private:
  std::string id_;
  std::vector<std::pair<RegexRule, std::regex>> compiled_;
};

inline constexpr std::string_view kMonthAlternation =
    "(?:January|February|March|April|May|June|July|August|September|October|November|December|"
    "Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sept|Sep|Oct|Nov|Dec)";

inline std::vector<RegexRule> default_regex_rules() {
  const std::string month(kMonthAlternation);
  const std::string date_forms =
      "(?:" + month + "\\.? \\d{1,2}(?:st|nd|rd|th)?,? \\d{4}|\\d{1,2} " + month +
      " \\d{4}|\\d{4}-\\d{2}-\\d{2}|\\d{1,2}/\\d{1,2}/\\d{2,4})";
  return {
      {EntityType("EMAIL"), R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})"},
      {EntityType("CARDNUMBER"), R"(\b(?:\d{4}[ -]){3}\d{4}\b|\b\d{4}[ -]\d{6}[ -]\d{5}\b|\b\d{16}\b)"},
      {EntityType("TELEPHONENUM"),
       R"((?:\+\d{1,3}[ .-]?)?(?:\(\d{3}\)[ .-]?|\b\d{3}[.-])\d{3}[.-]\d{4}\b)"},
      {EntityType("DOB"), "\\b(?:date of birth|born on|born|DOB|D\\.O\\.B\\.)[:]?\\s+(" + date_forms + ")\\b",
       1, true},
      {EntityType("DATE"), "\\b" + date_forms + "\\b"},
      {EntityType("DATE"), "\\b" + month + " \\d{4}\\b"},
      {EntityType("SALARY"),
       "(?:\\$|€|£|\\bUSD ?|\\bEUR ?|\\bGBP ?)\\d{1,3}(?:,\\d{3})+(?:\\.\\d{2})?(?:[kK]\\b)?"
       "|(?:\\$|€|£)\\d+(?:\\.\\d+)?[kK]?\\b"
       "|\\b\\d{1,3}(?:,\\d{3})+ (?:USD|EUR|GBP|dollars|euros)\\b"},
  };
}

// ---------------------------------------------------------------------------
// Gazetteer / keyword detector

struct Gazetteer {
  EntityType type;
  std::vector<std::string> entries;
  bool case_sensitive = true;

  /// One entry per line; blank lines and lines starting with '#' are skipped.
  static std::vector<std::string> parse_lines(std::string_view contents) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= contents.size()) {
      auto eol = contents.find('\n', pos);
      if (eol == std::string_view::npos) eol = contents.size();
      std::string line(contents.substr(pos, eol - pos));
      pos = eol + 1;
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (!line.empty() && line.front() != '#') out.push_back(std::move(line));
      if (eol == contents.size()) break;
    }
    return out;
  }

  static Gazetteer from_file(const std::filesystem::path& path, EntityType type, bool case_sensitive) {
    return Gazetteer{std::move(type), parse_lines(io::read_file(path)), case_sensitive};
  }
};

/// Whole-word phrase matching against entry lists. Every occurrence of every
/// entry is reported; overlapping hits are left to span resolution.
class GazetteerDetector final : public Detector {
 public:
  GazetteerDetector(std::string id, std::vector<Gazetteer> lists) : id_(std::move(id)) {
    for (auto& g : lists) {
      for (auto& e : g.entries) {
        if (!g.case_sensitive) e = utf8::ascii_lower(e);
      }
      lists_.push_back(std::move(g));
    }
  }

  std::string id() const override { return id_; }

  std::vector<EntitySpan> detect(std::string_view text) const override {
    std::vector<EntitySpan> out;
    if (text.empty()) return out;
    const utf8::OffsetMap map(text);
    const std::string folded = utf8::ascii_lower(text);
    for (const auto& g : lists_) {
      const std::string_view hay = g.case_sensitive ? text : std::string_view(folded);
      for (const auto& entry : g.entries) {
        for (auto b0 = hay.find(entry); b0 != std::string_view::npos; b0 = hay.find(entry, b0 + 1)) {
          const auto b1 = b0 + entry.size();
          if (detail::bounded(text, b0, b1)) out.push_back(detail::make_span(text, map, g.type, b0, b1, id_));
        }
      }
    }
    return out;
  }

 private:
  std::string id_;
  std::vector<Gazetteer> lists_;
};

/// Types matched case-insensitively (common-noun vocabularies).
inline bool gazetteer_case_insensitive(std::string_view type) {
  return type == "GENDER" || type == "JOBTYPE" || type == "DBAREA" || type == "MENTALHEALTHINFO" ||
         type == "DISABILITYSTATUS";
}

inline bool is_keyword_type(std::string_view type) {
  return type == "MENTALHEALTHINFO" || type == "DISABILITYSTATUS";
}

/// Built-in lists shipped in data/gazetteers. `keywords` selects the
/// condition-keyword lists instead of the name lists.
inline std::vector<Gazetteer> builtin_gazetteers(bool keywords) {
  std::vector<Gazetteer> out;
  for (const auto& list : gazetteer_data::kLists) {
    if (is_keyword_type(list.type) != keywords) continue;
    out.push_back(Gazetteer{EntityType(std::string(list.type)), Gazetteer::parse_lines(list.lines),
                            !gazetteer_case_insensitive(list.type)});
  }
  return out;
}

/// Loads <type>.txt lists from a directory (file stem uppercased = type).
inline std::vector<Gazetteer> load_gazetteer_dir(const std::filesystem::path& dir, bool keywords) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Gazetteer> out;
  for (const auto& f : files) {
    std::string type = f.stem().string();
    for (char& c : type) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (is_keyword_type(type) != keywords) continue;
    out.push_back(Gazetteer::from_file(f, EntityType(type), !gazetteer_case_insensitive(type)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Provider-backed and oracle detectors

/// Asks a chat provider for entity surfaces and locates every whole-word
/// occurrence of each in the text. Transport failures propagate.
class ProviderDetector final : public Detector {
 public:
  ProviderDetector(std::shared_ptr<const ChatProvider> provider, std::vector<std::string> types = {})
      : provider_(std::move(provider)), types_(std::move(types)) {
    if (types_.empty()) types_.assign(kTaxonomy.begin(), kTaxonomy.end());
  }

  std::string id() const override { return "llm:" + provider_->id(); }

  std::vector<EntitySpan> detect(std::string_view text) const override {
    std::vector<EntitySpan> out;
    if (text.empty()) return out;
    const auto prompt = prompts::entity_spans(text, types_);
    ChatRequest req{prompt.system, prompt.user, 0.0, 2048, provider_->model()};
    const auto reply = complete_structured(req, *provider_, EntitySpansSchema{});
    const utf8::OffsetMap map(text);
    for (const auto& e : reply.value) {
      if (e.text.empty() || !EntityType::valid_name(e.type)) continue;
      if (std::find(types_.begin(), types_.end(), e.type) == types_.end()) continue;
      const EntityType type(e.type);
      for (auto b0 = text.find(e.text); b0 != std::string_view::npos; b0 = text.find(e.text, b0 + 1)) {
        const auto b1 = b0 + e.text.size();
        if (detail::bounded(text, b0, b1)) out.push_back(detail::make_span(text, map, type, b0, b1, id()));
      }
    }
    return out;
  }

 private:
  std::shared_ptr<const ChatProvider> provider_;
  std::vector<std::string> types_;
};

/// Returns known spans for known texts. Used to feed gold annotations through
/// the detection path in evaluation.
class OracleDetector final : public Detector {
 public:
  explicit OracleDetector(const std::vector<AnnotatedRecord>& records) {
    for (const auto& r : records) {
      auto& spans = by_text_[r.text];
      for (auto s : r.gold_spans) {
        s.detector = "oracle";
        spans.push_back(std::move(s));
      }
    }
  }

  std::string id() const override { return "oracle"; }

  std::vector<EntitySpan> detect(std::string_view text) const override {
    const auto it = by_text_.find(std::string(text));
    return it == by_text_.end() ? std::vector<EntitySpan>{} : it->second;
  }

 private:
  std::map<std::string, std::vector<EntitySpan>> by_text_;
};

/// Regex, gazetteer and keyword detectors over the built-in lists.
inline DetectorSet default_detectors() {
  return {std::make_shared<RegexDetector>("regex", default_regex_rules()),
          std::make_shared<GazetteerDetector>("gazetteer", builtin_gazetteers(false)),
          std::make_shared<GazetteerDetector>("keyword", builtin_gazetteers(true))};
}

/// Builds a set from ids: "regex", "gazetteer", "keyword", "llm" (needs `chat`).
inline DetectorSet make_detector_set(const std::vector<std::string>& ids,
                                     std::shared_ptr<const ChatProvider> chat = nullptr,
                                     const std::optional<std::filesystem::path>& gazetteer_dir = std::nullopt) {
  DetectorSet set;
  for (const auto& id : ids) {
    if (id == "regex") {
      set.push_back(std::make_shared<RegexDetector>("regex", default_regex_rules()));
    } else if (id == "gazetteer" || id == "keyword") {
      const bool kw = id == "keyword";
      set.push_back(std::make_shared<GazetteerDetector>(
          id, gazetteer_dir ? load_gazetteer_dir(*gazetteer_dir, kw) : builtin_gazetteers(kw)));
    } else if (id == "llm") {
      if (!chat) throw InvalidArgument("detector 'llm' needs a chat provider");
      set.push_back(std::make_shared<ProviderDetector>(chat));
    } else {
      throw InvalidArgument("unknown detector '" + id + "'");
    }
  }
  return set;
}

inline std::vector<std::string> detector_ids(const DetectorSet& set) {
  std::vector<std::string> out;
  for (const auto& d : set) out.push_back(d->id());
  return out;
}

// ---------------------------------------------------------------------------
// Detection and resolution

/// Greedy overlap resolution: longer span first, then earlier start, then
/// taxonomy order. Output sorted by start.
inline std::vector<EntitySpan> resolve_overlaps(std::vector<EntitySpan> candidates) {
  std::stable_sort(candidates.begin(), candidates.end(), [](const EntitySpan& a, const EntitySpan& b) {
    if (a.length() != b.length()) return a.length() > b.length();
    if (a.start != b.start) return a.start < b.start;
    return taxonomy_before(a.type, b.type);
  });
  std::vector<EntitySpan> kept;
  for (auto& c : candidates) {
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](const EntitySpan& k) { return k.overlaps(c); });
    if (!clash) kept.push_back(std::move(c));
  }
  std::sort(kept.begin(), kept.end(), [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  return kept;
}

/// Minimum surface length for propagation and leak checks.
inline constexpr std::size_t kMinLeakLength = 3;

/// Union of all detector outputs, resolved to non-overlapping spans. Every
/// further verbatim occurrence of a detected surface (>= 3 code points) that
/// does not overlap a kept span is added with the same type, so a surface
/// detected once is masked everywhere in the text.
inline std::vector<EntitySpan> detect_entities(std::string_view text, const DetectorSet& detectors) {
  if (detectors.empty()) throw InvalidArgument("detector set is empty");
  if (text.empty()) return {};
  std::vector<EntitySpan> candidates;
  const std::size_t len = utf8::length(text);
  for (const auto& d : detectors) {
    for (auto& s : d->detect(text)) {
      if (s.start >= s.end || s.end > len) continue;
      candidates.push_back(std::move(s));
    }
  }
  auto kept = resolve_overlaps(std::move(candidates));

  const utf8::OffsetMap map(text);
  std::set<std::string> seen;
  std::vector<EntitySpan> extra;
  for (const auto& k : kept) {
    if (utf8::length(k.surface) < kMinLeakLength || !seen.insert(k.surface).second) continue;
    for (auto b0 = text.find(k.surface); b0 != std::string_view::npos; b0 = text.find(k.surface, b0 + 1)) {
      auto cand = detail::make_span(text, map, k.type, b0, b0 + k.surface.size(), "propagation");
      const auto clash = [&](const EntitySpan& s) { return s.overlaps(cand); };
      if (std::none_of(kept.begin(), kept.end(), clash) && std::none_of(extra.begin(), extra.end(), clash)) {
        extra.push_back(std::move(cand));
      }
    }
  }
  kept.insert(kept.end(), std::make_move_iterator(extra.begin()), std::make_move_iterator(extra.end()));
  std::sort(kept.begin(), kept.end(), [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  return kept;
}

// ---------------------------------------------------------------------------
// Pseudonymization

struct ChunkRef {
  std::string doc_id;
  std::size_t chunk_index = 0;

  std::string key() const { return doc_id + "#" + std::to_string(chunk_index); }
  friend bool operator==(const ChunkRef&, const ChunkRef&) = default;
};

struct Replacement {
  EntitySpan span;
  std::string placeholder;
};

struct MaskedDocument {
  ChunkRef source;
  std::size_t cluster = 0;
  std::string masked_text;
  std::vector<Replacement> replacements;
  /// (type, surface) -> placeholder, per document.
  std::map<std::pair<std::string, std::string>, std::string> alias_map;
};

/// Replaces each span with [TYPE_n], n = 1-based order of first appearance of
/// that (type, surface) pair. Spans must be valid and non-overlapping.
inline MaskedDocument pseudonymize(std::string_view text, std::vector<EntitySpan> spans) {
  const utf8::OffsetMap map(text);
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > map.length()) throw InvalidArgument("span out of bounds");
    const auto b0 = map.to_byte(s.start);
    if (text.substr(b0, map.to_byte(s.end) - b0) != s.surface) {
      throw InvalidArgument("span surface does not match text at (" + std::to_string(s.start) + "," +
                            std::to_string(s.end) + ")");
    }
  }
  std::sort(spans.begin(), spans.end(), [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i - 1].overlaps(spans[i])) throw InvalidArgument("overlapping spans passed to pseudonymize");
  }

  MaskedDocument doc;
  std::map<std::string, std::size_t> next_index;
  for (auto& s : spans) {
    const auto key = std::make_pair(s.type.name(), s.surface);
    auto it = doc.alias_map.find(key);
    if (it == doc.alias_map.end()) {
      const auto n = ++next_index[s.type.name()];
      it = doc.alias_map.emplace(key, "[" + s.type.name() + "_" + std::to_string(n) + "]").first;
    }
    doc.replacements.push_back({std::move(s), it->second});
  }

  std::string masked(text);
  for (auto r = doc.replacements.rbegin(); r != doc.replacements.rend(); ++r) {
    const auto b0 = map.to_byte(r->span.start);
    masked.replace(b0, map.to_byte(r->span.end) - b0, r->placeholder);
  }
  doc.masked_text = std::move(masked);
  return doc;
}

/// Surfaces (>= 3 code points) of `doc` that still occur in `text`.
inline std::vector<std::string> leaked_surfaces(const MaskedDocument& doc, std::string_view text) {
  std::vector<std::string> out;
  for (const auto& r : doc.replacements) {
    if (utf8::length(r.span.surface) >= kMinLeakLength && text.find(r.span.surface) != std::string_view::npos &&
        std::find(out.begin(), out.end(), r.span.surface) == out.end()) {
      out.push_back(r.span.surface);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report and batch masking

struct PrivacyReport {
  struct DocumentEntry {
    std::string id;
    std::size_t replacements = 0;
  };
  struct ErrorEntry {
    std::string id;
    std::string reason;
  };

  std::map<std::string, std::size_t> per_type_counts;
  std::vector<DocumentEntry> documents;
  std::vector<std::string> detector_set;
  nlohmann::ordered_json policy = nlohmann::ordered_json::object();
  std::vector<ErrorEntry> errors;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [_, c] : per_type_counts) n += c;
    return n;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json per_type = nlohmann::ordered_json::object();
    for (const auto& [t, c] : per_type_counts) per_type[t] = c;
    nlohmann::ordered_json docs = nlohmann::ordered_json::array();
    for (const auto& d : documents) docs.push_back({{"id", d.id}, {"replacements", d.replacements}});
    nlohmann::ordered_json errs = nlohmann::ordered_json::array();
    for (const auto& e : errors) errs.push_back({{"id", e.id}, {"reason", e.reason}});
    return {{"per_type", std::move(per_type)},
            {"total", total()},
            {"documents", std::move(docs)},
            {"detector_set", detector_set},
            {"policy", policy},
            {"errors", std::move(errs)}};
  }
};

struct MaskInput {
  ChunkRef source;
  std::size_t cluster = 0;
  std::string text;
};

struct MaskOptions {
  bool fail_open = false;
  std::size_t workers = 1;
};

struct MaskingResult {
  std::vector<MaskedDocument> documents;
  PrivacyReport report;
};

/// Detects and pseudonymizes every input. Results keep input order. With
/// fail_open a failing document passes through unmasked and the failure is
/// recorded; otherwise the first failure aborts.
inline MaskingResult mask_samples(const std::vector<MaskInput>& inputs, const DetectorSet& detectors,
                                  const MaskOptions& options = {}) {
  if (detectors.empty()) throw InvalidArgument("detector set is empty");
  struct Outcome {
    MaskedDocument doc;
    std::optional<std::string> error;
  };
  auto outcomes = concurrency::ordered_map(inputs.size(), options.workers, [&](std::size_t i) {
    const auto& in = inputs[i];
    Outcome o;
    try {
      o.doc = pseudonymize(in.text, detect_entities(in.text, detectors));
    } catch (const Error& e) {
      if (!options.fail_open) throw;
      o.doc = MaskedDocument{};
      o.doc.masked_text = in.text;
      o.error = e.what();
    }
    o.doc.source = in.source;
    o.doc.cluster = in.cluster;
    return o;
  });

  MaskingResult result;
  result.report.detector_set = detector_ids(detectors);
  result.report.policy = {{"fail_open", options.fail_open},
                          {"placeholder_format", "[TYPE_n]"},
                          {"propagation_min_length", kMinLeakLength}};
  for (auto& o : outcomes) {
    const auto id = o.doc.source.key();
    if (o.error) result.report.errors.push_back({id, *o.error});
    for (const auto& r : o.doc.replacements) ++result.report.per_type_counts[r.span.type.name()];
    result.report.documents.push_back({id, o.doc.replacements.size()});
    result.documents.push_back(std::move(o.doc));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation against gold spans

struct MatchPolicy {
  enum class Kind { jaccard, exact };
  Kind kind = Kind::jaccard;
  double threshold = 0.5;

  std::string name() const { return kind == Kind::exact ? "exact" : "jaccard"; }
};

/// Character-interval Jaccard: |a ∩ b| / |a ∪ b|.
inline double span_jaccard(const EntitySpan& a, const EntitySpan& b) {
  const auto lo = std::max(a.start, b.start);
  const auto hi = std::min(a.end, b.end);
  const double inter = hi > lo ? static_cast<double>(hi - lo) : 0.0;
  const double uni = static_cast<double>(a.length() + b.length()) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline bool spans_match(const EntitySpan& gold, const EntitySpan& pred, const MatchPolicy& policy) {
  if (gold.type != pred.type) return false;
  if (policy.kind == MatchPolicy::Kind::exact) return gold.start == pred.start && gold.end == pred.end;
  return span_jaccard(gold, pred) >= policy.threshold;
}

struct TypeAccuracy {
  std::size_t gold = 0;
  std::size_t detected = 0;  // gold spans matched by a prediction
  std::size_t missed = 0;
  std::size_t masked = 0;  // predicted (and therefore masked) spans of this type

  double accuracy() const { return gold ? static_cast<double>(detected) / static_cast<double>(gold) : 0.0; }
};

struct MaskingEvaluation {
  std::map<std::string, TypeAccuracy> per_type;
  TypeAccuracy overall;
  std::size_t false_positives = 0;
  MatchPolicy policy;

  nlohmann::ordered_json to_json() const {
    auto row = [](const TypeAccuracy& t) {
      return nlohmann::ordered_json{{"gold", t.gold},         {"detected", t.detected}, {"missed", t.missed},
                                    {"masked", t.masked},     {"accuracy", t.accuracy()}};
    };
    nlohmann::ordered_json types = nlohmann::ordered_json::object();
    for (const auto& [t, a] : per_type) types[t] = row(a);
    return {{"policy", {{"kind", policy.name()}, {"threshold", policy.threshold}}},
            {"per_type", std::move(types)},
            {"overall", row(overall)},
            {"false_positives", false_positives}};
  }
};

/// Scores predictions from `detectors` against gold spans: a gold span counts
/// as detected iff some predicted span of the same type matches under `policy`.
inline MaskingEvaluation evaluate_predictions(const std::vector<AnnotatedRecord>& gold,
                                              const std::vector<std::vector<EntitySpan>>& predictions,
                                              const MatchPolicy& policy = {}) {
  if (gold.size() != predictions.size()) throw InvalidArgument("gold/prediction count mismatch");
  MaskingEvaluation ev;
  ev.policy = policy;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (const auto& g : gold[i].gold_spans) {
      auto& row = ev.per_type[g.type.name()];
      ++row.gold;
      const bool hit = std::any_of(predictions[i].begin(), predictions[i].end(),
                                   [&](const EntitySpan& p) { return spans_match(g, p, policy); });
      ++(hit ? row.detected : row.missed);
    }
    for (const auto& p : predictions[i]) {
      ++ev.per_type[p.type.name()].masked;
      const bool matches_gold = std::any_of(gold[i].gold_spans.begin(), gold[i].gold_spans.end(),
                                            [&](const EntitySpan& g) { return spans_match(g, p, policy); });
      if (!matches_gold) ++ev.false_positives;
    }
  }
  for (const auto& [_, row] : ev.per_type) {
    ev.overall.gold += row.gold;
    ev.overall.detected += row.detected;
    ev.overall.missed += row.missed;
    ev.overall.masked += row.masked;
  }
  return ev;
}

inline MaskingEvaluation evaluate_masking(const std::vector<AnnotatedRecord>& gold, const DetectorSet& detectors,
                                          const MatchPolicy& policy = {}, std::size_t workers = 1) {
  for (std::size_t i = 0; i < gold.size(); ++i) validate_record(gold[i], i + 1);
  auto predictions = concurrency::ordered_map(
      gold.size(), workers, [&](std::size_t i) { return detect_entities(gold[i].text, detectors); });
  return evaluate_predictions(gold, predictions, policy);
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const MaskedDocument& d) {
  nlohmann::ordered_json reps = nlohmann::ordered_json::array();
  for (const auto& r : d.replacements) {
    reps.push_back({{"type", r.span.type.name()},
                    {"start", r.span.start},
                    {"end", r.span.end},
                    {"surface", r.span.surface},
                    {"detector", r.span.detector},
                    {"placeholder", r.placeholder}});
  }
  return {{"doc_id", d.source.doc_id},
          {"chunk_index", d.source.chunk_index},
          {"cluster", d.cluster},
          {"masked_text", d.masked_text},
          {"replacements", std::move(reps)}};
}

inline MaskedDocument masked_document_from_json(const nlohmann::json& j, std::size_t line = 0) {
  MaskedDocument d;
  d.source = {io::field<std::string>(j, "doc_id", line), io::field<std::size_t>(j, "chunk_index", line)};
  d.cluster = io::field<std::size_t>(j, "cluster", line);
  d.masked_text = io::field<std::string>(j, "masked_text", line);
  for (const auto& r : io::field<nlohmann::json>(j, "replacements", line)) {
    Replacement rep{EntitySpan{EntityType(io::field<std::string>(r, "type", line)),
                               io::field<std::size_t>(r, "start", line), io::field<std::size_t>(r, "end", line),
                               io::field<std::string>(r, "surface", line),
                               io::field<std::string>(r, "detector", line)},
                    io::field<std::string>(r, "placeholder", line)};
    d.alias_map.emplace(std::make_pair(rep.span.type.name(), rep.span.surface), rep.placeholder);
    d.replacements.push_back(std::move(rep));
  }
  return d;
}

}  // namespace ragsynth
