#pragma once

// Chat-completion contract: request/response types, a remote HTTP provider,
// a deterministic mock, and schema-checked structured completion with one
// repair reprompt.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragsynth/corpus.hpp"
#include "ragsynth/detail/concurrency.hpp"
#include "ragsynth/detail/hash.hpp"
#include "ragsynth/detail/http.hpp"
#include "ragsynth/detail/utf8.hpp"
#include "ragsynth/error.hpp"
#include "ragsynth/prompts.hpp"

namespace ragsynth {

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  std::size_t max_tokens = 1024;
  std::string model_id;
};

struct ChatResponse {
  std::string text;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::string provider_id;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;

  virtual std::string id() const = 0;
  virtual std::string model() const = 0;
  virtual ChatResponse complete(const ChatRequest& req) const = 0;
};

/// Validates the request, calls the provider, and rejects empty replies.
inline ChatResponse complete(const ChatRequest& req, const ChatProvider& provider) {
  if (req.temperature < 0.0) throw InvalidArgument("temperature must be >= 0");
  if (req.max_tokens == 0) throw InvalidArgument("max_tokens must be >= 1");
  auto res = provider.complete(req);
  if (res.text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ProviderError(provider.id() + " returned an empty reply");
  }
  return res;
}

struct RemoteChatConfig {
  std::string url;
  std::string model = "gpt-4o";
  std::string api_key_env = "RAGSYNTH_CHAT_API_KEY";
  std::size_t max_in_flight = 4;
  double requests_per_second = 0.0;
  http::RetryPolicy retry{};
};

/// OpenAI-style chat endpoint:
/// POST {"model", "messages": [{"role", "content"}], "temperature", "max_tokens"}
/// -> {"choices": [{"message": {"content"}}]}.
class RemoteChatProvider final : public ChatProvider {
 public:
  explicit RemoteChatProvider(RemoteChatConfig cfg)
      : cfg_(std::move(cfg)),
        throttle_(std::make_shared<concurrency::Throttle>(cfg_.max_in_flight, cfg_.requests_per_second)) {
    if (cfg_.url.empty()) throw InvalidArgument("remote chat provider needs an endpoint URL");
  }

  std::string id() const override { return "remote:" + cfg_.model; }
  std::string model() const override { return cfg_.model; }

  ChatResponse complete(const ChatRequest& req) const override {
    nlohmann::json messages = nlohmann::json::array();
    if (!req.system_prompt.empty()) {
      messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
    }
    messages.push_back({{"role", "user"}, {"content", req.user_prompt}});
    const nlohmann::json body = {{"model", req.model_id.empty() ? cfg_.model : req.model_id},
                                 {"messages", std::move(messages)},
                                 {"temperature", req.temperature},
                                 {"max_tokens", req.max_tokens}};
    std::string reply;
    {
      auto permit = throttle_->permit();
      reply = http::post_json(cfg_.url, body.dump(), http::credential_from_env(cfg_.api_key_env),
                              cfg_.retry);
    }
    ChatResponse res;
    res.provider_id = id();
    try {
      const auto parsed = nlohmann::json::parse(reply);
      const auto& content = parsed.at("choices").at(0).at("message").at("content");
      if (!content.is_string()) throw ProviderError("chat reply content is not a string");
      res.text = content.get<std::string>();
      if (parsed.contains("usage")) {
        res.prompt_tokens = parsed["usage"].value("prompt_tokens", std::size_t{0});
        res.completion_tokens = parsed["usage"].value("completion_tokens", std::size_t{0});
      }
    } catch (const nlohmann::json::exception&) {
      throw ProviderError("chat endpoint returned an unexpected body");
    }
    if (res.text.empty()) throw ProviderError("chat endpoint returned empty content");
    return res;
  }

 private:
  RemoteChatConfig cfg_;
  std::shared_ptr<concurrency::Throttle> throttle_;
};

namespace mock {

/// Splits on '.', '!' or '?' followed by whitespace, and on newlines.
inline std::vector<std::string> sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    const auto b = cur.find_first_not_of(" \t\r\n");
    if (b != std::string::npos) {
      const auto e = cur.find_last_not_of(" \t\r\n");
      out.push_back(cur.substr(b, e - b + 1));
    }
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      flush();
      continue;
    }
    cur.push_back(c);
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || text[i + 1] == ' ')) flush();
  }
  flush();
  return out;
}

inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",     "an",    "and",   "are",   "as",    "at",    "be",    "by",    "for",  "from",
      "has",   "have",  "he",    "her",   "his",   "in",    "is",    "it",    "its",  "of",
      "on",    "or",    "she",   "that",  "the",   "their", "they",  "this",  "to",   "was",
      "were",  "will",  "with",  "which", "who",   "what",  "when",  "where", "how",  "does",
      "said",  "about", "into",  "than",  "then",  "there", "these", "those", "been", "also",
      "after", "before", "while", "each", "such",  "other", "more",  "most",  "can",  "may"};
  return words;
}

inline std::string strip_punct(std::string_view w) {
  std::size_t b = 0;
  std::size_t e = w.size();
  auto is_punct = [](char c) { return c == ',' || c == '.' || c == ';' || c == ':' || c == '!' ||
                                      c == '?' || c == '"' || c == '\'' || c == '(' || c == ')'; };
  while (b < e && is_punct(w[b])) ++b;
  while (e > b && is_punct(w[e - 1])) --e;
  return std::string(w.substr(b, e - b));
}

/// Up to `limit` content words of a sentence, in order of appearance.
inline std::string focus_phrase(std::string_view sentence, std::size_t limit = 4) {
  std::vector<std::string> picked;
  for (const auto& tok : tokenize(sentence)) {
    auto w = strip_punct(tok);
    if (w.size() < 3 || stopwords().count(utf8::ascii_lower(w))) continue;
    if (std::find(picked.begin(), picked.end(), w) != picked.end()) continue;
    picked.push_back(std::move(w));
    if (picked.size() == limit) break;
  }
  std::string out;
  for (std::size_t i = 0; i < picked.size(); ++i) {
    if (i) out += ' ';
    out += picked[i];
  }
  return out.empty() ? std::string(sentence) : out;
}

inline std::set<std::string> word_set(std::string_view s) {
  std::set<std::string> out;
  for (const auto& tok : tokenize(s)) {
    auto w = utf8::ascii_lower(strip_punct(tok));
    if (!w.empty()) out.insert(std::move(w));
  }
  return out;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& w : a) inter += b.count(w);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

inline constexpr std::string_view kQuestionForms[] = {
    "What does the passage state about {}?",
    "How is {} described in the text?",
    "What can be inferred about {} from the passage?",
    "Which details are given regarding {}?",
};

inline std::string render_question(std::size_t form, const std::string& focus) {
  std::string q(kQuestionForms[form % std::size(kQuestionForms)]);
  q.replace(q.find("{}"), 2, focus);
  return q;
}

inline std::optional<std::size_t> count_field(std::string_view prompt) {
  static const std::regex re(R"(COUNT: (\d+))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(prompt.begin(), prompt.end(), m, re)) return std::nullopt;
  return static_cast<std::size_t>(std::stoull(m[1].str()));
}

}  // namespace mock

/// Deterministic offline provider. Replies are a pure function of
/// (system prompt, user prompt, seed):
///  - qa_pairs: COUNT pairs from sentences of the passage, ranked by a seeded
///    hash of each sentence; answer = sentence, question = form + content words.
///  - dirpmpt_pairs: COUNT pairs from the leading sentences of the document,
///    in document order (single-shot prompting over a long input).
///  - judge_score: 1 + round(9 * (1 - mean pairwise word-set Jaccard)).
///  - entity_spans: always an empty entity list.
///  - anything else: a fixed unstructured acknowledgement.
class MockChatProvider final : public ChatProvider {
 public:
  explicit MockChatProvider(std::uint64_t seed = 0, std::string model = "mock-chat")
      : seed_(seed), model_(std::move(model)) {}

  std::string id() const override { return "mock:" + model_ + ":s" + std::to_string(seed_); }
  std::string model() const override { return model_; }

  ChatResponse complete(const ChatRequest& req) const override {
    ChatResponse res;
    res.provider_id = id();
    res.text = reply(req.user_prompt);
    res.prompt_tokens = tokenize(req.system_prompt).size() + tokenize(req.user_prompt).size();
    res.completion_tokens = tokenize(res.text).size();
    return res;
  }

 private:
  std::string reply(std::string_view user) const {
    if (user.starts_with("TASK: qa_pairs")) {
      return pairs_reply(prompts::payload(user, "PASSAGE"), mock::count_field(user).value_or(1), true);
    }
    if (user.starts_with("TASK: dirpmpt_pairs")) {
      return pairs_reply(prompts::payload(user, "DOCUMENT"), mock::count_field(user).value_or(1), false);
    }
    if (user.starts_with("TASK: judge_score")) return judge_reply(prompts::payload(user, "QUESTIONS"));
    if (user.starts_with("TASK: entity_spans")) return R"({"entities": []})";
    return "Acknowledged. (" + hash::hex(hash::fnv1a(user, seed_)) + ")";
  }

  std::string pairs_reply(std::string_view passage, std::size_t count, bool hashed) const {
    auto sents = mock::sentences(passage);
    if (sents.empty()) return "I cannot write questions about an empty passage.";
    std::vector<std::size_t> order(sents.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (hashed) {
      std::vector<std::uint64_t> keys(sents.size());
      for (std::size_t i = 0; i < sents.size(); ++i) keys[i] = hash::mix(hash::fnv1a(sents[i]) ^ seed_);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    }
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < count; ++i) {
      const auto& s = sents[order[i % order.size()]];
      const auto form = (hash::mix(hash::fnv1a(s) + seed_) + i) % std::size(mock::kQuestionForms);
      pairs.push_back({{"question", mock::render_question(form, mock::focus_phrase(s))}, {"answer", s}});
    }
    return nlohmann::ordered_json{{"pairs", std::move(pairs)}}.dump();
  }

  static std::string judge_reply(std::string_view listing) {
    std::vector<std::set<std::string>> sets;
    std::size_t pos = 0;
    while (pos < listing.size()) {
      auto eol = listing.find('\n', pos);
      if (eol == std::string_view::npos) eol = listing.size();
      const auto line = listing.substr(pos, eol - pos);
      pos = eol + 1;
      const auto dot = line.find(". ");
      if (line.empty()) continue;
      sets.push_back(mock::word_set(dot == std::string_view::npos ? line : line.substr(dot + 2)));
    }
    double overlap = 1.0;
    if (sets.size() >= 2) {
      double total = 0.0;
      std::size_t pairs = 0;
      for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j, ++pairs) total += mock::jaccard(sets[i], sets[j]);
      }
      overlap = total / static_cast<double>(pairs);
    }
    const long score = std::lround(1.0 + 9.0 * (1.0 - overlap));
    return std::to_string(std::clamp(score, 1L, 10L));
  }

  std::uint64_t seed_;
  std::string model_;
};

// ---------------------------------------------------------------------------
// Structured completion

struct QAItem {
  std::string question;
  std::string answer;
};

struct NamedEntity {
  std::string type;
  std::string text;
};

/// Thrown by schema parsers; converted to a repair prompt or StructuredOutputError.
class SchemaViolation : public Error {
 public:
  using Error::Error;
};

namespace detail {

/// Strips a ```json fence and surrounding prose down to the outermost JSON value.
inline nlohmann::json extract_json(std::string_view text) {
  const auto open = text.find_first_of("{[");
  const auto close = text.find_last_of("}]");
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw SchemaViolation("reply contains no JSON value");
  }
  try {
    return nlohmann::json::parse(text.substr(open, close - open + 1));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaViolation(std::string("reply is not valid JSON: ") + e.what());
  }
}

}  // namespace detail

/// {"pairs": [{"question", "answer"}]} (a bare array is accepted). At least
/// `count` pairs are required; extras are dropped.
struct QaPairsSchema {
  static constexpr std::string_view id = "qa_pairs";
  std::size_t count = 1;

  using value_type = std::vector<QAItem>;

  value_type parse(std::string_view text) const {
    const auto j = detail::extract_json(text);
    const nlohmann::json* arr = &j;
    if (j.is_object()) {
      if (!j.contains("pairs")) throw SchemaViolation("missing 'pairs'");
      arr = &j["pairs"];
    }
    if (!arr->is_array()) throw SchemaViolation("'pairs' is not an array");
    value_type out;
    for (const auto& p : *arr) {
      if (!p.is_object() || !p.contains("question") || !p.contains("answer") ||
          !p["question"].is_string() || !p["answer"].is_string()) {
        throw SchemaViolation("pair lacks string 'question'/'answer'");
      }
      QAItem item{p["question"].get<std::string>(), p["answer"].get<std::string>()};
      if (item.question.empty() || item.answer.empty()) throw SchemaViolation("empty question or answer");
      out.push_back(std::move(item));
    }
    if (out.size() < count) {
      throw SchemaViolation("expected " + std::to_string(count) + " pairs, got " + std::to_string(out.size()));
    }
    out.resize(count);
    return out;
  }
};

/// A bare integer, or {"score": integer}. Range is checked by the caller.
struct JudgeScoreSchema {
  static constexpr std::string_view id = "judge_score";
  using value_type = long;

  value_type parse(std::string_view text) const {
    static const std::regex bare(R"(^\s*(-?\d+)\s*$)");
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_match(text.begin(), text.end(), m, bare)) return std::stol(m[1].str());
    if (text.find('{') != std::string_view::npos) {
      const auto j = detail::extract_json(text);
      if (j.is_object() && j.contains("score") && j["score"].is_number_integer()) {
        return j["score"].get<long>();
      }
    }
    throw SchemaViolation("expected a single integer score");
  }
};

/// {"entities": [{"type", "text"}]}.
struct EntitySpansSchema {
  static constexpr std::string_view id = "entity_spans";
  using value_type = std::vector<NamedEntity>;

  value_type parse(std::string_view text) const {
    const auto j = detail::extract_json(text);
    if (!j.is_object() || !j.contains("entities") || !j["entities"].is_array()) {
      throw SchemaViolation("missing 'entities' array");
    }
    value_type out;
    for (const auto& e : j["entities"]) {
      if (!e.is_object() || !e.contains("type") || !e.contains("text") || !e["type"].is_string() ||
          !e["text"].is_string()) {
        throw SchemaViolation("entity lacks string 'type'/'text'");
      }
      out.push_back({e["type"].get<std::string>(), e["text"].get<std::string>()});
    }
    return out;
  }
};

template <class Schema>
struct StructuredReply {
  typename Schema::value_type value;
  std::string raw_text;
  int attempts = 1;
};

/// Completes and parses against `schema`. On a parse failure the request is
/// re-sent once with the parse error appended; a second failure throws
/// StructuredOutputError carrying the last raw reply.
template <class Schema>
StructuredReply<Schema> complete_structured(ChatRequest req, const ChatProvider& provider,
                                            const Schema& schema = {}) {
  auto first = complete(req, provider);
  try {
    return {schema.parse(first.text), std::move(first.text), 1};
  } catch (const SchemaViolation& e) {
    req.user_prompt += prompts::repair_note(e.what());
  }
  auto second = complete(req, provider);
  try {
    return {schema.parse(second.text), second.text, 2};
  } catch (const SchemaViolation& e) {
    throw StructuredOutputError(std::string(Schema::id), e.what(), std::move(second.text));
  }
}

/// Runtime-dispatched form returning the parsed value as JSON.
inline nlohmann::json complete_structured(const ChatRequest& req, std::string_view schema_id,
                                          const ChatProvider& provider, std::size_t qa_count = 1) {
  if (schema_id == QaPairsSchema::id) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : complete_structured(req, provider, QaPairsSchema{qa_count}).value) {
      out.push_back({{"question", p.question}, {"answer", p.answer}});
    }
    return out;
  }
  if (schema_id == JudgeScoreSchema::id) {
    return complete_structured(req, provider, JudgeScoreSchema{}).value;
  }
  if (schema_id == EntitySpansSchema::id) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : complete_structured(req, provider, EntitySpansSchema{}).value) {
      out.push_back({{"type", e.type}, {"text", e.text}});
    }
    return out;
  }
  throw InvalidArgument("unknown schema '" + std::string(schema_id) + "'");
}

}  // namespace ragsynth
