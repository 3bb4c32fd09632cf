#pragma once

// QA curation stage: n grounded question-answer pairs per masked document,
// an output-boundary leak filter, the QA report, and the single-prompt
// few-shot baseline generator.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragsynth/detail/concurrency.hpp"
#include "ragsynth/detail/io.hpp"
#include "ragsynth/detail/utf8.hpp"
#include "ragsynth/error.hpp"
#include "ragsynth/llm.hpp"
#include "ragsynth/privacy.hpp"
#include "ragsynth/prompts.hpp"

namespace ragsynth {

inline constexpr std::string_view kGeneratorPipeline = "pipeline";
inline constexpr std::string_view kGeneratorDirPmpt = "dirpmpt";

struct QAPair {
  std::string question;
  std::string answer;
  ChunkRef source;
  std::size_t cluster = 0;
  std::string generator;

  friend bool operator==(const QAPair&, const QAPair&) = default;
};

struct GenerationOptions {
  std::string model_id;
  double temperature = 0.0;
  std::size_t max_tokens = 1024;
};

/// True if `text` contains a replaced surface of `doc`: as a substring for
/// surfaces of >= 3 code points, as a whole word for shorter ones.
inline bool leaks_surface(std::string_view text, const MaskedDocument& doc) {
  for (const auto& r : doc.replacements) {
    const auto& s = r.span.surface;
    if (s.empty()) continue;
    if (utf8::length(s) >= kMinLeakLength) {
      if (text.find(s) != std::string_view::npos) return true;
      continue;
    }
    for (auto b0 = text.find(s); b0 != std::string_view::npos; b0 = text.find(s, b0 + 1)) {
      if (detail::bounded(text, b0, b0 + s.size())) return true;
    }
  }
  return false;
}

struct QAGeneration {
  std::vector<QAPair> pairs;
  std::optional<std::string> failure;
};

/// Exactly `n` pairs on success. Any pair that leaks a replaced surface fails
/// the whole document with reason "leakage", so |pairs| is always 0 or n.
/// Provider and parse failures are reported as data, not thrown.
inline QAGeneration generate_qa(const MaskedDocument& doc, std::size_t n, const ChatProvider& provider,
                                const GenerationOptions& options = {}) {
  if (n == 0) throw InvalidArgument("n must be >= 1");
  if (doc.masked_text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw InvalidArgument("masked_text is empty");
  }
  const auto prompt = prompts::qa_pairs(doc.masked_text, n);
  ChatRequest req{prompt.system, prompt.user, options.temperature, options.max_tokens,
                  options.model_id.empty() ? provider.model() : options.model_id};
  QAGeneration out;
  std::vector<QAItem> items;
  try {
    items = complete_structured(req, provider, QaPairsSchema{n}).value;
  } catch (const StructuredOutputError& e) {
    out.failure = std::string("parse: ") + e.what();
    return out;
  } catch (const Error& e) {
    out.failure = std::string("provider: ") + e.what();
    return out;
  }
  std::size_t leaked = 0;
  for (auto& item : items) {
    if (leaks_surface(item.question, doc) || leaks_surface(item.answer, doc)) {
      ++leaked;
      continue;
    }
    out.pairs.push_back(QAPair{std::move(item.question), std::move(item.answer), doc.source, doc.cluster,
                               std::string(kGeneratorPipeline)});
  }
  if (leaked > 0) {
    out.pairs.clear();
    out.failure = "leakage: " + std::to_string(leaked) + " of " + std::to_string(n) + " pairs rejected";
  }
  return out;
}

struct QAReport {
  struct Failure {
    std::string doc;
    std::string reason;
  };

  std::string model_id;
  double temperature = 0.0;
  std::string prompt_version{prompts::kQaVersion};
  std::size_t pairs_per_document = 1;
  std::size_t attempts = 0;
  std::size_t successes = 0;
  std::size_t pairs = 0;
  std::vector<Failure> failures;
  std::string procedure;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json f = nlohmann::ordered_json::array();
    for (const auto& x : failures) f.push_back({{"doc", x.doc}, {"reason", x.reason}});
    return {{"model_settings",
             {{"model_id", model_id}, {"temperature", temperature}, {"prompt_version", prompt_version}}},
            {"pairs_per_document", pairs_per_document},
            {"attempts", attempts},
            {"successes", successes},
            {"pairs", pairs},
            {"failures", std::move(f)},
            {"procedure", procedure}};
  }
};

struct CurationResult {
  std::vector<QAPair> pairs;
  QAReport report;
};

struct CurationOptions {
  GenerationOptions generation;
  std::size_t workers = 1;
};

/// Runs generate_qa over `docs` (concurrently up to `workers`), assembling
/// pairs and report in input order.
inline CurationResult curate_dataset(const std::vector<MaskedDocument>& docs, std::size_t n,
                                     const ChatProvider& provider, const CurationOptions& options = {}) {
  if (n == 0) throw InvalidArgument("n must be >= 1");
  auto gens = concurrency::ordered_map(docs.size(), options.workers, [&](std::size_t i) {
    try {
      return generate_qa(docs[i], n, provider, options.generation);
    } catch (const InvalidArgument& e) {
      return QAGeneration{{}, std::string("precondition: ") + e.what()};
    }
  });
  CurationResult r;
  r.report.model_id = options.generation.model_id.empty() ? provider.model() : options.generation.model_id;
  r.report.temperature = options.generation.temperature;
  r.report.pairs_per_document = n;
  r.report.procedure =
      "one structured request per masked document asking for " + std::to_string(n) +
      " grounded question-answer pair(s) (prompt " + std::string(prompts::kQaVersion) +
      "); one repair reprompt on unparseable replies; documents whose pairs contain any replaced "
      "surface are rejected as leakage";
  for (std::size_t i = 0; i < gens.size(); ++i) {
    ++r.report.attempts;
    if (gens[i].failure) {
      r.report.failures.push_back({docs[i].source.key(), *gens[i].failure});
      continue;
    }
    ++r.report.successes;
    for (auto& p : gens[i].pairs) r.pairs.push_back(std::move(p));
  }
  r.report.pairs = r.pairs.size();
  return r;
}

/// Baseline: one few-shot prompt over the raw document asking for `count`
/// pairs. No clustering, no masking. Parse failures throw after one repair.
inline std::vector<QAPair> dirpmpt_generate(std::string_view full_text, std::size_t count,
                                            const ChatProvider& provider, const GenerationOptions& options = {},
                                            std::string doc_id = "corpus") {
  if (count == 0) throw InvalidArgument("count must be >= 1");
  const auto prompt = prompts::dirpmpt_pairs(full_text, count);
  ChatRequest req{prompt.system, prompt.user, options.temperature, std::max<std::size_t>(options.max_tokens, 64 * count),
                  options.model_id.empty() ? provider.model() : options.model_id};
  auto items = complete_structured(req, provider, QaPairsSchema{count}).value;
  std::vector<QAPair> out;
  out.reserve(items.size());
  for (auto& item : items) {
    out.push_back(QAPair{std::move(item.question), std::move(item.answer), ChunkRef{doc_id, 0}, 0,
                         std::string(kGeneratorDirPmpt)});
  }
  return out;
}

inline nlohmann::ordered_json to_json(const QAPair& p) {
  return {{"question", p.question},
          {"answer", p.answer},
          {"doc_id", p.source.doc_id},
          {"chunk_index", p.source.chunk_index},
          {"cluster", p.cluster},
          {"generator", p.generator}};
}

inline QAPair qa_pair_from_json(const nlohmann::json& j, std::size_t line = 0) {
  QAPair p;
  p.question = io::field<std::string>(j, "question", line);
  p.answer = io::field<std::string>(j, "answer", line);
  p.source.doc_id = io::field<std::string>(j, "doc_id", line);
  p.source.chunk_index = j.value("chunk_index", std::size_t{0});
  p.cluster = io::field<std::size_t>(j, "cluster", line);
  p.generator = io::field<std::string>(j, "generator", line);
  return p;
}

}  // namespace ragsynth
