#pragma once

// Question-set diversity: negated mean pairwise cosine similarity, the
// 1-10 LLM judge, and the generator comparison table.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragsynth/corpus.hpp"
#include "ragsynth/diversity.hpp"
#include "ragsynth/embedding.hpp"
#include "ragsynth/error.hpp"
#include "ragsynth/llm.hpp"
#include "ragsynth/privacy.hpp"
#include "ragsynth/prompts.hpp"
#include "ragsynth/qa.hpp"

namespace ragsynth {

inline constexpr std::string_view kCosineDiversityMetric = "cosine_sim_to_diversity";

struct DiversityScore {
  std::string metric_name{kCosineDiversityMetric};
  double value = 0.0;
  std::size_t set_size = 0;
  std::string embedder_id;
};

/// −(mean cosine similarity over all unordered pairs). Closer to zero (or
/// positive) means more diverse.
inline double cosine_sim_to_diversity(std::span<const EmbeddingVector> vectors) {
  if (vectors.size() < 2) throw InvalidArgument("diversity needs at least 2 items");
  std::vector<EmbeddingVector> unit;
  unit.reserve(vectors.size());
  for (const auto& v : vectors) unit.push_back(normalize(v));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < unit.size(); ++i) {
    for (std::size_t j = i + 1; j < unit.size(); ++j, ++pairs) {
      if (unit[i].dim() != unit[j].dim()) throw DimensionMismatch(unit[i].dim(), unit[j].dim());
      sum += std::clamp(dot(unit[i].values(), unit[j].values()), -1.0, 1.0);
    }
  }
  return -(sum / static_cast<double>(pairs));
}

inline DiversityScore cosine_sim_to_diversity(const std::vector<std::string>& questions,
                                              const EmbeddingProvider& embedder) {
  if (questions.size() < 2) throw InvalidArgument("diversity needs at least 2 questions");
  const auto vectors = embed_texts(questions, embedder);
  return DiversityScore{std::string(kCosineDiversityMetric), cosine_sim_to_diversity(vectors),
                        questions.size(), embedder.id()};
}

struct JudgeVerdict {
  int score = 0;
  std::string judge_model;
  std::string prompt_version;
  std::string raw_reply;
};

inline constexpr int kJudgeMin = 1;
inline constexpr int kJudgeMax = 10;

inline JudgeVerdict judge_diversity(const std::vector<std::string>& questions, const ChatProvider& judge) {
  if (questions.empty()) throw InvalidArgument("judge needs at least 1 question");
  const auto prompt = prompts::judge_score(questions);
  ChatRequest req{prompt.system, prompt.user, 0.0, 16, judge.model()};
  auto reply = complete_structured(req, judge, JudgeScoreSchema{});
  if (reply.value < kJudgeMin || reply.value > kJudgeMax) {
    throw ScaleError("judge score " + std::to_string(reply.value) + " outside [1, 10]");
  }
  return JudgeVerdict{static_cast<int>(reply.value), judge.model(), std::string(prompts::kJudgeVersion),
                      std::move(reply.raw_text)};
}

// ---------------------------------------------------------------------------
// Generator comparison

/// Clamps [k_min, k_max] to the number of distinct vectors, then runs the
/// elbow rule; a window too small for the rule yields its lower end.
inline std::size_t choose_k(std::span<const EmbeddingVector> vectors, std::size_t k_min, std::size_t k_max,
                            std::uint64_t seed) {
  const std::size_t distinct = count_distinct(vectors);
  if (distinct == 0) throw InvalidArgument("no vectors to cluster");
  const std::size_t hi = std::min(k_max, distinct);
  const std::size_t lo = std::min(std::max<std::size_t>(1, k_min), hi);
  return select_k(vectors, lo, hi, seed);
}

/// Orders pairs round-robin across clusters (cluster order, then input order
/// within each cluster) and keeps the first `limit`.
inline std::vector<QAPair> interleave_by_cluster(const std::vector<QAPair>& pairs, std::size_t limit) {
  std::map<std::size_t, std::vector<const QAPair*>> by_cluster;
  for (const auto& p : pairs) by_cluster[p.cluster].push_back(&p);
  std::vector<QAPair> out;
  for (std::size_t round = 0; out.size() < limit; ++round) {
    bool any = false;
    for (const auto& [_, members] : by_cluster) {
      if (round < members.size() && out.size() < limit) {
        out.push_back(*members[round]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

struct ComparisonSettings {
  std::size_t chunk_size = 256;
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
  bool normalize_embeddings = true;
};

struct ComparisonProviders {
  std::shared_ptr<const EmbeddingProvider> clustering_embedder;
  std::shared_ptr<const EmbeddingProvider> metric_embedder;
  std::shared_ptr<const ChatProvider> generator;
  std::shared_ptr<const ChatProvider> judge;  // optional
  DetectorSet detectors;
};

/// Pipeline-mode question set: chunk, embed, cluster, sample ceil(size / k)
/// per cluster, mask, generate one pair per sample, interleave by cluster.
inline std::vector<QAPair> pipeline_questions(const std::vector<Document>& corpus, std::size_t size,
                                              const ComparisonSettings& s, const ComparisonProviders& p) {
  const auto chunks = chunk_corpus(corpus, s.chunk_size);
  if (chunks.empty()) throw InvalidArgument("corpus has no tokens");
  const auto embedded = embed_chunks(chunks, *p.clustering_embedder, s.normalize_embeddings);
  std::vector<EmbeddingVector> vectors;
  for (const auto& e : embedded) vectors.push_back(e.vector);
  const auto k = choose_k(vectors, s.k_min, s.k_max, s.seed);
  const auto clusters = kmeans(vectors, k, s.seed, s.max_iter);
  const auto reps = select_representatives(clusters, embedded, (size + k - 1) / k);
  std::vector<MaskInput> inputs;
  for (const auto& r : reps) inputs.push_back({{r.chunk.doc_id, r.chunk.index}, r.cluster, r.chunk.text});
  const auto masked = mask_samples(inputs, p.detectors);
  const auto curated = curate_dataset(masked.documents, 1, *p.generator);
  return interleave_by_cluster(curated.pairs, size);
}

inline std::string join_documents(const std::vector<Document>& corpus) {
  std::string full;
  for (const auto& d : corpus) {
    if (!full.empty()) full += "\n\n";
    full += d.text;
  }
  return full;
}

struct ComparisonCell {
  std::string mode;
  std::size_t requested = 0;
  std::size_t produced = 0;
  std::optional<double> cosine;
  std::optional<int> judge;
  std::optional<std::string> error;
  bool partial = false;
};

struct ComparisonRow {
  std::size_t size = 0;
  std::vector<ComparisonCell> cells;  // one per mode, in mode order
};

struct ComparisonTable {
  std::vector<std::string> modes;
  std::vector<ComparisonRow> rows;
  std::string metric_embedder;
  std::string judge_model;

  bool has_errors() const {
    for (const auto& r : rows) {
      for (const auto& c : r.cells) {
        if (c.error) return true;
      }
    }
    return false;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json rows_j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json cells = nlohmann::ordered_json::object();
      for (const auto& c : r.cells) {
        nlohmann::ordered_json cell = {{"requested", c.requested}, {"produced", c.produced}};
        cell["judge"] = c.judge ? nlohmann::ordered_json(*c.judge) : nlohmann::ordered_json(nullptr);
        cell["cosine_sim_to_diversity"] = c.cosine ? nlohmann::ordered_json(*c.cosine) : nlohmann::ordered_json(nullptr);
        cell["partial"] = c.partial;
        if (c.error) cell["error"] = *c.error;
        cells[c.mode] = std::move(cell);
      }
      rows_j.push_back({{"size", r.size}, {"cells", std::move(cells)}});
    }
    return {{"modes", modes},
            {"metric_embedder", metric_embedder},
            {"judge_model", judge_model},
            {"judge_prompt_version", prompts::kJudgeVersion},
            {"rows", std::move(rows_j)}};
  }

  /// Aligned text table: judge columns for every mode, then cosine columns.
  std::string to_text() const {
    std::vector<std::string> header = {"QA set size"};
    for (const auto& m : modes) header.push_back(m + " judge");
    for (const auto& m : modes) header.push_back(m + " cosine");
    std::vector<std::vector<std::string>> body;
    for (const auto& r : rows) {
      std::vector<std::string> line = {std::to_string(r.size)};
      for (const auto& c : r.cells) {
        line.push_back(c.error ? "ERR" : c.judge ? std::to_string(*c.judge) : "-");
      }
      for (const auto& c : r.cells) {
        char buf[32];
        if (c.cosine) {
          std::snprintf(buf, sizeof(buf), "%.4f%s", *c.cosine, c.partial ? "*" : "");
        } else {
          std::snprintf(buf, sizeof(buf), "%s", c.error ? "ERR" : "-");
        }
        line.push_back(buf);
      }
      body.push_back(std::move(line));
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) {
      width[i] = header[i].size();
      for (const auto& l : body) width[i] = std::max(width[i], l[i].size());
    }
    auto render = [&](const std::vector<std::string>& cells) {
      std::string out;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += " | ";
        out += cells[i];
        if (i + 1 < cells.size()) out.append(width[i] - cells[i].size(), ' ');
      }
      return out + "\n";
    };
    std::string out = render(header);
    std::size_t rule = 0;
    for (std::size_t w : width) rule += w;
    out.append(rule + 3 * (width.size() - 1), '-');
    out += '\n';
    for (const auto& l : body) out += render(l);
    return out;
  }
};

/// For each size and mode ("pipeline" or "dirpmpt"), generates that many
/// questions and scores them. Per-cell failures are recorded in the cell.
inline ComparisonTable compare_generators(const std::vector<Document>& corpus, const std::vector<std::size_t>& sizes,
                                          const std::vector<std::string>& modes, const ComparisonProviders& providers,
                                          const ComparisonSettings& settings = {}) {
  if (corpus.empty()) throw InvalidArgument("corpus is empty");
  if (!providers.metric_embedder || !providers.generator) throw InvalidArgument("metric embedder and generator required");
  for (const auto& m : modes) {
    if (m != kGeneratorPipeline && m != kGeneratorDirPmpt) throw InvalidArgument("unknown mode '" + m + "'");
    if (m == kGeneratorPipeline && (!providers.clustering_embedder || providers.detectors.empty())) {
      throw InvalidArgument("pipeline mode needs a clustering embedder and detectors");
    }
  }
  ComparisonTable table;
  table.modes = modes;
  table.metric_embedder = providers.metric_embedder->id();
  table.judge_model = providers.judge ? providers.judge->model() : "";
  for (const auto size : sizes) {
    if (size == 0) throw InvalidArgument("sizes must be positive");
    ComparisonRow row;
    row.size = size;
    for (const auto& mode : modes) {
      ComparisonCell cell;
      cell.mode = mode;
      cell.requested = size;
      try {
        const auto pairs = mode == kGeneratorPipeline
                               ? pipeline_questions(corpus, size, settings, providers)
                               : dirpmpt_generate(join_documents(corpus), size, *providers.generator);
        std::vector<std::string> questions;
        for (const auto& p : pairs) questions.push_back(p.question);
        cell.produced = questions.size();
        cell.partial = cell.produced < size;
        if (questions.size() >= 2) cell.cosine = cosine_sim_to_diversity(questions, *providers.metric_embedder).value;
        if (providers.judge && !questions.empty()) cell.judge = judge_diversity(questions, *providers.judge).score;
      } catch (const Error& e) {
        cell.error = e.what();
        cell.partial = true;
      }
      row.cells.push_back(std::move(cell));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace ragsynth
