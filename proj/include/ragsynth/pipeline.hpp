#pragma once

// Staged, checkpointed orchestration of the three agents:
// ingest -> embed -> cluster -> mask -> qa [-> evaluate].
// Every stage reads its inputs from the run directory and records checksums
// of its outputs in state.json, so an interrupted run resumes to the same bytes.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragsynth/corpus.hpp"
#include "ragsynth/detail/hash.hpp"
#include "ragsynth/detail/io.hpp"
#include "ragsynth/diversity.hpp"
#include "ragsynth/embedding.hpp"
#include "ragsynth/error.hpp"
#include "ragsynth/evaluation.hpp"
#include "ragsynth/llm.hpp"
#include "ragsynth/privacy.hpp"
#include "ragsynth/prompts.hpp"
#include "ragsynth/qa.hpp"

namespace ragsynth {

using ojson = nlohmann::ordered_json;

struct EmbeddingSettings {
  std::string kind = "local";  // local | remote
  std::string url;
  std::string model = "text-embedding-3-small";
  std::string api_key_env = "RAGSYNTH_EMBEDDING_API_KEY";
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
};

struct ChatSettings {
  std::string kind = "mock";  // mock | remote | none (judge only)
  std::string url;
  std::string model = "gpt-4o";
  std::string api_key_env = "RAGSYNTH_CHAT_API_KEY";
  std::size_t max_in_flight = 4;
  double requests_per_second = 0.0;
};

struct PipelineConfig {
  std::size_t chunk_size = 256;
  std::size_t embed_dim = 1536;
  bool normalize_embeddings = true;
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::size_t k = 0;            // fixed k; 0 selects k by the elbow rule
  std::size_t per_cluster = 0;  // 0 = ceil(target_qa / (k * n_qa))
  std::size_t target_qa = 10;
  std::size_t n_qa = 1;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
  EmbeddingSettings embedding;
  ChatSettings chat;
  ChatSettings judge{"none", "", "gpt-4.1", "RAGSYNTH_JUDGE_API_KEY", 4, 0.0};
  std::vector<std::string> detectors = {"regex", "gazetteer", "keyword"};
  std::string gazetteer_dir;
  MatchPolicy match_policy;
  bool fail_open = false;
  std::size_t workers = 4;
  bool evaluate = false;

  void validate() const {
    if (chunk_size == 0) throw InvalidArgument("chunk_size must be >= 1");
    if (embed_dim < 2) throw InvalidArgument("embed_dim must be >= 2");
    if (k_min == 0 || k_min > k_max) throw InvalidArgument("need 1 <= k_min <= k_max");
    if (n_qa == 0) throw InvalidArgument("n_qa must be >= 1");
    if (max_iter == 0) throw InvalidArgument("max_iter must be >= 1");
    if (per_cluster == 0 && target_qa == 0) throw InvalidArgument("set per_cluster or target_qa");
    if (detectors.empty()) throw InvalidArgument("detector set is empty");
  }

  ojson to_json() const {
    auto chat_json = [](const ChatSettings& c) {
      return ojson{{"kind", c.kind},
                   {"url", c.url},
                   {"model", c.model},
                   {"api_key_env", c.api_key_env},
                   {"max_in_flight", c.max_in_flight},
                   {"requests_per_second", c.requests_per_second}};
    };
    return {{"chunk_size", chunk_size},
            {"embed_dim", embed_dim},
            {"normalize_embeddings", normalize_embeddings},
            {"k_min", k_min},
            {"k_max", k_max},
            {"k", k},
            {"per_cluster", per_cluster},
            {"target_qa", target_qa},
            {"n_qa", n_qa},
            {"seed", seed},
            {"max_iter", max_iter},
            {"temperature", 0.0},
            {"embedding",
             {{"kind", embedding.kind},
              {"url", embedding.url},
              {"model", embedding.model},
              {"api_key_env", embedding.api_key_env},
              {"batch_size", embedding.batch_size},
              {"max_in_flight", embedding.max_in_flight}}},
            {"chat", chat_json(chat)},
            {"judge", chat_json(judge)},
            {"detectors", detectors},
            {"gazetteer_dir", gazetteer_dir},
            {"match_policy", {{"kind", match_policy.name()}, {"threshold", match_policy.threshold}}},
            {"fail_open", fail_open},
            {"workers", workers},
            {"evaluate", evaluate}};
  }

  /// Overlays the keys present in `j` onto this config. Unknown keys are errors.
  void merge(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("config must be a JSON object");
    static const std::vector<std::string> known = {
        "chunk_size", "embed_dim", "normalize_embeddings", "k_min", "k_max", "k", "per_cluster",
        "target_qa", "n_qa", "seed", "max_iter", "temperature", "embedding", "chat", "judge",
        "detectors", "gazetteer_dir", "match_policy", "fail_open", "workers", "evaluate"};
    for (const auto& [key, _] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) throw DataError("unknown config key '" + key + "'");
    }
    try {
      auto get = [&](const char* key, auto& dst) {
        if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
      };
      get("chunk_size", chunk_size);
      get("embed_dim", embed_dim);
      get("normalize_embeddings", normalize_embeddings);
      get("k_min", k_min);
      get("k_max", k_max);
      get("k", k);
      get("per_cluster", per_cluster);
      get("target_qa", target_qa);
      get("n_qa", n_qa);
      get("seed", seed);
      get("max_iter", max_iter);
      get("detectors", detectors);
      get("gazetteer_dir", gazetteer_dir);
      get("fail_open", fail_open);
      get("workers", workers);
      get("evaluate", evaluate);
      if (j.contains("temperature") && j["temperature"].get<double>() != 0.0) {
        throw DataError("temperature is fixed at 0 for all pipeline calls");
      }
      auto check_keys = [](const nlohmann::json& obj, const std::string& section,
                           std::initializer_list<std::string_view> allowed) {
        if (!obj.is_object()) throw DataError("config '" + section + "' must be an object");
        for (const auto& [key, value] : obj.items()) {
          if (key == "temperature" && section != "embedding") {
            if (value.get<double>() != 0.0) throw DataError("temperature is fixed at 0 for all pipeline calls");
            continue;
          }
          if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw DataError("unknown config key '" + section + "." + key + "'");
          }
        }
      };
      for (const char* section : {"chat", "judge"}) {
        if (j.contains(section)) {
          check_keys(j[section], section, {"kind", "url", "model", "api_key_env", "max_in_flight", "requests_per_second"});
        }
      }
      if (j.contains("match_policy")) check_keys(j["match_policy"], "match_policy", {"kind", "threshold"});
      if (j.contains("embedding")) {
        const auto& e = j["embedding"];
        check_keys(e, "embedding", {"kind", "url", "model", "api_key_env", "batch_size", "max_in_flight"});
        embedding.kind = e.value("kind", embedding.kind);
        embedding.url = e.value("url", embedding.url);
        embedding.model = e.value("model", embedding.model);
        embedding.api_key_env = e.value("api_key_env", embedding.api_key_env);
        embedding.batch_size = e.value("batch_size", embedding.batch_size);
        embedding.max_in_flight = e.value("max_in_flight", embedding.max_in_flight);
      }
      auto chat_from = [](const nlohmann::json& c, ChatSettings& dst) {
        dst.kind = c.value("kind", dst.kind);
        dst.url = c.value("url", dst.url);
        dst.model = c.value("model", dst.model);
        dst.api_key_env = c.value("api_key_env", dst.api_key_env);
        dst.max_in_flight = c.value("max_in_flight", dst.max_in_flight);
        dst.requests_per_second = c.value("requests_per_second", dst.requests_per_second);
      };
      if (j.contains("chat")) chat_from(j["chat"], chat);
      if (j.contains("judge")) chat_from(j["judge"], judge);
      if (j.contains("match_policy")) {
        const auto& m = j["match_policy"];
        const auto kind = m.value("kind", match_policy.name());
        if (kind != "jaccard" && kind != "exact") throw DataError("unknown match policy '" + kind + "'");
        match_policy.kind = kind == "exact" ? MatchPolicy::Kind::exact : MatchPolicy::Kind::jaccard;
        match_policy.threshold = m.value("threshold", match_policy.threshold);
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("bad config value: ") + e.what());
    }
  }

  static PipelineConfig from_file(const std::filesystem::path& path) {
    PipelineConfig c;
    try {
      c.merge(nlohmann::json::parse(io::read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    return c;
  }

  std::string hash() const { return hash::hex(hash::fnv1a(to_json().dump())); }
  std::string run_id() const { return "run-" + hash().substr(0, 12); }
};

// ---------------------------------------------------------------------------
// Providers from config

inline std::shared_ptr<const EmbeddingProvider> make_embedder(const PipelineConfig& c) {
  if (c.embedding.kind == "local") return std::make_shared<HashingEmbedder>(c.embed_dim, c.seed);
  if (c.embedding.kind == "remote") {
    RemoteEmbedderConfig r;
    r.url = c.embedding.url;
    r.model = c.embedding.model;
    r.api_key_env = c.embedding.api_key_env;
    r.dim = c.embed_dim;
    r.batch_size = c.embedding.batch_size;
    r.max_in_flight = c.embedding.max_in_flight;
    return std::make_shared<RemoteEmbedder>(r);
  }
  throw InvalidArgument("unknown embedding provider '" + c.embedding.kind + "'");
}

inline std::shared_ptr<const ChatProvider> make_chat(const ChatSettings& s, std::uint64_t seed) {
  if (s.kind == "mock") return std::make_shared<MockChatProvider>(seed, s.model.empty() ? "mock-chat" : "mock-" + s.model);
  if (s.kind == "remote") {
    RemoteChatConfig r;
    r.url = s.url;
    r.model = s.model;
    r.api_key_env = s.api_key_env;
    r.max_in_flight = s.max_in_flight;
    r.requests_per_second = s.requests_per_second;
    return std::make_shared<RemoteChatProvider>(r);
  }
  if (s.kind == "none") return nullptr;
  throw InvalidArgument("unknown chat provider '" + s.kind + "'");
}

inline DetectorSet make_detectors(const PipelineConfig& c, std::shared_ptr<const ChatProvider> chat) {
  std::optional<std::filesystem::path> dir;
  if (!c.gazetteer_dir.empty()) dir = c.gazetteer_dir;
  return make_detector_set(c.detectors, std::move(chat), dir);
}

// ---------------------------------------------------------------------------
// Run state

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"ingest", "embed", "cluster", "mask", "qa", "evaluate"};
  return names;
}

inline std::string file_checksum(const std::filesystem::path& p) { return hash::hex(hash::fnv1a(io::read_file(p))); }

struct RunState {
  std::string run_id;
  std::string config_hash;
  std::string input;
  std::vector<std::string> completed;
  std::map<std::string, std::map<std::string, std::string>> outputs;  // stage -> file -> checksum
  ojson metadata = ojson::object();

  bool done(const std::string& stage) const {
    return std::find(completed.begin(), completed.end(), stage) != completed.end();
  }

  ojson to_json() const {
    ojson outs = ojson::object();
    for (const auto& [stage, files] : outputs) {
      ojson f = ojson::object();
      for (const auto& [name, sum] : files) f[name] = sum;
      outs[stage] = std::move(f);
    }
    return {{"run_id", run_id},    {"config_hash", config_hash}, {"input", input},
            {"completed", completed}, {"outputs", std::move(outs)}, {"metadata", metadata}};
  }

  static RunState load(const std::filesystem::path& dir) {
    const auto path = dir / "state.json";
    if (!std::filesystem::exists(path)) throw StageError("resume", "no run state in " + dir.string());
    RunState s;
    try {
      const auto j = nlohmann::json::parse(io::read_file(path));
      s.run_id = j.at("run_id").get<std::string>();
      s.config_hash = j.at("config_hash").get<std::string>();
      s.input = j.at("input").get<std::string>();
      s.completed = j.at("completed").get<std::vector<std::string>>();
      for (const auto& [stage, files] : j.at("outputs").items()) {
        for (const auto& [name, sum] : files.items()) s.outputs[stage][name] = sum.get<std::string>();
      }
      s.metadata = j.value("metadata", ojson::object());
    } catch (const nlohmann::json::exception& e) {
      throw StageError("resume", std::string("corrupt state.json: ") + e.what());
    }
    return s;
  }

  void save(const std::filesystem::path& dir) const { io::write_file(dir / "state.json", to_json().dump(2) + "\n"); }
};

struct RunArtifacts {
  std::filesystem::path qa;
  std::filesystem::path privacy_report;
  std::filesystem::path qa_report;
};

struct RunOptions {
  /// Stop (successfully) once this stage has completed.
  std::optional<std::string> stop_after;
};

struct RunResult {
  RunState state;
  bool finished = false;
  RunArtifacts artifacts;
};

namespace detail {

inline void write_embeddings_bin(const std::filesystem::path& path, const std::vector<EmbeddingVector>& rows) {
  std::string bytes;
  for (const auto& v : rows) {
    for (double x : v.values()) {
      const float f = static_cast<float>(x);
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  }
  io::write_file(path, bytes);
}

inline std::vector<EmbeddingVector> read_embeddings_bin(const std::filesystem::path& path, std::size_t dim) {
  const auto bytes = io::read_file(path);
  if (bytes.size() % (4 * dim) != 0) throw DataError("embeddings.bin size is not a multiple of the row size");
  std::vector<EmbeddingVector> rows;
  for (std::size_t off = 0; off < bytes.size(); off += 4 * dim) {
    std::vector<double> v(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 4 * d + b])) << (8 * b);
      }
      float f;
      std::memcpy(&f, &bits, sizeof f);
      v[d] = f;
    }
    rows.emplace_back(std::move(v));
  }
  return rows;
}

inline std::vector<Chunk> read_chunks(const std::filesystem::path& path) {
  std::vector<Chunk> chunks;
  io::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    chunks.push_back(Chunk{io::field<std::string>(j, "doc_id", line), io::field<std::size_t>(j, "index", line),
                           io::field<std::string>(j, "text", line), io::field<std::size_t>(j, "token_count", line)});
  });
  return chunks;
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Executes the pipeline stage by stage inside one run directory.
class PipelineRunner {
 public:
  PipelineRunner(PipelineConfig config, std::filesystem::path out_dir)
      : config_(std::move(config)), dir_(std::move(out_dir)) {
    config_.validate();
  }

  /// Starts or continues a run. An existing run directory must hold the same config.
  RunResult run(const std::filesystem::path& input, const RunOptions& options = {}) {
    if (std::filesystem::exists(dir_ / "state.json")) {
      state_ = RunState::load(dir_);
      if (state_.config_hash != config_.hash()) throw StageError("resume", "config mismatch");
    } else {
      state_ = RunState{config_.run_id(), config_.hash(), input.string(), {}, {}, ojson::object()};
    }
    return execute(options);
  }

  /// Continues an existing run from its first incomplete stage.
  RunResult resume(const RunOptions& options = {}) {
    state_ = RunState::load(dir_);
    if (state_.completed.empty()) throw StageError("resume", "run has no completed stage");
    if (state_.config_hash != config_.hash()) throw StageError("resume", "config mismatch");
    return execute(options);
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  RunResult execute(const RunOptions& options) {
    const std::map<std::string, std::function<std::vector<std::string>()>> stages = {
        {"ingest", [&] { return ingest(); }}, {"embed", [&] { return embed(); }},
        {"cluster", [&] { return cluster(); }}, {"mask", [&] { return mask(); }},
        {"qa", [&] { return qa(); }},         {"evaluate", [&] { return evaluate(); }}};
    RunResult result;
    for (const auto& stage : stage_names()) {
      if (stage == "evaluate" && !config_.evaluate) continue;
      if (state_.done(stage)) {
        verify(stage);
      } else {
        std::vector<std::string> files;
        try {
          files = stages.at(stage)();
        } catch (const StageError&) {
          throw;
        } catch (const std::exception& e) {
          if (!state_.completed.empty()) state_.save(dir_);
          throw StageError(stage, e.what());
        }
        auto& sums = state_.outputs[stage];
        for (const auto& f : files) sums[f] = file_checksum(dir_ / f);
        state_.completed.push_back(stage);
        state_.metadata["updated_at"] = detail::utc_now();
        state_.save(dir_);
      }
      if (options.stop_after && *options.stop_after == stage) {
        result.state = state_;
        return result;
      }
    }
    result.state = state_;
    result.finished = true;
    result.artifacts = {dir_ / "qa.jsonl", dir_ / "privacy_report.json", dir_ / "qa_report.json"};
    return result;
  }

  void verify(const std::string& stage) const {
    const auto it = state_.outputs.find(stage);
    if (it == state_.outputs.end()) throw StageError(stage, "completed stage has no recorded outputs");
    for (const auto& [name, sum] : it->second) {
      const auto path = dir_ / name;
      if (!std::filesystem::exists(path)) throw StageError(stage, "missing output " + name);
      if (file_checksum(path) != sum) throw StageError(stage, "checksum mismatch for " + name);
    }
  }

  std::vector<std::string> ingest() {
    const auto docs = load_corpus(state_.input);
    std::filesystem::create_directories(dir_);
    io::write_file(dir_ / "config.resolved", config_.to_json().dump(2) + "\n");
    const auto chunks = chunk_corpus(docs, config_.chunk_size);
    if (chunks.empty()) throw DataError("corpus contains no tokens");
    std::vector<ojson> rows;
    for (const auto& c : chunks) {
      rows.push_back({{"doc_id", c.doc_id}, {"index", c.index}, {"text", c.text}, {"token_count", c.token_count}});
    }
    io::write_file(dir_ / "chunks.jsonl", io::to_jsonl(rows));
    auto chat = make_chat(config_.chat, config_.seed);
    auto judge = make_chat(config_.judge, config_.seed);
    state_.metadata["config"] = config_.to_json();
    state_.metadata["created_at"] = detail::utc_now();
    state_.metadata["documents"] = docs.size();
    state_.metadata["providers"] = {{"embedding", make_embedder(config_)->id()},
                                    {"chat", chat ? chat->id() : "none"},
                                    {"judge", judge ? judge->id() : "none"}};
    state_.metadata["prompt_versions"] = {{"qa", prompts::kQaVersion},
                                          {"judge", prompts::kJudgeVersion},
                                          {"entities", prompts::kEntityVersion}};
    state_.metadata["normalize_embeddings"] = config_.normalize_embeddings;
    return {"config.resolved", "chunks.jsonl"};
  }

  std::vector<std::string> embed() {
    const auto chunks = detail::read_chunks(dir_ / "chunks.jsonl");
    const auto embedder = make_embedder(config_);
    const auto embedded = embed_chunks(chunks, *embedder, config_.normalize_embeddings);
    std::vector<EmbeddingVector> rows;
    rows.reserve(embedded.size());
    for (const auto& e : embedded) rows.push_back(e.vector);
    detail::write_embeddings_bin(dir_ / "embeddings.bin", rows);
    return {"embeddings.bin"};
  }

  std::vector<std::string> cluster() {
    const auto chunks = detail::read_chunks(dir_ / "chunks.jsonl");
    const auto vectors = detail::read_embeddings_bin(dir_ / "embeddings.bin", config_.embed_dim);
    if (vectors.size() != chunks.size()) throw DataError("embeddings.bin rows do not match chunks.jsonl");
    std::vector<EmbeddedChunk> embedded;
    for (std::size_t i = 0; i < chunks.size(); ++i) embedded.push_back({chunks[i], vectors[i]});

    ojson elbow = nullptr;
    std::size_t k = config_.k;
    if (k == 0) {
      const std::size_t distinct = count_distinct(vectors);
      const std::size_t hi = std::min(config_.k_max, distinct);
      const std::size_t lo = std::min(config_.k_min, hi);
      const auto scores = elbow_scores(vectors, lo, hi, config_.seed, config_.max_iter, config_.workers);
      k = scores.best_k;
      elbow = {{"k_min", lo}, {"k_max", hi}, {"mean_intra_distance", scores.mean_intra}};
    }
    const auto result = kmeans(vectors, k, config_.seed, config_.max_iter);
    const std::size_t per_cluster =
        config_.per_cluster ? config_.per_cluster : (config_.target_qa + k * config_.n_qa - 1) / (k * config_.n_qa);
    const auto reps = select_representatives(result, embedded, per_cluster);
    std::vector<ojson> rows;
    for (const auto& r : reps) {
      rows.push_back({{"doc_id", r.chunk.doc_id},
                      {"chunk_index", r.chunk.index},
                      {"cluster", r.cluster},
                      {"distance", r.distance_to_centroid}});
    }
    io::write_file(dir_ / "clusters.jsonl", io::to_jsonl(rows));
    const ojson meta = {{"k", k},
                        {"inertia", result.inertia},
                        {"seed", config_.seed},
                        {"iterations", result.iterations},
                        {"per_cluster", per_cluster},
                        {"assignments", result.assignments},
                        {"elbow", elbow}};
    io::write_file(dir_ / "clusters.meta.json", meta.dump(2) + "\n");
    return {"clusters.jsonl", "clusters.meta.json"};
  }

  std::vector<std::string> mask() {
    const auto chunks = detail::read_chunks(dir_ / "chunks.jsonl");
    std::map<std::pair<std::string, std::size_t>, const Chunk*> by_ref;
    for (const auto& c : chunks) by_ref[{c.doc_id, c.index}] = &c;
    std::vector<MaskInput> inputs;
    io::for_each_jsonl(dir_ / "clusters.jsonl", [&](const nlohmann::json& j, std::size_t line) {
      ChunkRef ref{io::field<std::string>(j, "doc_id", line), io::field<std::size_t>(j, "chunk_index", line)};
      const auto it = by_ref.find({ref.doc_id, ref.chunk_index});
      if (it == by_ref.end()) throw DataError("sample refers to unknown chunk " + ref.key(), line);
      inputs.push_back({ref, io::field<std::size_t>(j, "cluster", line), it->second->text});
    });
    auto chat = make_chat(config_.chat, config_.seed);
    const auto detectors = make_detectors(config_, chat);
    auto masked = mask_samples(inputs, detectors, MaskOptions{config_.fail_open, config_.workers});
    masked.report.policy["match_policy"] = {{"kind", config_.match_policy.name()},
                                            {"threshold", config_.match_policy.threshold}};
    masked.report.policy["mode"] = "production";
    std::vector<ojson> rows;
    for (const auto& d : masked.documents) rows.push_back(to_json(d));
    io::write_file(dir_ / "masked.jsonl", io::to_jsonl(rows));
    io::write_file(dir_ / "privacy_report.json", masked.report.to_json().dump(2) + "\n");
    return {"masked.jsonl", "privacy_report.json"};
  }

  std::vector<std::string> qa() {
    std::vector<MaskedDocument> docs;
    io::for_each_jsonl(dir_ / "masked.jsonl", [&](const nlohmann::json& j, std::size_t line) {
      docs.push_back(masked_document_from_json(j, line));
    });
    const auto chat = make_chat(config_.chat, config_.seed);
    if (!chat) throw InvalidArgument("qa stage needs a chat provider");
    CurationOptions opts;
    opts.workers = config_.workers;
    const auto curated = curate_dataset(docs, config_.n_qa, *chat, opts);
    std::vector<ojson> rows;
    for (const auto& p : curated.pairs) rows.push_back(to_json(p));
    io::write_file(dir_ / "qa.jsonl", io::to_jsonl(rows));
    io::write_file(dir_ / "qa_report.json", curated.report.to_json().dump(2) + "\n");
    return {"qa.jsonl", "qa_report.json"};
  }

  std::vector<std::string> evaluate() {
    std::vector<std::string> questions;
    io::for_each_jsonl(dir_ / "qa.jsonl", [&](const nlohmann::json& j, std::size_t line) {
      questions.push_back(io::field<std::string>(j, "question", line));
    });
    ojson out = {{"questions", questions.size()}};
    if (questions.size() >= 2) {
      const auto score = cosine_sim_to_diversity(questions, *make_embedder(config_));
      out["cosine_sim_to_diversity"] = score.value;
      out["embedder"] = score.embedder_id;
    }
    if (auto judge = make_chat(config_.judge, config_.seed); judge && !questions.empty()) {
      const auto v = judge_diversity(questions, *judge);
      out["judge"] = {{"score", v.score}, {"model", v.judge_model}, {"prompt_version", v.prompt_version}};
    }
    io::write_file(dir_ / "evaluation.json", out.dump(2) + "\n");
    return {"evaluation.json"};
  }

  PipelineConfig config_;
  std::filesystem::path dir_;
  RunState state_;
};

inline RunResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& input,
                              const std::filesystem::path& out_dir, const RunOptions& options = {}) {
  return PipelineRunner(config, out_dir).run(input, options);
}

/// Resumes the run in `run_dir`. Without `config` the stored config.resolved is used.
inline RunResult resume(const std::filesystem::path& run_dir, const std::optional<PipelineConfig>& config = std::nullopt,
                        const RunOptions& options = {}) {
  PipelineConfig cfg;
  if (config) {
    cfg = *config;
  } else {
    const auto stored = run_dir / "config.resolved";
    if (!std::filesystem::exists(stored)) throw StageError("resume", "no config.resolved in " + run_dir.string());
    cfg = PipelineConfig::from_file(stored);
  }
  return PipelineRunner(cfg, run_dir).resume(options);
}

}  // namespace ragsynth
