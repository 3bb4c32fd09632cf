#include <catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "ragsynth/pipeline.hpp"
#include "support/corpora.hpp"

using namespace ragsynth;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
  auto d = fs::temp_directory_path() / ("ragsynth-test-pipeline-" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

PipelineConfig config(std::uint64_t seed = 5) {
  PipelineConfig c;
  c.chunk_size = 8;
  c.embed_dim = 512;
  c.k_min = 2;
  c.k_max = 6;
  c.target_qa = 3;
  c.seed = seed;
  return c;
}

fs::path topic_input(const fs::path& dir) {
  const auto p = dir / "topics.jsonl";
  fixtures::write_documents(p, fixtures::make_topic_corpus(3));
  return p;
}

}  // namespace

TEST_CASE("config validation, merge and hashing") {
  PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.k_min = 5;
  bad.k_max = 3;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK_THROWS_AS(c.merge(nlohmann::json{{"chunk_sise", 10}}), DataError);
  CHECK_THROWS_AS(c.merge(nlohmann::json{{"temperature", 0.7}}), DataError);
  CHECK_THROWS_AS(c.merge(nlohmann::json{{"chat", {{"temperature", 0.7}}}}), DataError);
  CHECK_THROWS_AS(c.merge(nlohmann::json{{"chat", {{"modle", "x"}}}}), DataError);
  CHECK_NOTHROW(PipelineConfig{}.merge(nlohmann::json{{"chat", {{"temperature", 0}}}}));

  auto d = c;
  d.merge(nlohmann::json{{"seed", 9}, {"chat", {{"kind", "mock"}}}});
  CHECK(d.seed == 9);
  CHECK(d.hash() != c.hash());
  CHECK(c.run_id().starts_with("run-"));
  CHECK(c.run_id().size() == 16);

  auto e = c;
  e.merge(c.to_json());
  CHECK(e.hash() == c.hash());
}

TEST_CASE("full run writes every artifact and spans several clusters") {
  const auto dir = fresh("full");
  const auto res = run_pipeline(config(), topic_input(dir), dir / "run");
  CHECK(res.finished);
  for (const char* f : {"config.resolved", "state.json", "chunks.jsonl", "embeddings.bin", "clusters.jsonl",
                        "masked.jsonl", "qa.jsonl", "privacy_report.json", "qa_report.json"}) {
    CHECK(fs::exists(dir / "run" / f));
  }
  CHECK(res.state.completed == std::vector<std::string>{"ingest", "embed", "cluster", "mask", "qa"});

  std::set<std::size_t> clusters;
  std::size_t pairs = 0;
  io::for_each_jsonl(res.artifacts.qa, [&](const nlohmann::json& j, std::size_t) {
    clusters.insert(j["cluster"].get<std::size_t>());
    ++pairs;
  });
  CHECK(pairs >= 3);
  CHECK(clusters.size() >= 2);

  const auto chunks = detail::read_chunks(dir / "run" / "chunks.jsonl");
  CHECK(fs::file_size(dir / "run" / "embeddings.bin") == chunks.size() * 512 * sizeof(float));

  const auto report = nlohmann::json::parse(io::read_file(res.artifacts.qa_report));
  CHECK(report["attempts"].get<std::size_t>() ==
        report["successes"].get<std::size_t>() + report["failures"].size());
}

TEST_CASE("runs are reproducible and resumable") {
  const auto dir = fresh("resume");
  const auto input = topic_input(dir);
  run_pipeline(config(), input, dir / "a");
  const auto stopped = run_pipeline(config(), input, dir / "b", RunOptions{"cluster"});
  CHECK_FALSE(stopped.finished);
  CHECK(stopped.state.completed.back() == "cluster");
  CHECK_FALSE(fs::exists(dir / "b" / "masked.jsonl"));
  CHECK(resume(dir / "b").finished);
  for (const char* f : {"qa.jsonl", "privacy_report.json", "qa_report.json", "clusters.jsonl"}) {
    CHECK(io::read_file(dir / "a" / f) == io::read_file(dir / "b" / f));
  }

  const auto before = io::read_file(dir / "a" / "qa.jsonl");
  const auto again = resume(dir / "a");
  CHECK(again.finished);
  CHECK(io::read_file(dir / "a" / "qa.jsonl") == before);

  try {
    resume(dir / "a", config(6));
    FAIL("expected config mismatch");
  } catch (const StageError& e) {
    CHECK(std::string(e.what()).find("config mismatch") != std::string::npos);
  }

  io::write_file(dir / "a" / "clusters.jsonl", "{}\n");
  try {
    resume(dir / "a");
    FAIL("expected checksum failure");
  } catch (const StageError& e) {
    CHECK(e.stage() == "cluster");
  }
}

TEST_CASE("stage failures name the stage and leave no outputs") {
  const auto dir = fresh("fail");
  try {
    run_pipeline(config(), dir / "missing.txt", dir / "run");
    FAIL("expected ingest failure");
  } catch (const StageError& e) {
    CHECK(e.stage() == "ingest");
  }
  CHECK_FALSE(fs::exists(dir / "run"));
  CHECK_THROWS_AS(resume(dir / "nothing"), StageError);
}

TEST_CASE("evaluate stage scores the generated questions") {
  const auto dir = fresh("evaluate");
  auto c = config();
  c.evaluate = true;
  c.judge.kind = "mock";
  c.target_qa = 6;
  const auto res = run_pipeline(c, topic_input(dir), dir / "run");
  const auto ev = nlohmann::json::parse(io::read_file(dir / "run" / "evaluation.json"));
  CHECK(ev["questions"].get<std::size_t>() >= 2);
  CHECK(ev.contains("cosine_sim_to_diversity"));
  CHECK(ev["judge"]["score"].get<int>() >= 1);
  CHECK(res.state.completed.back() == "evaluate");
}

TEST_CASE("embeddings.bin round-trips float32 rows") {
  const auto dir = fresh("bin");
  const std::vector<EmbeddingVector> rows = {EmbeddingVector{0.5, -1.25, 3.0}, EmbeddingVector{1.0, 2.0, 4.0}};
  detail::write_embeddings_bin(dir / "e.bin", rows);
  CHECK(fs::file_size(dir / "e.bin") == 24);
  CHECK(detail::read_embeddings_bin(dir / "e.bin", 3) == rows);
  CHECK_THROWS(detail::read_embeddings_bin(dir / "e.bin", 4));
}
