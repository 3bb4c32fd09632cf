#include <catch_amalgamated.hpp>

#include <cmath>

#include "ragsynth/evaluation.hpp"
#include "support/corpora.hpp"
#include "support/oracles.hpp"

using namespace ragsynth;

TEST_CASE("cosine diversity on analytic cases") {
  const HashingEmbedder emb(64);
  CHECK(cosine_sim_to_diversity({"same question?", "same question?"}, emb).value == Catch::Approx(-1.0).margin(1e-9));
  const std::vector<EmbeddingVector> ortho = {EmbeddingVector{1.0, 0.0}, EmbeddingVector{0.0, 1.0}};
  CHECK(std::abs(cosine_sim_to_diversity(ortho)) <= 1e-9);
  const double r = 1.0 / std::sqrt(2.0);
  const std::vector<EmbeddingVector> tri = {EmbeddingVector{1.0, 0.0}, EmbeddingVector{0.0, 1.0},
                                            EmbeddingVector{r, r}};
  CHECK(cosine_sim_to_diversity(tri) == Catch::Approx(oracle::negated_mean_cosine({{1, 0}, {0, 1}, {r, r}})));
  CHECK(cosine_sim_to_diversity(tri) == Catch::Approx(-0.4714).margin(1e-4));
  CHECK_THROWS_AS(cosine_sim_to_diversity({"only one"}, emb), InvalidArgument);

  const auto score = cosine_sim_to_diversity({"a b c", "d e f", "g h i"}, emb);
  CHECK(score.metric_name == "cosine_sim_to_diversity");
  CHECK(score.set_size == 3);
  CHECK(score.embedder_id == emb.id());
}

TEST_CASE("judge verdicts are parsed and range checked") {
  const std::vector<std::string> qs = {"What is a comet?", "How is dough kneaded?", "Who owns the cargo?"};
  const MockChatProvider mock(0);
  const auto v = judge_diversity(qs, mock);
  CHECK(v.score >= 1);
  CHECK(v.score <= 10);
  CHECK(v.score == judge_diversity(qs, mock).score);
  CHECK(v.prompt_version == "judge-v1");
  CHECK(judge_diversity({"Same?", "Same?"}, mock).score < v.score);

  fixtures::ScriptedChatProvider ten({"10"});
  CHECK(judge_diversity(qs, ten).score == 10);
  fixtures::ScriptedChatProvider zero({"0"});
  CHECK_THROWS_AS(judge_diversity(qs, zero), ScaleError);
  fixtures::ScriptedChatProvider eleven({"11"});
  CHECK_THROWS_AS(judge_diversity(qs, eleven), ScaleError);
  CHECK_THROWS_AS(judge_diversity({}, mock), InvalidArgument);

  const auto p = prompts::judge_score(qs);
  CHECK(p.user.find("semantic variety") != std::string::npos);
  CHECK(p.user.find("topical coverage") != std::string::npos);
  CHECK(p.user.find("phrasing differences") != std::string::npos);
}

TEST_CASE("interleaving alternates clusters") {
  std::vector<QAPair> pairs;
  for (std::size_t c : {0, 0, 0, 1, 2, 2}) pairs.push_back({"q" + std::to_string(pairs.size()), "a", {}, c, "pipeline"});
  const auto out = interleave_by_cluster(pairs, 5);
  std::vector<std::size_t> clusters;
  for (const auto& p : out) clusters.push_back(p.cluster);
  CHECK(clusters == std::vector<std::size_t>{0, 1, 2, 0, 2});
}

TEST_CASE("comparison table covers every size and mode") {
  const auto corpus = fixtures::make_topic_corpus(2);
  ComparisonProviders p;
  p.clustering_embedder = std::make_shared<HashingEmbedder>(512);
  p.metric_embedder = p.clustering_embedder;
  p.generator = std::make_shared<MockChatProvider>(2);
  p.judge = p.generator;
  p.detectors = default_detectors();
  ComparisonSettings s;
  s.chunk_size = 8;
  s.k_max = 6;
  s.seed = 2;
  const auto t = compare_generators(corpus, {10}, {"pipeline", "dirpmpt"}, p, s);
  REQUIRE(t.rows.size() == 1);
  REQUIRE(t.rows[0].cells.size() == 2);
  for (const auto& c : t.rows[0].cells) {
    CHECK_FALSE(c.error);
    CHECK(c.produced == 10);
    CHECK(c.cosine);
    CHECK(c.judge);
  }
  CHECK_FALSE(t.has_errors());
  const auto text = t.to_text();
  CHECK(text.find("pipeline judge") < text.find("dirpmpt judge"));
  CHECK(text.find("dirpmpt judge") < text.find("pipeline cosine"));
  const auto j = t.to_json();
  CHECK(j["rows"][0]["cells"]["dirpmpt"]["requested"] == 10);

  fixtures::ScriptedChatProvider prose({"nothing useful"});
  auto broken = p;
  broken.generator = std::shared_ptr<const ChatProvider>(&prose, [](const ChatProvider*) {});
  broken.judge = nullptr;
  const auto bad = compare_generators(corpus, {4}, {"dirpmpt"}, broken, s);
  CHECK(bad.has_errors());
  CHECK(bad.rows[0].cells[0].partial);
  CHECK_THROWS_AS(compare_generators(corpus, {4}, {"other"}, p, s), InvalidArgument);
}
