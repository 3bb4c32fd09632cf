#include <catch_amalgamated.hpp>

#include "ragsynth/qa.hpp"
#include "support/corpora.hpp"

using namespace ragsynth;

namespace {

MaskedDocument masked(const std::string& id, const std::string& text, const DetectorSet& d = default_detectors()) {
  auto r = mask_samples({{{id, 0}, 0, text}}, d);
  return r.documents.front();
}

std::string pairs_json(const std::vector<std::pair<std::string, std::string>>& items) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [q, a] : items) arr.push_back({{"question", q}, {"answer", a}});
  return nlohmann::json{{"pairs", arr}}.dump();
}

}  // namespace

TEST_CASE("generate_qa returns n grounded pairs from the mock") {
  const auto doc = masked("d", "John sailed the harbour. The cargo was grain. The tanker left at noon.");
  const MockChatProvider mock(2);
  const auto a = generate_qa(doc, 2, mock);
  REQUIRE_FALSE(a.failure);
  REQUIRE(a.pairs.size() == 2);
  CHECK(a.pairs == generate_qa(doc, 2, mock).pairs);
  for (const auto& p : a.pairs) {
    CHECK(doc.masked_text.find(p.answer) != std::string::npos);
    CHECK(p.source == ChunkRef{"d", 0});
    CHECK(p.generator == "pipeline");
    CHECK(p.answer.find("John") == std::string::npos);
  }
  CHECK_THROWS_AS(generate_qa(doc, 0, mock), InvalidArgument);
  MaskedDocument empty;
  CHECK_THROWS_AS(generate_qa(empty, 2, mock), InvalidArgument);
}

TEST_CASE("leak filter rejects the whole document") {
  const auto doc = masked("d", "John met Al at the wharf.");
  REQUIRE(doc.replacements.size() == 1);
  CHECK(leaks_surface("John did", doc));
  CHECK_FALSE(leaks_surface("[FIRSTNAME_1] did", doc));

  fixtures::ScriptedChatProvider leaky({pairs_json({{"Who met Al?", "John did"}, {"Where?", "At the wharf."}})});
  const auto r = generate_qa(doc, 2, leaky);
  CHECK(r.pairs.empty());
  REQUIRE(r.failure);
  CHECK(r.failure->starts_with("leakage"));

  // Short surfaces only leak as whole words.
  const GazetteerDetector al("al", {Gazetteer{EntityType("FIRSTNAME"), {"Al"}, true}});
  const auto short_doc = masked("s", "Al rowed.", {std::make_shared<GazetteerDetector>(al)});
  CHECK(leaks_surface("Ask Al.", short_doc));
  CHECK_FALSE(leaks_surface("Always rowing.", short_doc));
}

TEST_CASE("curation report arithmetic") {
  std::vector<MaskedDocument> docs;
  for (int i = 0; i < 5; ++i) {
    docs.push_back(masked("d" + std::to_string(i), "Sentence one for " + std::to_string(i) + ". Sentence two here."));
  }
  const MockChatProvider mock(9);
  const auto ok = curate_dataset(docs, 2, mock, CurationOptions{{}, 3});
  CHECK(ok.pairs.size() == 10);
  CHECK(ok.report.attempts == 5);
  CHECK(ok.report.successes == 5);
  CHECK(ok.report.failures.empty());
  CHECK(ok.pairs[2].source.doc_id == "d1");

  // One document answered with prose twice: a parse failure.
  auto inner = std::make_shared<MockChatProvider>(9);
  std::uint64_t salt = 0;
  std::size_t selected = 0;
  for (; salt < 1000; ++salt) {
    const fixtures::FaultyChatProvider probe(inner, salt, 5);
    selected = 0;
    for (const auto& d : docs) selected += probe.selects(d.masked_text);
    if (selected == 1) break;
  }
  REQUIRE(selected == 1);
  const fixtures::FaultyChatProvider faulty(inner, salt, 5);
  const auto one_bad = curate_dataset(docs, 2, faulty);
  CHECK(one_bad.pairs.size() == 8);
  REQUIRE(one_bad.report.failures.size() == 1);
  CHECK(one_bad.report.failures[0].reason.starts_with("parse"));
  CHECK(one_bad.report.successes + one_bad.report.failures.size() == one_bad.report.attempts);

  const auto none = curate_dataset({}, 2, mock);
  CHECK(none.pairs.empty());
  CHECK(none.report.attempts == 0);

  const auto j = ok.report.to_json();
  CHECK(j["model_settings"]["model_id"] == "mock-chat");
  CHECK(j["model_settings"]["temperature"] == 0.0);
  CHECK(j["model_settings"]["prompt_version"] == "qa-v1");
  CHECK(j["pairs"] == 10);
}

TEST_CASE("dirpmpt baseline") {
  const MockChatProvider mock(1);
  const std::string doc = "First fact here. Second fact there. Third fact everywhere. Fourth fact nowhere.";
  const auto a = dirpmpt_generate(doc, 3, mock);
  REQUIRE(a.size() == 3);
  for (const auto& p : a) CHECK(p.generator == "dirpmpt");
  CHECK(a == dirpmpt_generate(doc, 3, mock));
  CHECK_THROWS_AS(dirpmpt_generate(doc, 0, mock), InvalidArgument);
  fixtures::ScriptedChatProvider prose({"no"});
  CHECK_THROWS_AS(dirpmpt_generate(doc, 2, prose), StructuredOutputError);
}

TEST_CASE("QA pairs round-trip through JSON") {
  const QAPair p{"What?", "That.", {"doc", 3}, 2, "pipeline"};
  const auto back = qa_pair_from_json(nlohmann::json::parse(to_json(p).dump()));
  CHECK(back == p);
}
