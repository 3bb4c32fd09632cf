#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "ragsynth/corpus.hpp"
#include "support/oracles.hpp"

using namespace ragsynth;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("ragsynth-test-corpus-" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::string words(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const char* seps[] = {" ", "  ", "\t", "\n", " \r\n"};
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += seps[rng() % 5];
    s += "w" + std::to_string(rng() % 1000);
  }
  return s;
}

}  // namespace

TEST_CASE("tokenize splits on runs of whitespace") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("a  b\tc") == std::vector<std::string>{"a", "b", "c"});
  CHECK(tokenize("  lead and trail \n") == std::vector<std::string>{"lead", "and", "trail"});
  // U+00A0 no-break space and U+3000 ideographic space are White_Space.
  CHECK(tokenize("x y　z").size() == 3);
}

TEST_CASE("token count agrees with an independent word counter") {
  const auto text = words(600, 3);
  CHECK(tokenize(text).size() == oracle::word_count(text));
  CHECK(tokenize(text).size() == 600);
}

TEST_CASE("chunking is greedy and covers every token once") {
  const Document doc{"d", "mem", words(600, 9)};
  const auto chunks = chunk_document(doc, 256);
  REQUIRE(chunks.size() == 3);
  CHECK(chunks[0].token_count == 256);
  CHECK(chunks[1].token_count == 256);
  CHECK(chunks[2].token_count == 600 - 2 * 256);
  std::string rejoined;
  for (const auto& c : chunks) {
    CHECK(c.doc_id == "d");
    CHECK(tokenize(c.text).size() == c.token_count);
    rejoined += (rejoined.empty() ? "" : " ") + c.text;
  }
  CHECK(tokenize(rejoined) == tokenize(doc.text));
  for (std::size_t i = 0; i < chunks.size(); ++i) CHECK(chunks[i].index == i);

  const Document small{"s", "mem", "one two three four five six seven eight nine ten"};
  const auto one = chunk_document(small, 256);
  REQUIRE(one.size() == 1);
  CHECK(one[0].text == small.text);
  CHECK(chunk_document(Document{"e", "mem", "   "}, 5).empty());
  CHECK_THROWS_AS(chunk_document(small, 0), InvalidArgument);
}

TEST_CASE("load_corpus reads text files, jsonl and directories") {
  const auto dir = temp_dir("load");
  write(dir / "b.txt", "beta text");
  write(dir / "a.jsonl", R"({"id":"x1","text":"first"})" "\n\n" R"({"id":"x2","text":"second"})" "\n");
  const auto docs = load_corpus(dir);
  REQUIRE(docs.size() == 3);
  CHECK(docs[0].id == "x1");
  CHECK(docs[1].id == "x2");
  CHECK(docs[2].id == "b");
  CHECK(docs[2].text == "beta text");

  write(dir / "dup.jsonl", R"({"id":"b","text":"clash"})" "\n");
  CHECK_THROWS_AS(load_corpus(dir), DataError);
  CHECK_THROWS_AS(load_corpus(dir / "missing"), DataError);

  const auto bad = temp_dir("bad");
  write(bad / "c.jsonl", R"({"id":"ok","text":"fine"})" "\n" "{not json\n");
  try {
    load_corpus(bad / "c.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("annotated records use code point offsets") {
  const auto rec = parse_annotated_record(nlohmann::json::parse(
      R"({"text":"Call 555-123-4567","spans":[{"type":"TELEPHONENUM","start":5,"end":17}]})"));
  REQUIRE(rec.gold_spans.size() == 1);
  CHECK(rec.gold_spans[0].surface == "555-123-4567");

  const auto uni = parse_annotated_record(nlohmann::json::parse(
      R"({"text":"Grüße an Jürgen","spans":[{"type":"FIRSTNAME","start":9,"end":15}]})"));
  CHECK(uni.gold_spans[0].surface == "Jürgen");
  CHECK(oracle::codepoints(uni.text.substr(0, uni.text.find("Jürgen"))) == 9);

  CHECK_THROWS_AS(parse_annotated_record(nlohmann::json::parse(
                      R"({"text":"short","spans":[{"type":"CITY","start":2,"end":9}]})")),
                  DataError);
  CHECK_THROWS_AS(parse_annotated_record(nlohmann::json::parse(
                      R"({"text":"abcdef","spans":[{"type":"CITY","start":0,"end":3},{"type":"STATE","start":2,"end":5}]})")),
                  DataError);

  const auto dir = temp_dir("annotated");
  write(dir / "gold.jsonl", R"({"text":"a","spans":[]})" "\n" R"({"text":"abc","spans":[{"type":"CITY","start":1,"end":7}]})" "\n");
  try {
    load_annotated_dataset(dir / "gold.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("paragraph builder shifts offsets by the running length") {
  const AnnotatedRecord a{"0123456789", {{EntityType("CITY"), 2, 5, "234", "gold"}}};
  const AnnotatedRecord b{"abcdefgh", {{EntityType("STATE"), 0, 3, "abc", "gold"}}};
  const auto out = build_privacy_paragraphs({a, b}, 2, " ");
  REQUIRE(out.size() == 1);
  CHECK(out[0].text == "0123456789 abcdefgh");
  REQUIRE(out[0].gold_spans.size() == 2);
  CHECK(out[0].gold_spans[1].start == 11);
  CHECK(out[0].gold_spans[1].end == 14);
  CHECK(out[0].gold_spans[1].surface == "abc");

  std::vector<AnnotatedRecord> five(5, a);
  const auto grouped = build_privacy_paragraphs(five, 2, " ");
  REQUIRE(grouped.size() == 3);
  CHECK(grouped[0].gold_spans.size() == 2);
  CHECK(grouped[2].gold_spans.size() == 1);

  const auto same = build_privacy_paragraphs({a, b}, 1, " ");
  CHECK(same[0].text == a.text);
  CHECK(same[1].gold_spans == b.gold_spans);

  const auto st = dataset_stats(grouped);
  CHECK(st.records == 3);
  CHECK(st.entities == 5);
  CHECK(st.entities_per_record == Catch::Approx(5.0 / 3.0));
}
