#include <catch_amalgamated.hpp>

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "ragsynth/llm.hpp"
#include "support/corpora.hpp"
#include "support/http_stub.hpp"

using namespace ragsynth;

namespace {

ChatRequest qa_request(const std::string& passage, std::size_t n) {
  const auto p = prompts::qa_pairs(passage, n);
  return {p.system, p.user};
}

RemoteChatConfig remote(const fixtures::StubServer& server) {
  RemoteChatConfig cfg;
  cfg.url = server.url("/v1/chat/completions");
  cfg.api_key_env = "RAGSYNTH_TEST_CHAT_KEY";
  cfg.retry = {3, std::chrono::milliseconds(1), 2.0};
  return cfg;
}

std::string chat_body(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
                        {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 2}}}}
      .dump();
}

}  // namespace

TEST_CASE("mock provider is a pure function of prompt and seed") {
  const MockChatProvider a(3), b(3), c(4);
  const auto req = qa_request("Alpha beta gamma. Delta epsilon zeta. Eta theta iota.", 2);
  CHECK(a.complete(req).text == a.complete(req).text);
  CHECK(a.complete(req).text == b.complete(req).text);
  CHECK(a.id() != c.id());
  const auto other = MockChatProvider(3).complete({"", "free-form chat"});
  CHECK(other.text.starts_with("Acknowledged."));
}

TEST_CASE("mock answers QA prompts with passage sentences") {
  const MockChatProvider mock(1);
  const std::string passage = "The MARKER-7731 valve opens at dawn. Nothing else happens.";
  const auto reply = complete_structured(qa_request(passage, 3), mock, QaPairsSchema{3});
  REQUIRE(reply.value.size() == 3);
  CHECK(reply.attempts == 1);
  bool echoed = false;
  for (const auto& item : reply.value) {
    CHECK(passage.find(item.answer) != std::string::npos);
    CHECK(item.question.back() == '?');
    echoed |= item.answer.find("MARKER-7731") != std::string::npos;
  }
  CHECK(echoed);
}

TEST_CASE("judge schema parsing and repair") {
  const auto judge = prompts::judge_score({"What is a galaxy?", "How do you bake bread?"});
  const ChatRequest req{judge.system, judge.user};

  fixtures::ScriptedChatProvider eight({"8"});
  CHECK(complete_structured(req, eight, JudgeScoreSchema{}).value == 8);
  fixtures::ScriptedChatProvider wrapped({"```json\n{\"score\": 7}\n```"});
  CHECK(complete_structured(req, wrapped, JudgeScoreSchema{}).value == 7);

  fixtures::ScriptedChatProvider repaired({"Score: excellent", "6"});
  const auto r = complete_structured(req, repaired, JudgeScoreSchema{});
  CHECK(r.value == 6);
  CHECK(r.attempts == 2);
  CHECK(repaired.prompts()[1].size() > repaired.prompts()[0].size());

  fixtures::ScriptedChatProvider prose({"great questions"});
  try {
    complete_structured(req, prose, JudgeScoreSchema{});
    FAIL("expected StructuredOutputError");
  } catch (const StructuredOutputError& e) {
    CHECK(e.raw_text() == "great questions");
    CHECK(prose.calls() == 2);
  }
}

TEST_CASE("qa schema counts and runtime dispatch") {
  const auto req = qa_request("x", 2);
  fixtures::ScriptedChatProvider two({R"({"pairs":[{"question":"Q1?","answer":"A1"},{"question":"Q2?","answer":"A2"}]})"});
  const auto pairs = complete_structured(req, two, QaPairsSchema{2}).value;
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[1].answer == "A2");
  CHECK(complete_structured(req, "qa_pairs", two, 2).size() == 2);
  CHECK_THROWS_AS(complete_structured(req, "nope", two), InvalidArgument);

  fixtures::ScriptedChatProvider short_reply({R"({"pairs":[{"question":"Q?","answer":"A"}]})"});
  CHECK_THROWS_AS(complete_structured(req, short_reply, QaPairsSchema{2}), StructuredOutputError);

  fixtures::ScriptedChatProvider blank({"   "});
  CHECK_THROWS_AS(complete(req, blank), ProviderError);
  ChatRequest hot = req;
  hot.temperature = -1.0;
  CHECK_THROWS_AS(complete(hot, blank), InvalidArgument);
}

TEST_CASE("remote chat provider posts OpenAI-style requests") {
  ::setenv("RAGSYNTH_TEST_CHAT_KEY", "sk-test-123", 1);
  std::string seen_auth, seen_model;
  fixtures::StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    const auto body = nlohmann::json::parse(req.body);
    seen_model = body["model"];
    CHECK(body["messages"].back()["role"] == "user");
    CHECK(body["temperature"] == 0.0);
    res.set_content(chat_body("9"), "application/json");
  });
  const RemoteChatProvider chat(remote(server));
  const auto res = chat.complete({"sys", "hello"});
  CHECK(res.text == "9");
  CHECK(res.prompt_tokens == 11);
  CHECK(seen_auth == "Bearer sk-test-123");
  CHECK(seen_model == "gpt-4o");
  ::unsetenv("RAGSYNTH_TEST_CHAT_KEY");
}

TEST_CASE("remote chat retries server errors then gives up") {
  int calls = 0;
  fixtures::StubServer flaky([&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(chat_body("ok"), "application/json");
  });
  CHECK(RemoteChatProvider(remote(flaky)).complete({"", "hi"}).text == "ok");
  CHECK(flaky.hits() == 3);

  fixtures::StubServer down([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  CHECK_THROWS_AS(RemoteChatProvider(remote(down)).complete({"", "hi"}), TransportError);
  CHECK(down.hits() == 3);

  fixtures::StubServer denied([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  CHECK_THROWS_AS(RemoteChatProvider(remote(denied)).complete({"", "hi"}), ProviderError);
  CHECK(denied.hits() == 1);

  fixtures::StubServer garbage([](const httplib::Request&, httplib::Response& res) {
    res.set_content("<html>", "text/html");
  });
  CHECK_THROWS_AS(RemoteChatProvider(remote(garbage)).complete({"", "hi"}), ProviderError);
  CHECK_THROWS_AS(RemoteChatProvider(RemoteChatConfig{}), InvalidArgument);
}

TEST_CASE("remote chat honours the in-flight cap") {
  std::atomic<int> current{0}, peak{0};
  fixtures::StubServer server([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++current;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --current;
    res.set_content(chat_body("fine"), "application/json");
  });
  auto cfg = remote(server);
  cfg.max_in_flight = 2;
  const RemoteChatProvider chat(cfg);
  const auto out = concurrency::ordered_map(8, 8, [&](std::size_t) { return chat.complete({"", "q"}).text; });
  CHECK(out.size() == 8);
  CHECK(server.hits() == 8);
  CHECK(peak.load() <= 2);
}
