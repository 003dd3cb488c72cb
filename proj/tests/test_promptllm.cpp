#include <doctest.h>

#include <atomic>
#include <json.hpp>

#include "gamic/errors.h"
#include "gamic/promptllm.h"
#include "local_server.h"

using namespace gamic;

namespace {

const std::vector<Demonstration> kRetrieved = {
    {"CCO", "The molecule is ethanol."}, {"CCCO", "The molecule is propanol."}, {"CO", "The molecule is methanol."}};

ChatConfig chat_for(const std::string& url) {
  ChatConfig c;
  c.http.url = url;
  c.http.max_retries = 2;
  c.http.backoff_ms = 5;
  c.http.timeout_seconds = 5;
  c.model = "test-model";
  return c;
}

}  // namespace

TEST_CASE("zero-shot caption prompt") {
  const auto b = build_prompt(Task::Caption, {}, "CC(=O)O");
  CHECK(b.rendered.rfind("You are an expert chemist.", 0) == 0);
  CHECK(b.rendered ==
        "You are an expert chemist. Given the molecular SMILES, your task is to predict the molecule description using "
        "your experienced molecular knowledge.\n\nSMILES:CC(=O)O\nCaption:");
  CHECK(b.instruction == zero_shot_instruction(Task::Caption));
}

TEST_CASE("multi-shot prompts carry no instruction") {
  const auto zero = build_prompt(Task::Caption, {}, "C");
  const auto two = build_prompt(Task::Caption, {kRetrieved[0], kRetrieved[1]}, "C");
  CHECK(zero.rendered.find("expert chemist") != std::string::npos);
  CHECK(two.rendered.find("expert chemist") == std::string::npos);
  CHECK(two.instruction.empty());
  for (Task t : {Task::Property, Task::Yield}) {
    CHECK(build_prompt(t, {}, "C").rendered.rfind("You are an expert chemist.", 0) == 0);
    CHECK(build_prompt(t, {{"CC", "Yes"}}, "C").rendered.find("expert") == std::string::npos);
  }
}

TEST_CASE("demonstrations appear in reverse retrieval order") {
  const auto b = build_prompt(Task::Caption, {kRetrieved[0], kRetrieved[1]}, "CCCCO");
  CHECK(b.rendered ==
        "SMILES:CCCO\nCaption:The molecule is propanol.\n\n"
        "SMILES:CCO\nCaption:The molecule is ethanol.\n\n"
        "SMILES:CCCCO\nCaption:");
  for (std::size_t k = 0; k <= kRetrieved.size(); ++k) {
    const std::vector<Demonstration> ret(kRetrieved.begin(), kRetrieved.begin() + static_cast<std::ptrdiff_t>(k));
    const auto bundle = build_prompt(Task::Caption, ret, "N");
    REQUIRE(bundle.demonstrations.size() == k);
    for (std::size_t i = 0; i < k; ++i) CHECK(bundle.demonstrations[i] == ret[k - 1 - i]);
    std::size_t last = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto at = bundle.rendered.find("SMILES:" + ret[k - 1 - i].input + "\n");
      CHECK(at != std::string::npos);
      CHECK(at >= last);
      last = at;
    }
  }
}

TEST_CASE("classification blocks use the Answer field") {
  const auto b = build_prompt(Task::Yield, {{"CC>>CO", "High"}}, "CC>>CN");
  CHECK(b.rendered == "SMILES:CC>>CO\nAnswer:High\n\nSMILES:CC>>CN\nAnswer:");
  CHECK(render_label(Task::Property, true) == "Yes");
  CHECK(render_label(Task::Yield, false) == "Low");
}

TEST_CASE("rendered prompts parse back to the same blocks") {
  for (Task t : {Task::Caption, Task::Property, Task::Yield}) {
    for (std::size_t k = 0; k <= 3; ++k) {
      const std::vector<Demonstration> ret(kRetrieved.begin(), kRetrieved.begin() + static_cast<std::ptrdiff_t>(k));
      const auto b = build_prompt(t, ret, "c1ccccc1");
      const auto parsed = parse_prompt(b.rendered, t);
      CHECK(parsed.demonstrations == b.demonstrations);
      CHECK(parsed.query == "c1ccccc1");
    }
  }
  CHECK_THROWS_AS(parse_prompt("nothing here", Task::Caption), FormatError);
}

TEST_CASE("mock backend copies the nearest caption") {
  MockBackend mock;
  CHECK(mock.complete(build_prompt(Task::Caption, kRetrieved, "C")) == "The molecule is ethanol.");
  CHECK(mock.complete(build_prompt(Task::Caption, {}, "C")) == kMockFallbackCaption);
}

TEST_CASE("mock backend votes on labels") {
  MockBackend mock;
  auto answer = [&](const std::vector<std::string>& labels) {
    std::vector<Demonstration> ret;
    for (const auto& l : labels) ret.push_back({"C", l});
    return mock.complete(build_prompt(Task::Property, ret, "CC"));
  };
  CHECK(answer({"No", "Yes", "Yes"}) == "Yes");
  CHECK(answer({"Yes", "No", "No"}) == "No");
  CHECK(answer({"Yes", "No"}) == "Yes");  // tie: nearest is first in retrieval order
  CHECK(answer({"No", "Yes"}) == "No");
  CHECK(answer({}) == "No");
  std::vector<Demonstration> ret = {{"C", "High"}, {"C", "Low"}, {"C", "Low"}};
  CHECK(mock.complete(build_prompt(Task::Yield, ret, "CC")) == "Low");
}

TEST_CASE("label parsing") {
  CHECK(parse_label("Yes, it is permeable") == Label::Positive);
  CHECK(parse_label("LOW yield expected") == Label::Negative);
  CHECK(parse_label("maybe") == Label::Unparseable);
  CHECK(parse_label("") == Label::Unparseable);
  CHECK(parse_label("Answer: 1") == Label::Positive);
  CHECK(parse_label("I think not... no.") == Label::Negative);
  CHECK(parse_label("knowledge") == Label::Unparseable);
  CHECK(parse_label("True") == Label::Positive);
  CHECK(parse_label("10 percent, so false") == Label::Negative);
}

TEST_CASE("chat backend request and response") {
  testing::LocalServer srv;
  std::string body_seen, auth_seen;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    body_seen = req.body;
    auth_seen = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"It is ethanol."}}]})", "application/json");
  });
  srv.start();
  ::setenv("GAMIC_TEST_LLM_KEY", "k-123", 1);
  auto cfg = chat_for(srv.url("/v1/chat/completions"));
  cfg.http.token_env = "GAMIC_TEST_LLM_KEY";
  HttpChatBackend backend(cfg);
  const auto bundle = build_prompt(Task::Caption, {kRetrieved[0]}, "CCO", "q1");
  CHECK(backend.complete(bundle) == "It is ethanol.");
  const auto j = nlohmann::json::parse(body_seen);
  CHECK(j["model"] == "test-model");
  CHECK(j["temperature"] == 0.0);
  CHECK(j["max_tokens"] == 512);
  CHECK(j["messages"][0]["role"] == "user");
  CHECK(j["messages"][0]["content"] == bundle.rendered);
  CHECK(auth_seen == "Bearer k-123");
}

TEST_CASE("chat backend failures") {
  SUBCASE("unreachable endpoint") {
    HttpChatBackend backend(chat_for("http://127.0.0.1:" + std::to_string(testing::closed_port()) + "/v1"));
    CHECK_THROWS_AS(backend.complete(build_prompt(Task::Caption, {}, "C")), BackendError);
  }
  SUBCASE("server error after retries") {
    testing::LocalServer srv;
    std::atomic<int> calls{0};
    srv.server().Post("/c", [&](const httplib::Request&, httplib::Response& res) {
      ++calls;
      res.status = 502;
    });
    srv.start();
    HttpChatBackend backend(chat_for(srv.url("/c")));
    CHECK_THROWS_AS(backend.complete(build_prompt(Task::Caption, {}, "C")), BackendError);
    CHECK(calls == 3);
  }
  SUBCASE("empty completion") {
    testing::LocalServer srv;
    srv.server().Post("/c", [&](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"choices":[{"message":{"content":"  "}}]})", "application/json");
    });
    srv.start();
    HttpChatBackend backend(chat_for(srv.url("/c")));
    CHECK_THROWS_AS(backend.complete(build_prompt(Task::Caption, {}, "C")), EmptyCompletion);
  }
  SUBCASE("malformed response") {
    testing::LocalServer srv;
    srv.server().Post("/c", [&](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"unexpected":true})", "application/json");
    });
    srv.start();
    HttpChatBackend backend(chat_for(srv.url("/c")));
    CHECK_THROWS_AS(backend.complete(build_prompt(Task::Caption, {}, "C")), BackendError);
  }
}

TEST_CASE("complete_all keeps order under concurrency") {
  testing::LocalServer srv;
  srv.server().new_task_queue = [] { return new httplib::ThreadPool(4); };
  srv.server().Post("/c", [&](const httplib::Request& req, httplib::Response& res) {
    const auto j = nlohmann::json::parse(req.body);
    const std::string prompt = j["messages"][0]["content"];
    nlohmann::json out;
    out["choices"] = {{{"message", {{"content", "echo " + parse_prompt(prompt, Task::Caption).query}}}}};
    res.set_content(out.dump(), "application/json");
  });
  srv.start();
  HttpChatBackend backend(chat_for(srv.url("/c")));
  std::vector<PromptBundle> bundles;
  for (int i = 0; i < 12; ++i) bundles.push_back(build_prompt(Task::Caption, {}, std::string(i + 1, 'C')));
  const auto out = complete_all(bundles, backend, 4);
  for (int i = 0; i < 12; ++i) CHECK(out[i] == "echo " + std::string(i + 1, 'C'));
}

TEST_CASE("jsonl export and import") {
  std::vector<PromptBundle> bundles = {build_prompt(Task::Caption, {kRetrieved[0]}, "CCO", "a"),
                                       build_prompt(Task::Property, {{"C", "Yes"}}, "CC", "b")};
  const auto text = prompts_to_jsonl(bundles);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 2);
  const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
  CHECK(first["id"] == "a");
  CHECK(first["prompt"] == bundles[0].rendered);

  const auto comp = completions_to_jsonl({"a", "b"}, {"It is ethanol.", "Yes"});
  const auto map = completions_from_jsonl(comp);
  CHECK(map.at("a") == "It is ethanol.");
  ReplayBackend replay(map);
  CHECK(complete_all(bundles, replay) == std::vector<std::string>{"It is ethanol.", "Yes"});
  CHECK_THROWS_AS(replay.complete(build_prompt(Task::Caption, {}, "C", "zzz")), BackendError);
  CHECK_THROWS_AS(completions_from_jsonl("{\"id\":\"a\",\"completion\":\"x\"}\n{\"id\":\"a\",\"completion\":\"y\"}"),
                  FormatError);
  CHECK_THROWS_AS(completions_from_jsonl("not json"), FormatError);
}

TEST_CASE("task names") {
  CHECK(parse_task("yield") == Task::Yield);
  CHECK(task_name(Task::Property) == "property");
  CHECK_THROWS_AS(parse_task("translate"), ConfigError);
}
