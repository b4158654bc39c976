#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "liahr/error.hpp"
#include "liahr/gateway.hpp"
#include "liahr/http_backend.hpp"
#include "liahr/mock_backend.hpp"
#include "liahr/parse.hpp"
#include "support.hpp"

using namespace liahr;

namespace {

struct Toy {
  LabelSpacePtr space = testing::load_space("semeval.space.json");
  Corpus corpus = load_corpus(testing::data_dir() / "semeval_toy.jsonl", space);

  CompletionRequest request(const std::string& query, std::optional<LabelSet> shown,
                            PromptMode mode = PromptMode::liahr, const std::string& key = "seed:0/q") const {
    PromptPlan p;
    p.mode = mode;
    p.space = space;
    p.query = query;
    p.query_label = shown;
    for (const auto* id : {"se-003", "se-004"}) p.demos.push_back({id, corpus.get(id).gold, std::nullopt});
    if (mode == PromptMode::baseline) {
      p.demos[0].reasonable = true;
      p.demos[1].reasonable = false;
      p.demos[1].labels = corpus.get("se-005").gold;
    }
    return {key, render_task_prompt(p, corpus)};
  }
};

BackendConfig mock(MockKind k) {
  BackendConfig c;
  c.kind = BackendKind::mock;
  c.mock.kind = k;
  return c;
}

std::string run_mock(const Toy& t, const BackendConfig& c, const CompletionRequest& r) {
  auto b = make_backend(c, t.corpus);
  return b->complete(r).text;
}

/// Local chat-completions stand-in on an ephemeral port.
class FakeServer {
 public:
  explicit FakeServer(std::function<void(const httplib::Request&, httplib::Response&, int)> handler)
      : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++hits_;
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = req.body;
      handler_(req, res, n);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int hits() const { return hits_; }
  std::string last_auth_, last_body_;

 private:
  httplib::Server server_;
  std::function<void(const httplib::Request&, httplib::Response&, int)> handler_;
  std::atomic<int> hits_{0};
  int port_ = 0;
  std::thread thread_;
};

std::string ok_body(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
                        {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 3}}}}
      .dump();
}

BackendConfig http_config(const std::string& url) {
  BackendConfig c;
  c.kind = BackendKind::http_chat;
  c.endpoint = url;
  c.model = "test-model";
  c.params.retry.max_attempts = 3;
  c.params.retry.backoff_ms = {1};
  c.params.timeout_ms = 2000;
  return c;
}

}  // namespace

TEST_CASE("echo mock copies the shown label") {
  Toy t;
  const auto shown = t.space->make_set({"fear", "trust"});
  CHECK(run_mock(t, mock(MockKind::echo_query_label), t.request("se-002", shown)) ==
        R"({"label": ["fear", "trust"]})");
  CHECK(run_mock(t, mock(MockKind::echo_query_label), t.request("se-002", std::nullopt, PromptMode::icl)) ==
        R"({"label": []})");
  CHECK(run_mock(t, mock(MockKind::echo_query_label), t.request("se-002", shown, PromptMode::baseline)) ==
        "reasonable");
}

TEST_CASE("gold oracle answers with the reference labels") {
  Toy t;
  const auto gold = t.corpus.get("se-021").gold;
  const auto wrong = t.space->make_set({"joy"});
  auto c = mock(MockKind::gold_oracle);
  CHECK(run_mock(t, c, t.request("se-021", wrong)) == R"({"label": ["anger", "sadness", "surprise"]})");
  CHECK(run_mock(t, c, t.request("se-021", gold, PromptMode::baseline)) == "reasonable");
  CHECK(run_mock(t, c, t.request("se-021", wrong, PromptMode::baseline)) == "unreasonable");
  c.mock.oracle_source = "annotator:a1";
  CHECK(run_mock(t, c, t.request("se-021", wrong)) == R"({"label": ["anger"]})");
  CHECK_THROWS_AS(run_mock(t, c, t.request("se-002", wrong)), ValidationError);
}

TEST_CASE("scripted mock lookup order") {
  Toy t;
  auto c = mock(MockKind::scripted);
  const auto r = t.request("se-002", t.space->make_set({"joy"}));
  c.mock.script = {{"*", "fallback"}, {"id:se-002", "by id"}, {r.prompt.fingerprint, "by fingerprint"}};
  CHECK(run_mock(t, c, r) == "by fingerprint");
  c.mock.script.erase(r.prompt.fingerprint);
  CHECK(run_mock(t, c, r) == "by id");
  c.mock.script.erase("id:se-002");
  CHECK(run_mock(t, c, r) == "fallback");
  c.mock.script.clear();
  CHECK_THROWS_AS(run_mock(t, c, r), ConfigError);
}

TEST_CASE("prior-biased mock: mixing extremes and common random numbers") {
  Toy t;
  auto c = mock(MockKind::prior_biased);
  const auto shown = t.space->make_set({"fear", "trust"});
  c.mock.mixing = 1.0;
  CHECK(run_mock(t, c, t.request("se-021", shown)) == R"({"label": ["fear", "trust"]})");
  c.mock.mixing = 0.0;
  c.mock.threshold = 1.0;
  c.mock.prior.assign(11, 0.0);
  CHECK(run_mock(t, c, t.request("se-021", shown)) == R"({"label": ["anger", "sadness", "surprise"]})");

  // Same key, different shown label: the belief is unchanged.
  c.mock.prior.assign(11, 0.9);
  c.mock.threshold = 0.5;
  const auto a = run_mock(t, c, t.request("se-021", shown));
  const auto b = run_mock(t, c, t.request("se-021", t.space->make_set({"joy"})));
  CHECK(a == b);
  MockBackend mb(c.mock, t.corpus);
  CHECK(parse_label_output(a, *t.space).labels == mb.belief("seed:0/q", "se-021"));
}

TEST_CASE("empirical prior when none is configured") {
  Toy t;
  MockBackend mb(mock(MockKind::prior_biased).mock, t.corpus);
  REQUIRE(mb.prior().size() == 11);
  double anger = 0;
  for (const auto& ex : t.corpus.examples()) anger += ex.gold.contains(0) ? 1 : 0;
  CHECK(mb.prior()[0] == doctest::Approx(anger / 30.0));
  auto c = mock(MockKind::prior_biased);
  c.mock.prior = {0.5};
  CHECK_THROWS_AS(make_backend(c, t.corpus), ConfigError);
}

TEST_CASE("binary mocks answer with plain labels") {
  auto space = testing::load_space("queer.space.json");
  auto corpus = load_corpus(testing::data_dir() / "queer_toy.jsonl", space);
  PromptPlan p;
  p.mode = PromptMode::liahr;
  p.space = space;
  p.query = "qr-005";
  p.query_label = space->make_set({"no harm"});
  p.demos.push_back({"qr-001", corpus.get("qr-001").gold, std::nullopt});
  CompletionRequest r{"seed:0/qr-005", render_task_prompt(p, corpus)};
  auto c = mock(MockKind::gold_oracle);
  CHECK(make_backend(c, corpus)->complete(r).text == "harm");
  c.mock.oracle_source = "alt:in_group";
  CHECK(make_backend(c, corpus)->complete(r).text == "no harm");
}

TEST_CASE("gateway cache stores and bypasses") {
  Toy t;
  testing::TempDir tmp("cache");
  auto c = mock(MockKind::echo_query_label);
  c.cache_dir = tmp.path();
  Gateway g(make_backend(c, t.corpus), c);
  const auto r = t.request("se-002", t.space->make_set({"joy"}));
  const auto first = g.complete(r);
  CHECK_FALSE(first.cached);
  const auto second = g.complete(r);
  CHECK(second.cached);
  CHECK(second.text == first.text);
  CHECK_FALSE(g.complete(r, true).cached);
}

TEST_CASE("parallel batch matches the serial reference position by position") {
  Toy t;
  auto c = mock(MockKind::prior_biased);
  c.mock.mixing = 0.3;
  c.concurrency = 4;
  Gateway g(make_backend(c, t.corpus), c);
  std::vector<CompletionRequest> reqs;
  for (const auto& ex : t.corpus.examples()) {
    if (ex.id == "se-003" || ex.id == "se-004") continue;
    reqs.push_back(t.request(ex.id, t.space->make_set({"joy"}), PromptMode::liahr, "seed:1/" + ex.id));
  }
  const auto par = g.complete_batch(reqs);
  const auto ser = g.complete_batch_serial(reqs);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    REQUIRE(par[i].completion.has_value());
    CHECK(par[i].completion->text == ser[i].completion->text);
  }
}

TEST_CASE("batch errors are captured per item") {
  Toy t;
  auto c = mock(MockKind::scripted);
  c.mock.script = {{"id:se-002", R"({"label": []})"}};
  Gateway g(make_backend(c, t.corpus), c);
  std::vector<CompletionRequest> reqs{t.request("se-002", LabelSet{}), t.request("se-021", LabelSet{})};
  const auto out = g.complete_batch(reqs);
  CHECK(out[0].completion.has_value());
  CHECK_FALSE(out[1].completion.has_value());
  CHECK(out[1].error != nullptr);
}

TEST_CASE("backend config json and shorthand") {
  auto c = mock(MockKind::prior_biased);
  c.mock.mixing = 0.25;
  c.mock.prior = {0.1, 0.2};
  c.concurrency = 3;
  auto back = backend_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(back.mock.kind == MockKind::prior_biased);
  CHECK(back.mock.mixing == 0.25);
  CHECK(back.mock.prior == c.mock.prior);
  CHECK(back.concurrency == 3);

  BackendConfig s;
  apply_backend_shorthand(s, "mock:echo");
  CHECK(s.mock.kind == MockKind::echo_query_label);
  apply_backend_shorthand(s, "mock:oracle");
  CHECK(s.mock.kind == MockKind::gold_oracle);
  CHECK_THROWS_AS(apply_backend_shorthand(s, "openai"), ConfigError);
  CHECK_THROWS_AS(apply_backend_shorthand(s, "mock:nope"), ConfigError);

  BackendConfig bad;
  bad.concurrency = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  BackendConfig http;
  http.kind = BackendKind::http_chat;
  CHECK_THROWS_AS(http.validate(), ConfigError);
}

TEST_CASE("url parsing") {
  auto u = parse_url("https://api.example.com:8443/v1/chat/completions");
  CHECK(u.scheme_host_port == "https://api.example.com:8443");
  CHECK(u.path == "/v1/chat/completions");
  CHECK(parse_url("http://localhost").path == "/");
  CHECK_THROWS_AS(parse_url("localhost/x"), ConfigError);
  CHECK_THROWS_AS(parse_url("ftp://x/y"), ConfigError);
}

TEST_CASE("http backend: wire format and bearer token from the environment") {
  FakeServer srv([](const httplib::Request&, httplib::Response& res, int) {
    res.set_content(ok_body(R"({"label": ["joy"]})"), "application/json");
  });
  ::setenv("LIAHR_TEST_TOKEN", "secret-value", 1);
  auto c = http_config(srv.url());
  c.api_key_env = "LIAHR_TEST_TOKEN";
  c.system_message = "be terse";
  HttpChatBackend b(c);
  Toy t;
  const auto out = b.complete(t.request("se-002", t.space->make_set({"joy"})));
  CHECK(out.text == R"({"label": ["joy"]})");
  CHECK(out.usage.prompt_tokens == 12);
  CHECK(out.attempts == 1);
  CHECK(srv.last_auth_ == "Bearer secret-value");
  const auto body = nlohmann::json::parse(srv.last_body_);
  CHECK(body.at("model") == "test-model");
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("messages").size() == 2);
  CHECK(body.at("messages")[0].at("role") == "system");
  CHECK(body.at("messages")[1].at("content").get<std::string>().find("But guess what") != std::string::npos);
}

TEST_CASE("http backend: missing token is a config error") {
  ::unsetenv("LIAHR_TEST_MISSING");
  auto c = http_config("http://127.0.0.1:9/v1/chat/completions");
  c.api_key_env = "LIAHR_TEST_MISSING";
  CHECK_THROWS_AS(HttpChatBackend{c}, ConfigError);
}

TEST_CASE("http backend: 5xx and 429 are retried") {
  FakeServer srv([](const httplib::Request&, httplib::Response& res, int n) {
    if (n == 1) {
      res.status = 503;
    } else if (n == 2) {
      res.status = 429;
      res.set_header("Retry-After", "0");
    } else {
      res.set_content(ok_body("{\"label\": []}"), "application/json");
    }
  });
  HttpChatBackend b(http_config(srv.url()));
  Toy t;
  const auto out = b.complete(t.request("se-002", LabelSet{}));
  CHECK(out.attempts == 3);
  CHECK(srv.hits() == 3);
}

TEST_CASE("http backend: auth failures are not retried") {
  FakeServer srv([](const httplib::Request&, httplib::Response& res, int) { res.status = 401; });
  HttpChatBackend b(http_config(srv.url()));
  Toy t;
  CHECK_THROWS_AS(b.complete(t.request("se-002", LabelSet{})), AuthError);
  CHECK(srv.hits() == 1);
}

TEST_CASE("http backend: other client errors are final") {
  FakeServer srv([](const httplib::Request&, httplib::Response& res, int) { res.status = 400; });
  HttpChatBackend b(http_config(srv.url()));
  Toy t;
  CHECK_THROWS_AS(b.complete(t.request("se-002", LabelSet{})), TransportError);
  CHECK(srv.hits() == 1);
}

TEST_CASE("http backend: exhausted retries report the last cause") {
  FakeServer srv([](const httplib::Request&, httplib::Response& res, int) { res.status = 503; });
  HttpChatBackend b(http_config(srv.url()));
  Toy t;
  try {
    b.complete(t.request("se-002", LabelSet{}));
    FAIL("expected a transport error");
  } catch (const AuthError&) {
    FAIL("wrong error type");
  } catch (const TransportError& e) {
    CHECK(std::string(e.what()).find("last cause: HTTP 503") != std::string::npos);
  }
  CHECK(srv.hits() == 3);
}

TEST_CASE("http backend: timeouts are retried then surface") {
  FakeServer srv([](const httplib::Request&, httplib::Response& res, int) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    res.set_content(ok_body("x"), "application/json");
  });
  auto c = http_config(srv.url());
  c.params.timeout_ms = 150;
  c.params.retry.max_attempts = 2;
  HttpChatBackend b(c);
  Toy t;
  CHECK_THROWS_AS(b.complete(t.request("se-002", LabelSet{})), TransportError);
  CHECK(srv.hits() >= 1);
}

TEST_CASE("http backend: malformed bodies") {
  CHECK_THROWS_AS(HttpChatBackend::parse_response("not json"), TransportError);
  CHECK_THROWS_AS(HttpChatBackend::parse_response(R"({"choices": []})"), TransportError);
  CHECK(HttpChatBackend::parse_response(ok_body("hi")).text == "hi");
}
