#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ideaforge/llmclient.hpp"

using namespace ideaforge;
using nlohmann::json;

namespace {

// Scripted fake completions server running on a background thread.
class FakeServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit FakeServer(Handler handler) {
    server_.Post("/v1/completions",
                 [this, handler = std::move(handler)](const httplib::Request& req,
                                                      httplib::Response& res) {
                   int now = ++active_;
                   int peak = peak_.load();
                   while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
                   }
                   handler(req, res);
                   --active_;
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int peak_concurrency() const { return peak_.load(); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

BackendConfig make_config(const FakeServer& server) {
  BackendConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.max_retries = 3;
  cfg.backoff_base_ms = 10;
  cfg.timeout_seconds = 5.0;
  return cfg;
}

json completion_response(const std::vector<std::string>& texts) {
  json choices = json::array();
  for (const auto& t : texts)
    choices.push_back({{"text", t}, {"finish_reason", "stop"}});
  return json{{"choices", choices}};
}

}  // namespace

TEST_CASE("client succeeds after 429 responses with backoff") {
  std::atomic<int> calls{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
      return;
    }
    res.set_content(completion_response({"a concept"}).dump(), "application/json");
  });
  HttpBackend backend(make_config(server));
  GenerationParams params;
  auto start = std::chrono::steady_clock::now();
  auto results = backend.complete("PROMPT", params);
  auto elapsed = std::chrono::steady_clock::now() - start;
  REQUIRE(results.size() == 1);
  CHECK(results[0].text == "a concept");
  CHECK(calls == 3);
  // Two backoffs at 10ms and 20ms.
  CHECK(elapsed >= std::chrono::milliseconds(30));
}

TEST_CASE("client gives up after exhausting retries") {
  std::atomic<int> calls{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 503;
  });
  auto cfg = make_config(server);
  cfg.max_retries = 2;
  HttpBackend backend(cfg);
  GenerationParams params;
  CHECK_THROWS_AS(backend.complete("p", params), BackendError);
  CHECK(calls == 3);  // initial try + 2 retries
}

TEST_CASE("non-retryable 4xx fails immediately") {
  std::atomic<int> calls{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  HttpBackend backend(make_config(server));
  GenerationParams params;
  CHECK_THROWS_AS(backend.complete("p", params), BackendError);
  CHECK(calls == 1);
}

TEST_CASE("malformed response body is an error") {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"nonsense\": true}", "application/json");
  });
  HttpBackend backend(make_config(server));
  GenerationParams params;
  CHECK_THROWS_AS(backend.complete("p", params), BackendError);
}

TEST_CASE("prompt echo is stripped") {
  FakeServer server([](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    std::string prompt = body["prompt"];
    res.set_content(completion_response({prompt + " and the completion"}).dump(),
                    "application/json");
  });
  HttpBackend backend(make_config(server));
  GenerationParams params;
  auto results = backend.complete("KEYWORD: toy\nTITLE:", params);
  REQUIRE(results.size() == 1);
  CHECK(results[0].text == " and the completion");
  CHECK(results[0].prompt_echo_removed);
}

TEST_CASE("stop truncation is applied client-side when the server ignores stop") {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion_response({"first line\nsecond line"}).dump(),
                    "application/json");
  });
  HttpBackend backend(make_config(server));
  GenerationParams params;
  params.stop = {"\n"};
  auto results = backend.complete("p", params);
  REQUIRE(results.size() == 1);
  CHECK(results[0].text == "first line");
  CHECK(results[0].finish_reason == FinishReason::kStop);
}

TEST_CASE("peak concurrency never exceeds the configured bound") {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    res.set_content(completion_response({"x"}).dump(), "application/json");
  });
  auto cfg = make_config(server);
  cfg.max_concurrency = 3;
  HttpBackend backend(cfg);
  GenerationParams params;
  std::vector<std::thread> workers;
  for (int k = 0; k < 12; ++k)
    workers.emplace_back([&] { backend.complete("p", params); });
  for (auto& w : workers) w.join();
  CHECK(server.peak_concurrency() <= 3);
  CHECK(server.peak_concurrency() >= 1);
}

TEST_CASE("request body carries one wire field per parameter") {
  json captured;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    captured = json::parse(req.body);
    res.set_content(completion_response({"x"}).dump(), "application/json");
  });

  SECTION("fine-tuned profile sends top_k, no penalties") {
    auto cfg = make_config(server);
    cfg.kind = BackendKind::kFineTuned;
    cfg.model = "local-ft";
    HttpBackend backend(cfg);
    GenerationParams params = default_params(TaskKind::kDomainSynthesis,
                                             BackendKind::kFineTuned);
    params.samples_per_request = 5;
    backend.complete("the prompt", params);
    CHECK(captured["prompt"] == "the prompt");
    CHECK(captured["max_tokens"] == 64);
    CHECK(captured["temperature"] == 0.9);
    CHECK(captured["top_p"] == 1.0);
    CHECK(captured["top_k"] == 50);
    CHECK(captured["n"] == 5);
    CHECK(captured["model"] == "local-ft");
    CHECK_FALSE(captured.contains("presence_penalty"));
    CHECK_FALSE(captured.contains("frequency_penalty"));
    for (const auto& [key, value] : captured.items()) CHECK_FALSE(value.is_null());
  }

  SECTION("few-shot profile sends penalties, no top_k") {
    auto cfg = make_config(server);
    cfg.kind = BackendKind::kFewShot;
    HttpBackend backend(cfg);
    GenerationParams params = default_params(TaskKind::kAnalogyDriven,
                                             BackendKind::kFewShot);
    backend.complete("p", params);
    CHECK_FALSE(captured.contains("top_k"));
    CHECK(captured.contains("presence_penalty"));
    CHECK(captured.contains("frequency_penalty"));
  }
}

TEST_CASE("auth token is read from the environment") {
  std::string auth_header;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    auth_header = req.get_header_value("Authorization");
    res.set_content(completion_response({"x"}).dump(), "application/json");
  });
  auto cfg = make_config(server);
  cfg.auth_env = "IDEAFORGE_TEST_KEY";
  setenv("IDEAFORGE_TEST_KEY", "sk-test-123", 1);
  HttpBackend backend(cfg);
  GenerationParams params;
  backend.complete("p", params);
  unsetenv("IDEAFORGE_TEST_KEY");
  CHECK(auth_header == "Bearer sk-test-123");
}

TEST_CASE("mock backend is deterministic per seed") {
  std::vector<std::string> fixtures;
  for (int k = 0; k < 100; ++k) fixtures.push_back("concept " + std::to_string(k));

  GenerationParams params;
  params.samples_per_request = 3;

  MockBackend a(fixtures, 7), b(fixtures, 7), c(fixtures, 8);
  std::string ta, tb, tc;
  for (int k = 0; k < 20; ++k) {
    for (const auto& r : a.complete("p", params)) ta += r.text + "|";
    for (const auto& r : b.complete("p", params)) tb += r.text + "|";
    for (const auto& r : c.complete("p", params)) tc += r.text + "|";
  }
  CHECK(ta == tb);       // identical seed + sequence -> identical transcript
  CHECK(ta != tc);       // distinct seeds diverge on a 100-item corpus
}

TEST_CASE("mock backend rejects an empty corpus and delivers n samples") {
  CHECK_THROWS_AS(MockBackend({}, 1), BackendError);
  MockBackend backend({"only"}, 1);
  GenerationParams params;
  params.samples_per_request = 500;
  CHECK(backend.complete("p", params).size() == 500);
}
