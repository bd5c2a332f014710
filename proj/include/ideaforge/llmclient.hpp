#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ideaforge/promptgen.hpp"

namespace ideaforge {

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendConfig {
  std::string endpoint = "http://localhost:8080";
  std::string path = "/v1/completions";
  std::string model;
  std::string auth_env = "IDEAFORGE_API_KEY";
  BackendKind kind = BackendKind::kFewShot;
  double timeout_seconds = 30.0;
  std::size_t max_retries = 3;
  std::size_t backoff_base_ms = 250;
  std::size_t max_concurrency = 4;

  void validate() const {
    if (timeout_seconds <= 0.0) throw BackendError("timeout must be > 0");
    if (max_concurrency == 0) throw BackendError("concurrency must be >= 1");
  }
};

enum class FinishReason { kStop, kLength, kError };

struct CompletionResult {
  std::string text;
  FinishReason finish_reason = FinishReason::kStop;
  bool prompt_echo_removed = false;
  std::int64_t latency_ms = 0;
};

/// Anything that turns a prompt into completions. The pipeline only sees
/// this interface, so tests swap in the mock.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::vector<CompletionResult> complete(const std::string& prompt,
                                                 const GenerationParams& params) = 0;
};

namespace detail {

// Runtime-bounded counting semaphore; std::counting_semaphore fixes the
// ceiling at compile time.
class Semaphore {
 public:
  explicit Semaphore(std::size_t count) : count_(count) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return count_ > 0; });
    --count_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t count_;
};

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(Semaphore& sem) : sem_(sem) { sem_.acquire(); }
  ~SemaphoreGuard() { sem_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  Semaphore& sem_;
};

/// Truncate at the first occurrence of any stop sequence. Backends are
/// supposed to do this; some ignore the stop field.
inline bool apply_stop(std::string& text, const std::vector<std::string>& stop) {
  bool truncated = false;
  for (const auto& s : stop) {
    if (s.empty()) continue;
    auto pos = text.find(s);
    if (pos != std::string::npos) {
      text.resize(pos);
      truncated = true;
    }
  }
  return truncated;
}

}  // namespace detail

/// HTTP client for a completions-style endpoint. Retries 429/5xx and
/// connection errors with exponential backoff; concurrent calls are bounded
/// by the configured limit.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig config)
      : config_(std::move(config)), semaphore_(config_.max_concurrency) {
    config_.validate();
  }

  std::vector<CompletionResult> complete(const std::string& prompt,
                                         const GenerationParams& params) override {
    params.validate();
    detail::SemaphoreGuard guard(semaphore_);
    nlohmann::json body = build_request_body(prompt, params, config_);

    httplib::Client client(config_.endpoint);
    auto timeout = std::chrono::milliseconds(
        static_cast<std::int64_t>(config_.timeout_seconds * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (const char* token = std::getenv(config_.auth_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + token);

    std::string last_error;
    auto start = std::chrono::steady_clock::now();
    for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        auto delay = std::chrono::milliseconds(config_.backoff_base_ms << (attempt - 1));
        std::this_thread::sleep_for(delay);
      }
      auto res = client.Post(config_.path, headers, body.dump(), "application/json");
      if (!res) {
        last_error = "connection error: " + httplib::to_string(res.error());
        continue;  // retryable
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;  // retryable
      }
      if (res->status != 200)
        throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body);
      auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
      return parse_response(res->body, prompt, params, elapsed);
    }
    throw BackendError("retries exhausted: " + last_error);
  }

  /// Wire body: one field per GenerationParams entry; optional fields are
  /// omitted, never null-filled. top_k only for fine-tuned backends,
  /// penalties only for few-shot-capable ones.
  static nlohmann::json build_request_body(const std::string& prompt,
                                           const GenerationParams& params,
                                           const BackendConfig& config) {
    nlohmann::json body{{"prompt", prompt},
                        {"max_tokens", params.max_tokens},
                        {"temperature", params.temperature},
                        {"top_p", params.top_p},
                        {"n", params.samples_per_request}};
    if (!config.model.empty()) body["model"] = config.model;
    if (!params.stop.empty()) body["stop"] = params.stop;
    if (config.kind == BackendKind::kFineTuned && params.top_k)
      body["top_k"] = *params.top_k;
    if (config.kind == BackendKind::kFewShot) {
      body["presence_penalty"] = params.presence_penalty;
      body["frequency_penalty"] = params.frequency_penalty;
    }
    return body;
  }

 private:
  static std::vector<CompletionResult> parse_response(const std::string& body,
                                                      const std::string& prompt,
                                                      const GenerationParams& params,
                                                      std::int64_t latency_ms) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array())
      throw BackendError("malformed response body");
    std::vector<CompletionResult> results;
    for (const auto& choice : j["choices"]) {
      if (!choice.contains("text") || !choice["text"].is_string())
        throw BackendError("malformed choice in response");
      CompletionResult r;
      r.text = choice["text"].get<std::string>();
      r.latency_ms = latency_ms;
      std::string reason = choice.value("finish_reason", "stop");
      r.finish_reason = reason == "length" ? FinishReason::kLength
                        : reason == "stop" ? FinishReason::kStop
                                           : FinishReason::kError;
      if (r.text.compare(0, prompt.size(), prompt) == 0 && !prompt.empty()) {
        r.text.erase(0, prompt.size());
        r.prompt_echo_removed = true;
      }
      if (detail::apply_stop(r.text, params.stop))
        r.finish_reason = FinishReason::kStop;
      results.push_back(std::move(r));
    }
    return results;
  }

  BackendConfig config_;
  detail::Semaphore semaphore_;
};

/// Deterministic in-process backend: seeded sampling with replacement from a
/// fixture corpus. Identical (seed, request sequence) gives identical output.
class MockBackend : public Backend {
 public:
  MockBackend(std::vector<std::string> fixtures, std::uint64_t seed)
      : fixtures_(std::move(fixtures)), rng_(seed) {
    if (fixtures_.empty()) throw BackendError("empty fixture corpus");
  }

  std::vector<CompletionResult> complete(const std::string& /*prompt*/,
                                         const GenerationParams& params) override {
    params.validate();
    std::lock_guard lock(mu_);
    std::uniform_int_distribution<std::size_t> pick(0, fixtures_.size() - 1);
    std::vector<CompletionResult> results;
    results.reserve(params.samples_per_request);
    for (std::size_t k = 0; k < params.samples_per_request; ++k) {
      CompletionResult r;
      r.text = fixtures_[pick(rng_)];
      detail::apply_stop(r.text, params.stop);
      results.push_back(std::move(r));
    }
    return results;
  }

 private:
  std::vector<std::string> fixtures_;
  std::mt19937_64 rng_;
  std::mutex mu_;
};

}  // namespace ideaforge
