#pragma once

// Completion backends: an OpenAI-compatible HTTP client, a gold-echo oracle
// that replays reference annotations, and a scripted queue for tests.

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "todforge/core.hpp"

namespace todforge::backend {

struct CompletionRequest {
  std::string prompt;
  std::vector<std::string> stop;
  int max_tokens = 256;
  double temperature = 0.0;  // pinned; decoding is greedy
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Deterministic given a deterministic source; the returned text never
  // contains a stop sequence.
  virtual std::string complete(const CompletionRequest& request) = 0;
};

// Generation budget per task line.
int task_max_tokens(Task t);

// Truncate at the earliest stop-sequence occurrence.
std::string apply_stop(std::string text, const std::vector<std::string>& stop);

// ---------------------------------------------------------------------------

struct HttpConfig {
  std::string endpoint;  // scheme://host[:port]; POSTs to /v1/completions
  std::string model;
  int timeout_ms = 30000;
  int retries = 3;           // total attempts on transport failure
  int backoff_base_ms = 500;  // exponential between attempts
  int max_in_flight = 8;
  std::string api_key;  // optional bearer token
};

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpConfig config);
  ~HttpBackend() override;
  std::string complete(const CompletionRequest& request) override;
  int last_attempts() const { return last_attempts_; }

 private:
  struct Impl;
  HttpConfig config_;
  std::unique_ptr<Impl> impl_;
  int last_attempts_ = 0;
};

// ---------------------------------------------------------------------------

// Replays gold annotations: the prompt's trailing "TAG: " names the line,
// the number of USER lines (plus any "# dropped_turns: N" header) names the
// turn. Throws MissingAnnotation when the session lacks the field.
class GoldEchoBackend : public Backend {
 public:
  GoldEchoBackend(DialogueSession session, TaskFlowSpec flow);
  std::string complete(const CompletionRequest& request) override;

 private:
  DialogueSession session_;
  TaskFlowSpec flow_;
};

// ---------------------------------------------------------------------------

// Thread-safe queue replay; returns "" when exhausted (or cycles).
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies, bool cycle = false);
  std::string complete(const CompletionRequest& request) override;
  std::size_t consumed() const;

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
  bool cycle_;
  mutable std::mutex mu_;
};

}  // namespace todforge::backend
