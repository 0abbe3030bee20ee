#include "todforge/backend.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "todforge/errors.hpp"
#include "todforge/grammar.hpp"

namespace todforge::backend {

using nlohmann::json;

int task_max_tokens(Task t) {
  switch (t) {
    case Task::DI: return 64;
    case Task::ID: return 128;
    case Task::DST: return 512;
    case Task::SAD: return 128;
    case Task::DelexRG: return 256;
    case Task::ConcRG: return 256;
  }
  return 256;
}

std::string apply_stop(std::string text, const std::vector<std::string>& stop) {
  std::size_t cut = std::string::npos;
  for (const auto& s : stop) {
    if (s.empty()) continue;
    auto pos = text.find(s);
    if (pos != std::string::npos && pos < cut) cut = pos;
  }
  if (cut != std::string::npos) text.erase(cut);
  return text;
}

// --- HTTP -------------------------------------------------------------------

struct HttpBackend::Impl {
  explicit Impl(int max_in_flight) : slots(max_in_flight > 0 ? max_in_flight : 1) {}
  std::counting_semaphore<4096> slots;
  std::atomic<int> attempts{0};
};

namespace {

std::string strip_trailing_slash(std::string s) {
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

}  // namespace

HttpBackend::HttpBackend(HttpConfig config)
    : config_(std::move(config)),
      impl_(std::make_unique<Impl>(config_.max_in_flight)) {
  config_.endpoint = strip_trailing_slash(config_.endpoint);
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::complete(const CompletionRequest& request) {
  json body;
  body["model"] = config_.model;
  body["prompt"] = request.prompt;
  body["max_tokens"] = request.max_tokens;
  body["temperature"] = request.temperature;
  body["stop"] = request.stop;
  const std::string payload = body.dump();

  impl_->slots.acquire();
  struct Release {
    Impl* impl;
    ~Release() { impl->slots.release(); }
  } release{impl_.get()};

  const int attempts_max = config_.retries > 0 ? config_.retries : 1;
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt < attempts_max; ++attempt) {
    if (attempt > 0) {
      auto wait = std::chrono::milliseconds(config_.backoff_base_ms << (attempt - 1));
      std::this_thread::sleep_for(wait);
    }
    last_attempts_ = attempt + 1;

    httplib::Client client(config_.endpoint);
    client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
    client.set_write_timeout(std::chrono::milliseconds(config_.timeout_ms));
    if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);

    auto res = client.Post("/v1/completions", payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw BackendRefused(res->status, res->body);
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") ||
        !reply["choices"].is_array() || reply["choices"].empty() ||
        !reply["choices"][0].contains("text") ||
        !reply["choices"][0]["text"].is_string()) {
      last_error = "malformed completion payload";
      continue;
    }
    return apply_stop(reply["choices"][0]["text"].get<std::string>(), request.stop);
  }
  throw BackendUnavailable(config_.endpoint + ": " + last_error + " (after " +
                           std::to_string(attempts_max) + " attempts)");
}

// --- Gold echo ---------------------------------------------------------------

GoldEchoBackend::GoldEchoBackend(DialogueSession session, TaskFlowSpec flow)
    : session_(std::move(session)), flow_(std::move(flow)) {}

std::string GoldEchoBackend::complete(const CompletionRequest& request) {
  const std::string& prompt = request.prompt;
  auto nl = prompt.rfind('\n');
  std::string tail = nl == std::string::npos ? prompt : prompt.substr(nl + 1);
  auto colon = tail.find(':');
  if (colon == std::string::npos)
    throw FormatError("gold echo: prompt does not end in a labeled line");
  const std::string label = tail.substr(0, colon);

  int dropped = 0;
  int users = 0;
  std::size_t start = 0;
  while (start <= prompt.size()) {
    auto end = prompt.find('\n', start);
    std::string_view line(prompt.data() + start,
                          (end == std::string::npos ? prompt.size() : end) - start);
    if (line.rfind("USER: ", 0) == 0) ++users;
    constexpr std::string_view kDropped = "# dropped_turns: ";
    if (line.rfind(kDropped, 0) == 0)
      dropped = std::atoi(std::string(line.substr(kDropped.size())).c_str());
    if (end == std::string::npos) break;
    start = end + 1;
  }
  const int turn = dropped + users;  // 1-based
  if (turn < 1 || static_cast<std::size_t>(turn) > session_.turns.size())
    throw FormatError("gold echo: turn " + std::to_string(turn) + " out of range");
  const Turn& t = session_.turns[static_cast<std::size_t>(turn - 1)];

  auto tag = tag_from_name(label);
  if (!tag) throw FormatError("gold echo: unknown label '" + label + "'");
  std::string text;
  switch (*tag) {
    case Tag::Domains:
      if (!t.domains) throw MissingAnnotation(label, turn);
      text = serialize_domains(*t.domains);
      break;
    case Tag::Intents:
      if (!t.intents) throw MissingAnnotation(label, turn);
      text = serialize_intents(*t.intents);
      break;
    case Tag::State:
      if (!t.state) throw MissingAnnotation(label, turn);
      text = serialize_state(*t.state, flow_.dst_format);
      break;
    case Tag::Acts:
      if (!t.acts) throw MissingAnnotation(label, turn);
      text = serialize_acts(*t.acts);
      break;
    case Tag::Delex:
      if (!t.delex) throw MissingAnnotation(label, turn);
      text = *t.delex;
      break;
    case Tag::Response:
      if (!t.response) throw MissingAnnotation(label, turn);
      text = *t.response;
      break;
    default:
      throw FormatError("gold echo: '" + label + "' is not a generated line");
  }
  return apply_stop(std::move(text), request.stop);
}

// --- Scripted ----------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<std::string> replies, bool cycle)
    : replies_(std::move(replies)), cycle_(cycle) {}

std::string ScriptedBackend::complete(const CompletionRequest& request) {
  std::lock_guard<std::mutex> lock(mu_);
  if (next_ >= replies_.size()) {
    if (!cycle_ || replies_.empty()) return "";
    next_ = 0;
  }
  return apply_stop(replies_[next_++], request.stop);
}

std::size_t ScriptedBackend::consumed() const {
  std::lock_guard<std::mutex> lock(mu_);
  return next_;
}

}  // namespace todforge::backend
