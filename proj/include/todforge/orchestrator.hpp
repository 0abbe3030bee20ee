#pragma once

// Session runtime: assembles per-task prompts over a sliding context window,
// drives a completion backend through the task flow, embeds outputs (or gold
// substitutes) back into the context, and recomputes DB lines per turn.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "todforge/backend.hpp"
#include "todforge/corpus.hpp"
#include "todforge/ingest.hpp"

namespace todforge::orchestrator {

enum class Source { Gold, Generated };

const char* source_name(Source s);
std::optional<Source> source_from_name(std::string_view name);

// Which side feeds the cascade: prior-turn state lines, the state consumed
// by the current turn's own DB lookup / downstream tasks, and prior-turn
// act/response lines.
struct OracleMode {
  Source context_belief = Source::Generated;
  Source current_belief = Source::Generated;
  Source context_responses = Source::Generated;
};

struct TraceRecord {
  std::string session;
  int turn = 0;  // 1-based
  std::string tag;
  std::size_t prompt_tokens = 0;  // per-line sum, same accounting as corpus
  std::string prompt;
  std::string raw;   // backend output
  std::string text;  // after de-repetition; what was embedded and parsed
  bool parsed_ok = true;
};

struct RunConfig {
  std::size_t max_len = 4096;
  double history_ratio = 0.75;  // cap on instructions+history inside prompts
  std::optional<int> max_history_turns;  // prior turns kept, unlimited if unset
  std::optional<int> schema_window = 15;  // 0 = every turn; nullopt = once ever
  bool include_schemas = true;
  bool include_instructions = true;
  int entry_limit = 1;  // records shown per DB group
  OracleMode oracle;
  Tokenizer tokenizer = Tokenizer::byte_len();
  std::function<void(const TraceRecord&)> trace;
  std::function<void(const backend::CompletionRequest&)> observe_request;
  std::function<void(const std::string&)> log;  // dropped-constraint notices
};

struct TurnOutputs {
  std::string user;
  std::vector<std::string> domains;
  IntentMap intents;
  BeliefState state;  // effective: gold when current_belief is Gold
  DbResult db;
  ActSet acts;
  std::string delex;
  std::string response;
  bool domains_ok = true, intents_ok = true, state_ok = true, acts_ok = true;
};

// Collapse a trailing phrase (>= 4 chars) repeated 3+ times in a row down to
// one occurrence; longest phrase first, iterated to a fixpoint.
std::string dedup(std::string_view text);

// One JSONL line per request (no trailing newline) and its inverse.
std::string trace_record_json(const TraceRecord& rec);
std::optional<TraceRecord> trace_record_from_json(const std::string& line);

struct ContextWindow {
  std::string text;  // instructions + optional drop header + kept turn blocks
  int dropped = 0;
  std::size_t tokens = 0;
};

// Drop oldest whole turn blocks until the window fits `budget` tokens and at
// most `max_history_turns` turns. A "# dropped_turns: N" line (counted in
// the budget) records elisions. Throws InstructionsTooLarge.
ContextWindow truncate_context(const std::vector<std::string>& turn_blocks,
                               const std::string& instructions,
                               const Tokenizer& tok, std::size_t budget,
                               std::optional<int> max_history_turns);

// Incremental runtime over one session; also the REPL engine. `gold` (may be
// null) supplies oracle substitutions and the gold-echo turn alignment.
class SessionRunner {
 public:
  SessionRunner(const ingest::CorpusBundle& bundle, backend::Backend& backend,
                RunConfig config, std::string session_label,
                const DialogueSession* gold = nullptr);
  ~SessionRunner();

  TurnOutputs run_turn(const std::string& user_utterance);
  int turns_done() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct SessionResult {
  std::vector<TurnOutputs> turns;
  bool aborted = false;   // backend became unavailable mid-session
  std::string error;
};

SessionResult run_session(const DialogueSession& session,
                          const ingest::CorpusBundle& bundle,
                          backend::Backend& backend, const RunConfig& config);

}  // namespace todforge::orchestrator
