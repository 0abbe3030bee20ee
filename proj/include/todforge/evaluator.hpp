#pragma once

// Metrics over predicted sessions: joint goal accuracy, corpus BLEU-4,
// inform/success and match/success-F1 against embedded goals, single-turn
// understanding scores, and the combined score.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "todforge/ingest.hpp"
#include "todforge/orchestrator.hpp"

namespace todforge::eval {

struct SessionPrediction {
  std::string session_id;
  std::vector<orchestrator::TurnOutputs> turns;
};

struct EvalReport {
  std::optional<double> jga;
  std::optional<double> bleu;
  std::optional<double> inform;
  std::optional<double> success;
  std::optional<double> combined;
  std::optional<double> match;
  std::optional<double> succ_f1;
  std::optional<double> intent_acc;
  std::optional<double> slot_f1;
  std::optional<double> overall_acc;

  std::string text_table() const;  // "metric  value" lines, present fields only
  std::string json_text() const;   // fixed key set, null for absent fields
};

double round2(double x);

// Percentage of turns whose normalized predicted state equals the gold state
// exactly. Throws LengthMismatch; vacuously 100 on zero turns.
double jga(const std::vector<BeliefState>& pred, const std::vector<BeliefState>& gold);

// Lowercase, punctuation split off as single-character tokens.
std::vector<std::string> bleu_tokenize(std::string_view text);

// Corpus BLEU-4: pooled clipped n-gram counts, brevity penalty, scaled to
// 0..100. An order with no candidate n-grams anywhere counts as precision 1.
double corpus_bleu(const std::vector<std::string>& candidates,
                   const std::vector<std::string>& references);

// Debug-only per-sentence variant with add-one smoothing on orders 2..4.
double sentence_bleu_smoothed(const std::string& candidate,
                              const std::string& reference);

// combined = BLEU + 0.5 * (inform + success), rounded to 2 decimals.
double combined(double bleu, double inform, double success);

struct InformSuccess {
  double inform = 0.0;
  double success = 0.0;
};

// A dialogue informs when, for every goal domain that requires a venue, the
// last venue-offer turn's DB results (under the predicted state) intersect
// the records satisfying the goal constraints. It succeeds when it informs
// and every requested slot was emitted as a [value_<slot>] placeholder.
InformSuccess inform_success(const std::vector<SessionPrediction>& preds,
                             const ingest::CorpusBundle& bundle);

struct MatchSuccF1 {
  double match = 0.0;
  double succ_f1 = 0.0;
};

// Match: the final predicted state's query results contain a record meeting
// the goal constraints for every constrained domain. Success-F1: micro-F1 of
// emitted placeholder sets against goal requestable sets.
MatchSuccF1 match_succf1(const std::vector<SessionPrediction>& preds,
                         const ingest::CorpusBundle& bundle);

struct SluMetrics {
  double intent_acc = 0.0;
  double slot_f1 = 0.0;
  double overall_acc = 0.0;
};

// Single-turn understanding: exact intent-set accuracy, micro-F1 over
// (domain, slot, value) triples, and joint intent+state accuracy.
SluMetrics slu_metrics(const std::vector<SessionPrediction>& preds,
                       const ingest::CorpusBundle& bundle);

// Compute every metric the flow and annotations support.
EvalReport evaluate(const std::vector<SessionPrediction>& preds,
                    const ingest::CorpusBundle& bundle);

// Field-wise mean of reports (each field present in all or none).
EvalReport average_reports(const std::vector<EvalReport>& reports);

// Rebuild predictions from a trace JSONL file; when `current_belief_gold`,
// states are replaced by the gold states (matching a run that consumed gold
// belief downstream).
std::vector<SessionPrediction> predictions_from_trace(
    const std::filesystem::path& file, const ingest::CorpusBundle& bundle,
    bool current_belief_gold = false);

}  // namespace todforge::eval
