#pragma once

// Training-corpus construction: instruction rendering, windowed schema
// emission, session serialization into loss-masked samples, corpus stats
// and JSONL round-trip.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "todforge/core.hpp"
#include "todforge/grammar.hpp"

namespace todforge::corpus {

struct InstructionBlock {
  std::string system_text;                         // fixed preamble
  std::vector<std::pair<Task, std::string>> task_lines;  // flow order

  // Preamble plus numbered task lines, newline-terminated.
  std::string render() const;
};

InstructionBlock render_instructions(const TaskFlowSpec& flow,
                                     const std::vector<std::string>& domain_list,
                                     DstFormat fmt);

// Windowed emission of schema blocks ("emit when new or when last emitted
// more than `window` turns ago"). One registry per label family per session.
struct SchemaRegistry {
  std::optional<int> window;        // nullopt => emit each label once only
  std::map<std::string, int> ages;  // turns since last emission

  // Process one turn's labels: returns the labels to emit (input order,
  // no duplicates), resets emitted counters, then ages every counter by 1.
  std::vector<std::string> process_turn(const std::vector<std::string>& labels);
};

struct Segment {
  Tag tag;
  std::string text;
  bool supervised = false;

  bool operator==(const Segment&) const = default;
};

struct TrainingSample {
  std::string id;
  std::vector<Segment> segments;

  bool operator==(const TrainingSample&) const = default;
};

struct SerializeOptions {
  std::size_t max_len = 4096;
  std::optional<int> schema_window = 15;  // 0 = re-emit every turn
  bool include_schemas = true;
  bool include_instructions = true;
  double history_ratio = 0.6;  // cap on unsupervised re-seeded history
  Tokenizer tokenizer = Tokenizer::byte_len();
};

// Whole-turn sliding-window packing: every turn is supervised in exactly one
// sample; closed windows re-seed the next sample with the most recent whole
// turns that fit history_ratio * max_len, loss-masked. Throws
// MissingAnnotation / TurnTooLarge.
std::vector<TrainingSample> serialize_session(
    const DialogueSession& session, const TaskFlowSpec& flow,
    const std::map<std::string, DomainSchema>& schemas,
    const std::map<std::string, IntentSchema>& intent_schemas,
    const SerializeOptions& opts);

// "TAG: text\n" per segment (instructions verbatim + newline).
std::string render_segment(const Segment& seg);
std::string render_sample_text(const TrainingSample& sample);

// Accounting convention: a sample costs the sum of its rendered line counts.
std::size_t sample_token_count(const TrainingSample& sample, const Tokenizer& tok);

struct CorpusStats {
  std::size_t num_samples = 0;
  double avg_turns_per_sample = 0.0;  // rounded to 2 decimals
  double avg_tokens_per_turn = 0.0;   // rounded to 2 decimals
  std::size_t total_tokens = 0;
};

CorpusStats corpus_stats(const std::vector<TrainingSample>& samples,
                         const Tokenizer& tok = Tokenizer::byte_len());

// JSONL: {"id": ..., "segments": [{"tag","text","supervised"}, ...]}
void write_corpus(const std::vector<TrainingSample>& samples,
                  const std::filesystem::path& file);
std::vector<TrainingSample> read_corpus(const std::filesystem::path& file);

}  // namespace todforge::corpus
