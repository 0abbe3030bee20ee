#pragma once

// Dataset ingestion: the canonical on-disk bundle (sessions.jsonl,
// schemas.json, intents.json, db/<domain>.json, flow.json), an adapter for
// schema-guided raw exports, and a deterministic synthetic fixture corpus.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "todforge/core.hpp"

namespace todforge::ingest {

struct CorpusBundle {
  std::vector<DialogueSession> sessions;
  std::map<std::string, DomainSchema> schemas;
  std::map<std::string, IntentSchema> intent_schemas;
  std::map<std::string, std::vector<Record>> databases;
  TaskFlowSpec flow;

  bool operator==(const CorpusBundle&) const = default;
};

// Full validation: unique ids, non-empty turns/users, gold annotations only
// referencing declared domains/intents, goal constraints on informable
// slots, uniform db record keys, well-formed flow. Throws SchemaViolation.
void validate_bundle(const CorpusBundle& bundle);

// Load + validate; nothing is returned on error (MissingFile / FormatError
// with line / SchemaViolation / IoError).
CorpusBundle read_bundle(const std::filesystem::path& dir);

// Byte-stable writer: sessions sorted by id, JSON keys sorted.
void write_bundle(const CorpusBundle& bundle, const std::filesystem::path& dir);

// Adapter for the schema-guided raw layout: a dialogue file (JSON array of
// {dialogue_id, services, turns:[{speaker, utterance, frames}]}) plus a
// schema file (JSON array of {service_name, slots, intents}). Paired
// USER/SYSTEM turns fold into canonical turns; system actions drive act and
// delexicalized-response annotations.
CorpusBundle adapt_schema_guided(const std::filesystem::path& dialogues_file,
                                 const std::filesystem::path& schema_file);

// Deterministic two-domain synthetic corpus (hotel/train, 10-row databases,
// 2-6 turn sessions with complete, db-consistent gold annotations and
// embedded goals).
CorpusBundle synth_fixtures(int num_sessions, std::uint64_t seed);

}  // namespace todforge::ingest
