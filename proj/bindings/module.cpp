// Python bindings over the library's main operations: normalization,
// de-repetition, line parsers, metrics, fixture/corpus generation and a
// gold-replay pipeline run.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "todforge/backend.hpp"
#include "todforge/corpus.hpp"
#include "todforge/errors.hpp"
#include "todforge/evaluator.hpp"
#include "todforge/grammar.hpp"
#include "todforge/ingest.hpp"
#include "todforge/orchestrator.hpp"

namespace py = pybind11;
using namespace todforge;

namespace {

py::dict state_to_dict(const BeliefState& state) {
  py::dict out;
  for (const auto& [domain, slots] : state) {
    py::dict d;
    for (const auto& [slot, value] : slots)
      d[py::str(slot)] = serialize_value_expr(value);
    out[py::str(domain)] = d;
  }
  return out;
}

py::dict stats_to_dict(const corpus::CorpusStats& s) {
  py::dict out;
  out["num_samples"] = s.num_samples;
  out["avg_turns_per_sample"] = s.avg_turns_per_sample;
  out["avg_tokens_per_turn"] = s.avg_tokens_per_turn;
  out["total_tokens"] = s.total_tokens;
  return out;
}

py::dict report_to_dict(const eval::EvalReport& r) {
  py::dict out;
  auto put = [&](const char* name, const std::optional<double>& v) {
    if (v)
      out[name] = *v;
    else
      out[name] = py::none();
  };
  put("jga", r.jga);
  put("bleu", r.bleu);
  put("inform", r.inform);
  put("success", r.success);
  put("combined", r.combined);
  put("match", r.match);
  put("succ_f1", r.succ_f1);
  put("intent_acc", r.intent_acc);
  put("slot_f1", r.slot_f1);
  put("overall_acc", r.overall_acc);
  return out;
}

corpus::SerializeOptions make_options(std::size_t max_len, int schema_window,
                                      bool include_schemas, bool include_instructions,
                                      double history_ratio) {
  corpus::SerializeOptions opts;
  opts.max_len = max_len;
  opts.schema_window =
      schema_window < 0 ? std::nullopt : std::optional<int>(schema_window);
  opts.include_schemas = include_schemas;
  opts.include_instructions = include_instructions;
  opts.history_ratio = history_ratio;
  return opts;
}

}  // namespace

PYBIND11_MODULE(_todforge, m) {
  m.doc() = "task-oriented dialogue corpora, session runtime and metrics";

  m.def("normalize_value",
        [](const std::string& s) { return normalize_value(s); },
        py::arg("text"), "Canonical slot-value text normalization.");
  m.def("default_token_count",
        [](const std::string& s) { return default_token_count(s); },
        py::arg("text"), "ceil(bytes / 4) token proxy.");
  m.def("dedup",
        [](const std::string& s) { return orchestrator::dedup(s); },
        py::arg("text"), "Collapse trailing phrase repetitions.");

  m.def("parse_domains",
        [](const std::string& text) { return parse_domains(text); },
        py::arg("text"));
  m.def("parse_intents",
        [](const std::string& text) { return parse_intents(text); },
        py::arg("text"));
  m.def(
      "parse_state",
      [](const std::string& text, bool relational) {
        return state_to_dict(parse_state(
            text, relational ? DstFormat::Relational : DstFormat::Plain));
      },
      py::arg("text"), py::arg("relational") = false);
  m.def(
      "parse_acts",
      [](const std::string& text) {
        std::vector<std::tuple<std::string, std::string, std::vector<std::string>>> out;
        for (const ActTriple& a : parse_acts(text))
          out.emplace_back(a.domain, a.act, a.slots);
        return out;
      },
      py::arg("text"));

  m.def("corpus_bleu", &eval::corpus_bleu, py::arg("candidates"),
        py::arg("references"));
  m.def("sentence_bleu_smoothed", &eval::sentence_bleu_smoothed,
        py::arg("candidate"), py::arg("reference"));
  m.def("combined", &eval::combined, py::arg("bleu"), py::arg("inform"),
        py::arg("success"), "bleu + 0.5 * (inform + success), 2 decimals");

  m.def(
      "synth_fixtures_to",
      [](const std::string& out_dir, int n, std::uint64_t seed) {
        ingest::write_bundle(ingest::synth_fixtures(n, seed), out_dir);
      },
      py::arg("out_dir"), py::arg("n") = 25, py::arg("seed") = 1,
      "Write a deterministic synthetic bundle.");

  m.def(
      "build_corpus",
      [](const std::string& bundle_dir, const std::string& out, std::size_t max_len,
         int schema_window, bool include_schemas, bool include_instructions,
         double history_ratio) {
        auto bundle = ingest::read_bundle(bundle_dir);
        auto opts = make_options(max_len, schema_window, include_schemas,
                                 include_instructions, history_ratio);
        std::vector<corpus::TrainingSample> samples;
        for (const DialogueSession& s : bundle.sessions) {
          auto chunk = corpus::serialize_session(s, bundle.flow, bundle.schemas,
                                                 bundle.intent_schemas, opts);
          samples.insert(samples.end(), chunk.begin(), chunk.end());
        }
        corpus::write_corpus(samples, out);
        return stats_to_dict(corpus::corpus_stats(samples, opts.tokenizer));
      },
      py::arg("bundle_dir"), py::arg("out"), py::arg("max_len") = 4096,
      py::arg("schema_window") = 15, py::arg("include_schemas") = true,
      py::arg("include_instructions") = true, py::arg("history_ratio") = 0.6,
      "Serialize a bundle into a training corpus; returns its stats.");

  m.def(
      "corpus_stats_file",
      [](const std::string& path) {
        return stats_to_dict(corpus::corpus_stats(corpus::read_corpus(path)));
      },
      py::arg("path"));

  m.def(
      "run_gold_eval",
      [](const std::string& bundle_dir) {
        auto bundle = ingest::read_bundle(bundle_dir);
        std::vector<eval::SessionPrediction> preds;
        for (const DialogueSession& s : bundle.sessions) {
          backend::GoldEchoBackend echo(s, bundle.flow);
          orchestrator::RunConfig cfg;
          auto res = orchestrator::run_session(s, bundle, echo, cfg);
          preds.push_back({s.id, std::move(res.turns)});
        }
        return report_to_dict(eval::evaluate(preds, bundle));
      },
      py::arg("bundle_dir"),
      "Replay gold annotations through the full runtime and score them.");

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);
}
