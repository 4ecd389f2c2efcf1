#pragma once

#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "zsparse/intent.hpp"
#include "zsparse/mr.hpp"
#include "zsparse/slots.hpp"

namespace zsp {

enum class IntentMode {
  unconstrained,
  constrained,
  calibrated,
  utterance_similarity,
};

struct BeamConfig {
  int k = 1;
  double alpha = 0.5;  // weight of the intent log-probability
};

struct PipelineConfig {
  IntentMode intent_mode = IntentMode::unconstrained;
  AbstainConfig abstain;
  IntentOptions intent;
  int max_span_tokens = 10;
  bool use_beam = false;
  BeamConfig beam;
  std::size_t beam_combination_cap = 10000;
};

struct SlotTrace {
  SlotAnswer answer;
  std::string raw_text;  // span text before any nested replacement
  double best_span_nll = 0.0;
  std::string best_span;
  double best_phrase_nll = 0.0;
  bool has_span = false;
};

struct NestedTrace {
  std::string intent;
  std::map<std::string, SlotAnswer> answers;  // answered nested slots only
};

struct ParseTrace {
  std::string utterance;
  IntentPrediction intent_prediction;
  std::map<std::string, SlotTrace> slot_answers;
  std::map<std::string, NestedTrace> nested;  // keyed by host slot
  IntentFrame final_frame;
  double score = 0.0;  // aggregated log-likelihood (beam mode)
  bool beam_fallback_greedy = false;
  bool failed = false;
  std::string error;
};

// alpha * intent_logp + (1 - alpha) * sum(slot_logps). Nested frames
// contribute their recursive aggregate as that slot's logp.
double aggregate_score(double intent_logp, const std::vector<double>& slot_logps,
                       double alpha);

class Pipeline {
 public:
  Pipeline(const Schema& schema, GenerationBackend& backend,
           SimilarityProvider& sim, PipelineConfig cfg);

  // Top-down greedy strategy: intent first, then each of its slots,
  // then nested-intent expansion of answered slot values. Backend
  // failures mark the trace failed with the partial results kept.
  ParseTrace parse_greedy(const std::string& utterance);

  // Beam variant: top-k intents, top-k candidates per slot (abstain
  // competes by its NLL and contributes zero to the sum), full-frame
  // enumeration scored by aggregate_score. Falls back to per-slot
  // greedy within each intent past the combination cap.
  ParseTrace parse_beam(const std::string& utterance);

  // Dispatches on cfg.use_beam.
  ParseTrace parse(const std::string& utterance);

  // One trace per utterance, input order preserved; per-record
  // failures are embedded, never thrown.
  std::vector<ParseTrace> parse_corpus(const std::vector<std::string>& records);

  // Slot extraction primed on a fixed intent (threshold-sweep support).
  std::map<std::string, SlotTrace> extract_slots_for_intent(
      const std::string& utterance, const std::string& intent);

  const PipelineConfig& config() const { return cfg_; }

 private:
  struct NestedExpansion {
    bool attached = false;
    NestedTrace trace;
    std::vector<double> slot_logps;
  };

  IntentPrediction predict_intent(const std::string& utterance);
  SlotTrace extract_one(const std::string& context, const std::string& slot);
  NestedExpansion expand_nested(const std::string& slot,
                                const std::string& value);
  IntentFrame assemble(const std::string& intent,
                       const std::map<std::string, SlotTrace>& slots,
                       const std::map<std::string, NestedTrace>& nested) const;

  const Schema& schema_;
  GenerationBackend& backend_;
  SimilarityProvider& sim_;
  PipelineConfig cfg_;
  std::unordered_map<std::string, SlotScores> score_cache_;
  std::unordered_map<std::string, NestedExpansion> nested_cache_;
};

void to_json(nlohmann::json& j, const ParseTrace& t);

}  // namespace zsp
