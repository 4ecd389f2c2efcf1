#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zsparse/backend.hpp"
#include "zsparse/schema.hpp"

namespace zsp {

struct IntentPrediction {
  std::string intent;                                     // == ranked[0]
  double score = 0.0;
  std::vector<std::pair<std::string, double>> ranked;     // descending
  std::optional<std::string> generated_text;
};

struct IntentOptions {
  int max_tokens = 16;       // intents are short phrases
  bool raw_labels = false;   // compare against raw labels, not glosses
  std::vector<std::string> content_free_inputs = {"N/A", "", "[MASK]"};
};

// `Answer the following question depending on the context.\ncontext: A
// user said, {utterance}.\nquestion: What did the user intend to
// do?\nanswer:` with the utterance substituted verbatim.
Prompt build_intent_prompt(std::string_view utterance);

// Generate a free-form intent description, then rank labels by
// similarity to it. Ties break by schema document order.
IntentPrediction predict_intent_unconstrained(const std::string& utterance,
                                              const Schema& schema,
                                              GenerationBackend& backend,
                                              SimilarityProvider& sim,
                                              const IntentOptions& opts = {});

// Rank labels by the NLL of their naturalized form as a forced
// continuation (score = -NLL).
IntentPrediction predict_intent_constrained(const std::string& utterance,
                                            const Schema& schema,
                                            GenerationBackend& backend,
                                            const IntentOptions& opts = {});

// Diagonal content-free calibration: normalize(p_i / p_cf_i). Both
// vectors must be positive and sum to 1 within 1e-6.
std::vector<double> calibrate(const std::vector<double>& p,
                              const std::vector<double>& p_cf);

IntentPrediction predict_intent_calibrated(const std::string& utterance,
                                           const Schema& schema,
                                           GenerationBackend& backend,
                                           const IntentOptions& opts = {});

// No backend call: rank labels by similarity with the utterance itself.
IntentPrediction predict_intent_by_utterance_similarity(
    const std::string& utterance, const Schema& schema,
    SimilarityProvider& sim, const IntentOptions& opts = {});

// softmax of -NLL over candidate scores, temperature 1.
std::vector<double> softmax_neg_nll(const std::vector<double>& nlls);

}  // namespace zsp
