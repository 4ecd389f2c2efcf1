#include "zsparse/intent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace zsp {

namespace {

// Stable sort by descending score keeps schema document order among
// exact ties (labels are fed in document order).
IntentPrediction rank_to_prediction(
    std::vector<std::pair<std::string, double>> ranked,
    std::optional<std::string> generated = std::nullopt) {
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  IntentPrediction pred;
  pred.intent = ranked.front().first;
  pred.score = ranked.front().second;
  pred.ranked = std::move(ranked);
  pred.generated_text = std::move(generated);
  return pred;
}

std::string label_target(const std::string& intent, const IntentOptions& opts) {
  return opts.raw_labels ? intent : naturalize_label(intent);
}

}  // namespace

Prompt build_intent_prompt(std::string_view utterance) {
  if (utterance.empty()) {
    throw std::invalid_argument("build_intent_prompt: empty utterance");
  }
  std::string text = "Answer the following question depending on the context.\n";
  text += "context: A user said, ";
  text += utterance;
  text += ".\nquestion: What did the user intend to do?\nanswer:";
  return Prompt{std::move(text)};
}

std::vector<double> softmax_neg_nll(const std::vector<double>& nlls) {
  double lo = *std::min_element(nlls.begin(), nlls.end());
  std::vector<double> p(nlls.size());
  double z = 0.0;
  for (std::size_t i = 0; i < nlls.size(); ++i) {
    p[i] = std::exp(lo - nlls[i]);
    z += p[i];
  }
  for (auto& x : p) x /= z;
  return p;
}

IntentPrediction predict_intent_unconstrained(const std::string& utterance,
                                              const Schema& schema,
                                              GenerationBackend& backend,
                                              SimilarityProvider& sim,
                                              const IntentOptions& opts) {
  if (!backend.supports_free_generation()) {
    throw BackendError("backend does not support free generation");
  }
  ScoredGeneration gen =
      backend.generate(build_intent_prompt(utterance), opts.max_tokens);
  std::vector<std::pair<std::string, double>> ranked;
  ranked.reserve(schema.intents().size());
  for (const auto& intent : schema.intents()) {
    ranked.emplace_back(intent, sim.similarity(gen.text, label_target(intent, opts)));
  }
  return rank_to_prediction(std::move(ranked), gen.text);
}

IntentPrediction predict_intent_constrained(const std::string& utterance,
                                            const Schema& schema,
                                            GenerationBackend& backend,
                                            const IntentOptions& opts) {
  if (!backend.supports_candidate_scoring()) {
    throw BackendError("backend does not support candidate scoring");
  }
  std::vector<std::string> candidates;
  candidates.reserve(schema.intents().size());
  for (const auto& intent : schema.intents()) {
    candidates.push_back(label_target(intent, opts));
  }
  auto scored = backend.score_candidates(build_intent_prompt(utterance), candidates);
  std::vector<std::pair<std::string, double>> ranked;
  ranked.reserve(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    ranked.emplace_back(schema.intents()[i], -scored[i].nll);
  }
  return rank_to_prediction(std::move(ranked));
}

std::vector<double> calibrate(const std::vector<double>& p,
                              const std::vector<double>& p_cf) {
  if (p.size() != p_cf.size()) {
    throw std::invalid_argument("calibrate: length mismatch");
  }
  auto check = [](const std::vector<double>& v, const char* name) {
    double sum = 0.0;
    for (double x : v) {
      if (x <= 0.0) {
        throw std::invalid_argument(std::string("calibrate: non-positive entry in ") + name);
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument(std::string("calibrate: ") + name + " does not sum to 1");
    }
  };
  check(p, "p");
  check(p_cf, "p_cf");
  std::vector<double> out(p.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = p[i] / p_cf[i];
    z += out[i];
  }
  for (auto& x : out) x /= z;
  return out;
}

IntentPrediction predict_intent_calibrated(const std::string& utterance,
                                           const Schema& schema,
                                           GenerationBackend& backend,
                                           const IntentOptions& opts) {
  if (!backend.supports_candidate_scoring()) {
    throw BackendError("backend does not support candidate scoring");
  }
  std::vector<std::string> candidates;
  for (const auto& intent : schema.intents()) {
    candidates.push_back(label_target(intent, opts));
  }
  auto nlls_of = [&](const std::string& input) {
    // The intent prompt template applied to content-free inputs too;
    // the empty string yields `A user said, .` by construction.
    std::string text = "Answer the following question depending on the context.\n";
    text += "context: A user said, ";
    text += input;
    text += ".\nquestion: What did the user intend to do?\nanswer:";
    auto scored = backend.score_candidates(Prompt{std::move(text)}, candidates);
    std::vector<double> nlls(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) nlls[i] = scored[i].nll;
    return nlls;
  };

  std::vector<double> p = softmax_neg_nll(nlls_of(utterance));
  std::vector<double> p_cf(p.size(), 0.0);
  for (const auto& cf : opts.content_free_inputs) {
    auto q = softmax_neg_nll(nlls_of(cf));
    for (std::size_t i = 0; i < q.size(); ++i) p_cf[i] += q[i];
  }
  for (auto& x : p_cf) x /= static_cast<double>(opts.content_free_inputs.size());
  std::vector<double> cal = calibrate(p, p_cf);

  std::vector<std::pair<std::string, double>> ranked;
  for (std::size_t i = 0; i < cal.size(); ++i) {
    ranked.emplace_back(schema.intents()[i], cal[i]);
  }
  return rank_to_prediction(std::move(ranked));
}

IntentPrediction predict_intent_by_utterance_similarity(
    const std::string& utterance, const Schema& schema,
    SimilarityProvider& sim, const IntentOptions& opts) {
  std::vector<std::pair<std::string, double>> ranked;
  for (const auto& intent : schema.intents()) {
    ranked.emplace_back(intent, sim.similarity(utterance, label_target(intent, opts)));
  }
  return rank_to_prediction(std::move(ranked));
}

}  // namespace zsp
