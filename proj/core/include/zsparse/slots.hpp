#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zsparse/backend.hpp"
#include "zsparse/schema.hpp"

namespace zsp {

enum class AbstainMode { phrase_set, nll_threshold };

struct AbstainConfig {
  AbstainMode mode = AbstainMode::phrase_set;
  std::vector<std::string> phrases = default_abstain_phrases();
  double threshold = 0.0;       // used iff mode == nll_threshold
  bool per_token_mean = false;  // normalize NLL by token count in
                                // threshold comparisons

  static std::vector<std::string> default_abstain_phrases();
};

struct SlotAnswer {
  std::string slot;
  std::optional<std::string> value;  // nullopt iff abstained
  double nll = 0.0;                  // NLL of the chosen candidate
  bool abstained = false;
  std::size_t span_start = 0;  // token index of the chosen span
};

// One scored span candidate: contiguous whitespace tokens of the
// context, tracked with (start, length) for deterministic tie-breaks.
struct SpanCandidate {
  std::string text;
  double nll = 0.0;
  int token_count = 0;
  std::size_t start = 0;   // token index
  std::size_t length = 0;  // token count
};

struct SlotScores {
  std::vector<SpanCandidate> spans;           // (start, length) order
  std::vector<ScoredGeneration> phrase_nlls;  // abstain phrases, config order
};

// `Answer the following question depending on the context.\ncontext: A
// user said, {context}.\nquestion: {question}\nanswer:`
Prompt build_slot_prompt(std::string_view context, std::string_view question);

// All contiguous token spans of length <= max_span_tokens, first
// occurrence kept on duplicates, in (start, length) order, followed by
// the abstain phrases.
std::vector<std::string> enumerate_candidates(
    const std::string& context, int max_span_tokens,
    const std::vector<std::string>& phrases);

// Scores every span and abstain phrase for one slot question.
SlotScores score_slot_candidates(const std::string& context,
                                 const std::string& question,
                                 GenerationBackend& backend,
                                 const std::vector<std::string>& phrases,
                                 int max_span_tokens);

// phrase_set: global argmin over spans and phrases; abstain iff the
// argmin is a phrase. nll_threshold: argmin over spans only; abstain
// iff its NLL exceeds the threshold. Ties: earliest span start, then
// shortest span, then phrase order.
SlotAnswer extract_slot(const std::string& context, const std::string& slot,
                        const Schema& schema, GenerationBackend& backend,
                        const AbstainConfig& cfg, int max_span_tokens = 10);

SlotAnswer decide_answer(const std::string& slot, const SlotScores& scores,
                         const AbstainConfig& cfg);

struct AbstainRates {
  std::optional<double> on_unanswerable;  // absent class -> undefined
  std::optional<double> on_answerable;
};

AbstainRates abstain_rate(const std::vector<SlotAnswer>& answers,
                          const std::vector<bool>& gold_unanswerable);

}  // namespace zsp
