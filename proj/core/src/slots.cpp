#include "zsparse/slots.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "zsparse/mr.hpp"

namespace zsp {

std::vector<std::string> AbstainConfig::default_abstain_phrases() {
  return {"unanswerable", "no answer", "not answerable",
          "it cannot be answered", "not mentioned"};
}

Prompt build_slot_prompt(std::string_view context, std::string_view question) {
  if (context.empty() || question.empty()) {
    throw std::invalid_argument("build_slot_prompt: empty context or question");
  }
  std::string text = "Answer the following question depending on the context.\n";
  text += "context: A user said, ";
  text += context;
  text += ".\nquestion: ";
  text += question;
  text += "\nanswer:";
  return Prompt{std::move(text)};
}

std::vector<std::string> enumerate_candidates(
    const std::string& context, int max_span_tokens,
    const std::vector<std::string>& phrases) {
  if (context.empty()) {
    throw std::invalid_argument("enumerate_candidates: empty context");
  }
  auto tokens = tokenize(context);
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    std::string span;
    for (std::size_t len = 1;
         len <= static_cast<std::size_t>(max_span_tokens) &&
         start + len <= tokens.size();
         ++len) {
      if (!span.empty()) span.push_back(' ');
      span += tokens[start + len - 1];
      if (seen.insert(span).second) out.push_back(span);
    }
  }
  out.insert(out.end(), phrases.begin(), phrases.end());
  return out;
}

SlotScores score_slot_candidates(const std::string& context,
                                 const std::string& question,
                                 GenerationBackend& backend,
                                 const std::vector<std::string>& phrases,
                                 int max_span_tokens) {
  if (!backend.supports_candidate_scoring()) {
    throw BackendError("backend does not support candidate scoring");
  }
  auto tokens = tokenize(context);
  // Mirror enumerate_candidates but keep span coordinates.
  std::vector<SpanCandidate> spans;
  std::unordered_set<std::string> seen;
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    std::string span;
    for (std::size_t len = 1;
         len <= static_cast<std::size_t>(max_span_tokens) &&
         start + len <= tokens.size();
         ++len) {
      if (!span.empty()) span.push_back(' ');
      span += tokens[start + len - 1];
      if (seen.insert(span).second) {
        spans.push_back(SpanCandidate{span, 0.0, 0, start, len});
      }
    }
  }
  std::vector<std::string> candidates;
  candidates.reserve(spans.size() + phrases.size());
  for (const auto& s : spans) candidates.push_back(s.text);
  candidates.insert(candidates.end(), phrases.begin(), phrases.end());

  auto scored =
      backend.score_candidates(build_slot_prompt(context, question), candidates);
  SlotScores out;
  out.spans = std::move(spans);
  for (std::size_t i = 0; i < out.spans.size(); ++i) {
    out.spans[i].nll = scored[i].nll;
    out.spans[i].token_count = scored[i].token_count;
  }
  for (std::size_t i = out.spans.size(); i < scored.size(); ++i) {
    out.phrase_nlls.push_back(scored[i]);
  }
  return out;
}

namespace {

double effective_nll(double nll, int token_count, bool per_token_mean) {
  if (!per_token_mean || token_count <= 0) return nll;
  return nll / static_cast<double>(token_count);
}

}  // namespace

SlotAnswer decide_answer(const std::string& slot, const SlotScores& scores,
                         const AbstainConfig& cfg) {
  SlotAnswer ans;
  ans.slot = slot;

  // Spans are in (start, length) order, phrases after; a strict '<'
  // argmin gives the earliest start, then the shortest span.
  const SpanCandidate* best_span = nullptr;
  for (const auto& s : scores.spans) {
    if (!best_span || s.nll < best_span->nll) best_span = &s;
  }

  if (cfg.mode == AbstainMode::phrase_set) {
    const ScoredGeneration* best_phrase = nullptr;
    for (const auto& p : scores.phrase_nlls) {
      if (!best_phrase || p.nll < best_phrase->nll) best_phrase = &p;
    }
    if (best_phrase && (!best_span || best_phrase->nll < best_span->nll)) {
      ans.abstained = true;
      ans.nll = best_phrase->nll;
      return ans;
    }
    if (!best_span) throw std::invalid_argument("decide_answer: no candidates");
    ans.value = best_span->text;
    ans.nll = best_span->nll;
    ans.span_start = best_span->start;
    return ans;
  }

  // nll_threshold mode: spans only.
  if (!best_span) throw std::invalid_argument("decide_answer: no span candidates");
  double eff =
      effective_nll(best_span->nll, best_span->token_count, cfg.per_token_mean);
  if (eff > cfg.threshold) {
    ans.abstained = true;
    ans.nll = best_span->nll;
    return ans;
  }
  ans.value = best_span->text;
  ans.nll = best_span->nll;
  ans.span_start = best_span->start;
  return ans;
}

SlotAnswer extract_slot(const std::string& context, const std::string& slot,
                        const Schema& schema, GenerationBackend& backend,
                        const AbstainConfig& cfg, int max_span_tokens) {
  const std::string& question = schema.question(slot);
  SlotScores scores = score_slot_candidates(context, question, backend,
                                            cfg.phrases, max_span_tokens);
  return decide_answer(slot, scores, cfg);
}

AbstainRates abstain_rate(const std::vector<SlotAnswer>& answers,
                          const std::vector<bool>& gold_unanswerable) {
  if (answers.size() != gold_unanswerable.size()) {
    throw std::invalid_argument("abstain_rate: length mismatch");
  }
  std::size_t n_unans = 0, n_ans = 0, abst_unans = 0, abst_ans = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (gold_unanswerable[i]) {
      ++n_unans;
      if (answers[i].abstained) ++abst_unans;
    } else {
      ++n_ans;
      if (answers[i].abstained) ++abst_ans;
    }
  }
  AbstainRates rates;
  if (n_unans > 0) {
    rates.on_unanswerable = static_cast<double>(abst_unans) / n_unans;
  }
  if (n_ans > 0) {
    rates.on_answerable = static_cast<double>(abst_ans) / n_ans;
  }
  return rates;
}

}  // namespace zsp
