#include "zsparse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace zsp {

using nlohmann::json;

namespace {

constexpr char kCacheSep = '\x1f';

std::vector<double> logsoftmax(const std::vector<double>& scores) {
  double hi = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - hi);
  double logz = hi + std::log(z);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - logz;
  return out;
}

double effective_nll(double nll, int token_count, bool per_token_mean) {
  if (!per_token_mean || token_count <= 0) return nll;
  return nll / static_cast<double>(token_count);
}

}  // namespace

double aggregate_score(double intent_logp, const std::vector<double>& slot_logps,
                       double alpha) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("aggregate_score: alpha outside [0, 1]");
  }
  double slot_sum = 0.0;
  for (double lp : slot_logps) slot_sum += lp;
  return alpha * intent_logp + (1.0 - alpha) * slot_sum;
}

Pipeline::Pipeline(const Schema& schema, GenerationBackend& backend,
                   SimilarityProvider& sim, PipelineConfig cfg)
    : schema_(schema), backend_(backend), sim_(sim), cfg_(std::move(cfg)) {}

IntentPrediction Pipeline::predict_intent(const std::string& utterance) {
  switch (cfg_.intent_mode) {
    case IntentMode::unconstrained:
      return predict_intent_unconstrained(utterance, schema_, backend_, sim_,
                                          cfg_.intent);
    case IntentMode::constrained:
      return predict_intent_constrained(utterance, schema_, backend_, cfg_.intent);
    case IntentMode::calibrated:
      return predict_intent_calibrated(utterance, schema_, backend_, cfg_.intent);
    case IntentMode::utterance_similarity:
      return predict_intent_by_utterance_similarity(utterance, schema_, sim_,
                                                    cfg_.intent);
  }
  throw std::logic_error("unknown intent mode");
}

SlotTrace Pipeline::extract_one(const std::string& context,
                                const std::string& slot) {
  const std::string& question = schema_.question(slot);
  std::string key = context + kCacheSep + question;
  auto it = score_cache_.find(key);
  if (it == score_cache_.end()) {
    it = score_cache_
             .emplace(std::move(key),
                      score_slot_candidates(context, question, backend_,
                                            cfg_.abstain.phrases,
                                            cfg_.max_span_tokens))
             .first;
  }
  const SlotScores& scores = it->second;

  SlotTrace trace;
  trace.answer = decide_answer(slot, scores, cfg_.abstain);
  if (trace.answer.value) trace.raw_text = *trace.answer.value;
  for (const auto& s : scores.spans) {
    if (!trace.has_span || s.nll < trace.best_span_nll) {
      trace.has_span = true;
      trace.best_span_nll = s.nll;
      trace.best_span = s.text;
    }
  }
  trace.best_phrase_nll = std::numeric_limits<double>::infinity();
  for (const auto& p : scores.phrase_nlls) {
    trace.best_phrase_nll = std::min(trace.best_phrase_nll, p.nll);
  }
  return trace;
}

// Attach rule: among s2ni candidates with at least one answered slot,
// most answered slots wins; ties by lowest summed NLL over answered
// slots, then s2ni order.
Pipeline::NestedExpansion Pipeline::expand_nested(const std::string& slot,
                                                  const std::string& value) {
  std::string key = slot + kCacheSep + value;
  auto cached = nested_cache_.find(key);
  if (cached != nested_cache_.end()) return cached->second;

  NestedExpansion best;
  std::size_t best_count = 0;
  double best_nll_sum = 0.0;
  for (const auto& candidate : schema_.nested_candidates(slot)) {
    std::map<std::string, SlotAnswer> answers;
    std::vector<double> logps;
    double nll_sum = 0.0;
    for (const auto& nested_slot : schema_.slots_of(candidate)) {
      SlotTrace t = extract_one(value, nested_slot);
      if (!t.answer.abstained) {
        nll_sum += t.answer.nll;
        logps.push_back(-t.answer.nll);
        answers.emplace(nested_slot, t.answer);
      }
    }
    if (answers.empty()) continue;
    if (answers.size() > best_count ||
        (answers.size() == best_count && best.attached &&
         nll_sum < best_nll_sum)) {
      best.attached = true;
      best.trace.intent = candidate;
      best.trace.answers = std::move(answers);
      best.slot_logps = std::move(logps);
      best_count = best.trace.answers.size();
      best_nll_sum = nll_sum;
    }
  }
  nested_cache_.emplace(std::move(key), best);
  return best;
}

IntentFrame Pipeline::assemble(
    const std::string& intent, const std::map<std::string, SlotTrace>& slots,
    const std::map<std::string, NestedTrace>& nested) const {
  struct Pending {
    std::string slot;
    std::size_t span_start;
    std::size_t prompt_order;
    SlotFilling filling;
  };
  std::vector<Pending> pending;
  const auto& slot_order = schema_.slots_of(intent);
  for (std::size_t i = 0; i < slot_order.size(); ++i) {
    auto it = slots.find(slot_order[i]);
    if (it == slots.end() || it->second.answer.abstained) continue;
    const SlotTrace& st = it->second;
    SlotFilling filling;
    filling.slot = slot_order[i];
    auto nit = nested.find(slot_order[i]);
    if (nit != nested.end()) {
      auto sub = std::make_shared<IntentFrame>();
      sub->intent = nit->second.intent;
      // Nested fillings in span order within the host value.
      std::vector<const SlotAnswer*> answered;
      for (const auto& [_, ans] : nit->second.answers) answered.push_back(&ans);
      std::stable_sort(answered.begin(), answered.end(),
                       [](const SlotAnswer* a, const SlotAnswer* b) {
                         return a->span_start < b->span_start;
                       });
      for (const SlotAnswer* ans : answered) {
        sub->fillings.push_back(SlotFilling{ans->slot, *ans->value, nullptr});
      }
      filling.nested = std::move(sub);
    } else {
      filling.text = *st.answer.value;
    }
    pending.push_back(Pending{slot_order[i], st.answer.span_start, i,
                              std::move(filling)});
  }
  // Utterance-span order, prompt order among ties.
  std::stable_sort(pending.begin(), pending.end(),
                   [](const Pending& a, const Pending& b) {
                     return a.span_start < b.span_start;
                   });
  IntentFrame frame;
  frame.intent = intent;
  for (auto& p : pending) frame.fillings.push_back(std::move(p.filling));
  return frame;
}

ParseTrace Pipeline::parse_greedy(const std::string& utterance) {
  ParseTrace trace;
  trace.utterance = utterance;
  try {
    trace.intent_prediction = predict_intent(utterance);
    const std::string& intent = trace.intent_prediction.intent;
    for (const auto& slot : schema_.slots_of(intent)) {
      SlotTrace st = extract_one(utterance, slot);
      if (!st.answer.abstained) {
        NestedExpansion exp = expand_nested(slot, *st.answer.value);
        if (exp.attached) trace.nested.emplace(slot, exp.trace);
      }
      trace.slot_answers.emplace(slot, std::move(st));
    }
    trace.final_frame = assemble(intent, trace.slot_answers, trace.nested);
  } catch (const std::exception& e) {
    trace.failed = true;
    trace.error = e.what();
    if (!trace.intent_prediction.intent.empty()) {
      trace.final_frame =
          assemble(trace.intent_prediction.intent, trace.slot_answers, trace.nested);
    }
  }
  return trace;
}

ParseTrace Pipeline::parse_beam(const std::string& utterance) {
  struct Option {
    bool abstain = false;
    std::string text;
    double rank_nll = 0.0;   // ordering key (effective NLL)
    double nll = 0.0;        // raw NLL (logp = -nll when not abstain)
    std::size_t span_start = 0;
  };

  ParseTrace trace;
  trace.utterance = utterance;
  const std::size_t k = static_cast<std::size_t>(std::max(1, cfg_.beam.k));
  const double alpha = cfg_.beam.alpha;
  try {
    trace.intent_prediction = predict_intent(utterance);
    const auto& ranked = trace.intent_prediction.ranked;
    std::vector<double> scores(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) scores[i] = ranked[i].second;
    std::vector<double> intent_logps = logsoftmax(scores);

    const std::size_t n_intents = std::min(k, ranked.size());
    // Per intent: ranked option lists per slot.
    std::vector<std::vector<std::vector<Option>>> options(n_intents);
    std::size_t total_combos = 0;
    for (std::size_t ii = 0; ii < n_intents; ++ii) {
      const std::string& intent = ranked[ii].first;
      std::size_t combos = 1;
      for (const auto& slot : schema_.slots_of(intent)) {
        const std::string& question = schema_.question(slot);
        std::string key = utterance + kCacheSep + question;
        auto it = score_cache_.find(key);
        if (it == score_cache_.end()) {
          it = score_cache_
                   .emplace(std::move(key),
                            score_slot_candidates(utterance, question, backend_,
                                                  cfg_.abstain.phrases,
                                                  cfg_.max_span_tokens))
                   .first;
        }
        const SlotScores& sc = it->second;
        std::vector<Option> opts;
        for (const auto& s : sc.spans) {
          opts.push_back(Option{
              false, s.text,
              effective_nll(s.nll, s.token_count, cfg_.abstain.per_token_mean),
              s.nll, s.start});
        }
        std::stable_sort(opts.begin(), opts.end(),
                         [](const Option& a, const Option& b) {
                           return a.rank_nll < b.rank_nll;
                         });
        // The abstain option competes by its own NLL: the best abstain
        // phrase in phrase_set mode, the threshold in nll_threshold
        // mode. Spans win exact ties.
        Option abstain;
        abstain.abstain = true;
        if (cfg_.abstain.mode == AbstainMode::phrase_set) {
          abstain.rank_nll = std::numeric_limits<double>::infinity();
          for (const auto& p : sc.phrase_nlls) {
            abstain.rank_nll = std::min(abstain.rank_nll, p.nll);
          }
          abstain.nll = abstain.rank_nll;
        } else {
          abstain.rank_nll = cfg_.abstain.threshold;
          abstain.nll = abstain.rank_nll;
        }
        auto pos = std::upper_bound(opts.begin(), opts.end(), abstain,
                                    [](const Option& a, const Option& b) {
                                      return a.rank_nll < b.rank_nll;
                                    });
        opts.insert(pos, abstain);
        if (opts.size() > k) opts.resize(k);
        combos *= opts.size();
        options[ii].push_back(std::move(opts));
      }
      total_combos += combos;
    }

    bool fallback = total_combos > cfg_.beam_combination_cap;
    trace.beam_fallback_greedy = fallback;

    double best_score = -std::numeric_limits<double>::infinity();
    bool have_best = false;
    std::size_t best_intent = 0;
    std::vector<std::size_t> best_choice;

    for (std::size_t ii = 0; ii < n_intents; ++ii) {
      const std::string& intent = ranked[ii].first;
      const auto& slot_order = schema_.slots_of(intent);
      const auto& slot_opts = options[ii];
      std::vector<std::size_t> choice(slot_opts.size(), 0);
      while (true) {
        std::vector<double> slot_logps;
        for (std::size_t si = 0; si < slot_opts.size(); ++si) {
          const Option& o = slot_opts[si][choice[si]];
          if (o.abstain) continue;  // contributes zero to the sum
          double lp = -o.nll;
          NestedExpansion exp = expand_nested(slot_order[si], o.text);
          if (exp.attached) {
            lp = aggregate_score(0.0, exp.slot_logps, alpha);
          }
          slot_logps.push_back(lp);
        }
        double score = aggregate_score(intent_logps[ii], slot_logps, alpha);
        if (!have_best || score > best_score) {
          have_best = true;
          best_score = score;
          best_intent = ii;
          best_choice = choice;
        }
        if (fallback || slot_opts.empty()) break;  // per-slot greedy
        // Mixed-radix increment, last slot fastest.
        bool rolled_over = true;
        for (std::size_t si = slot_opts.size(); si-- > 0;) {
          if (++choice[si] < slot_opts[si].size()) {
            rolled_over = false;
            break;
          }
          choice[si] = 0;
        }
        if (rolled_over) break;
      }
    }

    // Materialize the winning frame.
    const std::string& intent = ranked[best_intent].first;
    const auto& slot_order = schema_.slots_of(intent);
    const auto& slot_opts = options[best_intent];
    for (std::size_t si = 0; si < slot_opts.size(); ++si) {
      const Option& o = slot_opts[si][best_choice[si]];
      const std::string& slot = slot_order[si];
      SlotTrace st = extract_one(utterance, slot);  // cached scores
      st.answer.slot = slot;
      if (o.abstain) {
        st.answer.abstained = true;
        st.answer.value.reset();
        st.answer.nll = o.nll;
        st.raw_text.clear();
      } else {
        st.answer.abstained = false;
        st.answer.value = o.text;
        st.answer.nll = o.nll;
        st.answer.span_start = o.span_start;
        st.raw_text = o.text;
        NestedExpansion exp = expand_nested(slot, o.text);
        if (exp.attached) trace.nested.emplace(slot, exp.trace);
      }
      trace.slot_answers.emplace(slot, std::move(st));
    }
    trace.final_frame = assemble(intent, trace.slot_answers, trace.nested);
    trace.score = best_score;
  } catch (const std::exception& e) {
    trace.failed = true;
    trace.error = e.what();
  }
  return trace;
}

ParseTrace Pipeline::parse(const std::string& utterance) {
  return cfg_.use_beam ? parse_beam(utterance) : parse_greedy(utterance);
}

std::vector<ParseTrace> Pipeline::parse_corpus(
    const std::vector<std::string>& records) {
  std::vector<ParseTrace> traces;
  traces.reserve(records.size());
  for (const auto& utterance : records) {
    traces.push_back(parse(utterance));
  }
  return traces;
}

std::map<std::string, SlotTrace> Pipeline::extract_slots_for_intent(
    const std::string& utterance, const std::string& intent) {
  std::map<std::string, SlotTrace> out;
  for (const auto& slot : schema_.slots_of(intent)) {
    out.emplace(slot, extract_one(utterance, slot));
  }
  return out;
}

void to_json(json& j, const ParseTrace& t) {
  json slots = json::object();
  for (const auto& [slot, st] : t.slot_answers) {
    slots[slot] = {
        {"value", st.answer.value ? json(*st.answer.value) : json(nullptr)},
        {"nll", st.answer.nll},
        {"abstained", st.answer.abstained},
        {"span_start", st.answer.span_start},
        {"raw_text", st.raw_text},
        {"best_span", st.best_span},
        {"best_span_nll", st.has_span ? json(st.best_span_nll) : json(nullptr)},
    };
  }
  json nested = json::object();
  for (const auto& [slot, nt] : t.nested) {
    json answers = json::object();
    for (const auto& [ns, ans] : nt.answers) {
      answers[ns] = {{"value", ans.value ? json(*ans.value) : json(nullptr)},
                     {"nll", ans.nll}};
    }
    nested[slot] = {{"intent", nt.intent}, {"answers", answers}};
  }
  json ranked = json::array();
  for (const auto& [label, score] : t.intent_prediction.ranked) {
    ranked.push_back({{"label", label}, {"score", score}});
  }
  j = json{
      {"utterance", t.utterance},
      {"intent",
       {{"label", t.intent_prediction.intent},
        {"score", t.intent_prediction.score},
        {"generated_text", t.intent_prediction.generated_text
                               ? json(*t.intent_prediction.generated_text)
                               : json(nullptr)},
        {"ranked", ranked}}},
      {"slots", slots},
      {"nested", nested},
      {"mr", t.failed && t.final_frame.intent.empty()
                 ? json(nullptr)
                 : json(serialize_mr(t.final_frame))},
      {"score", t.score},
      {"beam_fallback_greedy", t.beam_fallback_greedy},
      {"failed", t.failed},
      {"error", t.error},
  };
}

}  // namespace zsp
