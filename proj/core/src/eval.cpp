#include "zsparse/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace zsp {

using nlohmann::json;

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

void check_lengths(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw std::invalid_argument(std::string(op) + ": length mismatch");
  }
  if (a == 0) {
    throw std::invalid_argument(std::string(op) + ": empty input");
  }
}

double f1_from_counts(double tp, double pred, double gold) {
  double precision = pred > 0 ? tp / pred : 0.0;
  double recall = gold > 0 ? tp / gold : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

MetricSet compute_metrics(const std::vector<IntentFrame>& predictions,
                          const std::vector<IntentFrame>& gold) {
  MetricSet m;
  m.n = gold.size();
  m.exact_match_accuracy = exact_match_accuracy(predictions, gold);
  m.intent_accuracy = intent_accuracy(predictions, gold);
  m.slot_macro_f1 = slot_macro_f1(predictions, gold);
  return m;
}

json metrics_to_json(const MetricSet& m) {
  return json{{"exact_match_accuracy", m.exact_match_accuracy},
              {"intent_accuracy", m.intent_accuracy},
              {"slot_macro_f1", m.slot_macro_f1},
              {"n", m.n}};
}

}  // namespace

IngestResult ingest_mtop_tsv(const std::filesystem::path& path,
                             std::size_t utterance_col, std::size_t mr_col,
                             std::optional<std::size_t> domain_col,
                             const Schema* schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  IngestResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    std::size_t needed = std::max(utterance_col, mr_col);
    if (domain_col) needed = std::max(needed, *domain_col);
    if (cols.size() <= needed) {
      result.errors.emplace_back(lineno, "too few columns");
      continue;
    }
    LabeledExample ex;
    ex.utterance = cols[utterance_col];
    ex.domain = domain_col ? cols[*domain_col] : "unknown";
    if (ex.domain.empty()) ex.domain = "unknown";
    if (ex.utterance.empty()) {
      result.errors.emplace_back(lineno, "empty utterance");
      continue;
    }
    try {
      ex.gold = parse_mr(cols[mr_col], schema);
    } catch (const MRError& e) {
      result.errors.emplace_back(lineno, e.what());
      continue;
    }
    result.examples.push_back(std::move(ex));
  }
  return result;
}

double exact_match_accuracy(const std::vector<IntentFrame>& predictions,
                            const std::vector<IntentFrame>& gold) {
  check_lengths(predictions.size(), gold.size(), "exact_match_accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (exact_match(predictions[i], gold[i])) ++hits;
  }
  return static_cast<double>(hits) / gold.size();
}

double intent_accuracy(const std::vector<IntentFrame>& predictions,
                       const std::vector<IntentFrame>& gold) {
  check_lengths(predictions.size(), gold.size(), "intent_accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predictions[i].intent == gold[i].intent) ++hits;
  }
  return static_cast<double>(hits) / gold.size();
}

double slot_macro_f1(const std::vector<IntentFrame>& predictions,
                     const std::vector<IntentFrame>& gold) {
  check_lengths(predictions.size(), gold.size(), "slot_macro_f1");
  // Multisets of (slot, normalized value) pairs at the top level.
  auto pairs_of = [](const IntentFrame& f) {
    std::multiset<std::pair<std::string, std::string>> pairs;
    for (const auto& filling : f.fillings) {
      std::string value = filling.is_nested() ? serialize_mr(*filling.nested)
                                              : normalize_text(filling.text);
      pairs.emplace(filling.slot, std::move(value));
    }
    return pairs;
  };
  struct Counts {
    double tp = 0, pred = 0, gold = 0;
  };
  std::map<std::string, Counts> per_slot;
  std::set<std::string> gold_slots;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto p = pairs_of(predictions[i]);
    auto g = pairs_of(gold[i]);
    for (const auto& pair : g) {
      gold_slots.insert(pair.first);
      per_slot[pair.first].gold += 1;
    }
    for (const auto& pair : p) {
      auto& c = per_slot[pair.first];
      c.pred += 1;
      auto it = g.find(pair);
      if (it != g.end()) {
        c.tp += 1;
        g.erase(it);
      }
    }
  }
  if (gold_slots.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& slot : gold_slots) {
    const Counts& c = per_slot[slot];
    sum += f1_from_counts(c.tp, c.pred, c.gold);
  }
  return sum / static_cast<double>(gold_slots.size());
}

EvalReport evaluate(const std::vector<ParseTrace>& traces,
                    const std::vector<LabeledExample>& examples) {
  check_lengths(traces.size(), examples.size(), "evaluate");
  std::vector<IntentFrame> predictions;
  std::vector<IntentFrame> gold;
  std::map<std::string, std::pair<std::vector<IntentFrame>, std::vector<IntentFrame>>>
      by_domain;
  std::vector<SlotAnswer> answers;
  std::vector<bool> unanswerable_mask;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    predictions.push_back(traces[i].final_frame);
    gold.push_back(examples[i].gold);
    auto& bucket = by_domain[examples[i].domain];
    bucket.first.push_back(traces[i].final_frame);
    bucket.second.push_back(examples[i].gold);
    std::set<std::string> gold_filled;
    for (const auto& f : examples[i].gold.fillings) gold_filled.insert(f.slot);
    for (const auto& [slot, st] : traces[i].slot_answers) {
      answers.push_back(st.answer);
      unanswerable_mask.push_back(!gold_filled.count(slot));
    }
  }
  EvalReport report;
  report.overall = compute_metrics(predictions, gold);
  for (const auto& [domain, bucket] : by_domain) {
    report.per_domain.emplace(domain, compute_metrics(bucket.first, bucket.second));
  }
  if (!answers.empty()) {
    AbstainRates rates = abstain_rate(answers, unanswerable_mask);
    report.abstain_on_unanswerable = rates.on_unanswerable;
    report.abstain_on_answerable = rates.on_answerable;
  }
  return report;
}

json report_to_json(const EvalReport& report) {
  json per_domain = json::object();
  for (const auto& [domain, m] : report.per_domain) {
    per_domain[domain] = metrics_to_json(m);
  }
  return json{
      {"overall", metrics_to_json(report.overall)},
      {"per_domain", per_domain},
      {"abstain_stats",
       {{"on_unanswerable", report.abstain_on_unanswerable
                                ? json(*report.abstain_on_unanswerable)
                                : json(nullptr)},
        {"on_answerable", report.abstain_on_answerable
                              ? json(*report.abstain_on_answerable)
                              : json(nullptr)}}},
  };
}

std::vector<SweepRow> threshold_sweep(const std::vector<SweepRecord>& records,
                                      const std::vector<double>& taus) {
  if (records.empty()) {
    throw std::invalid_argument("threshold_sweep: no records");
  }
  std::vector<SweepRow> rows;
  rows.reserve(taus.size());
  for (double tau : taus) {
    SweepRow row;
    row.tau = tau;
    double ans_total = 0, ans_pred = 0, ans_correct = 0;
    double unans_total = 0, unans_abstained = 0;
    std::size_t abstained = 0;
    for (const auto& r : records) {
      bool abstain = r.best_span_nll > tau;
      if (abstain) ++abstained;
      if (r.gold_value) {
        ans_total += 1;
        if (!abstain) {
          ans_pred += 1;
          if (normalize_text(r.best_span) == normalize_text(*r.gold_value)) {
            ans_correct += 1;
          }
        }
      } else {
        unans_total += 1;
        if (abstain) unans_abstained += 1;
      }
    }
    row.abstain_rate = static_cast<double>(abstained) / records.size();
    row.f1_answerable = f1_from_counts(ans_correct, ans_pred, ans_total);
    row.f1_unanswerable = unans_total > 0 ? unans_abstained / unans_total : 0.0;
    if (ans_total > 0 && unans_total > 0) {
      // Harmonic mean of the two subset scores.
      double a = row.f1_answerable, u = row.f1_unanswerable;
      row.f1_all = (a + u) > 0 ? 2.0 * a * u / (a + u) : 0.0;
    } else if (ans_total > 0) {
      row.f1_all = row.f1_answerable;
    } else {
      row.f1_all = row.f1_unanswerable;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "tau,f1_all,f1_answerable,f1_unanswerable,abstain_rate\n";
  for (const auto& r : rows) {
    out << r.tau << ',' << r.f1_all << ',' << r.f1_answerable << ','
        << r.f1_unanswerable << ',' << r.abstain_rate << '\n';
  }
  return out.str();
}

}  // namespace zsp
