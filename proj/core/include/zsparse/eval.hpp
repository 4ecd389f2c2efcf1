#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "zsparse/mr.hpp"
#include "zsparse/pipeline.hpp"

namespace zsp {

struct LabeledExample {
  std::string utterance;
  IntentFrame gold;
  std::string domain;  // "unknown" when absent
};

struct IngestResult {
  std::vector<LabeledExample> examples;
  std::vector<std::pair<std::size_t, std::string>> errors;  // (line, message)
};

// One example per non-empty line of a tab-separated file; unparseable
// MRs go to the error list, never abort the ingest.
IngestResult ingest_mtop_tsv(const std::filesystem::path& path,
                             std::size_t utterance_col, std::size_t mr_col,
                             std::optional<std::size_t> domain_col = {},
                             const Schema* schema = nullptr);

double exact_match_accuracy(const std::vector<IntentFrame>& predictions,
                            const std::vector<IntentFrame>& gold);

double intent_accuracy(const std::vector<IntentFrame>& predictions,
                       const std::vector<IntentFrame>& gold);

// Corpus-level precision/recall of top-level (slot, normalized value)
// pairs per slot type, macro-averaged over slot types occurring in
// gold. F1 of a type is 0 when both precision and recall are 0.
double slot_macro_f1(const std::vector<IntentFrame>& predictions,
                     const std::vector<IntentFrame>& gold);

struct MetricSet {
  double exact_match_accuracy = 0.0;
  double intent_accuracy = 0.0;
  double slot_macro_f1 = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  MetricSet overall;
  std::map<std::string, MetricSet> per_domain;
  std::optional<double> abstain_on_unanswerable;
  std::optional<double> abstain_on_answerable;
};

EvalReport evaluate(const std::vector<ParseTrace>& traces,
                    const std::vector<LabeledExample>& examples);

nlohmann::json report_to_json(const EvalReport& report);

// One re-thresholdable slot observation: the best span and its NLL,
// plus the gold value (absent when the slot question is unanswerable).
struct SweepRecord {
  std::string slot;
  double best_span_nll = 0.0;
  std::string best_span;
  std::optional<std::string> gold_value;
};

struct SweepRow {
  double tau = 0.0;
  double f1_all = 0.0;
  double f1_answerable = 0.0;
  double f1_unanswerable = 0.0;
  double abstain_rate = 0.0;
};

// Offline re-thresholding: prediction abstains iff best_span_nll > tau.
std::vector<SweepRow> threshold_sweep(const std::vector<SweepRecord>& records,
                                      const std::vector<double>& taus);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace zsp
