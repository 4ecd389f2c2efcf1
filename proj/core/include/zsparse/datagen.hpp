#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace zsp {

struct QASample {
  std::string id;
  std::string question;
  std::string context;
  std::string answer;
  std::string source;
  bool answerable = true;
  bool extractive = true;  // answer is a verbatim span of the context
  std::string provenance_strategy;   // set on synthetic samples
  std::string provenance_source_id;  // id of the originating sample
};

struct SynthesisReport {
  std::size_t input_count = 0;
  std::size_t removed_sentence_count = 0;  // unanswerables via removal
  std::size_t swapped_count = 0;           // unanswerables via swap
  std::size_t skipped_count = 0;
  std::map<std::string, std::size_t> skip_reasons;
};

struct SynthesisOptions {
  bool removal = true;
  bool swap = true;
  double target_ratio = 0.5;  // unanswerable fraction of the output
  std::uint64_t seed = 0;
  bool swap_answer_guard = true;  // reject donor contexts containing the answer
};

// Sentence boundaries at . ? ! followed by whitespace and an uppercase
// letter, or end of text. Abbreviations are not special-cased.
std::vector<std::string> split_sentences(std::string_view text);

// Drops every sentence containing the answer (case-sensitive
// substring). Returns nullopt (with a reason) when the answer
// survives elsewhere or the context empties.
std::optional<QASample> make_unanswerable_by_removal(
    const QASample& sample, std::string* skip_reason = nullptr);

// Replaces the context with one drawn (seeded) from pool entries
// having a different question and context. Up to 10 draws are
// attempted past the answer guard.
std::optional<QASample> make_unanswerable_by_swap(
    const QASample& sample, const std::vector<QASample>& pool,
    std::uint64_t seed, bool answer_guard = true,
    std::string* skip_reason = nullptr);

std::vector<QASample> load_squad_json(const std::filesystem::path& path);
std::vector<QASample> load_qa_jsonl(const std::filesystem::path& path);

// Synthesizes unanswerables and interleaves them with the answerable
// originals so consecutive windows approximate target_ratio. Output
// is a JSONL file of QASample records; deterministic under a fixed
// seed (the RNG is split per sample by stable id).
SynthesisReport synthesize_corpus(const std::vector<QASample>& input,
                                  const std::filesystem::path& out_path,
                                  const SynthesisOptions& opts);

}  // namespace zsp
