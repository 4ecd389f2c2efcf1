#include "zsparse/datagen.hpp"

#include <cctype>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace zsp {

using nlohmann::json;

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Stable per-sample stream: parallel and serial runs agree.
std::mt19937_64 sample_rng(std::uint64_t seed, const std::string& id) {
  return std::mt19937_64(seed ^ fnv1a64(id));
}

void bump_skip(SynthesisReport& report, const std::string& reason) {
  ++report.skipped_count;
  ++report.skip_reasons[reason];
}

json sample_to_json(const QASample& s) {
  json j{{"id", s.id},
         {"question", s.question},
         {"context", s.context},
         {"answer", s.answer},
         {"source", s.source},
         {"answerable", s.answerable},
         {"extractive", s.extractive}};
  if (!s.provenance_strategy.empty()) {
    j["provenance_strategy"] = s.provenance_strategy;
    j["provenance_source_id"] = s.provenance_source_id;
  }
  return j;
}

QASample sample_from_json(const json& j) {
  QASample s;
  s.id = j.at("id").get<std::string>();
  s.question = j.at("question").get<std::string>();
  s.context = j.at("context").get<std::string>();
  s.answer = j.value("answer", "");
  s.source = j.value("source", "");
  s.answerable = j.value("answerable", true);
  s.extractive = j.value("extractive", true);
  s.provenance_strategy = j.value("provenance_strategy", "");
  s.provenance_source_id = j.value("provenance_source_id", "");
  return s;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  std::size_t i = 0;
  auto flush = [&](std::size_t end) {
    while (start < end && std::isspace(static_cast<unsigned char>(text[start]))) {
      ++start;
    }
    std::size_t stop = end;
    while (stop > start && std::isspace(static_cast<unsigned char>(text[stop - 1]))) {
      --stop;
    }
    if (stop > start) sentences.emplace_back(text.substr(start, stop - start));
    start = end;
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == '.' || c == '?' || c == '!') {
      std::size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) {
        ++j;
      }
      if (j == text.size() ||
          (j > i + 1 && std::isupper(static_cast<unsigned char>(text[j])))) {
        flush(i + 1);
        i = j;
        continue;
      }
    }
    ++i;
  }
  flush(text.size());
  return sentences;
}

std::optional<QASample> make_unanswerable_by_removal(const QASample& sample,
                                                     std::string* skip_reason) {
  auto set_reason = [&](const char* r) {
    if (skip_reason) *skip_reason = r;
  };
  if (!sample.answerable || !sample.extractive) {
    set_reason("not_extractive_answerable");
    return std::nullopt;
  }
  if (sample.context.find(sample.answer) == std::string::npos) {
    set_reason("answer_not_in_context");
    return std::nullopt;
  }
  std::string remaining;
  for (const auto& sentence : split_sentences(sample.context)) {
    if (sentence.find(sample.answer) != std::string::npos) continue;
    if (!remaining.empty()) remaining.push_back(' ');
    remaining += sentence;
  }
  if (remaining.empty()) {
    set_reason("empty_context");
    return std::nullopt;
  }
  if (remaining.find(sample.answer) != std::string::npos) {
    set_reason("answer_survives_removal");
    return std::nullopt;
  }
  QASample out = sample;
  out.context = std::move(remaining);
  out.answerable = false;
  out.provenance_strategy = "removal";
  out.provenance_source_id = sample.id;
  out.id = sample.id + "-removal";
  return out;
}

std::optional<QASample> make_unanswerable_by_swap(
    const QASample& sample, const std::vector<QASample>& pool,
    std::uint64_t seed, bool answer_guard, std::string* skip_reason) {
  auto set_reason = [&](const char* r) {
    if (skip_reason) *skip_reason = r;
  };
  std::vector<const QASample*> eligible;
  for (const auto& donor : pool) {
    if (donor.question == sample.question) continue;
    if (donor.context == sample.context) continue;
    eligible.push_back(&donor);
  }
  if (eligible.empty()) {
    set_reason("no_eligible_donor");
    return std::nullopt;
  }
  auto rng = sample_rng(seed, sample.id);
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const QASample* donor = eligible[pick(rng)];
    if (answer_guard && !sample.answer.empty() &&
        donor->context.find(sample.answer) != std::string::npos) {
      continue;
    }
    QASample out = sample;
    out.context = donor->context;
    out.answerable = false;
    out.provenance_strategy = "swap";
    out.provenance_source_id = sample.id;
    out.id = sample.id + "-swap";
    return out;
  }
  set_reason("answer_in_all_drawn_contexts");
  return std::nullopt;
}

std::vector<QASample> load_squad_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json doc = json::parse(in);
  std::vector<QASample> out;
  for (const auto& article : doc.at("data")) {
    for (const auto& para : article.at("paragraphs")) {
      std::string context = para.at("context").get<std::string>();
      for (const auto& qa : para.at("qas")) {
        QASample s;
        s.id = qa.at("id").get<std::string>();
        s.question = qa.at("question").get<std::string>();
        s.context = context;
        s.source = "squad";
        s.answerable = !qa.value("is_impossible", false);
        if (s.answerable && !qa.at("answers").empty()) {
          s.answer = qa.at("answers").at(0).at("text").get<std::string>();
        }
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

std::vector<QASample> load_qa_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<QASample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(sample_from_json(json::parse(line)));
  }
  return out;
}

SynthesisReport synthesize_corpus(const std::vector<QASample>& input,
                                  const std::filesystem::path& out_path,
                                  const SynthesisOptions& opts) {
  if (opts.target_ratio <= 0.0 || opts.target_ratio > 1.0) {
    throw std::invalid_argument("target_ratio outside (0, 1]");
  }
  SynthesisReport report;
  std::vector<QASample> answerable;
  std::vector<QASample> synthetic;
  for (const auto& s : input) {
    if (s.answerable) answerable.push_back(s);
  }
  report.input_count = input.size();

  for (const auto& s : answerable) {
    if (opts.removal) {
      if (!s.extractive) {
        bump_skip(report, "removal_not_extractive");
      } else {
        std::string reason;
        if (auto u = make_unanswerable_by_removal(s, &reason)) {
          ++report.removed_sentence_count;
          synthetic.push_back(std::move(*u));
        } else {
          bump_skip(report, "removal_" + reason);
        }
      }
    }
    if (opts.swap) {
      std::string reason;
      if (auto u = make_unanswerable_by_swap(s, answerable, opts.seed,
                                             opts.swap_answer_guard, &reason)) {
        ++report.swapped_count;
        synthetic.push_back(std::move(*u));
      } else {
        bump_skip(report, "swap_" + reason);
      }
    }
  }

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path.string());
  // Greedy interleave tracking the running unanswerable fraction;
  // stops once the originals are spent and the ratio is met. Running
  // out of synthetics leaves a partial (under-ratio) tail.
  std::size_t ai = 0, ui = 0, n_ans = 0, n_unans = 0;
  auto ratio_met = [&]() {
    std::size_t total = n_ans + n_unans;
    if (total == 0) return false;
    return static_cast<double>(n_unans) / total >= opts.target_ratio;
  };
  auto want_unanswerable = [&]() {
    if (ui >= synthetic.size()) return false;
    if (opts.target_ratio >= 1.0) return true;
    if (ai >= answerable.size()) return !ratio_met();
    double next_ratio = static_cast<double>(n_unans + 1) /
                        static_cast<double>(n_ans + n_unans + 1);
    return next_ratio <= opts.target_ratio;
  };
  while (true) {
    if (want_unanswerable()) {
      out << sample_to_json(synthetic[ui++]).dump() << '\n';
      ++n_unans;
    } else if (ai < answerable.size() && opts.target_ratio < 1.0) {
      out << sample_to_json(answerable[ai++]).dump() << '\n';
      ++n_ans;
    } else {
      break;
    }
  }
  return report;
}

}  // namespace zsp
