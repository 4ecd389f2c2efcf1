#include "zsparse/backend.hpp"

#include <chrono>
#include <cmath>
#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "zsparse/mr.hpp"

namespace zsp {

using nlohmann::json;

namespace {

constexpr char kScoreSep = '\x1f';

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

// HashedBowSimilarity

std::vector<double> HashedBowSimilarity::embed(std::string_view text) {
  std::vector<double> v(kDims, 0.0);
  for (auto& tok : tokenize(text)) {
    for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    v[fnv1a64(tok) % kDims] += 1.0;
  }
  return v;
}

double HashedBowSimilarity::similarity(std::string_view a, std::string_view b) {
  auto va = embed(a);
  auto vb = embed(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < kDims; ++i) {
    dot += va[i] * vb[i];
    na += va[i] * va[i];
    nb += vb[i] * vb[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  // sqrt of the product keeps self-similarity at exactly 1 for the
  // integer-count vectors this embedder produces.
  return dot / std::sqrt(na * nb);
}

// TraceLog

TraceLog::TraceLog(const std::filesystem::path& path)
    : out_(std::make_unique<std::ofstream>(path, std::ios::app)) {
  if (!*out_) {
    throw BackendError("cannot open trace log: " + path.string());
  }
}

TraceLog::~TraceLog() = default;

void TraceLog::record(std::string_view kind, std::string_view prompt,
                      std::string_view response_text, double nll,
                      int token_count, std::string_view backend_id) {
  json rec{
      {"kind", std::string(kind)},
      {"prompt_sha256", sha256_hex(prompt)},
      {"prompt", std::string(prompt)},
      {"response_text", std::string(response_text)},
      {"nll", nll},
      {"token_count", token_count},
      {"backend_id", std::string(backend_id)},
      {"timestamp",
       std::chrono::duration_cast<std::chrono::milliseconds>(
           std::chrono::system_clock::now().time_since_epoch())
           .count()},
  };
  std::lock_guard<std::mutex> lock(mu_);
  *out_ << rec.dump() << '\n';
  out_->flush();
}

// TracingBackend

ScoredGeneration TracingBackend::generate(const Prompt& prompt, int max_tokens) {
  ScoredGeneration g = inner_.generate(prompt, max_tokens);
  log_.record("generate", prompt.text, g.text, g.nll, g.token_count, inner_.id());
  return g;
}

std::vector<ScoredGeneration> TracingBackend::score_candidates(
    const Prompt& prompt, const std::vector<std::string>& candidates) {
  auto scored = inner_.score_candidates(prompt, candidates);
  for (const auto& s : scored) {
    log_.record("score", prompt.text, s.text, s.nll, s.token_count, inner_.id());
  }
  return scored;
}

// ScriptedBackend

void ScriptedBackend::script_generation(std::string prompt, std::string text,
                                        double nll) {
  int toks = static_cast<int>(tokenize(text).size());
  generations_[std::move(prompt)] = ScoredGeneration{std::move(text), nll, toks};
}

void ScriptedBackend::script_score(const std::string& prompt,
                                   const std::string& candidate, double nll) {
  scores_[prompt + kScoreSep + candidate] = nll;
}

ScriptedBackend ScriptedBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BackendError("cannot open script file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw BackendError("script parse error: " + std::string(e.what()));
  }
  ScriptedBackend b;
  for (const auto& g : doc.value("generations", json::array())) {
    b.script_generation(g.at("prompt").get<std::string>(),
                        g.at("text").get<std::string>(),
                        g.at("nll").get<double>());
  }
  for (const auto& s : doc.value("scores", json::array())) {
    b.script_score(s.at("prompt").get<std::string>(),
                   s.at("candidate").get<std::string>(),
                   s.at("nll").get<double>());
  }
  return b;
}

ScoredGeneration ScriptedBackend::generate(const Prompt& prompt,
                                           int /*max_tokens*/) {
  auto it = generations_.find(prompt.text);
  if (it == generations_.end()) {
    throw BackendError("no script for prompt: " + prompt.text);
  }
  return it->second;
}

std::vector<ScoredGeneration> ScriptedBackend::score_candidates(
    const Prompt& prompt, const std::vector<std::string>& candidates) {
  if (candidates.empty()) throw BackendError("empty candidate list");
  std::vector<ScoredGeneration> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    auto it = scores_.find(prompt.text + kScoreSep + c);
    if (it == scores_.end()) {
      throw BackendError("no script for candidate '" + c +
                         "' under prompt: " + prompt.text);
    }
    out.push_back(
        ScoredGeneration{c, it->second, static_cast<int>(tokenize(c).size())});
  }
  return out;
}

// ReplayBackend

ReplayBackend ReplayBackend::load(const std::filesystem::path& trace_path) {
  std::ifstream in(trace_path);
  if (!in) throw BackendError("cannot open trace log: " + trace_path.string());
  ReplayBackend b;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    ScoredGeneration g{rec.at("response_text").get<std::string>(),
                       rec.at("nll").get<double>(),
                       rec.value("token_count", 0)};
    const std::string prompt = rec.at("prompt").get<std::string>();
    if (rec.value("kind", "generate") == "score") {
      b.scores_[prompt + kScoreSep + g.text] = g;
    } else {
      b.generations_[prompt] = g;
    }
  }
  return b;
}

ScoredGeneration ReplayBackend::generate(const Prompt& prompt,
                                         int /*max_tokens*/) {
  auto it = generations_.find(prompt.text);
  if (it == generations_.end()) {
    throw BackendError("trace log has no generation for prompt: " + prompt.text);
  }
  return it->second;
}

std::vector<ScoredGeneration> ReplayBackend::score_candidates(
    const Prompt& prompt, const std::vector<std::string>& candidates) {
  if (candidates.empty()) throw BackendError("empty candidate list");
  std::vector<ScoredGeneration> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    auto it = scores_.find(prompt.text + kScoreSep + c);
    if (it == scores_.end()) {
      throw BackendError("trace log has no score for candidate '" + c + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

}  // namespace zsp
