#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace zsp {

struct Prompt {
  std::string text;
};

struct ScoredGeneration {
  std::string text;
  double nll = 0.0;       // total negative log-likelihood, nats
  int token_count = 0;    // generated/scored tokens, for mean normalization
};

struct BackendError : std::runtime_error {
  explicit BackendError(const std::string& msg, bool retryable = false)
      : std::runtime_error(msg), retryable(retryable) {}
  bool retryable;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;

  virtual bool supports_free_generation() const = 0;
  virtual bool supports_candidate_scoring() const = 0;
  virtual std::string id() const = 0;

  // Free generation with total NLL of the generated tokens. Never
  // returns a silent zero NLL: backends that cannot report one throw.
  virtual ScoredGeneration generate(const Prompt& prompt, int max_tokens) = 0;

  // Sequence NLL of each candidate continuation given the prompt,
  // in candidate order.
  virtual std::vector<ScoredGeneration> score_candidates(
      const Prompt& prompt, const std::vector<std::string>& candidates) = 0;
};

class SimilarityProvider {
 public:
  virtual ~SimilarityProvider() = default;
  // Cosine-style similarity in [-1, 1]; similarity(a, a) == 1.
  virtual double similarity(std::string_view a, std::string_view b) = 0;
};

// Offline fallback embedder: lowercased whitespace tokens hashed into
// a fixed 4096-dim count vector, compared by cosine. Deterministic
// across runs and platforms (FNV-1a hashing).
class HashedBowSimilarity : public SimilarityProvider {
 public:
  static constexpr std::size_t kDims = 4096;
  double similarity(std::string_view a, std::string_view b) override;
  static std::vector<double> embed(std::string_view text);
};

std::string sha256_hex(std::string_view data);

// Append-only JSONL log of every backend call, replayable offline.
class TraceLog {
 public:
  explicit TraceLog(const std::filesystem::path& path);
  ~TraceLog();

  void record(std::string_view kind, std::string_view prompt,
              std::string_view response_text, double nll, int token_count,
              std::string_view backend_id);

 private:
  std::mutex mu_;
  std::unique_ptr<std::ofstream> out_;
};

// Wraps a backend, mirroring every call into a TraceLog.
class TracingBackend : public GenerationBackend {
 public:
  TracingBackend(GenerationBackend& inner, TraceLog& log)
      : inner_(inner), log_(log) {}

  bool supports_free_generation() const override {
    return inner_.supports_free_generation();
  }
  bool supports_candidate_scoring() const override {
    return inner_.supports_candidate_scoring();
  }
  std::string id() const override { return inner_.id(); }

  ScoredGeneration generate(const Prompt& prompt, int max_tokens) override;
  std::vector<ScoredGeneration> score_candidates(
      const Prompt& prompt, const std::vector<std::string>& candidates) override;

 private:
  GenerationBackend& inner_;
  TraceLog& log_;
};

// Deterministic mock keyed on exact prompt bytes. Read-only after
// scripting; contention-free.
class ScriptedBackend : public GenerationBackend {
 public:
  void script_generation(std::string prompt, std::string text, double nll);
  void script_score(const std::string& prompt, const std::string& candidate,
                    double nll);

  static ScriptedBackend load(const std::filesystem::path& path);

  bool supports_free_generation() const override { return true; }
  bool supports_candidate_scoring() const override { return true; }
  std::string id() const override { return "scripted"; }

  ScoredGeneration generate(const Prompt& prompt, int max_tokens) override;
  std::vector<ScoredGeneration> score_candidates(
      const Prompt& prompt, const std::vector<std::string>& candidates) override;

 private:
  std::unordered_map<std::string, ScoredGeneration> generations_;
  std::unordered_map<std::string, double> scores_;  // prompt \x1f candidate
};

// Replays a TraceLog with no network access.
class ReplayBackend : public GenerationBackend {
 public:
  static ReplayBackend load(const std::filesystem::path& trace_path);

  bool supports_free_generation() const override { return true; }
  bool supports_candidate_scoring() const override { return true; }
  std::string id() const override { return "replay"; }

  ScoredGeneration generate(const Prompt& prompt, int max_tokens) override;
  std::vector<ScoredGeneration> score_candidates(
      const Prompt& prompt, const std::vector<std::string>& candidates) override;

 private:
  std::unordered_map<std::string, ScoredGeneration> generations_;
  std::unordered_map<std::string, ScoredGeneration> scores_;
};

// Remote inference-service client; see http_backend.cpp for the wire
// contract.
struct HttpBackendOptions {
  std::string endpoint;               // e.g. http://host:port
  std::string path = "/v1/completions";
  int max_retries = 3;
  int retry_base_ms = 100;
  int timeout_s = 60;
};

class HttpBackend : public GenerationBackend {
 public:
  explicit HttpBackend(HttpBackendOptions opts) : opts_(std::move(opts)) {}

  bool supports_free_generation() const override { return true; }
  bool supports_candidate_scoring() const override { return true; }
  std::string id() const override { return "http:" + opts_.endpoint; }

  ScoredGeneration generate(const Prompt& prompt, int max_tokens) override;
  std::vector<ScoredGeneration> score_candidates(
      const Prompt& prompt, const std::vector<std::string>& candidates) override;

 private:
  std::string post_with_retries(const std::string& body);
  HttpBackendOptions opts_;
};

}  // namespace zsp
