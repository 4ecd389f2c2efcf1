#include <chrono>
#include <thread>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "zsparse/backend.hpp"

namespace zsp {

using nlohmann::json;

// Wire contract: POST {prompt, max_tokens, logprobs: true, echo?} to
// the completions path; the response carries generated text and
// per-token log-probabilities (OpenAI completions layout):
//   {"choices":[{"text":..., "logprobs":{"tokens":[...],
//     "token_logprobs":[...], "text_offset":[...]}}]}
// Candidate scoring is client-side: echo the prompt+candidate and sum
// the log-probabilities of the tokens past the prompt boundary.

namespace {

struct LogprobSlice {
  double nll = 0.0;
  int tokens = 0;
};

// Sums -logprob over tokens whose text offset is at or past `from`.
LogprobSlice sum_from_offset(const json& logprobs, std::size_t from) {
  const auto& lps = logprobs.at("token_logprobs");
  const auto& offsets = logprobs.at("text_offset");
  LogprobSlice out;
  for (std::size_t i = 0; i < lps.size(); ++i) {
    if (offsets.at(i).get<std::size_t>() < from) continue;
    if (lps.at(i).is_null()) {
      throw BackendError("NLL unavailable: null logprob in response");
    }
    out.nll -= lps.at(i).get<double>();
    ++out.tokens;
  }
  return out;
}

}  // namespace

std::string HttpBackend::post_with_retries(const std::string& body) {
  std::string last_error;
  for (int attempt = 0; attempt < opts_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(opts_.retry_base_ms << (attempt - 1)));
    }
    httplib::Client client(opts_.endpoint);
    client.set_read_timeout(opts_.timeout_s, 0);
    client.set_connection_timeout(opts_.timeout_s, 0);
    auto res = client.Post(opts_.path, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error: HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw BackendError("backend refusal: HTTP " + std::to_string(res->status) +
                         " " + res->body);
    }
    return res->body;
  }
  throw BackendError(last_error, /*retryable=*/true);
}

ScoredGeneration HttpBackend::generate(const Prompt& prompt, int max_tokens) {
  json req{{"prompt", prompt.text},
           {"max_tokens", max_tokens},
           {"logprobs", true}};
  json resp = json::parse(post_with_retries(req.dump()));
  const auto& choice = resp.at("choices").at(0);
  if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
    throw BackendError("NLL unavailable: response carries no logprobs");
  }
  const auto& lps = choice.at("logprobs").at("token_logprobs");
  ScoredGeneration g;
  g.text = choice.at("text").get<std::string>();
  for (const auto& lp : lps) {
    if (lp.is_null()) throw BackendError("NLL unavailable: null logprob");
    g.nll -= lp.get<double>();
    ++g.token_count;
  }
  return g;
}

std::vector<ScoredGeneration> HttpBackend::score_candidates(
    const Prompt& prompt, const std::vector<std::string>& candidates) {
  if (candidates.empty()) throw BackendError("empty candidate list");
  std::vector<ScoredGeneration> out;
  out.reserve(candidates.size());
  for (const auto& cand : candidates) {
    json req{{"prompt", prompt.text + cand},
             {"max_tokens", 0},
             {"logprobs", true},
             {"echo", true}};
    json resp = json::parse(post_with_retries(req.dump()));
    const auto& choice = resp.at("choices").at(0);
    if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
      throw BackendError("NLL unavailable: response carries no logprobs");
    }
    LogprobSlice slice =
        sum_from_offset(choice.at("logprobs"), prompt.text.size());
    out.push_back(ScoredGeneration{cand, slice.nll, slice.tokens});
  }
  return out;
}

}  // namespace zsp
