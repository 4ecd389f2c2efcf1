#pragma once

// Shared test fixtures: a hand-built scripted corpus, schema builders,
// a deterministic similarity stub, and a random frame generator.

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsparse/backend.hpp"
#include "zsparse/intent.hpp"
#include "zsparse/mr.hpp"
#include "zsparse/schema.hpp"
#include "zsparse/slots.hpp"

namespace zsptest {

using nlohmann::json;

// Similarity stub with an explicit score table (symmetric lookup,
// self-similarity 1, default 0).
class TableSim : public zsp::SimilarityProvider {
 public:
  void set(const std::string& a, const std::string& b, double score) {
    table_[a + "\x1f" + b] = score;
    table_[b + "\x1f" + a] = score;
  }
  double similarity(std::string_view a, std::string_view b) override {
    if (a == b) return 1.0;
    auto it = table_.find(std::string(a) + "\x1f" + std::string(b));
    return it == table_.end() ? 0.0 : it->second;
  }

 private:
  std::map<std::string, double> table_;
};

json small_schema_json();

inline zsp::Schema small_schema() {
  return zsp::Schema::from_json(small_schema_json());
}

struct SlotTarget {
  std::string slot;
  std::string span;
  double nll;
};

struct CorpusEntry {
  std::string utterance;
  std::string intent;
  std::vector<SlotTarget> targets;
  std::string expected_mr;
};

// NLL conventions used throughout the scripted corpus.
inline constexpr double kDefaultSpanNll = 6.0;
inline constexpr double kAbstainPhraseNll = 2.0;   // phrase wins -> abstain
inline constexpr double kBlockedPhraseNll = 9.0;   // phrase loses -> answer
inline constexpr int kMaxSpanTokens = 10;

inline const std::vector<CorpusEntry>& scripted_corpus() {
  static const std::vector<CorpusEntry> corpus{
      {"wake me at 2 pm", "CREATE_ALARM",
       {{"DATE_TIME", "at 2 pm", 0.1}},
       "[IN:CREATE_ALARM [SL:DATE_TIME at 2 pm ] ]"},
      {"set alarm for 6 am", "CREATE_ALARM",
       {{"DATE_TIME", "for 6 am", 0.1}},
       "[IN:CREATE_ALARM [SL:DATE_TIME for 6 am ] ]"},
      {"message mom saying hello there", "SEND_MESSAGE",
       {{"RECIPIENT", "mom", 0.1}, {"CONTENT", "hello there", 0.2}},
       "[IN:SEND_MESSAGE [SL:RECIPIENT [IN:GET_CONTACT [SL:TYPE_RELATION mom "
       "] ] ] [SL:CONTENT hello there ] ]"},
      {"text john that i am late", "SEND_MESSAGE",
       {{"RECIPIENT", "john", 0.1}, {"CONTENT", "i am late", 0.2}},
       "[IN:SEND_MESSAGE [SL:RECIPIENT john ] [SL:CONTENT i am late ] ]"},
      {"remind me to buy milk tomorrow", "CREATE_REMINDER",
       {{"TODO", "buy milk", 0.1}, {"DATE_TIME", "tomorrow", 0.2}},
       "[IN:CREATE_REMINDER [SL:TODO buy milk ] [SL:DATE_TIME tomorrow ] ]"},
      {"remind me about the meeting", "CREATE_REMINDER",
       {{"TODO", "the meeting", 0.1}},
       "[IN:CREATE_REMINDER [SL:TODO the meeting ] ]"},
      {"weather in boston tomorrow", "GET_WEATHER",
       {{"LOCATION", "in boston", 0.1}, {"DATE_TIME", "tomorrow", 0.2}},
       "[IN:GET_WEATHER [SL:LOCATION in boston ] [SL:DATE_TIME tomorrow ] ]"},
      {"will it rain in seattle", "GET_WEATHER",
       {{"LOCATION", "in seattle", 0.1}},
       "[IN:GET_WEATHER [SL:LOCATION in seattle ] ]"},
      {"play hotel california", "PLAY_MUSIC",
       {{"MUSIC_TRACK", "hotel california", 0.1}},
       "[IN:PLAY_MUSIC [SL:MUSIC_TRACK hotel california ] ]"},
      {"play some jazz music now", "PLAY_MUSIC",
       {{"MUSIC_TRACK", "jazz music", 0.1}},
       "[IN:PLAY_MUSIC [SL:MUSIC_TRACK jazz music ] ]"},
      {"who is my uncle contact", "GET_CONTACT",
       {{"TYPE_RELATION", "uncle", 0.1}},
       "[IN:GET_CONTACT [SL:TYPE_RELATION uncle ] ]"},
      {"find contact details for steve", "GET_CONTACT",
       {{"CONTACT_NAME", "steve", 0.1}},
       "[IN:GET_CONTACT [SL:CONTACT_NAME steve ] ]"},
      {"wake me up before noon", "CREATE_ALARM",
       {{"DATE_TIME", "before noon", 0.1}},
       "[IN:CREATE_ALARM [SL:DATE_TIME before noon ] ]"},
      {"alarm at seven thirty please", "CREATE_ALARM",
       {{"DATE_TIME", "at seven thirty", 0.1}},
       "[IN:CREATE_ALARM [SL:DATE_TIME at seven thirty ] ]"},
      {"tell sara i will call", "SEND_MESSAGE",
       {{"RECIPIENT", "sara", 0.1}, {"CONTENT", "i will call", 0.2}},
       "[IN:SEND_MESSAGE [SL:RECIPIENT sara ] [SL:CONTENT i will call ] ]"},
      {"remind me to stretch", "CREATE_REMINDER",
       {{"TODO", "to stretch", 0.1}},
       "[IN:CREATE_REMINDER [SL:TODO to stretch ] ]"},
      {"what is the weather today", "GET_WEATHER",
       {{"DATE_TIME", "today", 0.1}},
       "[IN:GET_WEATHER [SL:DATE_TIME today ] ]"},
      {"play the piano song", "PLAY_MUSIC",
       {{"MUSIC_TRACK", "the piano song", 0.1}},
       "[IN:PLAY_MUSIC [SL:MUSIC_TRACK the piano song ] ]"},
      {"ring my alarm now", "CREATE_ALARM",
       {},
       "[IN:CREATE_ALARM ]"},
      {"message dad saying good night", "SEND_MESSAGE",
       {{"RECIPIENT", "dad", 0.1}, {"CONTENT", "good night", 0.2}},
       "[IN:SEND_MESSAGE [SL:RECIPIENT [IN:GET_CONTACT [SL:TYPE_RELATION dad "
       "] ] ] [SL:CONTENT good night ] ]"},
  };
  return corpus;
}

// (context, slot) -> answered nested span and its NLL.
inline const std::map<std::pair<std::string, std::string>,
                      std::pair<std::string, double>>&
nested_overrides() {
  static const std::map<std::pair<std::string, std::string>,
                        std::pair<std::string, double>>
      overrides{
          {{"mom", "TYPE_RELATION"}, {"mom", 0.1}},
          {{"dad", "TYPE_RELATION"}, {"dad", 0.15}},
      };
  return overrides;
}

// Raw candidate NLL tables, shared between the scripted backend and
// the independent enumeration oracle.
struct ScriptTables {
  // (prompt, candidate) -> nll
  std::map<std::pair<std::string, std::string>, double> scores;
  // prompt -> (text, nll)
  std::map<std::string, std::pair<std::string, double>> generations;
};

inline std::vector<std::string> all_spans(const std::string& context) {
  return zsp::enumerate_candidates(context, kMaxSpanTokens, {});
}

// Scripts one slot question over a context: every span at
// default_span_nll (or its override), abstain phrases at phrase_nll.
// First write wins, so utterance-level target scripting is never
// clobbered when the full utterance reappears as a nested span.
inline void script_question(ScriptTables& tables, const std::string& context,
                            const std::string& question, double phrase_nll,
                            const std::map<std::string, double>& overrides) {
  const std::string prompt = zsp::build_slot_prompt(context, question).text;
  for (const auto& span : all_spans(context)) {
    auto it = overrides.find(span);
    tables.scores.emplace(
        std::make_pair(prompt, span),
        it == overrides.end() ? kDefaultSpanNll : it->second);
  }
  for (const auto& phrase : zsp::AbstainConfig::default_abstain_phrases()) {
    tables.scores.emplace(std::make_pair(prompt, phrase), phrase_nll);
  }
}

inline ScriptTables build_corpus_tables(const zsp::Schema& schema) {
  ScriptTables tables;
  for (const auto& entry : scripted_corpus()) {
    tables.generations[zsp::build_intent_prompt(entry.utterance).text] = {
        zsp::naturalize_label(entry.intent), 1.0};
    std::map<std::string, std::pair<std::string, double>> target_by_slot;
    for (const auto& t : entry.targets) target_by_slot[t.slot] = {t.span, t.nll};
    // Every slot question over the utterance itself.
    for (const auto& slot : schema.slots()) {
      auto it = target_by_slot.find(slot);
      if (it != target_by_slot.end()) {
        script_question(tables, entry.utterance, schema.question(slot),
                        kBlockedPhraseNll,
                        {{it->second.first, it->second.second}});
      } else {
        script_question(tables, entry.utterance, schema.question(slot),
                        kAbstainPhraseNll, {});
      }
    }
    // Nested-intent questions over every span value the pipeline might
    // try as a context.
    for (const auto& span : all_spans(entry.utterance)) {
      for (const std::string slot : {"TYPE_RELATION", "CONTACT_NAME"}) {
        std::map<std::string, double> overrides;
        auto oit = nested_overrides().find({span, slot});
        if (oit != nested_overrides().end()) {
          overrides[oit->second.first] = oit->second.second;
        }
        script_question(tables, span, schema.question(slot), kAbstainPhraseNll,
                        overrides);
      }
    }
  }
  return tables;
}

inline zsp::ScriptedBackend backend_from_tables(const ScriptTables& tables) {
  zsp::ScriptedBackend backend;
  for (const auto& [prompt, gen] : tables.generations) {
    backend.script_generation(prompt, gen.first, gen.second);
  }
  for (const auto& [key, nll] : tables.scores) {
    backend.script_score(key.first, key.second, nll);
  }
  return backend;
}

// ScriptTables rendered in the ScriptedBackend::load file format.
inline json script_file_json(const ScriptTables& tables) {
  json generations = json::array();
  for (const auto& [prompt, gen] : tables.generations) {
    generations.push_back(
        {{"prompt", prompt}, {"text", gen.first}, {"nll", gen.second}});
  }
  json scores = json::array();
  for (const auto& [key, nll] : tables.scores) {
    scores.push_back(
        {{"prompt", key.first}, {"candidate", key.second}, {"nll", nll}});
  }
  return json{{"generations", generations}, {"scores", scores}};
}

// The schema document behind small_schema(), for tests that need it
// on disk.
inline json small_schema_json() {
  json doc{
      {"slots",
       {
           {{"name", "DATE_TIME"}, {"question", "When should it happen?"}},
           {{"name", "RECIPIENT"},
            {"question", "Who should receive the message?"},
            {"nested_intents", {"GET_CONTACT"}}},
           {{"name", "CONTENT"}, {"question", "What is the message?"}},
           {{"name", "TYPE_RELATION"},
            {"question", "What is the relation of the contact?"}},
           {{"name", "CONTACT_NAME"},
            {"question", "What is the name of the contact?"}},
           {{"name", "TODO"}, {"question", "What is the task?"}},
           {{"name", "LOCATION"}, {"question", "Which location?"}},
           {{"name", "MUSIC_TRACK"}, {"question", "Which song?"}},
       }},
      {"intents",
       {
           {{"name", "CREATE_ALARM"}, {"slots", {"DATE_TIME"}}},
           {{"name", "CREATE_REMINDER"}, {"slots", {"DATE_TIME", "TODO"}}},
           {{"name", "SEND_MESSAGE"}, {"slots", {"RECIPIENT", "CONTENT"}}},
           {{"name", "GET_CONTACT"},
            {"slots", {"TYPE_RELATION", "CONTACT_NAME"}}},
           {{"name", "GET_WEATHER"}, {"slots", {"LOCATION", "DATE_TIME"}}},
           {{"name", "PLAY_MUSIC"}, {"slots", {"MUSIC_TRACK"}}},
       }},
  };
  return doc;
}

// Random schema-valid frames over small_schema(), depth <= 4.
inline zsp::IntentFrame random_frame(std::mt19937_64& rng,
                                     const zsp::Schema& schema) {
  static const std::vector<std::string> words{
      "alpha", "bravo", "charlie", "delta", "echo",
      "fox",   "golf",  "hotel",   "india", "juliet"};
  std::uniform_int_distribution<std::size_t> word_pick(0, words.size() - 1);
  std::uniform_int_distribution<int> len_pick(1, 3);
  auto random_text = [&]() {
    std::string text;
    int n = len_pick(rng);
    for (int i = 0; i < n; ++i) {
      if (!text.empty()) text.push_back(' ');
      text += words[word_pick(rng)];
    }
    return text;
  };
  std::uniform_int_distribution<std::size_t> intent_pick(
      0, schema.intents().size() - 1);
  zsp::IntentFrame frame;
  frame.intent = schema.intents()[intent_pick(rng)];
  for (const auto& slot : schema.slots_of(frame.intent)) {
    std::uniform_int_distribution<int> coin(0, 2);
    int c = coin(rng);
    if (c == 0) continue;  // slot unfilled
    zsp::SlotFilling filling;
    filling.slot = slot;
    const auto& candidates = schema.nested_candidates(slot);
    if (c == 2 && !candidates.empty()) {
      auto nested = std::make_shared<zsp::IntentFrame>();
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      nested->intent = candidates[pick(rng)];
      for (const auto& nested_slot : schema.slots_of(nested->intent)) {
        if (coin(rng) == 0) continue;
        nested->fillings.push_back(
            zsp::SlotFilling{nested_slot, random_text(), nullptr});
      }
      if (nested->fillings.empty()) {
        nested->fillings.push_back(zsp::SlotFilling{
            schema.slots_of(nested->intent).front(), random_text(), nullptr});
      }
      filling.nested = std::move(nested);
    } else {
      filling.text = random_text();
    }
    frame.fillings.push_back(std::move(filling));
  }
  return frame;
}

inline bool frames_equal(const zsp::IntentFrame& a, const zsp::IntentFrame& b) {
  return zsp::exact_match(a, b, /*ordered=*/true);
}

}  // namespace zsptest
