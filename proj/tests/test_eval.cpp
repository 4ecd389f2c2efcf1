#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "zsparse/eval.hpp"

using zsp::IntentFrame;
using zsp::LabeledExample;
using zsp::parse_mr;
using zsp::SweepRecord;
using zsp::threshold_sweep;

namespace {

std::vector<IntentFrame> frames(const std::vector<std::string>& mrs) {
  std::vector<IntentFrame> out;
  for (const auto& mr : mrs) out.push_back(parse_mr(mr));
  return out;
}

}  // namespace

TEST_CASE("exact_match_accuracy") {
  auto gold = frames({"[IN:A [SL:S x ] ]", "[IN:B ]", "[IN:A [SL:S y ] ]",
                      "[IN:C [SL:S z ] ]"});
  CHECK(zsp::exact_match_accuracy(gold, gold) == 1.0);
  auto none = frames({"[IN:Z ]", "[IN:Z ]", "[IN:Z ]", "[IN:Z ]"});
  CHECK(zsp::exact_match_accuracy(none, gold) == 0.0);
  auto half = frames({"[IN:A [SL:S x ] ]", "[IN:B ]", "[IN:Z ]", "[IN:Z ]"});
  CHECK(zsp::exact_match_accuracy(half, gold) == 0.5);
  // Order-insensitive at the filling level.
  auto permuted = frames({"[IN:A [SL:S x ] [SL:T y ] ]"});
  auto gold2 = frames({"[IN:A [SL:T y ] [SL:S x ] ]"});
  CHECK(zsp::exact_match_accuracy(permuted, gold2) == 1.0);
  CHECK_THROWS_AS(zsp::exact_match_accuracy({}, {}), std::invalid_argument);
}

TEST_CASE("intent_accuracy") {
  auto gold = frames({"[IN:A ]", "[IN:B ]"});
  auto pred = frames({"[IN:A [SL:S x ] ]", "[IN:C ]"});
  CHECK(zsp::intent_accuracy(pred, gold) == 0.5);
  CHECK(zsp::intent_accuracy(frames({"[IN:X ]", "[IN:X ]"}), gold) == 0.0);
}

TEST_CASE("slot_macro_f1") {
  SUBCASE("identical predictions") {
    auto gold = frames({"[IN:A [SL:S x ] [SL:T y ] ]"});
    CHECK(zsp::slot_macro_f1(gold, gold) == 1.0);
  }
  SUBCASE("empty predictions against non-empty gold") {
    auto gold = frames({"[IN:A [SL:S x ] ]"});
    auto pred = frames({"[IN:A ]"});
    CHECK(zsp::slot_macro_f1(pred, gold) == 0.0);
  }
  SUBCASE("half precision, full recall gives F1 2/3") {
    auto gold = frames({"[IN:A [SL:S x ] ]"});
    auto pred = frames({"[IN:A [SL:S x ] [SL:S y ] ]"});
    CHECK(zsp::slot_macro_f1(pred, gold) == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("macro averages over gold slot types only") {
    // Slot S perfect; slot T missed; spurious slot U ignored (not in
    // gold) -> (1.0 + 0.0) / 2.
    auto gold = frames({"[IN:A [SL:S x ] [SL:T y ] ]"});
    auto pred = frames({"[IN:A [SL:S x ] [SL:U z ] ]"});
    CHECK(zsp::slot_macro_f1(pred, gold) == doctest::Approx(0.5));
  }
  SUBCASE("nested values compare by serialization") {
    auto gold = frames({"[IN:A [SL:S [IN:B [SL:T m ] ] ] ]"});
    CHECK(zsp::slot_macro_f1(gold, gold) == 1.0);
    auto pred = frames({"[IN:A [SL:S [IN:B [SL:T n ] ] ] ]"});
    CHECK(zsp::slot_macro_f1(pred, gold) == 0.0);
  }
  SUBCASE("no slots anywhere") {
    auto gold = frames({"[IN:A ]"});
    CHECK(zsp::slot_macro_f1(gold, gold) == 0.0);
  }
}

TEST_CASE("evaluate aggregates per-domain buckets and abstain stats") {
  zsp::Schema schema = zsptest::small_schema();
  auto tables = zsptest::build_corpus_tables(schema);
  zsp::ScriptedBackend backend = zsptest::backend_from_tables(tables);
  zsp::HashedBowSimilarity sim;
  zsp::Pipeline pipeline(schema, backend, sim, zsp::PipelineConfig{});

  std::vector<LabeledExample> examples;
  std::vector<std::string> utterances;
  for (const auto& entry : zsptest::scripted_corpus()) {
    LabeledExample ex;
    ex.utterance = entry.utterance;
    ex.gold = parse_mr(entry.expected_mr, &schema);
    ex.domain = entry.intent.substr(0, entry.intent.find('_'));
    examples.push_back(ex);
    utterances.push_back(entry.utterance);
  }
  auto traces = pipeline.parse_corpus(utterances);
  auto report = zsp::evaluate(traces, examples);
  CHECK(report.overall.exact_match_accuracy == 1.0);
  CHECK(report.overall.intent_accuracy == 1.0);
  CHECK(report.overall.slot_macro_f1 == 1.0);
  CHECK(report.overall.n == 20);
  CHECK(report.per_domain.size() == 4);  // CREATE, SEND, GET, PLAY
  CHECK(report.per_domain.at("PLAY").n == 3);
  REQUIRE(report.abstain_on_unanswerable);
  CHECK(*report.abstain_on_unanswerable == 1.0);  // all-abstain cases correct
  REQUIRE(report.abstain_on_answerable);
  CHECK(*report.abstain_on_answerable == 0.0);

  auto j = zsp::report_to_json(report);
  CHECK(j.at("overall").at("exact_match_accuracy") == 1.0);
  CHECK(j.at("per_domain").contains("CREATE"));
  CHECK(j.at("abstain_stats").at("on_answerable") == 0.0);
}

TEST_CASE("ingest collects per-line errors without aborting") {
  auto path = std::filesystem::temp_directory_path() / "zsp_ingest_test.tsv";
  {
    std::ofstream out(path);
    out << "1\tx\tx\thello there\tmessaging\tx\t[IN:GREET ]\r\n";
    out << "\n";
    out << "2\tx\tx\tbad mr line\tmessaging\tx\t[IN:GREET\n";
    out << "3\tshort line\n";
    out << "4\tx\tx\tset an alarm\talarm\tx\t[IN:CREATE_ALARM [SL:DATE_TIME "
           "now ] ]\n";
  }
  auto result = zsp::ingest_mtop_tsv(path, 3, 6, 4);
  REQUIRE(result.examples.size() == 2);
  CHECK(result.examples[0].utterance == "hello there");
  CHECK(result.examples[0].domain == "messaging");
  CHECK(result.examples[1].gold.intent == "CREATE_ALARM");
  REQUIRE(result.errors.size() == 2);
  CHECK(result.errors[0].first == 3);
  CHECK(result.errors[1].second == "too few columns");

  // Empty file ingests to nothing.
  std::ofstream(path) << "";
  auto empty = zsp::ingest_mtop_tsv(path, 3, 6);
  CHECK(empty.examples.empty());
  CHECK(empty.errors.empty());
  std::filesystem::remove(path);
}

TEST_CASE("threshold sweep") {
  SUBCASE("tau below every NLL abstains everywhere") {
    std::vector<SweepRecord> records{
        {"S", 2.0, "x", std::string("x")},
        {"S", 3.0, "y", std::nullopt},
    };
    auto rows = threshold_sweep(records, {0.0});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].abstain_rate == 1.0);
    CHECK(rows[0].f1_answerable == 0.0);
    CHECK(rows[0].f1_unanswerable == 1.0);
    CHECK(rows[0].f1_all == 0.0);  // harmonic mean with a zero
  }
  SUBCASE("separable distributions reach f1_all 1.0") {
    std::vector<SweepRecord> records;
    for (int i = 0; i < 5; ++i) {
      records.push_back({"S", 1.0 + 0.1 * i, "v", std::string("v")});
      records.push_back({"S", 4.0 + 0.1 * i, "w", std::nullopt});
    }
    auto rows = threshold_sweep(records, {3.0});
    CHECK(rows[0].f1_answerable == 1.0);
    CHECK(rows[0].f1_unanswerable == 1.0);
    CHECK(rows[0].f1_all == 1.0);
    CHECK(rows[0].abstain_rate == 0.5);
  }
  SUBCASE("wrong spans cap f1_answerable below 1") {
    std::vector<SweepRecord> records{
        {"S", 1.0, "predicted", std::string("gold")},
        {"S", 1.0, "match", std::string("match")},
    };
    auto rows = threshold_sweep(records, {2.0});
    CHECK(rows[0].f1_answerable == doctest::Approx(0.5));
  }
  SUBCASE("abstain_rate monotone non-increasing in tau") {
    std::vector<SweepRecord> records;
    for (int i = 0; i < 40; ++i) {
      records.push_back({"S", 0.25 * i, "v",
                         i % 2 ? std::optional<std::string>("v") : std::nullopt});
    }
    std::vector<double> taus;
    for (int i = 0; i < 50; ++i) taus.push_back(0.2 * i);
    auto rows = threshold_sweep(records, taus);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i].abstain_rate <= rows[i - 1].abstain_rate);
    }
  }
  SUBCASE("empty records are rejected") {
    CHECK_THROWS_AS(threshold_sweep({}, {1.0}), std::invalid_argument);
  }
}

TEST_CASE("sweep CSV header and shape") {
  std::vector<SweepRecord> records{{"S", 1.0, "v", std::string("v")}};
  auto csv = zsp::sweep_to_csv(threshold_sweep(records, {0.5, 1.5}));
  CHECK(csv.rfind("tau,f1_all,f1_answerable,f1_unanswerable,abstain_rate\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
