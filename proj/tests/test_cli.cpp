#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "zsparse/cli.hpp"
#include "zsparse/datagen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"zsparse"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : storage) argv.push_back(a.c_str());
  return zsp::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Writes schema, script, config, and data files into a scratch dir.
struct CliFixture {
  fs::path dir;
  fs::path schema_path, script_path, config_path, data_path;

  CliFixture() {
    dir = fs::temp_directory_path() / "zsp_cli_test";
    fs::create_directories(dir);
    schema_path = dir / "schema.json";
    script_path = dir / "script.json";
    config_path = dir / "config.json";
    data_path = dir / "data.jsonl";

    std::ofstream(schema_path) << zsptest::small_schema_json().dump(2);
    zsp::Schema schema = zsptest::small_schema();
    auto tables = zsptest::build_corpus_tables(schema);
    std::ofstream(script_path) << zsptest::script_file_json(tables).dump();
    std::ofstream(config_path) << json{
        {"schema", schema_path.string()},
        {"backend",
         {{"type", "scripted"}, {"script", script_path.string()}}},
    }.dump(2);
    std::ofstream data(data_path);
    for (const auto& entry : zsptest::scripted_corpus()) {
      data << json{{"utterance", entry.utterance},
                   {"mr", entry.expected_mr},
                   {"domain", "demo"}}
                  .dump()
           << '\n';
    }
  }
  ~CliFixture() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run({"--definitely-not-a-flag"}) == 1);
  CHECK(run({}) == 1);                          // missing subcommand
  CHECK(run({"parse"}) == 1);                   // missing --config
  CHECK(run({"frobnicate"}) == 1);              // unknown subcommand
}

TEST_CASE("help exits 0") { CHECK(run({"--help"}) == 0); }

TEST_CASE("parse requires exactly one input source") {
  CliFixture fx;
  CHECK(run({"parse", "--config", fx.config_path.string()}) == 1);
  CHECK(run({"parse", "--config", fx.config_path.string(), "--utterance", "x",
             "--input", "y"}) == 1);
}

TEST_CASE("runtime errors exit 2") {
  CliFixture fx;
  CHECK(run({"parse", "--config", (fx.dir / "nope.json").string(),
             "--utterance", "hi"}) == 2);
  // Unscripted utterance: the parse fails per-record, exit code 2.
  CHECK(run({"parse", "--config", fx.config_path.string(), "--utterance",
             "nothing scripted here"}) == 2);
}

TEST_CASE("parse emits the MR and a trace file") {
  CliFixture fx;
  fs::path traces = fx.dir / "traces.jsonl";
  CHECK(run({"parse", "--config", fx.config_path.string(), "--utterance",
             "wake me at 2 pm", "--traces", traces.string()}) == 0);
  std::ifstream in(traces);
  std::string line;
  REQUIRE(std::getline(in, line));
  json t = json::parse(line);
  CHECK(t.at("mr") == "[IN:CREATE_ALARM [SL:DATE_TIME at 2 pm ] ]");
  CHECK(t.at("intent").at("label") == "CREATE_ALARM");
}

TEST_CASE("parse reads an input file, one utterance per line") {
  CliFixture fx;
  fs::path input = fx.dir / "input.txt";
  std::ofstream(input) << "wake me at 2 pm\nplay hotel california\n";
  fs::path traces = fx.dir / "batch_traces.jsonl";
  CHECK(run({"parse", "--config", fx.config_path.string(), "--input",
             input.string(), "--traces", traces.string()}) == 0);
  std::istringstream lines(slurp(traces));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) ++n;
  CHECK(n == 2);
}

TEST_CASE("eval writes a metrics report") {
  CliFixture fx;
  fs::path out = fx.dir / "report.json";
  CHECK(run({"eval", "--config", fx.config_path.string(), "--data",
             fx.data_path.string(), "--out", out.string()}) == 0);
  json report = json::parse(slurp(out));
  CHECK(report.at("overall").at("exact_match_accuracy") == 1.0);
  CHECK(report.at("overall").at("n") == 20);
  CHECK(report.at("per_domain").contains("demo"));
}

TEST_CASE("record and replay reproduce the report byte for byte") {
  CliFixture fx;
  fs::path trace_log = fx.dir / "trace_log.jsonl";
  fs::path out1 = fx.dir / "report1.json";
  fs::path out2 = fx.dir / "report2.json";

  // Re-point the config at a tracing run.
  std::ofstream(fx.config_path) << json{
      {"schema", fx.schema_path.string()},
      {"backend",
       {{"type", "scripted"},
        {"script", fx.script_path.string()},
        {"trace_log", trace_log.string()}}},
  }.dump();
  CHECK(run({"eval", "--config", fx.config_path.string(), "--data",
             fx.data_path.string(), "--out", out1.string()}) == 0);
  CHECK(fs::exists(trace_log));

  CHECK(run({"replay", "--config", fx.config_path.string(), "--data",
             fx.data_path.string(), "--trace-log", trace_log.string(),
             "--out", out2.string()}) == 0);
  CHECK(slurp(out1) == slurp(out2));
  // The replay run must not have appended to the log.
  auto log_size = fs::file_size(trace_log);
  CHECK(run({"replay", "--config", fx.config_path.string(), "--data",
             fx.data_path.string(), "--trace-log", trace_log.string(),
             "--out", out2.string()}) == 0);
  CHECK(fs::file_size(trace_log) == log_size);
}

TEST_CASE("gen-unanswerable produces a corpus and a report") {
  CliFixture fx;
  fs::path input = fx.dir / "qa.jsonl";
  {
    std::ofstream out(input);
    for (int i = 0; i < 6; ++i) {
      std::string n = std::to_string(i);
      out << json{{"id", "s" + n},
                  {"question", "Where does person" + n + " work?"},
                  {"context", "Person" + n + " lives in Town" + n +
                                  ". Person" + n + " works at Office" + n +
                                  "."},
                  {"answer", "Office" + n}}
                 .dump()
          << '\n';
    }
  }
  fs::path output = fx.dir / "unanswerable.jsonl";
  fs::path report_path = fx.dir / "gen_report.json";
  CHECK(run({"gen-unanswerable", "--input", input.string(), "--output",
             output.string(), "--report", report_path.string(), "--seed",
             "3"}) == 0);
  json report = json::parse(slurp(report_path));
  CHECK(report.at("input_count") == 6);
  CHECK(report.at("removed_sentence_count") == 6);
  auto records = zsp::load_qa_jsonl(output);
  CHECK(records.size() == 12);

  CHECK(run({"gen-unanswerable", "--input", input.string(), "--output",
             output.string(), "--format", "nope"}) == 2);
}

TEST_CASE("sweep-threshold emits the CSV grid") {
  CliFixture fx;
  fs::path traces = fx.dir / "sweep_traces.jsonl";
  CHECK(run({"eval", "--config", fx.config_path.string(), "--data",
             fx.data_path.string(), "--traces", traces.string(),
             "--slots-from-gold", "--out",
             (fx.dir / "ignored.json").string()}) == 0);
  fs::path csv = fx.dir / "sweep.csv";
  CHECK(run({"sweep-threshold", "--traces", traces.string(), "--data",
             fx.data_path.string(), "--config", fx.config_path.string(),
             "--taus", "0:8:17", "--out", csv.string()}) == 0);
  std::string content = slurp(csv);
  CHECK(content.rfind("tau,f1_all,f1_answerable,f1_unanswerable,abstain_rate\n",
                      0) == 0);
  CHECK(std::count(content.begin(), content.end(), '\n') == 18);
}

TEST_CASE("ingest converts TSV to JSONL and reports bad lines") {
  CliFixture fx;
  fs::path tsv = fx.dir / "mtop.tsv";
  {
    std::ofstream out(tsv);
    out << "1\ta\tb\twake me at 2 pm\talarm\tc\t[IN:CREATE_ALARM "
           "[SL:DATE_TIME at 2 pm ] ]\n";
    out << "2\ta\tb\tbroken\talarm\tc\t[IN:OOPS\n";
  }
  fs::path out_path = fx.dir / "ingested.jsonl";
  fs::path err_path = fx.dir / "ingest_errors.jsonl";
  CHECK(run({"ingest", "--input", tsv.string(), "--output", out_path.string(),
             "--errors", err_path.string(), "--domain-col", "4"}) == 0);
  std::istringstream lines(slurp(out_path));
  std::string line;
  REQUIRE(std::getline(lines, line));
  json rec = json::parse(line);
  CHECK(rec.at("mr") == "[IN:CREATE_ALARM [SL:DATE_TIME at 2 pm ] ]");
  CHECK(rec.at("domain") == "alarm");
  CHECK_FALSE(std::getline(lines, line));
  json err = json::parse(slurp(err_path).substr(0, slurp(err_path).find('\n')));
  CHECK(err.at("line") == 2);
}
