#include "zsparse/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "zsparse/backend.hpp"
#include "zsparse/datagen.hpp"
#include "zsparse/eval.hpp"
#include "zsparse/pipeline.hpp"
#include "zsparse/schema.hpp"

namespace zsp {

using nlohmann::json;

namespace {

struct RunConfig {
  std::string schema_path;
  std::string backend_type = "scripted";  // scripted | http | replay
  std::string script_path;
  std::string endpoint;
  std::string replay_path;
  std::string trace_log_path;  // record backend calls when set
  PipelineConfig pipeline;
};

IntentMode intent_mode_from_string(const std::string& s) {
  if (s == "unconstrained") return IntentMode::unconstrained;
  if (s == "constrained") return IntentMode::constrained;
  if (s == "calibrated") return IntentMode::calibrated;
  if (s == "utterance_similarity") return IntentMode::utterance_similarity;
  throw std::runtime_error("unknown intent_mode: " + s);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json doc = json::parse(in);
  RunConfig cfg;
  cfg.schema_path = doc.at("schema").get<std::string>();
  if (doc.contains("backend")) {
    const auto& b = doc.at("backend");
    cfg.backend_type = b.value("type", "scripted");
    cfg.script_path = b.value("script", "");
    cfg.endpoint = b.value("endpoint", "");
    cfg.replay_path = b.value("trace", "");
    cfg.trace_log_path = b.value("trace_log", "");
  }
  cfg.pipeline.intent_mode =
      intent_mode_from_string(doc.value("intent_mode", "unconstrained"));
  if (doc.contains("intent")) {
    const auto& i = doc.at("intent");
    cfg.pipeline.intent.max_tokens = i.value("max_tokens", 16);
    cfg.pipeline.intent.raw_labels = i.value("raw_labels", false);
    if (i.contains("content_free_inputs")) {
      cfg.pipeline.intent.content_free_inputs =
          i.at("content_free_inputs").get<std::vector<std::string>>();
    }
  }
  if (doc.contains("abstain")) {
    const auto& a = doc.at("abstain");
    std::string mode = a.value("mode", "phrase_set");
    if (mode == "phrase_set") {
      cfg.pipeline.abstain.mode = AbstainMode::phrase_set;
    } else if (mode == "nll_threshold") {
      cfg.pipeline.abstain.mode = AbstainMode::nll_threshold;
    } else {
      throw std::runtime_error("unknown abstain mode: " + mode);
    }
    if (a.contains("phrases")) {
      cfg.pipeline.abstain.phrases =
          a.at("phrases").get<std::vector<std::string>>();
    }
    cfg.pipeline.abstain.threshold = a.value("threshold", 0.0);
    cfg.pipeline.abstain.per_token_mean = a.value("per_token_mean", false);
  }
  cfg.pipeline.max_span_tokens = doc.value("max_span_tokens", 10);
  cfg.pipeline.use_beam = doc.value("use_beam", false);
  if (doc.contains("beam")) {
    cfg.pipeline.beam.k = doc.at("beam").value("k", 1);
    cfg.pipeline.beam.alpha = doc.at("beam").value("alpha", 0.5);
  }
  return cfg;
}

struct Runtime {
  Schema schema;
  std::unique_ptr<GenerationBackend> raw_backend;
  std::unique_ptr<TraceLog> trace_log;
  std::unique_ptr<TracingBackend> traced;
  HashedBowSimilarity sim;

  GenerationBackend& backend() {
    return traced ? static_cast<GenerationBackend&>(*traced) : *raw_backend;
  }
};

Runtime make_runtime(const RunConfig& cfg) {
  Runtime rt{Schema::load(cfg.schema_path), nullptr, nullptr, nullptr, {}};
  if (cfg.backend_type == "scripted") {
    if (cfg.script_path.empty()) {
      throw std::runtime_error("scripted backend requires backend.script");
    }
    rt.raw_backend =
        std::make_unique<ScriptedBackend>(ScriptedBackend::load(cfg.script_path));
  } else if (cfg.backend_type == "http") {
    HttpBackendOptions opts;
    opts.endpoint = cfg.endpoint;
    rt.raw_backend = std::make_unique<HttpBackend>(opts);
  } else if (cfg.backend_type == "replay") {
    if (cfg.replay_path.empty()) {
      throw std::runtime_error("replay backend requires backend.trace");
    }
    rt.raw_backend =
        std::make_unique<ReplayBackend>(ReplayBackend::load(cfg.replay_path));
  } else {
    throw std::runtime_error("unknown backend type: " + cfg.backend_type);
  }
  if (!cfg.trace_log_path.empty()) {
    rt.trace_log = std::make_unique<TraceLog>(cfg.trace_log_path);
    rt.traced = std::make_unique<TracingBackend>(*rt.raw_backend, *rt.trace_log);
  }
  return rt;
}

struct DataFile {
  std::vector<LabeledExample> examples;
};

DataFile load_data_jsonl(const std::string& path, const Schema* schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file: " + path);
  DataFile data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    LabeledExample ex;
    ex.utterance = rec.at("utterance").get<std::string>();
    ex.gold = parse_mr(rec.at("mr").get<std::string>(), schema);
    ex.domain = rec.value("domain", "unknown");
    data.examples.push_back(std::move(ex));
  }
  return data;
}

void write_traces(const std::vector<ParseTrace>& traces, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write traces: " + path);
  for (const auto& t : traces) {
    json j = t;
    out << j.dump() << '\n';
  }
}

std::vector<double> parse_taus(const std::string& spec) {
  // "lo:hi:n" linspace or a comma-separated list.
  if (spec.find(':') != std::string::npos) {
    std::istringstream ss(spec);
    std::string lo_s, hi_s, n_s;
    std::getline(ss, lo_s, ':');
    std::getline(ss, hi_s, ':');
    std::getline(ss, n_s, ':');
    double lo = std::stod(lo_s), hi = std::stod(hi_s);
    int n = std::stoi(n_s);
    if (n < 2) throw std::runtime_error("--taus needs at least 2 grid points");
    std::vector<double> taus(n);
    for (int i = 0; i < n; ++i) taus[i] = lo + (hi - lo) * i / (n - 1);
    return taus;
  }
  std::vector<double> taus;
  std::istringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) taus.push_back(std::stod(tok));
  return taus;
}

void write_or_print(const std::string& content, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::vector<ParseTrace> run_pipeline(Pipeline& pipeline,
                                     const std::vector<LabeledExample>& examples,
                                     bool slots_from_gold) {
  std::vector<std::string> utterances;
  utterances.reserve(examples.size());
  for (const auto& ex : examples) utterances.push_back(ex.utterance);
  std::vector<ParseTrace> traces = pipeline.parse_corpus(utterances);
  if (slots_from_gold) {
    for (std::size_t i = 0; i < traces.size(); ++i) {
      if (traces[i].failed) continue;
      auto gold_slots = pipeline.extract_slots_for_intent(
          examples[i].utterance, examples[i].gold.intent);
      for (auto& [slot, st] : gold_slots) {
        traces[i].slot_answers.emplace(slot, std::move(st));
      }
    }
  }
  return traces;
}

int cmd_parse(const std::string& config_path, const std::string& utterance,
              const std::string& input_path, const std::string& traces_path,
              int beam_k, double alpha, bool use_beam) {
  RunConfig cfg = load_config(config_path);
  if (beam_k > 0) cfg.pipeline.beam.k = beam_k;
  if (alpha >= 0.0) cfg.pipeline.beam.alpha = alpha;
  if (use_beam) cfg.pipeline.use_beam = true;
  Runtime rt = make_runtime(cfg);
  Pipeline pipeline(rt.schema, rt.backend(), rt.sim, cfg.pipeline);

  std::vector<std::string> utterances;
  if (!utterance.empty()) {
    utterances.push_back(utterance);
  } else {
    std::ifstream in(input_path);
    if (!in) throw std::runtime_error("cannot open input: " + input_path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) utterances.push_back(line);
    }
  }
  std::vector<ParseTrace> traces = pipeline.parse_corpus(utterances);
  bool any_failed = false;
  for (const auto& t : traces) {
    if (t.failed) {
      any_failed = true;
      std::cerr << "parse failed for '" << t.utterance << "': " << t.error << '\n';
      std::cout << '\n';
    } else {
      std::cout << serialize_mr(t.final_frame) << '\n';
    }
  }
  if (!traces_path.empty()) write_traces(traces, traces_path);
  return any_failed ? 2 : 0;
}

int cmd_eval(const std::string& config_path, const std::string& data_path,
             const std::string& out_path, const std::string& traces_path,
             int beam_k, double alpha, bool use_beam, bool slots_from_gold,
             const std::string& force_replay_path) {
  RunConfig cfg = load_config(config_path);
  if (beam_k > 0) cfg.pipeline.beam.k = beam_k;
  if (alpha >= 0.0) cfg.pipeline.beam.alpha = alpha;
  if (use_beam) cfg.pipeline.use_beam = true;
  if (!force_replay_path.empty()) {
    cfg.backend_type = "replay";
    cfg.replay_path = force_replay_path;
    cfg.trace_log_path.clear();
  }
  Runtime rt = make_runtime(cfg);
  Pipeline pipeline(rt.schema, rt.backend(), rt.sim, cfg.pipeline);
  DataFile data = load_data_jsonl(data_path, &rt.schema);
  std::vector<ParseTrace> traces =
      run_pipeline(pipeline, data.examples, slots_from_gold);
  EvalReport report = evaluate(traces, data.examples);
  write_or_print(report_to_json(report).dump(2) + "\n", out_path);
  if (!traces_path.empty()) write_traces(traces, traces_path);
  return 0;
}

int cmd_gen_unanswerable(const std::string& input_path, const std::string& format,
                         const std::string& output_path,
                         const std::string& report_path,
                         const std::string& strategies, double ratio,
                         std::uint64_t seed, bool no_swap_guard) {
  std::vector<QASample> input;
  if (format == "squad") {
    input = load_squad_json(input_path);
  } else if (format == "jsonl") {
    input = load_qa_jsonl(input_path);
  } else {
    throw std::runtime_error("unknown input format: " + format);
  }
  SynthesisOptions opts;
  opts.removal = strategies.find("removal") != std::string::npos;
  opts.swap = strategies.find("swap") != std::string::npos;
  if (!opts.removal && !opts.swap) {
    throw std::runtime_error("no strategy selected (use removal,swap)");
  }
  opts.target_ratio = ratio;
  opts.seed = seed;
  opts.swap_answer_guard = !no_swap_guard;
  SynthesisReport report = synthesize_corpus(input, output_path, opts);
  json j{{"input_count", report.input_count},
         {"removed_sentence_count", report.removed_sentence_count},
         {"swapped_count", report.swapped_count},
         {"skipped_count", report.skipped_count},
         {"skip_reasons", report.skip_reasons}};
  write_or_print(j.dump(2) + "\n", report_path);
  return 0;
}

int cmd_sweep(const std::string& traces_path, const std::string& data_path,
              const std::string& config_path, const std::string& taus_spec,
              const std::string& out_path) {
  RunConfig cfg = load_config(config_path);
  Schema schema = Schema::load(cfg.schema_path);
  DataFile data = load_data_jsonl(data_path, &schema);

  std::ifstream in(traces_path);
  if (!in) throw std::runtime_error("cannot open traces: " + traces_path);
  std::vector<SweepRecord> records;
  std::string line;
  std::size_t idx = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (idx >= data.examples.size()) {
      throw std::runtime_error("more traces than data records");
    }
    const LabeledExample& ex = data.examples[idx++];
    json t = json::parse(line);
    std::map<std::string, std::string> gold_values;
    for (const auto& f : ex.gold.fillings) {
      if (!f.is_nested()) gold_values.emplace(f.slot, normalize_text(f.text));
    }
    for (const auto& [slot, s] : t.at("slots").items()) {
      if (s.at("best_span_nll").is_null()) {
        throw std::runtime_error("trace for '" + ex.utterance +
                                 "' slot " + slot + " is missing NLLs");
      }
      SweepRecord r;
      r.slot = slot;
      r.best_span_nll = s.at("best_span_nll").get<double>();
      r.best_span = s.at("best_span").get<std::string>();
      auto git = gold_values.find(slot);
      if (git != gold_values.end()) r.gold_value = git->second;
      records.push_back(std::move(r));
    }
  }
  auto rows = threshold_sweep(records, parse_taus(taus_spec));
  write_or_print(sweep_to_csv(rows), out_path);
  return 0;
}

int cmd_ingest(const std::string& input_path, std::size_t utterance_col,
               std::size_t mr_col, int domain_col,
               const std::string& schema_path, const std::string& output_path,
               const std::string& errors_path) {
  std::optional<Schema> schema;
  if (!schema_path.empty()) schema = Schema::load(schema_path);
  std::optional<std::size_t> dcol;
  if (domain_col >= 0) dcol = static_cast<std::size_t>(domain_col);
  IngestResult result = ingest_mtop_tsv(input_path, utterance_col, mr_col, dcol,
                                        schema ? &*schema : nullptr);
  std::ostringstream out;
  for (const auto& ex : result.examples) {
    json j{{"utterance", ex.utterance},
           {"mr", serialize_mr(ex.gold)},
           {"domain", ex.domain}};
    out << j.dump() << '\n';
  }
  write_or_print(out.str(), output_path);
  if (!errors_path.empty()) {
    std::ostringstream err;
    for (const auto& [lineno, msg] : result.errors) {
      err << json{{"line", lineno}, {"error", msg}}.dump() << '\n';
    }
    write_or_print(err.str(), errors_path);
  }
  std::cerr << "ingested " << result.examples.size() << " examples, "
            << result.errors.size() << " bad lines\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Zero-shot semantic parsing via question answering"};
  app.require_subcommand(1);

  std::string config_path, utterance, input_path, traces_path, data_path,
      out_path;
  int beam_k = 0;
  double alpha = -1.0;
  bool use_beam = false, slots_from_gold = false;

  auto* parse_cmd = app.add_subcommand("parse", "Parse utterances into MRs");
  parse_cmd->add_option("--config", config_path)->required();
  parse_cmd->add_option("--utterance", utterance);
  parse_cmd->add_option("--input", input_path);
  parse_cmd->add_option("--traces", traces_path);
  parse_cmd->add_option("--beam-k", beam_k);
  parse_cmd->add_option("--alpha", alpha);
  parse_cmd->add_flag("--beam", use_beam);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate against a labeled dataset");
  eval_cmd->add_option("--config", config_path)->required();
  eval_cmd->add_option("--data", data_path)->required();
  eval_cmd->add_option("--out", out_path);
  eval_cmd->add_option("--traces", traces_path);
  eval_cmd->add_option("--beam-k", beam_k);
  eval_cmd->add_option("--alpha", alpha);
  eval_cmd->add_flag("--beam", use_beam);
  eval_cmd->add_flag("--slots-from-gold", slots_from_gold,
                     "Also extract slots of the gold intent (sweep support)");

  std::string gen_format = "jsonl", gen_report, gen_strategies = "removal,swap";
  double gen_ratio = 0.5;
  std::uint64_t gen_seed = 0;
  bool gen_no_guard = false;
  auto* gen_cmd =
      app.add_subcommand("gen-unanswerable", "Synthesize unanswerable QA samples");
  gen_cmd->add_option("--input", input_path)->required();
  gen_cmd->add_option("--format", gen_format, "squad or jsonl");
  gen_cmd->add_option("--output", out_path)->required();
  gen_cmd->add_option("--report", gen_report);
  gen_cmd->add_option("--strategies", gen_strategies);
  gen_cmd->add_option("--ratio", gen_ratio);
  gen_cmd->add_option("--seed", gen_seed);
  gen_cmd->add_flag("--no-swap-guard", gen_no_guard);

  std::string taus_spec = "0:10:50";
  auto* sweep_cmd =
      app.add_subcommand("sweep-threshold", "NLL threshold sweep from traces");
  sweep_cmd->add_option("--traces", traces_path)->required();
  sweep_cmd->add_option("--data", data_path)->required();
  sweep_cmd->add_option("--config", config_path)->required();
  sweep_cmd->add_option("--taus", taus_spec, "lo:hi:n or comma list");
  sweep_cmd->add_option("--out", out_path);

  std::size_t utterance_col = 3, mr_col = 6;
  int domain_col = -1;
  std::string schema_path, errors_path;
  auto* ingest_cmd = app.add_subcommand("ingest", "MTOP TSV to internal JSONL");
  ingest_cmd->add_option("--input", input_path)->required();
  ingest_cmd->add_option("--utterance-col", utterance_col);
  ingest_cmd->add_option("--mr-col", mr_col);
  ingest_cmd->add_option("--domain-col", domain_col);
  ingest_cmd->add_option("--schema", schema_path);
  ingest_cmd->add_option("--output", out_path);
  ingest_cmd->add_option("--errors", errors_path);

  std::string replay_log;
  auto* replay_cmd =
      app.add_subcommand("replay", "Re-run eval from a trace log, offline");
  replay_cmd->add_option("--config", config_path)->required();
  replay_cmd->add_option("--data", data_path)->required();
  replay_cmd->add_option("--trace-log", replay_log)->required();
  replay_cmd->add_option("--out", out_path);
  replay_cmd->add_option("--traces", traces_path);
  replay_cmd->add_flag("--slots-from-gold", slots_from_gold);
  replay_cmd->add_option("--beam-k", beam_k);
  replay_cmd->add_option("--alpha", alpha);
  replay_cmd->add_flag("--beam", use_beam);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (parse_cmd->parsed()) {
      if (utterance.empty() == input_path.empty()) {
        std::cerr << "parse: exactly one of --utterance/--input is required\n";
        return 1;
      }
      return cmd_parse(config_path, utterance, input_path, traces_path, beam_k,
                       alpha, use_beam);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(config_path, data_path, out_path, traces_path, beam_k,
                      alpha, use_beam, slots_from_gold, "");
    }
    if (gen_cmd->parsed()) {
      return cmd_gen_unanswerable(input_path, gen_format, out_path, gen_report,
                                  gen_strategies, gen_ratio, gen_seed,
                                  gen_no_guard);
    }
    if (sweep_cmd->parsed()) {
      return cmd_sweep(traces_path, data_path, config_path, taus_spec, out_path);
    }
    if (ingest_cmd->parsed()) {
      return cmd_ingest(input_path, utterance_col, mr_col, domain_col,
                        schema_path, out_path, errors_path);
    }
    if (replay_cmd->parsed()) {
      return cmd_eval(config_path, data_path, out_path, traces_path, beam_k,
                      alpha, use_beam, slots_from_gold, replay_log);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace zsp
