#include "acqsim/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "acqsim/acquisition.hpp"
#include "acqsim/corpus.hpp"
#include "acqsim/csv.hpp"
#include "acqsim/errors.hpp"
#include "acqsim/scenarios.hpp"
#include "acqsim/seeding.hpp"
#include "acqsim/vtl.hpp"

namespace acqsim {

namespace {

struct Options {
  std::string annotations, texts, schema, format = "long_csv";
  std::string cand_annotations, cand_texts;
  std::string config, out, predictions, plan, in, name, synthetic;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> threshold;
  std::optional<std::string> mode;
  std::optional<double> price;
  std::optional<double> annotators_per_text;
};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("acqsim", sink);
  log->set_pattern("[acqsim %l] %v");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("ACQSIM_LOG")) {
    const std::string s = env;
    if (s == "error") level = spdlog::level::err;
    else if (s == "warn") level = spdlog::level::warn;
    else if (s == "info") level = spdlog::level::info;
    else if (s == "debug") level = spdlog::level::debug;
  }
  log->set_level(level);
  return log;
}

nlohmann::json read_json_file(const std::string& path, ErrorClass cls) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(cls, "FileNotFound", path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(cls, cls == ErrorClass::config ? "InvalidConfig" : "MalformedJson", fmt::format("{}: {}", path, ex.what()));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("WriteFailed", path.string());
  f << contents;
}

class Session {
 public:
  Session(const Options& o, std::vector<std::string> argv, std::ostream& out, std::ostream& err)
      : o_(o), argv_(std::move(argv)), out_(out), log_(make_logger(err)) {}

  // Effective configuration: CLI flag > config file > built-in default.
  ScenarioConfig config(std::optional<ScenarioKind> forced = std::nullopt) {
    nlohmann::json file = nlohmann::json::object();
    if (!o_.config.empty()) {
      file = read_json_file(o_.config, ErrorClass::config);
      inputs_.emplace_back(o_.config, sha256_file(o_.config));
    }
    ScenarioConfig c = parse_scenario_config(file);
    auto source = [&](const char* key, bool from_cli, bool in_file) {
      sources_[key] = from_cli ? "cli" : in_file ? "config" : "default";
    };
    if (forced) c.scenario = *forced;
    if (!o_.name.empty()) {
      auto k = parse_scenario_kind(o_.name);
      if (!k) throw Error(ErrorClass::usage, "UnknownScenario", o_.name);
      c.scenario = *k;
    }
    source("scenario", forced || !o_.name.empty(), file.contains("scenario"));
    if (o_.seed) c.seed = *o_.seed;
    source("seed", o_.seed.has_value(), file.contains("seed"));
    if (o_.jobs) c.jobs = *o_.jobs;
    source("jobs", o_.jobs.has_value(), file.contains("jobs"));
    if (o_.threshold) c.thresholds = {Threshold::parse(*o_.threshold)};
    source("thresholds", o_.threshold.has_value(), file.contains("threshold") || file.contains("thresholds"));
    if (o_.mode) {
      auto m = parse_model_mode(*o_.mode);
      if (!m) throw Error(ErrorClass::usage, "InvalidMode", *o_.mode);
      c.mode = *m;
    }
    source("mode", o_.mode.has_value(), file.contains("mode"));
    if (o_.price) c.price = *o_.price;
    source("price", o_.price.has_value(), file.contains("cost") && file["cost"].contains("price"));
    if (o_.annotators_per_text) c.annotators_per_text = *o_.annotators_per_text;
    source("annotators_per_text", o_.annotators_per_text.has_value(),
           file.contains("cost") && file["cost"].contains("annotators_per_text"));
    return c;
  }

  Corpus load_corpus(const std::string& annotations, const std::string& texts,
                     const std::optional<SyntheticSpec>& synthetic, std::uint64_t seed) {
    if (annotations.empty()) {
      if (!synthetic) {
        throw Error(ErrorClass::usage, "MissingInput", "give --annotations/--texts/--schema or a 'synthetic' config block");
      }
      log_->info("generating synthetic corpus (seed {})", seed);
      return generate_synthetic(*synthetic, seed);
    }
    if (texts.empty() || o_.schema.empty()) {
      throw Error(ErrorClass::usage, "MissingInput", "--annotations needs --texts and --schema");
    }
    const auto format = parse_input_format(o_.format);
    if (!format) throw Error(ErrorClass::usage, "InvalidFormat", o_.format);
    for (const auto& p : {annotations, texts, o_.schema}) inputs_.emplace_back(p, sha256_file(p));
    const auto schema = load_schema(o_.schema);
    IngestOptions opts;
    opts.format = *format;
    auto corpus = ingest(annotations, texts, schema, opts);
    log_->info("ingested {} texts, {} tasks, {} records", corpus.n_texts(), corpus.n_tasks(), corpus.annotations().size());
    return corpus;
  }

  Corpus load_corpus(const ScenarioConfig& c) { return load_corpus(o_.annotations, o_.texts, c.synthetic, c.seed); }

  std::filesystem::path require_out() const {
    if (o_.out.empty()) throw Error(ErrorClass::usage, "MissingOutput", "--out is required");
    return o_.out;
  }

  // config.json then a first manifest, before any result file.
  void begin_run(const std::filesystem::path& dir, const std::string& command, const ScenarioConfig& c) {
    std::filesystem::create_directories(dir);
    const std::string config_text = to_json(c).dump(2) + "\n";
    write_text_file(dir / "config.json", config_text);
    manifest_.command = command;
    manifest_.argv = argv_;
    manifest_.config_sha256 = sha256_hex(config_text);
    manifest_.seed = c.seed;
    manifest_.inputs = inputs_;
    manifest_.settings_source = sources_;
    manifest_.started_at = utc_timestamp();
    manifest_.out_dir = dir.string();
    write_manifest(dir, manifest_);
  }

  void end_run(const std::filesystem::path& dir) {
    manifest_.inputs = inputs_;
    manifest_.finished_at = utc_timestamp();
    write_manifest(dir, manifest_);
  }

  void warn_undefined(const VtlMatrix& m) {
    if (const auto n = m.count_undefined(); n > 0) log_->warn("{} (text, task) cells have no annotations and are excluded", n);
  }

  std::optional<Trainer> imported_trainer(const Corpus& corpus) {
    if (o_.predictions.empty()) return std::nullopt;
    inputs_.emplace_back(o_.predictions, sha256_file(o_.predictions));
    return fixed_trainer(import_predictions(std::filesystem::path(o_.predictions), corpus.text_ids(), corpus.task_ids()));
  }

  // Subcommands ------------------------------------------------------------

  void ingest_cmd() {
    Corpus corpus;
    ScenarioConfig c = config();
    if (!o_.synthetic.empty()) {
      inputs_.emplace_back(o_.synthetic, sha256_file(o_.synthetic));
      c.synthetic = parse_synthetic_spec(read_json_file(o_.synthetic, ErrorClass::config));
      corpus = load_corpus("", "", c.synthetic, c.seed);
    } else {
      corpus = load_corpus(o_.annotations, o_.texts, std::nullopt, c.seed);
    }
    if (!o_.out.empty()) {
      const std::filesystem::path dir = o_.out;
      begin_run(dir, "ingest", c);
      std::ostringstream a, t;
      write_long_csv(a, corpus);
      write_texts_csv(t, corpus);
      write_text_file(dir / "annotations.csv", a.str());
      write_text_file(dir / "texts.csv", t.str());
      write_text_file(dir / "schema.json", schema_to_json(corpus.tasks()).dump(2) + "\n");
      end_run(dir);
    }
    out_ << to_json(profile(corpus)).dump(2) << '\n';
  }

  void profile_cmd() {
    const auto c = config();
    out_ << to_json(profile(load_corpus(c))).dump(2) << '\n';
  }

  void vtl_cmd() {
    const auto c = config();
    const auto corpus = load_corpus(c);
    const auto matrix = compute_fractions(corpus);
    warn_undefined(matrix);
    const auto labels = binarize(matrix, c.effective_thresholds().front());
    std::ostringstream csv;
    write_vtl_csv(csv, matrix, labels);
    if (o_.out.empty()) {
      out_ << csv.str();
    } else {
      write_text_file(o_.out, csv.str());
    }
  }

  void train_cmd() {
    const auto c = config();
    const auto path = require_out();
    const auto corpus = load_corpus(c);
    const FeatureCache features(corpus);
    const auto matrix = compute_fractions(corpus);
    warn_undefined(matrix);
    const auto labels = binarize(matrix, c.effective_thresholds().front());
    std::vector<std::size_t> rows;
    for (std::size_t d = 0; d < labels.n_texts(); ++d) {
      if (labels.row_has_defined(d)) rows.push_back(d);
    }
    std::mt19937_64 rng(derive_seed(c.seed, 0x7A1, 0));
    shuffle(std::span<std::size_t>(rows), rng);
    const auto n_val = static_cast<std::size_t>(c.validation_fraction * static_cast<double>(rows.size()));
    TrainingData data{&features, &labels, {rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end()},
                      {rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val)}};
    std::sort(data.train_rows.begin(), data.train_rows.end());
    std::sort(data.val_rows.begin(), data.val_rows.end());
    TrainTrace trace;
    const auto model = train_vtl(data, c.mode, c.train, derive_seed(c.seed, 0x7A1, 1), &trace);
    model.save(path);
    nlohmann::ordered_json j;
    j["model"] = path.string();
    j["mode"] = to_string(c.mode);
    j["threshold"] = c.effective_thresholds().front().text();
    j["n_train"] = data.train_rows.size();
    j["n_validation"] = data.val_rows.size();
    j["best_epoch_per_head"] = trace.best_epoch_per_head;
    out_ << j.dump(2) << '\n';
  }

  void scenario_cmd(std::optional<ScenarioKind> forced) {
    auto c = config(forced);
    if (!forced && o_.name.empty() && o_.config.empty()) {
      throw Error(ErrorClass::usage, "MissingScenario", "give --name or a config with a 'scenario' key");
    }
    const auto dir = require_out();
    const auto corpus = load_corpus(c);
    ScenarioHooks hooks;
    hooks.trainer = imported_trainer(corpus);
    std::optional<Corpus> candidates;
    if (!o_.cand_annotations.empty()) {
      candidates = load_corpus(o_.cand_annotations, o_.cand_texts, std::nullopt, c.seed);
      hooks.candidates = &*candidates;
    }
    begin_run(dir, std::string("scenario ") + std::string(to_string(c.scenario)), c);
    warn_undefined(compute_fractions(corpus));
    log_->info("running {} with {} job(s)", to_string(c.scenario), c.jobs);
    const auto result = run_scenario(corpus, c, hooks);
    write_scenario_output(dir, result);
    end_run(dir);
  }

  void cost_cmd() {
    const auto c = config();
    if (o_.plan.empty()) throw Error(ErrorClass::usage, "MissingInput", "--plan is required");
    if (!c.annotators_per_text) throw Error(ErrorClass::usage, "MissingInput", "--annotators-per-text is required");
    std::ifstream in(o_.plan, std::ios::binary);
    if (!in) throw data_error("FileNotFound", o_.plan);
    const auto plan = read_plan_csv(in);
    out_ << to_json(estimate_cost(plan, c.price, *c.annotators_per_text)).dump(2) << '\n';
  }

  void report_cmd() {
    if (o_.in.empty()) throw Error(ErrorClass::usage, "MissingInput", "--in is required");
    const std::filesystem::path dir = o_.in;
    const auto report = read_json_file((dir / "report.json").string(), ErrorClass::data);
    std::ifstream in(dir / "metrics.csv", std::ios::binary);
    if (!in) throw data_error("FileNotFound", (dir / "metrics.csv").string());
    out_ << "scenario: " << report.value("scenario", "?") << '\n';
    out_ << fmt::format("{:<24} {:<12} {:<12} {:>12} {:>12}\n", "variant", "task", "metric", "mean", "std");
    // Pair up mean/std rows of the long-form table.
    csv::Reader reader(in);
    std::vector<std::string> f;
    reader.next(f);
    std::map<std::tuple<std::string, std::string, std::string>, std::pair<std::string, std::string>> table;
    std::vector<std::tuple<std::string, std::string, std::string>> order;
    while (reader.next(f)) {
      if (f.size() != 6 || (f[2] != "mean" && f[2] != "std")) continue;
      auto key = std::make_tuple(f[1], f[3], f[4]);
      auto [it, fresh] = table.emplace(key, std::make_pair(std::string(), std::string()));
      if (fresh) order.push_back(key);
      (f[2] == "mean" ? it->second.first : it->second.second) = f[5];
    }
    for (const auto& key : order) {
      const auto& [variant, task, metric] = key;
      const auto& [mean, sd] = table[key];
      out_ << fmt::format("{:<24} {:<12} {:<12} {:>12} {:>12}\n", variant, task, metric, mean, sd.empty() ? "-" : sd);
    }
  }

 private:
  const Options& o_;
  std::vector<std::string> argv_;
  std::ostream& out_;
  std::shared_ptr<spdlog::logger> log_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  nlohmann::ordered_json sources_ = nlohmann::ordered_json::object();
  RunManifest manifest_;
};

int exit_code(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::usage: return kExitUsage;
    case ErrorClass::data: return kExitData;
    case ErrorClass::config: return kExitConfig;
  }
  return kExitData;
}

void report_error(std::ostream& err, std::string_view cls, std::string_view kind, const std::string& message,
                  std::optional<std::size_t> line = std::nullopt) {
  nlohmann::ordered_json j;
  j["error"] = cls;
  j["kind"] = kind;
  if (line) j["line"] = *line;
  j["message"] = message;
  err << j.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"acqsim: model-based annotation budget simulator"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Options o;

  auto corpus_flags = [&](CLI::App* s) {
    s->add_option("--annotations", o.annotations, "Annotation file (long_csv, long_jsonl or wide_csv)");
    s->add_option("--texts", o.texts, "Texts file: text_id,content");
    s->add_option("--schema", o.schema, "Task schema JSON");
    s->add_option("--format", o.format, "long_csv | long_jsonl | wide_csv")->capture_default_str();
    s->add_option("--config", o.config, "Scenario/config JSON");
    s->add_option("--seed", o.seed, "Master seed");
  };
  auto model_flags = [&](CLI::App* s) {
    s->add_option("--threshold", o.threshold, "VTL threshold t in [0, 1]");
    s->add_option("--mode", o.mode, "single | multi");
  };

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus (or generate a synthetic one) and print its profile");
  corpus_flags(ingest);
  ingest->add_option("--synthetic", o.synthetic, "Synthetic corpus spec JSON");
  ingest->add_option("--out", o.out, "Write the normalized corpus here");

  auto* profile_cmd = app.add_subcommand("profile", "Print the dataset profile as JSON");
  corpus_flags(profile_cmd);

  auto* vtl = app.add_subcommand("vtl", "Export VTL fractions and bits as CSV");
  corpus_flags(vtl);
  model_flags(vtl);
  vtl->add_option("--out", o.out, "CSV path (default stdout)");

  auto* train = app.add_subcommand("train", "Train the VTL predictor on the whole corpus and save it");
  corpus_flags(train);
  model_flags(train);
  train->add_option("--out", o.out, "Model JSON path")->required();

  auto* scenario = app.add_subcommand("scenario", "Run an experiment protocol into an output directory");
  corpus_flags(scenario);
  model_flags(scenario);
  scenario->add_option("--name", o.name,
                       "plain_cv | self_supervised | incremental | threshold_sweep | single_vs_multi | diversity_grid | simulate");
  scenario->add_option("--out", o.out, "Output directory")->required();
  scenario->add_option("--jobs", o.jobs, "Parallel jobs (default: all cores)");
  scenario->add_option("--predictions", o.predictions, "Use imported predictions instead of the built-in model");
  scenario->add_option("--price", o.price, "Price per label");

  auto* simulate = app.add_subcommand("simulate", "Route candidate cells to humans or auto-zero and cost the plan");
  corpus_flags(simulate);
  model_flags(simulate);
  simulate->add_option("--candidates-annotations", o.cand_annotations, "Candidate pool annotations (held ground truth)");
  simulate->add_option("--candidates-texts", o.cand_texts, "Candidate pool texts");
  simulate->add_option("--out", o.out, "Output directory")->required();
  simulate->add_option("--jobs", o.jobs, "Parallel jobs");
  simulate->add_option("--predictions", o.predictions, "Use imported predictions for the candidates");
  simulate->add_option("--price", o.price, "Price per label");
  simulate->add_option("--annotators-per-text", o.annotators_per_text, "Labels bought per routed cell");

  auto* cost = app.add_subcommand("cost", "Cost a routing plan");
  cost->add_option("--plan", o.plan, "plan.csv from simulate")->required();
  cost->add_option("--price", o.price, "Price per label");
  cost->add_option("--annotators-per-text", o.annotators_per_text, "Labels bought per routed cell");
  cost->add_option("--config", o.config, "Config JSON");

  auto* report = app.add_subcommand("report", "Summarize an output directory");
  report->add_option("--in", o.in, "Output directory of a scenario run")->required();

  std::vector<const char*> argv{"acqsim"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "UsageError", e.get_name(), e.what());
    return kExitUsage;
  }

  try {
    Session s(o, args, out, err);
    if (*ingest) s.ingest_cmd();
    else if (*profile_cmd) s.profile_cmd();
    else if (*vtl) s.vtl_cmd();
    else if (*train) s.train_cmd();
    else if (*scenario) s.scenario_cmd(std::nullopt);
    else if (*simulate) s.scenario_cmd(ScenarioKind::simulate);
    else if (*cost) s.cost_cmd();
    else if (*report) s.report_cmd();
    return kExitOk;
  } catch (const Error& e) {
    report_error(err, to_string(e.error_class()), e.kind(), e.what(), e.line());
    return exit_code(e.error_class());
  } catch (const std::filesystem::filesystem_error& e) {
    report_error(err, "DataError", "FileSystem", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    report_error(err, "DataError", "Unexpected", e.what());
    return kExitData;
  }
}

}  // namespace acqsim
