#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "acqsim/cli.hpp"
#include "support.hpp"

using namespace acqsim;
using testing::read_file;
using testing::TempDir;
using testing::write_file;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

const char* kSchema = R"([{"task_id":"joy","lo":0,"hi":10},{"task_id":"ok","lo":0,"hi":1}])";

void write_tiny_corpus(const TempDir& d) {
  write_file(d / "schema.json", kSchema);
  write_file(d / "texts.csv", "text_id,content\nt1,hello there\nt2,goodbye now\n");
  write_file(d / "ann.csv", "text_id,annotator_id,task,value\nt1,u1,joy,3\nt1,u2,joy,0\nt1,u1,ok,1\nt2,u2,ok,0\n");
}

// A config that generates a small synthetic corpus.
void write_synthetic_config(const std::filesystem::path& p, const std::string& scenario) {
  write_file(p, R"({"scenario":")" + scenario +
                    R"(","seed":3,"synthetic":{"n_texts":60},"train_fold_counts":[1,8],)"
                    R"("grid":{"texts":[5,50],"annotations":[10,100000],"folds":3}})");
}

nlohmann::json last_error(const Run& r) {
  const auto line = r.err.substr(r.err.find('{'));
  return nlohmann::json::parse(line.substr(0, line.find('\n')));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("profile prints json") {
  TempDir d("cli_profile");
  write_tiny_corpus(d);
  const auto r = cli({"profile", "--annotations", (d / "ann.csv").string(), "--texts", (d / "texts.csv").string(),
                      "--schema", (d / "schema.json").string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["n_texts"] == 2);
  CHECK(j["n_annotated_labels"] == 4);
  CHECK(j["n_annotations"] == 3);
}

TEST_CASE("errors map to exit codes and one json line") {
  TempDir d("cli_err");
  write_tiny_corpus(d);
  const std::vector<std::string> corpus{"--annotations", (d / "ann.csv").string(), "--texts",
                                        (d / "texts.csv").string(), "--schema", (d / "schema.json").string()};

  const auto usage = cli({"scenario", "--bogus"});
  CHECK(usage.code == kExitUsage);
  CHECK(last_error(usage)["error"] == "UsageError");

  write_file(d / "bad.csv", "text_id,annotator_id,task,value\nt1,u1,joy,3\nt1,u2,joy,11\n");
  const auto data = cli({"profile", "--annotations", (d / "bad.csv").string(), "--texts", (d / "texts.csv").string(),
                         "--schema", (d / "schema.json").string()});
  CHECK(data.code == kExitData);
  const auto e = last_error(data);
  CHECK(e["kind"] == "DomainViolation");
  CHECK(e["line"] == 2);

  auto args = corpus;
  args.insert(args.begin(), "vtl");
  args.insert(args.end(), {"--threshold", "1.5"});
  const auto config = cli(args);
  CHECK(config.code == kExitConfig);
  CHECK(last_error(config)["kind"] == "ThresholdOutOfRange");

  const auto missing = cli({"profile", "--annotations", (d / "nope.csv").string(), "--texts",
                            (d / "texts.csv").string(), "--schema", (d / "schema.json").string()});
  CHECK(missing.code == kExitData);
}

TEST_CASE("vtl export") {
  TempDir d("cli_vtl");
  write_tiny_corpus(d);
  const auto r = cli({"vtl", "--annotations", (d / "ann.csv").string(), "--texts", (d / "texts.csv").string(),
                      "--schema", (d / "schema.json").string(), "--threshold", "0.5"});
  REQUIRE(r.code == 0);
  CHECK(r.out ==
        "text_id,task,nonzero,total,fraction,bit\n"
        "t1,joy,1,2,0.5,1\n"
        "t1,ok,1,1,1,1\n"
        "t2,joy,0,0,,\n"
        "t2,ok,0,1,0,0\n");
}

TEST_CASE("scenario reruns are byte-identical and the manifest hashes the config") {
  TempDir d("cli_sweep");
  write_synthetic_config(d / "cfg.json", "threshold_sweep");
  const auto a = cli({"scenario", "--config", (d / "cfg.json").string(), "--out", (d / "a").string(), "--jobs", "1"});
  REQUIRE(a.code == 0);
  const auto b = cli({"scenario", "--config", (d / "cfg.json").string(), "--out", (d / "b").string(), "--jobs", "8"});
  REQUIRE(b.code == 0);
  CHECK(read_file(d / "a" / "metrics.csv") == read_file(d / "b" / "metrics.csv"));
  CHECK(read_file(d / "a" / "report.json") == read_file(d / "b" / "report.json"));
  CHECK(std::filesystem::exists(d / "a" / "plotdata" / "threshold_sweep.csv"));

  const auto manifest = nlohmann::json::parse(read_file(d / "a" / "manifest.json"));
  CHECK(manifest["config_sha256"] == sha256_hex(read_file(d / "a" / "config.json")));
  CHECK(manifest["seed"] == 3);
  CHECK_FALSE(manifest["finished_at"].get<std::string>().empty());
  CHECK(manifest["settings_source"]["jobs"] == "cli");
  CHECK(manifest["settings_source"]["seed"] == "config");

  // CLI flags win over the config file.
  const auto c = cli({"scenario", "--config", (d / "cfg.json").string(), "--out", (d / "c").string(), "--seed", "11"});
  REQUIRE(c.code == 0);
  CHECK(nlohmann::json::parse(read_file(d / "c" / "config.json"))["seed"] == 11);

  const auto rep = cli({"report", "--in", (d / "a").string()});
  CHECK(rep.code == 0);
  CHECK(rep.out.find("t=0.1") != std::string::npos);
}

TEST_CASE("diversity grid writes infeasible markers") {
  TempDir d("cli_grid");
  write_synthetic_config(d / "cfg.json", "diversity_grid");
  const auto r = cli({"scenario", "--config", (d / "cfg.json").string(), "--out", (d / "g").string()});
  REQUIRE(r.code == 0);
  const auto grid = read_file(d / "g" / "grid.csv");
  CHECK(grid.rfind("n_annotations,M=5,M=50\n", 0) == 0);
  CHECK(grid.find("100000,--,--") != std::string::npos);
}

TEST_CASE("simulate then cost") {
  TempDir d("cli_sim");
  write_synthetic_config(d / "cfg.json", "simulate");
  const auto r = cli({"simulate", "--config", (d / "cfg.json").string(), "--out", (d / "s").string(), "--price", "0.02"});
  REQUIRE(r.code == 0);
  REQUIRE(std::filesystem::exists(d / "s" / "plan.csv"));
  const auto report = nlohmann::json::parse(read_file(d / "s" / "report.json"));
  CHECK(report["cost"]["price_per_label"] == 0.02);

  const auto c = cli({"cost", "--plan", (d / "s" / "plan.csv").string(), "--price", "0.5", "--annotators-per-text", "2"});
  REQUIRE(c.code == 0);
  const auto j = nlohmann::json::parse(c.out);
  const auto cells = j["n_cells"].get<double>(), human = j["n_human_cells"].get<double>();
  CHECK(j["full_cost"].get<double>() == doctest::Approx(cells * 2 * 0.5));
  CHECK(j["plan_cost"].get<double>() == doctest::Approx(human * 2 * 0.5));

  CHECK(cli({"cost", "--plan", (d / "s" / "plan.csv").string(), "--price", "0", "--annotators-per-text", "2"}).code ==
        kExitConfig);
}

TEST_CASE("ingest writes a normalized corpus") {
  TempDir d("cli_ingest");
  write_file(d / "spec.json", R"({"n_texts":20,"n_tasks":2,"n_annotators":4,"annotators_per_text":2,"tasks_per_text_max":1})");
  const auto r = cli({"ingest", "--synthetic", (d / "spec.json").string(), "--seed", "2", "--out", (d / "c").string()});
  REQUIRE(r.code == 0);
  const auto back = cli({"profile", "--annotations", (d / "c" / "annotations.csv").string(), "--texts",
                         (d / "c" / "texts.csv").string(), "--schema", (d / "c" / "schema.json").string()});
  REQUIRE(back.code == 0);
  CHECK(nlohmann::json::parse(back.out) == nlohmann::json::parse(r.out));
}

TEST_CASE("help and version") {
  const auto h = cli({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("scenario") != std::string::npos);
  CHECK(cli({"--version"}).out == std::string(kToolVersion) + "\n");
}

}  // TEST_SUITE
