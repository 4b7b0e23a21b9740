#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "acqsim/acquisition.hpp"
#include "acqsim/errors.hpp"
#include "acqsim/scenarios.hpp"
#include "support.hpp"

using namespace acqsim;

namespace {

Corpus small_synthetic(std::uint64_t seed, std::size_t n_texts = 80) {
  SyntheticSpec s;
  s.n_texts = n_texts;
  return generate_synthetic(s, seed);
}

template <typename Fn>
std::string error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return "none";
}

// Invaluable share of the defined cells, counted directly from the fractions.
testing::Q invaluable_fraction(const Corpus& c, const Threshold& t) {
  const auto m = compute_fractions(c);
  const auto l = binarize(m, t);
  std::size_t cells = 0, zero = 0;
  for (std::size_t d = 0; d < l.n_texts(); ++d) {
    for (std::size_t k = 0; k < l.n_tasks(); ++k) {
      if (!l.defined(d, k)) continue;
      ++cells;
      zero += l.bit(d, k) == 0;
    }
  }
  return testing::Q(zero, cells);
}

}  // namespace

TEST_SUITE("scenarios") {

TEST_CASE("fold plan partitions texts and nests training sets") {
  std::vector<std::size_t> rows(53);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i * 2;
  const FoldPlan plan(rows, 10, 42);
  std::multiset<std::size_t> seen;
  std::size_t lo = rows.size(), hi = 0;
  for (std::size_t f = 0; f < 10; ++f) {
    seen.insert(plan.fold(f).begin(), plan.fold(f).end());
    lo = std::min(lo, plan.fold(f).size());
    hi = std::max(hi, plan.fold(f).size());
    CHECK(std::is_sorted(plan.fold(f).begin(), plan.fold(f).end()));
  }
  CHECK(seen == std::multiset<std::size_t>(rows.begin(), rows.end()));
  CHECK(hi - lo <= 1);

  for (std::size_t i = 0; i < 10; ++i) {
    const auto r = plan.roles(i);
    CHECK(r.test == plan.fold(i));
    CHECK(r.validation == plan.fold((i + 1) % 10));
    CHECK(r.train_folds.size() == 8);
    CHECK(std::is_sorted(r.train_folds.begin(), r.train_folds.end()));
    CHECK(r.test.size() + r.validation.size() + r.train.size() == rows.size());
    std::vector<std::size_t> prev;
    for (std::size_t n = 1; n <= 8; ++n) {
      auto cur = plan.roles(i, n).train;
      std::sort(cur.begin(), cur.end());
      CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = std::move(cur);
    }
  }
  CHECK(FoldPlan(rows, 10, 42).fold(3) == plan.fold(3));

  CHECK(error_kind([&] { FoldPlan(std::span(rows).first(5), 10, 1); }) == "TooFewTexts");
  CHECK(error_kind([&] { FoldPlan(rows, 2, 1); }) == "InvalidConfig");
}

TEST_CASE("oracle cross-validation") {
  const auto c = small_synthetic(3);
  const ScenarioData data(c);
  ScenarioConfig cfg;
  const auto t = cfg.effective_thresholds().front();
  ScenarioHooks hooks;
  hooks.trainer = oracle_trainer(binarize(data.matrix, t));
  const auto out = run_plain_cv(data, cfg, hooks);
  const auto& r = out.report["result"];
  CHECK(r["aal"]["mean"].get<double>() == 0.0);
  for (const auto& f : r["folds"]) CHECK(f["aal"].get<double>() == 0.0);

  // Pooled over folds the saved cells are exactly the invaluable ones.
  std::uint64_t cells = 0, saved = 0;
  const auto cv = cross_validate(data, binarize(data.matrix, t), binarize(data.matrix, t), *hooks.trainer,
                                 {cfg.n_folds, cfg.seed, 1, std::nullopt});
  for (const auto& f : cv.report.folds) {
    cells += f.n_cells;
    for (const auto& k : f.counts) saved += k.t0p0;
  }
  CHECK(testing::Q(saved, cells) == invaluable_fraction(c, t));
}

TEST_CASE("reports keep the MB identity") {
  const auto c = small_synthetic(5);
  const ScenarioData data(c);
  ScenarioConfig cfg;
  cfg.seed = 5;
  const auto out = run_plain_cv(data, cfg);
  const auto& r = out.report["result"];
  CHECK(std::abs(r["mb"]["mean"].get<double>() - (r["aer"]["mean"].get<double>() - r["aal"]["mean"].get<double>())) <= 1e-12);
  for (const auto& f : r["folds"]) {
    CHECK(std::abs(f["mb"].get<double>() - (f["aer"].get<double>() - f["aal"].get<double>())) <= 1e-12);
  }
}

TEST_CASE("self-supervised with perfect stage 1 equals plain CV") {
  const auto c = small_synthetic(9);
  const ScenarioData data(c);
  ScenarioConfig cfg;
  cfg.seed = 9;
  ScenarioHooks hooks;
  hooks.stage1_trainer = oracle_trainer(binarize(data.matrix, cfg.effective_thresholds().front()));
  const auto ss = run_self_supervised(data, cfg, hooks);
  const auto plain = run_plain_cv(data, cfg);
  CHECK(ss.report["predicted"].dump() == plain.report["result"].dump());

  const auto a = run_self_supervised(data, cfg), b = run_self_supervised(data, cfg);
  CHECK(a.report["difference"].dump() == b.report["difference"].dump());
  for (const auto& [task, v] : a.report["difference"]["macro_f1"].items()) {
    CAPTURE(task);
    REQUIRE(v.is_number());
    CHECK(std::isfinite(v.get<double>()));
  }
}

TEST_CASE("incremental at the full fold count equals plain CV") {
  const auto c = small_synthetic(2);
  const ScenarioData data(c);
  ScenarioConfig cfg;
  cfg.seed = 2;
  cfg.train_fold_counts = {1, 8};
  const auto inc = run_incremental(data, cfg);
  CHECK(inc.report["by_train_folds"]["folds=8"].dump() == run_plain_cv(data, cfg).report["result"].dump());
  CHECK(inc.report["by_train_folds"].contains("folds=1"));
}

TEST_CASE("threshold sweep") {
  const auto c = small_synthetic(4);
  const ScenarioData data(c);
  ScenarioConfig cfg;
  cfg.scenario = ScenarioKind::threshold_sweep;
  ScenarioHooks hooks;
  hooks.trainer = constant_trainer(0);
  const auto out = run_threshold_sweep(data, cfg, hooks);
  const auto& by = out.report["by_threshold"];
  REQUIRE(by.size() == 4);
  std::size_t prev = 0;
  for (const auto& [name, r] : by.items()) {
    const auto n = r["ground_truth_invaluable_cells"].get<std::size_t>();
    CHECK(n >= prev);
    prev = n;
  }

  // At t = 0 every defined cell is valuable, so nothing is saved.
  cfg.thresholds = {Threshold::parse("0")};
  hooks.trainer = builtin_trainer(ModelMode::multi_task, cfg.train);
  const auto zero = run_threshold_sweep(data, cfg, hooks);
  CHECK(zero.report["by_threshold"]["t=0"]["aer"]["mean"].get<double>() == 0.0);
}

TEST_CASE("single vs multi needs two tasks") {
  std::vector<AnnotationRecord> r;
  for (int d = 0; d < 12; ++d) r.push_back({"t" + std::to_string(d), "a", "task0", d % 2});
  const auto c = Corpus::build(testing::numbered_texts(12), testing::ordinal_tasks(1), r);
  const ScenarioData data(c);
  CHECK(error_kind([&] { run_single_vs_multi(data, ScenarioConfig{}); }) == "TooFewTasks");

  const auto big = small_synthetic(1, 60);
  const ScenarioData bd(big);
  const auto out = run_single_vs_multi(bd, ScenarioConfig{});
  CHECK(out.report.contains("single_task"));
  CHECK(out.report.contains("multi_task"));
  CHECK(out.report["macro_f1_delta"].size() == big.n_tasks());
}

TEST_CASE("multi-task helps the rarer of two correlated tasks") {
  // Both tasks are valuable exactly when "alpha" occurs; task1 is labeled on
  // a quarter of the texts only.
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> word(0, 300);
    std::vector<TextDoc> texts;
    std::vector<AnnotationRecord> r;
    for (int d = 0; d < 200; ++d) {
      const bool hit = u(rng) < 0.35;
      std::string content = hit ? "alpha" : "omega";
      for (int w = 0; w < 12; ++w) content += " w" + std::to_string(word(rng));
      const std::string id = "t" + std::to_string(d);
      texts.push_back({id, content});
      const bool labeled1 = u(rng) < 0.25;
      for (int a = 0; a < 3; ++a) {
        const std::string ann = "a" + std::to_string(a);
        r.push_back({id, ann, "task0", hit ? 5 : 0});
        if (labeled1) r.push_back({id, ann, "task1", hit ? 5 : 0});
      }
    }
    const auto c = Corpus::build(texts, testing::ordinal_tasks(2), r);
    ScenarioConfig cfg;
    cfg.seed = seed;
    const auto out = run_single_vs_multi(ScenarioData(c), cfg);
    const auto& delta = out.report["macro_f1_delta"]["task1"];
    REQUIRE(delta.is_number());
    wins += delta.get<double>() >= 0.0;
  }
  CHECK(wins >= 4);
}

TEST_CASE("simulate with a perfect predictor") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    const auto c = small_synthetic(seed, 40);
    const auto [seed_part, candidates] = split_corpus(c, 0.3, seed);
    const auto t = Threshold::parse("0.25");
    const auto truth = binarize(compute_fractions(candidates), t);
    const auto r = simulate_acquisition(seed_part, candidates, t, oracle_trainer(truth), seed, 0.1, 0.012, std::nullopt);
    CHECK(r.report.aal == 0.0);
    CHECK(r.report.mb_exact == invaluable_fraction(candidates, t));
  }
}

TEST_CASE("simulate routes on the predicted bit") {
  const auto c = small_synthetic(8, 40);
  const auto [seed_part, candidates] = split_corpus(c, 0.3, 8);
  const auto t = Threshold::parse("0.25");

  const auto human = simulate_acquisition(seed_part, candidates, t, constant_trainer(1), 8, 0.1, 0.012, 1.0);
  CHECK(human.report.aer == 0.0);
  CHECK(human.report.aal == 0.0);
  CHECK(human.report.mb == 0.0);
  CHECK(human.plan.n_auto_cells == 0);
  CHECK(human.cost.savings == 0.0);

  PredictionSet fixed(candidates.text_ids(), candidates.task_ids());
  for (std::size_t d = 0; d < fixed.n_texts(); ++d) {
    for (std::size_t k = 0; k < fixed.n_tasks(); ++k) fixed.set_score(d, k, (d + k) % 3 == 0 ? 0.9 : 0.1);
  }
  const auto r = simulate_acquisition(seed_part, candidates, t, fixed_trainer(fixed), 8, 0.1, 0.012, 2.0);
  for (std::size_t d = 0; d < fixed.n_texts(); ++d) {
    for (std::size_t k = 0; k < fixed.n_tasks(); ++k) {
      CHECK(r.plan.route(d, k) == ((d + k) % 3 == 0 ? Route::human : Route::auto_zero));
    }
  }
  CHECK(r.plan.n_human_cells + r.plan.n_auto_cells == fixed.bits.size());

  std::ostringstream out;
  write_plan_csv(out, r.plan);
  std::istringstream in(out.str());
  const auto back = read_plan_csv(in);
  CHECK(back.routes == r.plan.routes);
  CHECK(back.text_ids == r.plan.text_ids);

  const std::vector<AnnotationRecord> other_records{{"t0", "a", "task0", 1}, {"t1", "a", "task1", 0}};
  const auto other = Corpus::build(testing::numbered_texts(2), testing::ordinal_tasks(2), other_records);
  CHECK(error_kind([&] { simulate_acquisition(other, candidates, t, constant_trainer(1), 1, 0.1, 0.012, 1.0); }) ==
        "SchemaMismatch");
}

TEST_CASE("cost arithmetic") {
  const auto all = estimate_cost(1000, 1000, 0.012, 1.0);
  CHECK(all.full_cost == doctest::Approx(12.00).epsilon(1e-12));
  CHECK(all.plan_cost == all.full_cost);
  CHECK(all.savings == 0.0);
  CHECK(estimate_cost(1000, 600, 0.012, 1.0).savings_fraction == doctest::Approx(0.40).epsilon(1e-12));
  CHECK(estimate_cost(1823800, 0, 0.012, 1.0).full_cost == doctest::Approx(21885.60).epsilon(1e-12));
  CHECK(estimate_cost(10, 5, 0.5, 3.0).plan_cost == doctest::Approx(7.5));
  CHECK(error_kind([] { estimate_cost(10, 5, 0.0, 1.0); }) == "InvalidPrice");
  CHECK(error_kind([] { estimate_cost(10, 5, -1.0, 1.0); }) == "InvalidPrice");
}

TEST_CASE("config parsing") {
  const auto c = parse_scenario_config(nlohmann::json::parse(
      R"({"scenario":"threshold_sweep","thresholds":["0.1",0.2],"seed":7,"mode":"single","grid":{"lambda":3}})"));
  CHECK(c.scenario == ScenarioKind::threshold_sweep);
  REQUIRE(c.thresholds.size() == 2);
  CHECK(c.thresholds[0] == Threshold::parse("0.1"));
  CHECK(c.seed == 7);
  CHECK(c.mode == ModelMode::single_task);
  CHECK(c.ridge_lambda == 3.0);
  const auto round = parse_scenario_config(nlohmann::json::parse(to_json(c).dump()));
  CHECK(to_json(round).dump() == to_json(c).dump());

  CHECK(ScenarioConfig{}.effective_thresholds() == std::vector<Threshold>{Threshold::parse("0.25")});
  ScenarioConfig sweep;
  sweep.scenario = ScenarioKind::threshold_sweep;
  CHECK(sweep.effective_thresholds() == default_sweep_thresholds());

  CHECK(error_kind([] { parse_scenario_config(nlohmann::json::parse(R"({"threshold":1.5})")); }) == "ThresholdOutOfRange");
  CHECK(error_kind([] { parse_scenario_config(nlohmann::json::parse(R"({"scenario":"nope"})")); }) == "InvalidConfig");
  CHECK(error_kind([] { parse_scenario_config(nlohmann::json::parse(R"({"n_folds":2})")); }) == "InvalidConfig");
  CHECK(error_kind([] { parse_scenario_config(nlohmann::json::parse(R"({"train_fold_counts":[9]})")); }) == "InvalidConfig");
  CHECK(error_kind([] { parse_scenario_config(nlohmann::json::parse("[1]")); }) == "InvalidConfig");
}

TEST_CASE("thread count never changes metrics.csv") {
  const auto c = small_synthetic(6);
  for (auto kind : {ScenarioKind::plain_cv, ScenarioKind::incremental, ScenarioKind::self_supervised}) {
    CAPTURE(to_string(kind));
    ScenarioConfig cfg;
    cfg.scenario = kind;
    cfg.seed = 6;
    cfg.train_fold_counts = {1, 4};
    cfg.jobs = 1;
    const auto one = metrics_csv(run_scenario(c, cfg));
    cfg.jobs = 8;
    CHECK(metrics_csv(run_scenario(c, cfg)) == one);
  }
}

}  // TEST_SUITE
