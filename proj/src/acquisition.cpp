#include "acqsim/acquisition.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <random>
#include <unordered_map>

#include <fmt/format.h>

#include "acqsim/csv.hpp"
#include "acqsim/errors.hpp"
#include "acqsim/seeding.hpp"

namespace acqsim {

std::string_view to_string(Route r) { return r == Route::human ? "HUMAN" : "AUTO_ZERO"; }

AcquisitionPlan make_plan(const PredictionSet& p) {
  AcquisitionPlan plan;
  plan.text_ids = p.text_ids;
  plan.task_ids = p.task_ids;
  plan.routes.resize(p.bits.size());
  plan.human_per_text.assign(p.n_texts(), 0);
  for (std::size_t d = 0; d < p.n_texts(); ++d) {
    for (std::size_t k = 0; k < p.n_tasks(); ++k) {
      const bool human = p.bit(d, k) == 1;
      plan.routes[d * p.n_tasks() + k] = human ? Route::human : Route::auto_zero;
      if (human) {
        ++plan.human_per_text[d];
        ++plan.n_human_cells;
      } else {
        ++plan.n_auto_cells;
      }
    }
  }
  return plan;
}

void write_plan_csv(std::ostream& out, const AcquisitionPlan& plan) {
  csv::write_row(out, {"text_id", "task", "route"});
  for (std::size_t d = 0; d < plan.text_ids.size(); ++d) {
    for (std::size_t k = 0; k < plan.task_ids.size(); ++k) {
      csv::write_row(out, {plan.text_ids[d], plan.task_ids[k], to_string(plan.route(d, k))});
    }
  }
}

AcquisitionPlan read_plan_csv(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> f;
  if (!reader.next(f)) throw malformed_row(0, "empty plan file");
  if (f.size() != 3 || f[0] != "text_id" || f[1] != "task" || f[2] != "route") {
    throw malformed_row(1, "header must be text_id,task,route");
  }
  std::vector<std::string> texts, tasks;
  std::unordered_map<std::string, std::size_t> text_at, task_at;
  std::vector<std::tuple<std::size_t, std::size_t, Route>> cells;
  while (reader.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    const auto row = reader.record() - 1;
    if (f.size() != 3) throw malformed_row(row, "wrong field count");
    Route r;
    if (f[2] == "HUMAN") r = Route::human;
    else if (f[2] == "AUTO_ZERO") r = Route::auto_zero;
    else throw malformed_row(row, fmt::format("route must be HUMAN or AUTO_ZERO, got '{}'", f[2]));
    auto [ti, new_text] = text_at.emplace(f[0], texts.size());
    if (new_text) texts.push_back(f[0]);
    auto [ki, new_task] = task_at.emplace(f[1], tasks.size());
    if (new_task) tasks.push_back(f[1]);
    cells.emplace_back(ti->second, ki->second, r);
  }
  PredictionSet p(texts, tasks);
  std::vector<std::uint8_t> seen(p.bits.size(), 0);
  for (auto [d, k, r] : cells) {
    const std::size_t i = d * tasks.size() + k;
    if (seen[i]) throw data_error("DuplicateCell", fmt::format("({}, {})", texts[d], tasks[k]));
    seen[i] = 1;
    p.set_score(d, k, r == Route::human ? 1.0 : 0.0);
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw data_error("MissingCell", fmt::format("({}, {})", texts[i / tasks.size()], tasks[i % tasks.size()]));
  }
  return make_plan(p);
}

CostReport estimate_cost(std::size_t n_cells, std::size_t n_human_cells, double price, double annotators_per_text) {
  if (!(price > 0.0)) throw config_error("InvalidPrice", fmt::format("price per label must be positive, got {}", price));
  if (!(annotators_per_text > 0.0)) {
    throw config_error("InvalidPrice", fmt::format("annotators per text must be positive, got {}", annotators_per_text));
  }
  CostReport c;
  c.price_per_label = price;
  c.annotators_per_text = annotators_per_text;
  c.n_cells = n_cells;
  c.n_human_cells = n_human_cells;
  c.full_cost = static_cast<double>(n_cells) * annotators_per_text * price;
  c.plan_cost = static_cast<double>(n_human_cells) * annotators_per_text * price;
  c.savings = c.full_cost - c.plan_cost;
  // Computed from counts so 40% auto cells give exactly 0.4.
  c.savings_fraction =
      n_cells ? static_cast<double>(n_cells - n_human_cells) / static_cast<double>(n_cells) : 0.0;
  return c;
}

CostReport estimate_cost(const AcquisitionPlan& plan, double price, double annotators_per_text) {
  return estimate_cost(plan.routes.size(), plan.n_human_cells, price, annotators_per_text);
}

nlohmann::ordered_json to_json(const CostReport& c) {
  return {{"price_per_label", c.price_per_label},
          {"annotators_per_text", c.annotators_per_text},
          {"n_cells", c.n_cells},
          {"n_human_cells", c.n_human_cells},
          {"full_cost", c.full_cost},
          {"plan_cost", c.plan_cost},
          {"savings", c.savings},
          {"savings_fraction", c.savings_fraction}};
}

void check_same_schema(const Corpus& a, const Corpus& b) {
  if (a.tasks() != b.tasks()) {
    throw data_error("SchemaMismatch", fmt::format("seed corpus has {} tasks, candidates {}; ids, ranges and order must match",
                                                   a.n_tasks(), b.n_tasks()));
  }
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double seed_fraction, std::uint64_t seed) {
  if (!(seed_fraction > 0.0 && seed_fraction < 1.0)) {
    throw config_error("InvalidConfig", fmt::format("seed_fraction must lie in (0, 1), got {}", seed_fraction));
  }
  const std::size_t n = corpus.n_texts();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  shuffle(std::span<std::size_t>(order), rng);
  const auto n_seed = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(seed_fraction * static_cast<double>(n))),
                                              1, n > 1 ? n - 1 : 1);
  std::vector<std::uint8_t> in_seed(n, 0);
  for (std::size_t i = 0; i < n_seed; ++i) in_seed[order[i]] = 1;

  std::vector<TextDoc> seed_texts, cand_texts;
  for (std::size_t i = 0; i < n; ++i) (in_seed[i] ? seed_texts : cand_texts).push_back(corpus.texts()[i]);
  std::vector<AnnotationRecord> seed_recs, cand_recs;
  for (std::size_t i = 0; i < corpus.annotations().size(); ++i) {
    (in_seed[corpus.annotations()[i].text] ? seed_recs : cand_recs).push_back(corpus.record(i));
  }
  return {Corpus::build(std::move(seed_texts), corpus.tasks(), seed_recs),
          Corpus::build(std::move(cand_texts), corpus.tasks(), cand_recs)};
}

}  // namespace acqsim
