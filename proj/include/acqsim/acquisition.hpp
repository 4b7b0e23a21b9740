#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "acqsim/corpus.hpp"
#include "acqsim/metrics.hpp"
#include "acqsim/prediction_set.hpp"

namespace acqsim {

enum class Route : std::uint8_t { auto_zero = 0, human = 1 };

std::string_view to_string(Route r);

/// Routing per (text, task): HUMAN iff the predicted bit is 1.
struct AcquisitionPlan {
  std::vector<std::string> text_ids;
  std::vector<std::string> task_ids;
  std::vector<Route> routes;  // row-major
  std::vector<std::size_t> human_per_text;
  std::size_t n_human_cells = 0;
  std::size_t n_auto_cells = 0;

  Route route(std::size_t text, std::size_t task) const { return routes[text * task_ids.size() + task]; }
};

AcquisitionPlan make_plan(const PredictionSet& predictions);

void write_plan_csv(std::ostream& out, const AcquisitionPlan& plan);
/// Reads `text_id,task,route` (route HUMAN or AUTO_ZERO). Throws MalformedRow.
AcquisitionPlan read_plan_csv(std::istream& in);

struct CostReport {
  double price_per_label = 0.0;
  double annotators_per_text = 0.0;
  std::size_t n_cells = 0;
  std::size_t n_human_cells = 0;
  double full_cost = 0.0;
  double plan_cost = 0.0;
  double savings = 0.0;
  double savings_fraction = 0.0;
};

/// Throws ConfigError InvalidPrice for price <= 0 (or a non-positive
/// annotators_per_text).
CostReport estimate_cost(std::size_t n_cells, std::size_t n_human_cells, double price, double annotators_per_text);
CostReport estimate_cost(const AcquisitionPlan& plan, double price, double annotators_per_text);

nlohmann::ordered_json to_json(const CostReport& c);

/// Splits texts into (seed, candidates) with about `seed_fraction` of the
/// texts in the seed part, shuffled by `seed`.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double seed_fraction, std::uint64_t seed);

/// Throws DataError SchemaMismatch unless both corpora carry identical task schemas.
void check_same_schema(const Corpus& a, const Corpus& b);

}  // namespace acqsim
