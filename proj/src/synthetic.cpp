#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "acqsim/corpus.hpp"
#include "acqsim/errors.hpp"
#include "acqsim/seeding.hpp"

namespace acqsim {

namespace {

// Trigger tokens look like "k3q1" (task 3, trigger 1); filler tokens like
// "w42". The two vocabularies cannot collide.
std::string trigger_token(std::size_t task, std::size_t i) { return fmt::format("k{}q{}", task, i); }
std::string filler_token(std::size_t i) { return fmt::format("w{}", i); }

void validate(const SyntheticSpec& s) {
  auto fail = [](const std::string& why) { throw config_error("InvalidSpec", why); };
  if (s.n_texts == 0 || s.n_tasks == 0 || s.n_annotators == 0) fail("counts must be positive");
  if (s.annotators_per_text == 0 || s.annotators_per_text > s.n_annotators) {
    fail("annotators_per_text must be in [1, n_annotators]");
  }
  if (s.triggers_per_task == 0) fail("triggers_per_task must be positive");
  if (s.tasks_per_text_min > s.tasks_per_text_max || s.tasks_per_text_max > s.n_tasks) {
    fail("tasks_per_text range must satisfy min <= max <= n_tasks");
  }
  if (!(s.p_hit >= 0.0 && s.p_hit <= 1.0) || !(s.p_noise >= 0.0 && s.p_noise <= 1.0)) {
    fail("probabilities must lie in [0, 1]");
  }
  if (s.value_hi < 1) fail("value_hi must be >= 1");
  if (s.filler_vocabulary == 0) fail("filler_vocabulary must be positive");
}

}  // namespace

SyntheticSpec parse_synthetic_spec(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    s.n_texts = j.value("n_texts", s.n_texts);
    s.n_tasks = j.value("n_tasks", s.n_tasks);
    s.n_annotators = j.value("n_annotators", s.n_annotators);
    s.annotators_per_text = j.value("annotators_per_text", s.annotators_per_text);
    s.triggers_per_task = j.value("triggers_per_task", s.triggers_per_task);
    s.tasks_per_text_min = j.value("tasks_per_text_min", s.tasks_per_text_min);
    s.tasks_per_text_max = j.value("tasks_per_text_max", s.tasks_per_text_max);
    s.p_hit = j.value("p_hit", s.p_hit);
    s.p_noise = j.value("p_noise", s.p_noise);
    s.value_hi = j.value("value_hi", s.value_hi);
    s.filler_vocabulary = j.value("filler_vocabulary", s.filler_vocabulary);
    s.filler_words_per_text = j.value("filler_words_per_text", s.filler_words_per_text);
  } catch (const nlohmann::json::exception& ex) {
    throw config_error("InvalidSpec", ex.what());
  }
  validate(s);
  return s;
}

nlohmann::ordered_json to_json(const SyntheticSpec& s) {
  return {{"n_texts", s.n_texts},
          {"n_tasks", s.n_tasks},
          {"n_annotators", s.n_annotators},
          {"annotators_per_text", s.annotators_per_text},
          {"triggers_per_task", s.triggers_per_task},
          {"tasks_per_text_min", s.tasks_per_text_min},
          {"tasks_per_text_max", s.tasks_per_text_max},
          {"p_hit", s.p_hit},
          {"p_noise", s.p_noise},
          {"value_hi", s.value_hi},
          {"filler_vocabulary", s.filler_vocabulary},
          {"filler_words_per_text", s.filler_words_per_text}};
}

Corpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);

  std::vector<TaskSchema> tasks;
  for (std::size_t k = 0; k < spec.n_tasks; ++k) {
    tasks.push_back({fmt::format("task{}", k), fmt::format("synthetic task {}", k), 0, spec.value_hi,
                     spec.value_hi == 1 ? MlKind::binary : MlKind::ordinal});
  }

  const int id_width = static_cast<int>(std::to_string(spec.n_texts).size());
  const int annot_width = static_cast<int>(std::to_string(spec.n_annotators).size());

  std::vector<TextDoc> texts;
  std::vector<AnnotationRecord> records;
  std::vector<std::size_t> task_order(spec.n_tasks);
  std::vector<std::size_t> annot_order(spec.n_annotators);

  for (std::size_t d = 0; d < spec.n_texts; ++d) {
    const std::size_t span = spec.tasks_per_text_max - spec.tasks_per_text_min + 1;
    const std::size_t n_trig = spec.tasks_per_text_min + uniform_below(rng, span);

    // Partial Fisher-Yates picks the triggered tasks.
    std::iota(task_order.begin(), task_order.end(), 0);
    for (std::size_t i = 0; i < n_trig; ++i) {
      std::swap(task_order[i], task_order[i + uniform_below(rng, spec.n_tasks - i)]);
    }
    std::vector<bool> triggered(spec.n_tasks, false);
    for (std::size_t i = 0; i < n_trig; ++i) triggered[task_order[i]] = true;

    std::vector<std::string> words;
    for (std::size_t w = 0; w < spec.filler_words_per_text; ++w) {
      words.push_back(filler_token(uniform_below(rng, spec.filler_vocabulary)));
    }
    for (std::size_t k = 0; k < spec.n_tasks; ++k) {
      if (!triggered[k]) continue;
      const std::size_t n_words = 1 + uniform_below(rng, 2);
      for (std::size_t w = 0; w < n_words; ++w) {
        auto token = trigger_token(k, uniform_below(rng, spec.triggers_per_task));
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(uniform_below(rng, words.size() + 1)),
                     std::move(token));
      }
    }
    std::string content;
    for (const auto& w : words) {
      if (!content.empty()) content.push_back(' ');
      content += w;
    }
    const std::string text_id = fmt::format("t{:0{}}", d, id_width);
    texts.push_back({text_id, std::move(content)});

    std::iota(annot_order.begin(), annot_order.end(), 0);
    for (std::size_t i = 0; i < spec.annotators_per_text; ++i) {
      std::swap(annot_order[i], annot_order[i + uniform_below(rng, spec.n_annotators - i)]);
    }
    std::sort(annot_order.begin(), annot_order.begin() + static_cast<std::ptrdiff_t>(spec.annotators_per_text));
    for (std::size_t i = 0; i < spec.annotators_per_text; ++i) {
      const auto annotator = fmt::format("a{:0{}}", annot_order[i], annot_width);
      for (std::size_t k = 0; k < spec.n_tasks; ++k) {
        const double p = triggered[k] ? spec.p_hit : spec.p_noise;
        int value = 0;
        if (uniform01(rng) < p) value = 1 + static_cast<int>(uniform_below(rng, spec.value_hi));
        records.push_back({text_id, annotator, tasks[k].task_id, value});
      }
    }
  }
  return Corpus::build(std::move(texts), std::move(tasks), records);
}

std::vector<bool> synthetic_triggered_tasks(const Corpus& corpus, std::size_t text) {
  std::vector<bool> out(corpus.n_tasks(), false);
  std::istringstream words(corpus.texts()[text].content);
  std::string w;
  while (words >> w) {
    std::size_t task = 0;
    if (w.size() > 1 && w[0] == 'k' && std::sscanf(w.c_str(), "k%zuq", &task) == 1 && task < out.size()) {
      out[task] = true;
    }
  }
  return out;
}

}  // namespace acqsim
