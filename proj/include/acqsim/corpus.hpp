#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace acqsim {

enum class MlKind { binary, ordinal };

/// One subjective task (label). Zero is always the "irrelevant" grade.
struct TaskSchema {
  std::string task_id;
  std::string name;
  int lo = 0;
  int hi = 1;
  MlKind ml_kind = MlKind::ordinal;

  bool operator==(const TaskSchema&) const = default;
};

struct TextDoc {
  std::string text_id;
  std::string content;

  bool operator==(const TextDoc&) const = default;
};

/// External (string-keyed) form of a single annotation.
struct AnnotationRecord {
  std::string text_id;
  std::string annotator_id;
  std::string task_id;
  int value = 0;

  auto operator<=>(const AnnotationRecord&) const = default;
};

/// Indexed form stored inside a Corpus.
struct Annotation {
  std::uint32_t text = 0;
  std::uint32_t annotator = 0;
  std::uint32_t task = 0;
  std::int32_t value = 0;
};

struct DatasetProfile {
  std::size_t n_texts = 0;
  std::size_t n_tasks = 0;
  std::size_t n_annotators = 0;
  /// Distinct (text, annotator) pairs carrying at least one label.
  std::size_t n_annotations = 0;
  /// Total annotation records.
  std::size_t n_annotated_labels = 0;
  double avg_annotations_per_text = 0.0;
  double avg_annotations_per_annotator = 0.0;
};

/// Immutable multi-task, multi-annotator corpus. Task order is stable and
/// defines column order everywhere downstream; text order is ingestion order.
class Corpus {
 public:
  Corpus() = default;

  /// Validates and indexes. Throws DataError on any invariant violation
  /// (DuplicateText, DuplicateTask, InvalidSchema, UnknownText, UnknownTask,
  /// DomainViolation, DuplicateTriple, MalformedRow for blank content).
  /// Record errors carry lines[i] as their row (i + 1 when `lines` is empty).
  static Corpus build(std::vector<TextDoc> texts, std::vector<TaskSchema> tasks,
                      std::span<const AnnotationRecord> records, std::span<const std::size_t> lines = {});

  const std::vector<TextDoc>& texts() const noexcept { return texts_; }
  const std::vector<TaskSchema>& tasks() const noexcept { return tasks_; }
  const std::vector<Annotation>& annotations() const noexcept { return annotations_; }
  /// Sorted ascending.
  const std::vector<std::string>& annotator_ids() const noexcept { return annotators_; }

  std::size_t n_texts() const noexcept { return texts_.size(); }
  std::size_t n_tasks() const noexcept { return tasks_.size(); }

  std::optional<std::size_t> text_index(const std::string& id) const;
  std::optional<std::size_t> task_index(const std::string& id) const;

  /// Indices into annotations(), grouped by text, in ingestion order.
  std::span<const std::uint32_t> annotations_of_text(std::size_t text) const;

  AnnotationRecord record(std::size_t i) const;
  std::vector<AnnotationRecord> records() const;

  std::vector<std::string> text_ids() const;
  std::vector<std::string> task_ids() const;

 private:
  std::vector<TextDoc> texts_;
  std::vector<TaskSchema> tasks_;
  std::vector<Annotation> annotations_;
  std::vector<std::string> annotators_;
  std::unordered_map<std::string, std::size_t> text_lookup_;
  std::unordered_map<std::string, std::size_t> task_lookup_;
  std::vector<std::uint32_t> by_text_offsets_;
  std::vector<std::uint32_t> by_text_;
};

/// Set equality on texts, tasks and annotation records (order-insensitive).
bool same_content(const Corpus& a, const Corpus& b);

enum class InputFormat { long_csv, long_jsonl, wide_csv };

std::optional<InputFormat> parse_input_format(std::string_view s);

struct IngestOptions {
  InputFormat format = InputFormat::long_csv;
  /// Validity predicate; records for which it returns false are dropped
  /// before validation (e.g. a dataset-specific "valid annotation" filter).
  std::function<bool(const AnnotationRecord&)> keep;
};

std::vector<TaskSchema> parse_schema(const nlohmann::json& j);
std::vector<TaskSchema> load_schema(const std::filesystem::path& path);
nlohmann::ordered_json schema_to_json(std::span<const TaskSchema> tasks);

/// Texts file: CSV `text_id,content` or JSONL objects with the same keys.
/// The format is picked from the annotation format (jsonl -> jsonl).
std::vector<TextDoc> read_texts(std::istream& in, bool jsonl);

/// `lines`, if given, receives the source row of every record.
std::vector<AnnotationRecord> read_annotations(std::istream& in, InputFormat format,
                                               std::span<const TaskSchema> schema,
                                               std::vector<std::size_t>* lines = nullptr);

Corpus ingest(const std::filesystem::path& annotations, const std::filesystem::path& texts,
              std::span<const TaskSchema> schema, const IngestOptions& options = {});

Corpus ingest(std::istream& annotations, std::istream& texts, std::span<const TaskSchema> schema,
              const IngestOptions& options = {});

void write_long_csv(std::ostream& out, const Corpus& corpus);
void write_texts_csv(std::ostream& out, const Corpus& corpus);

/// Throws EmptyCorpus when there are no texts or no annotations.
DatasetProfile profile(const Corpus& corpus);
nlohmann::ordered_json to_json(const DatasetProfile& p);

/// Desk-scale stand-in for a real annotation campaign: each text mentions
/// trigger words for a few tasks, annotators react to triggers with p_hit and
/// to everything else with p_noise.
struct SyntheticSpec {
  std::size_t n_texts = 200;
  std::size_t n_tasks = 5;
  std::size_t n_annotators = 20;
  std::size_t annotators_per_text = 10;
  std::size_t triggers_per_task = 5;
  std::size_t tasks_per_text_min = 1;
  std::size_t tasks_per_text_max = 2;
  double p_hit = 0.9;
  double p_noise = 0.05;
  int value_hi = 10;
  std::size_t filler_vocabulary = 200;
  std::size_t filler_words_per_text = 12;
};

SyntheticSpec parse_synthetic_spec(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SyntheticSpec& s);

/// Pure function of (spec, seed). Throws ConfigError InvalidSpec.
Corpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Tasks a synthetic text was built to trigger, recovered from its tokens.
std::vector<bool> synthetic_triggered_tasks(const Corpus& corpus, std::size_t text);

}  // namespace acqsim
