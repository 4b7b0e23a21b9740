#include "acqsim/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <tuple>
#include <unordered_set>

#include <fmt/format.h>

#include "acqsim/csv.hpp"
#include "acqsim/errors.hpp"

namespace acqsim {

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

bool blank_record(const std::vector<std::string>& fields) {
  return fields.size() == 1 && fields[0].empty();
}

std::optional<int> parse_int(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::string json_id(const nlohmann::json& v, std::size_t line, const char* key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw malformed_row(line, fmt::format("field '{}' must be a string or integer", key));
}

std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw data_error("FileNotFound", p.string());
  return in;
}

}  // namespace

Corpus Corpus::build(std::vector<TextDoc> texts, std::vector<TaskSchema> tasks,
                     std::span<const AnnotationRecord> records, std::span<const std::size_t> lines) {
  Corpus c;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    if (t.task_id.empty()) throw data_error("InvalidSchema", "empty task_id");
    if (t.lo != 0) throw data_error("InvalidSchema", fmt::format("task '{}': lo must be 0", t.task_id));
    if (t.hi < 1) throw data_error("InvalidSchema", fmt::format("task '{}': hi must be >= 1", t.task_id));
    if (!c.task_lookup_.emplace(t.task_id, i).second) {
      throw data_error("DuplicateTask", t.task_id);
    }
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].text_id.empty()) throw malformed_row(i + 1, "empty text_id");
    if (blank(texts[i].content)) {
      throw malformed_row(i + 1, fmt::format("text '{}' has blank content", texts[i].text_id));
    }
    if (!c.text_lookup_.emplace(texts[i].text_id, i).second) {
      throw data_error("DuplicateText", texts[i].text_id);
    }
  }
  c.texts_ = std::move(texts);
  c.tasks_ = std::move(tasks);

  std::set<std::string> annotators;
  for (const auto& r : records) annotators.insert(r.annotator_id);
  c.annotators_.assign(annotators.begin(), annotators.end());

  std::unordered_map<std::string_view, std::uint32_t> annot_lookup;
  for (std::size_t i = 0; i < c.annotators_.size(); ++i) {
    annot_lookup.emplace(c.annotators_[i], static_cast<std::uint32_t>(i));
  }

  struct TripleHash {
    std::size_t operator()(const std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>& t) const {
      auto [a, b, d] = t;
      return (std::size_t(a) * 0x9E3779B97F4A7C15ULL) ^ (std::size_t(b) * 0xC2B2AE3D27D4EB4FULL) ^ d;
    }
  };
  std::unordered_set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, TripleHash> seen;
  seen.reserve(records.size());
  c.annotations_.reserve(records.size());

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::size_t row = lines.empty() ? i + 1 : lines[i];
    auto fail = [&](const char* kind, const std::string& detail) {
      return Error(ErrorClass::data, kind, fmt::format("row {}: {}", row, detail), row);
    };
    auto ti = c.text_lookup_.find(r.text_id);
    if (ti == c.text_lookup_.end()) throw fail("UnknownText", r.text_id);
    auto ki = c.task_lookup_.find(r.task_id);
    if (ki == c.task_lookup_.end()) throw fail("UnknownTask", r.task_id);
    const auto& task = c.tasks_[ki->second];
    if (r.value < task.lo || r.value > task.hi) {
      throw fail("DomainViolation",
                 fmt::format("task '{}' value {} outside [{}, {}]", task.task_id, r.value, task.lo, task.hi));
    }
    Annotation a{static_cast<std::uint32_t>(ti->second), annot_lookup.at(r.annotator_id),
                 static_cast<std::uint32_t>(ki->second), r.value};
    if (!seen.emplace(a.text, a.annotator, a.task).second) {
      throw fail("DuplicateTriple", fmt::format("({}, {}, {})", r.text_id, r.annotator_id, r.task_id));
    }
    c.annotations_.push_back(a);
  }

  // Counting sort of annotation indices by text, stable in ingestion order.
  c.by_text_offsets_.assign(c.texts_.size() + 1, 0);
  for (const auto& a : c.annotations_) ++c.by_text_offsets_[a.text + 1];
  for (std::size_t i = 1; i < c.by_text_offsets_.size(); ++i) {
    c.by_text_offsets_[i] += c.by_text_offsets_[i - 1];
  }
  c.by_text_.resize(c.annotations_.size());
  std::vector<std::uint32_t> cursor(c.by_text_offsets_.begin(), c.by_text_offsets_.end() - 1);
  for (std::size_t i = 0; i < c.annotations_.size(); ++i) {
    c.by_text_[cursor[c.annotations_[i].text]++] = static_cast<std::uint32_t>(i);
  }
  return c;
}

std::optional<std::size_t> Corpus::text_index(const std::string& id) const {
  auto it = text_lookup_.find(id);
  if (it == text_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Corpus::task_index(const std::string& id) const {
  auto it = task_lookup_.find(id);
  if (it == task_lookup_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::uint32_t> Corpus::annotations_of_text(std::size_t text) const {
  if (by_text_offsets_.empty()) return {};
  return std::span<const std::uint32_t>(by_text_)
      .subspan(by_text_offsets_[text], by_text_offsets_[text + 1] - by_text_offsets_[text]);
}

AnnotationRecord Corpus::record(std::size_t i) const {
  const auto& a = annotations_[i];
  return {texts_[a.text].text_id, annotators_[a.annotator], tasks_[a.task].task_id, a.value};
}

std::vector<AnnotationRecord> Corpus::records() const {
  std::vector<AnnotationRecord> out;
  out.reserve(annotations_.size());
  for (std::size_t i = 0; i < annotations_.size(); ++i) out.push_back(record(i));
  return out;
}

std::vector<std::string> Corpus::text_ids() const {
  std::vector<std::string> ids;
  ids.reserve(texts_.size());
  for (const auto& t : texts_) ids.push_back(t.text_id);
  return ids;
}

std::vector<std::string> Corpus::task_ids() const {
  std::vector<std::string> ids;
  ids.reserve(tasks_.size());
  for (const auto& t : tasks_) ids.push_back(t.task_id);
  return ids;
}

bool same_content(const Corpus& a, const Corpus& b) {
  if (a.tasks() != b.tasks()) return false;
  auto texts_a = a.texts();
  auto texts_b = b.texts();
  auto by_id = [](const TextDoc& x, const TextDoc& y) { return x.text_id < y.text_id; };
  std::sort(texts_a.begin(), texts_a.end(), by_id);
  std::sort(texts_b.begin(), texts_b.end(), by_id);
  if (texts_a != texts_b) return false;
  auto ra = a.records();
  auto rb = b.records();
  std::sort(ra.begin(), ra.end());
  std::sort(rb.begin(), rb.end());
  return ra == rb;
}

std::optional<InputFormat> parse_input_format(std::string_view s) {
  if (s == "long_csv") return InputFormat::long_csv;
  if (s == "long_jsonl") return InputFormat::long_jsonl;
  if (s == "wide_csv") return InputFormat::wide_csv;
  return std::nullopt;
}

std::vector<TaskSchema> parse_schema(const nlohmann::json& j) {
  if (!j.is_array()) throw data_error("InvalidSchema", "schema must be a JSON list");
  std::vector<TaskSchema> out;
  for (const auto& e : j) {
    try {
      TaskSchema t;
      t.task_id = e.at("task_id").get<std::string>();
      t.name = e.value("name", t.task_id);
      t.lo = e.value("lo", 0);
      t.hi = e.at("hi").get<int>();
      const auto kind = e.value("ml_kind", std::string(t.hi == 1 ? "binary" : "ordinal"));
      if (kind == "binary") {
        t.ml_kind = MlKind::binary;
      } else if (kind == "ordinal") {
        t.ml_kind = MlKind::ordinal;
      } else {
        throw data_error("InvalidSchema", "ml_kind must be binary or ordinal");
      }
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& ex) {
      throw data_error("InvalidSchema", ex.what());
    }
  }
  return out;
}

std::vector<TaskSchema> load_schema(const std::filesystem::path& path) {
  auto in = open_input(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw data_error("InvalidSchema", ex.what());
  }
  return parse_schema(j);
}

nlohmann::ordered_json schema_to_json(std::span<const TaskSchema> tasks) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& t : tasks) {
    j.push_back({{"task_id", t.task_id},
                 {"name", t.name},
                 {"lo", t.lo},
                 {"hi", t.hi},
                 {"ml_kind", t.ml_kind == MlKind::binary ? "binary" : "ordinal"}});
  }
  return j;
}

std::vector<TextDoc> read_texts(std::istream& in, bool jsonl) {
  std::vector<TextDoc> out;
  if (jsonl) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (blank(line)) continue;
      try {
        auto j = nlohmann::json::parse(line);
        out.push_back({json_id(j.at("text_id"), n, "text_id"), j.at("content").get<std::string>()});
      } catch (const nlohmann::json::exception& ex) {
        throw malformed_row(n, ex.what());
      }
    }
    if (n == 0) throw malformed_row(0, "empty texts file");
    return out;
  }
  csv::Reader reader(in);
  std::vector<std::string> f;
  if (!reader.next(f)) throw malformed_row(0, "empty texts file");
  if (f.size() < 2 || f[0] != "text_id" || f[1] != "content") {
    throw malformed_row(1, "texts header must be text_id,content");
  }
  while (reader.next(f)) {
    if (blank_record(f)) continue;
    if (f.size() != 2) throw malformed_row(reader.record(), "expected 2 fields");
    out.push_back({std::move(f[0]), std::move(f[1])});
  }
  return out;
}

std::vector<AnnotationRecord> read_annotations(std::istream& in, InputFormat format,
                                               std::span<const TaskSchema> schema, std::vector<std::size_t>* lines) {
  std::vector<AnnotationRecord> out;
  auto at = [&](std::size_t row) {
    if (lines) lines->push_back(row);
  };
  if (format == InputFormat::long_jsonl) {
    std::string line;
    std::size_t n = 0;
    std::size_t nonblank = 0;
    while (std::getline(in, line)) {
      ++n;
      if (blank(line)) continue;
      ++nonblank;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& ex) {
        throw malformed_row(n, ex.what());
      }
      if (!j.is_object()) throw malformed_row(n, "expected a JSON object");
      for (const char* key : {"text_id", "annotator_id", "task", "value"}) {
        if (!j.contains(key)) throw malformed_row(n, fmt::format("missing key '{}'", key));
      }
      const auto& v = j["value"];
      if (!v.is_number_integer()) {
        throw malformed_row(n, "value must be an integer");
      }
      const auto& task = j["task"];
      if (!task.is_string()) throw malformed_row(n, "task must be a string");
      out.push_back({json_id(j["text_id"], n, "text_id"), json_id(j["annotator_id"], n, "annotator_id"),
                     task.get<std::string>(), v.get<int>()});
      at(n);
    }
    if (nonblank == 0) throw malformed_row(0, "empty annotations file");
    return out;
  }

  csv::Reader reader(in);
  std::vector<std::string> f;
  if (!reader.next(f)) throw malformed_row(0, "empty annotations file");

  if (format == InputFormat::long_csv) {
    if (f != std::vector<std::string>{"text_id", "annotator_id", "task", "value"}) {
      throw malformed_row(1, "header must be text_id,annotator_id,task,value");
    }
    while (reader.next(f)) {
      if (blank_record(f)) continue;
      const auto row = reader.record() - 1;
      if (f.size() != 4) throw malformed_row(row, fmt::format("expected 4 fields, got {}", f.size()));
      auto v = parse_int(f[3]);
      if (!v) throw malformed_row(row, fmt::format("non-integer value '{}'", f[3]));
      out.push_back({std::move(f[0]), std::move(f[1]), std::move(f[2]), *v});
      at(row);
    }
    return out;
  }

  // wide_csv: text_id,annotator_id,<task columns...>; empty cell = no record.
  if (f.size() < 3 || f[0] != "text_id" || f[1] != "annotator_id") {
    throw malformed_row(1, "wide header must start with text_id,annotator_id");
  }
  std::vector<std::string> columns(f.begin() + 2, f.end());
  for (const auto& col : columns) {
    bool known = std::any_of(schema.begin(), schema.end(),
                             [&](const TaskSchema& t) { return t.task_id == col; });
    if (!known) throw data_error("UnknownTask", col);
  }
  while (reader.next(f)) {
    if (blank_record(f)) continue;
    const auto row = reader.record() - 1;
    if (f.size() != columns.size() + 2) {
      throw malformed_row(row, fmt::format("expected {} fields, got {}", columns.size() + 2, f.size()));
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& cell = f[c + 2];
      if (blank(cell)) continue;
      auto v = parse_int(cell);
      if (!v) throw malformed_row(row, fmt::format("non-integer value '{}'", cell));
      out.push_back({f[0], f[1], columns[c], *v});
      at(row);
    }
  }
  return out;
}

Corpus ingest(std::istream& annotations, std::istream& texts, std::span<const TaskSchema> schema,
              const IngestOptions& options) {
  std::vector<std::size_t> lines;
  auto records = read_annotations(annotations, options.format, schema, &lines);
  if (options.keep) {
    std::size_t w = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!options.keep(records[i])) continue;
      if (w != i) records[w] = std::move(records[i]);
      lines[w++] = lines[i];
    }
    records.resize(w);
    lines.resize(w);
  }
  auto docs = read_texts(texts, options.format == InputFormat::long_jsonl);
  return Corpus::build(std::move(docs), std::vector<TaskSchema>(schema.begin(), schema.end()), records, lines);
}

Corpus ingest(const std::filesystem::path& annotations, const std::filesystem::path& texts,
              std::span<const TaskSchema> schema, const IngestOptions& options) {
  auto a = open_input(annotations);
  auto t = open_input(texts);
  return ingest(a, t, schema, options);
}

void write_long_csv(std::ostream& out, const Corpus& corpus) {
  csv::write_row(out, {"text_id", "annotator_id", "task", "value"});
  for (std::size_t i = 0; i < corpus.annotations().size(); ++i) {
    auto r = corpus.record(i);
    csv::write_row(out, {r.text_id, r.annotator_id, r.task_id, std::to_string(r.value)});
  }
}

void write_texts_csv(std::ostream& out, const Corpus& corpus) {
  csv::write_row(out, {"text_id", "content"});
  for (const auto& t : corpus.texts()) csv::write_row(out, {t.text_id, t.content});
}

DatasetProfile profile(const Corpus& corpus) {
  if (corpus.n_texts() == 0 || corpus.annotations().empty()) {
    throw data_error("EmptyCorpus", "corpus has no texts or no annotations");
  }
  DatasetProfile p;
  p.n_texts = corpus.n_texts();
  p.n_tasks = corpus.n_tasks();
  p.n_annotators = corpus.annotator_ids().size();
  p.n_annotated_labels = corpus.annotations().size();

  std::vector<std::uint32_t> annotators;
  for (std::size_t t = 0; t < corpus.n_texts(); ++t) {
    annotators.clear();
    for (auto i : corpus.annotations_of_text(t)) annotators.push_back(corpus.annotations()[i].annotator);
    std::sort(annotators.begin(), annotators.end());
    p.n_annotations += static_cast<std::size_t>(
        std::unique(annotators.begin(), annotators.end()) - annotators.begin());
  }
  p.avg_annotations_per_text = static_cast<double>(p.n_annotations) / static_cast<double>(p.n_texts);
  p.avg_annotations_per_annotator =
      static_cast<double>(p.n_annotations) / static_cast<double>(p.n_annotators);
  return p;
}

nlohmann::ordered_json to_json(const DatasetProfile& p) {
  nlohmann::ordered_json j;
  j["n_texts"] = p.n_texts;
  j["n_tasks"] = p.n_tasks;
  j["n_annotators"] = p.n_annotators;
  j["n_annotations"] = p.n_annotations;
  j["n_annotated_labels"] = p.n_annotated_labels;
  j["avg_annotations_per_text"] = p.avg_annotations_per_text;
  j["avg_annotations_per_annotator"] = p.avg_annotations_per_annotator;
  return j;
}

}  // namespace acqsim
