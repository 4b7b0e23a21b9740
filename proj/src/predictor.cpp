#include "acqsim/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <unordered_map>

#include <fmt/format.h>

#include "acqsim/csv.hpp"
#include "acqsim/errors.hpp"
#include "acqsim/metrics.hpp"
#include "acqsim/seeding.hpp"

namespace acqsim {

namespace {

constexpr const char* kModelFormat = "acqsim.vtl_model";
constexpr int kModelVersion = 1;

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + e^s) without overflow.
double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

double gaussian(std::mt19937_64& rng) {
  // Box-Muller on our own uniform draws, for cross-library determinism.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::string_view to_string(ModelMode m) { return m == ModelMode::single_task ? "single_task" : "multi_task"; }

std::optional<ModelMode> parse_model_mode(std::string_view s) {
  if (s == "single" || s == "single_task") return ModelMode::single_task;
  if (s == "multi" || s == "multi_task") return ModelMode::multi_task;
  return std::nullopt;
}

TrainConfig parse_train_config(const nlohmann::json& j, TrainConfig c) {
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.patience = j.value("patience", c.patience);
    c.class_weighting = j.value("class_weighting", c.class_weighting);
    c.bottleneck = j.value("bottleneck", c.bottleneck);
    c.head_init_std = j.value("head_init_std", c.head_init_std);
  } catch (const nlohmann::json::exception& ex) {
    throw config_error("InvalidConfig", ex.what());
  }
  if (c.epochs == 0 || c.batch_size == 0 || c.bottleneck == 0 || !(c.learning_rate > 0) ||
      !(c.weight_decay >= 0)) {
    throw config_error("InvalidConfig", "train: epochs, batch_size, bottleneck and learning_rate must be positive");
  }
  return c;
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"patience", c.patience},
          {"class_weighting", c.class_weighting},
          {"bottleneck", c.bottleneck},
          {"head_init_std", c.head_init_std}};
}

// ---------------------------------------------------------------------------
// WeightRows

std::ptrdiff_t WeightRows::slot(std::uint32_t feature) const {
  auto it = slot_of_.find(feature);
  return it == slot_of_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

std::size_t WeightRows::ensure(std::uint32_t feature) {
  auto [it, inserted] = slot_of_.emplace(feature, static_cast<std::uint32_t>(keys_.size()));
  if (inserted) {
    keys_.push_back(feature);
    data_.resize(data_.size() + width_, 0.0);
  }
  return it->second;
}

bool WeightRows::same_as(const WeightRows& other) const {
  if (width_ != other.width_ || keys_.size() != other.keys_.size()) return false;
  for (std::size_t s = 0; s < keys_.size(); ++s) {
    const auto o = other.slot(keys_[s]);
    if (o < 0) return false;
    if (!std::equal(row(s), row(s) + width_, other.row(static_cast<std::size_t>(o)))) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// VtlModel

VtlModel::VtlModel(ModelMode mode, std::vector<std::string> task_ids, const TrainConfig& config, std::uint64_t seed)
    : mode_(mode), task_ids_(std::move(task_ids)), seed_(seed) {
  biases_.assign(task_ids_.size(), 0.0);
  if (mode_ == ModelMode::single_task) {
    task_weights_.assign(task_ids_.size(), WeightRows(1));
    return;
  }
  bottleneck_ = config.bottleneck;
  shared_ = WeightRows(bottleneck_);
  // Shared rows start at zero, heads random: the first gradient step on the
  // shared layer is then non-zero and unseen features contribute nothing.
  std::mt19937_64 rng(derive_seed(seed, 0xB0771E));
  const double sd = config.head_init_std;
  head_weights_.resize(task_ids_.size() * bottleneck_);
  for (double& w : head_weights_) w = sd * gaussian(rng);
}

void VtlModel::logits(const FeatureVector& x, std::span<double> out) const {
  const std::size_t H = n_heads();
  if (mode_ == ModelMode::single_task) {
    for (std::size_t h = 0; h < H; ++h) {
      double s = biases_[h];
      const auto& rows = task_weights_[h];
      for (std::size_t j = 0; j < x.size(); ++j) {
        const auto slot = rows.slot(x.index[j]);
        if (slot >= 0) s += x.value[j] * rows.row(static_cast<std::size_t>(slot))[0];
      }
      out[h] = s;
    }
    return;
  }
  const std::size_t K = bottleneck_;
  std::vector<double> z(K, 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto slot = shared_.slot(x.index[j]);
    if (slot < 0) continue;
    const double* w = shared_.row(static_cast<std::size_t>(slot));
    for (std::size_t k = 0; k < K; ++k) z[k] += x.value[j] * w[k];
  }
  for (std::size_t h = 0; h < H; ++h) {
    double s = biases_[h];
    const double* hw = head_weights_.data() + h * K;
    for (std::size_t k = 0; k < K; ++k) s += hw[k] * z[k];
    out[h] = s;
  }
}

std::vector<double> VtlModel::scores(const FeatureVector& x) const {
  std::vector<double> s(n_heads());
  logits(x, s);
  for (double& v : s) v = sigmoid(v);
  return s;
}

void VtlModel::ensure_features(const FeatureVector& x) {
  if (mode_ == ModelMode::single_task) {
    for (auto& rows : task_weights_) {
      for (auto f : x.index) rows.ensure(f);
    }
  } else {
    for (auto f : x.index) shared_.ensure(f);
  }
}

VtlModel VtlModel::zeros_like() const {
  VtlModel z = *this;
  for (auto& rows : z.task_weights_) std::fill(rows.data().begin(), rows.data().end(), 0.0);
  std::fill(z.shared_.data().begin(), z.shared_.data().end(), 0.0);
  std::fill(z.head_weights_.begin(), z.head_weights_.end(), 0.0);
  std::fill(z.biases_.begin(), z.biases_.end(), 0.0);
  return z;
}

std::vector<double*> VtlModel::parameters() {
  std::vector<double*> p;
  for (auto& rows : task_weights_) {
    for (double& v : rows.data()) p.push_back(&v);
  }
  for (double& v : shared_.data()) p.push_back(&v);
  for (double& v : head_weights_) p.push_back(&v);
  for (double& v : biases_) p.push_back(&v);
  return p;
}

std::vector<const double*> VtlModel::parameters() const {
  auto mut = const_cast<VtlModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

bool VtlModel::all_finite() const {
  for (const double* p : parameters()) {
    if (!std::isfinite(*p)) return false;
  }
  return true;
}

bool VtlModel::operator==(const VtlModel& o) const {
  if (mode_ != o.mode_ || task_ids_ != o.task_ids_ || bottleneck_ != o.bottleneck_ || seed_ != o.seed_ ||
      head_weights_ != o.head_weights_ || biases_ != o.biases_ || task_weights_.size() != o.task_weights_.size()) {
    return false;
  }
  for (std::size_t h = 0; h < task_weights_.size(); ++h) {
    if (!task_weights_[h].same_as(o.task_weights_[h])) return false;
  }
  return shared_.same_as(o.shared_);
}

void VtlModel::adopt_head(std::size_t h, VtlModel&& one_task) {
  task_weights_[h] = std::move(one_task.task_weights_[0]);
  biases_[h] = one_task.biases_[0];
}

namespace {

nlohmann::ordered_json rows_to_json(const WeightRows& rows) {
  std::vector<std::size_t> order(rows.size());
  for (std::size_t s = 0; s < order.size(); ++s) order[s] = s;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rows.keys()[a] < rows.keys()[b]; });
  auto out = nlohmann::ordered_json::array();
  for (auto s : order) {
    if (rows.width() == 1) {
      out.push_back({rows.keys()[s], rows.row(s)[0]});
    } else {
      out.push_back({rows.keys()[s], std::vector<double>(rows.row(s), rows.row(s) + rows.width())});
    }
  }
  return out;
}

void rows_from_json(const nlohmann::json& j, WeightRows& rows) {
  for (const auto& e : j) {
    const auto slot = rows.ensure(e.at(0).get<std::uint32_t>());
    if (rows.width() == 1) {
      rows.row(slot)[0] = e.at(1).get<double>();
    } else {
      const auto v = e.at(1).get<std::vector<double>>();
      if (v.size() != rows.width()) throw data_error("InvalidModel", "shared row width mismatch");
      std::copy(v.begin(), v.end(), rows.row(slot));
    }
  }
}

}  // namespace

nlohmann::ordered_json VtlModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["mode"] = to_string(mode_);
  j["hash_bits"] = kTextHashBits;
  j["bottleneck"] = bottleneck_;
  j["seed"] = seed_;
  j["tasks"] = task_ids_;
  auto heads = nlohmann::ordered_json::array();
  for (std::size_t h = 0; h < n_heads(); ++h) {
    nlohmann::ordered_json head;
    head["task"] = task_ids_[h];
    head["bias"] = biases_[h];
    if (mode_ == ModelMode::single_task) {
      head["weights"] = rows_to_json(task_weights_[h]);
    } else {
      head["weights"] = std::vector<double>(head_weights_.begin() + static_cast<std::ptrdiff_t>(h * bottleneck_),
                                            head_weights_.begin() + static_cast<std::ptrdiff_t>((h + 1) * bottleneck_));
    }
    heads.push_back(std::move(head));
  }
  j["heads"] = std::move(heads);
  if (mode_ == ModelMode::multi_task) j["shared"] = rows_to_json(shared_);
  return j;
}

VtlModel VtlModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw data_error("InvalidModel", "unknown format tag");
    if (j.at("version").get<int>() != kModelVersion) throw data_error("InvalidModel", "unsupported version");
    if (j.at("hash_bits").get<unsigned>() != kTextHashBits) throw data_error("InvalidModel", "hash width mismatch");
    auto mode = parse_model_mode(j.at("mode").get<std::string>());
    if (!mode) throw data_error("InvalidModel", "unknown mode");
    VtlModel m;
    m.mode_ = *mode;
    m.task_ids_ = j.at("tasks").get<std::vector<std::string>>();
    m.seed_ = j.at("seed").get<std::uint64_t>();
    m.bottleneck_ = j.at("bottleneck").get<std::size_t>();
    const auto& heads = j.at("heads");
    if (heads.size() != m.task_ids_.size()) throw data_error("InvalidModel", "head count mismatch");
    m.biases_.resize(m.n_heads());
    if (m.mode_ == ModelMode::single_task) {
      m.task_weights_.assign(m.n_heads(), WeightRows(1));
      for (std::size_t h = 0; h < m.n_heads(); ++h) {
        m.biases_[h] = heads[h].at("bias").get<double>();
        rows_from_json(heads[h].at("weights"), m.task_weights_[h]);
      }
    } else {
      m.shared_ = WeightRows(m.bottleneck_);
      m.head_weights_.resize(m.n_heads() * m.bottleneck_);
      for (std::size_t h = 0; h < m.n_heads(); ++h) {
        m.biases_[h] = heads[h].at("bias").get<double>();
        const auto w = heads[h].at("weights").get<std::vector<double>>();
        if (w.size() != m.bottleneck_) throw data_error("InvalidModel", "head width mismatch");
        std::copy(w.begin(), w.end(), m.head_weights_.begin() + static_cast<std::ptrdiff_t>(h * m.bottleneck_));
      }
      rows_from_json(j.at("shared"), m.shared_);
    }
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw data_error("InvalidModel", ex.what());
  }
}

void VtlModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("WriteFailed", path.string());
  out << to_json().dump() << '\n';
}

VtlModel VtlModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("FileNotFound", path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& ex) {
    throw data_error("InvalidModel", ex.what());
  }
}

// ---------------------------------------------------------------------------
// Loss and gradient

class GradientAccess {
 public:
  /// Adds d(loss)/d(params) into `grad` (shaped like `model`) and returns the
  /// batch loss. Slots of touched rows are appended to `touched` (per head in
  /// single mode, index 0 in multi mode); may contain duplicates.
  static double accumulate(const VtlModel& model, const LabeledBatch& batch, const ClassWeights& weights,
                           VtlModel& grad, std::vector<std::vector<std::uint32_t>>* touched) {
    const std::size_t B = batch.rows.size();
    if (B == 0) return 0.0;
    const std::size_t H = model.n_heads();
    const std::size_t K = model.bottleneck_;
    const double inv_b = 1.0 / static_cast<double>(B);
    std::vector<double> s(H), ds(H), z(K), dz(K);
    std::vector<std::ptrdiff_t> slots;
    double loss = 0.0;

    for (std::size_t i = 0; i < B; ++i) {
      const FeatureVector& x = *batch.x[i];
      const std::size_t row = batch.rows[i];
      model.logits(x, s);

      bool any = false;
      for (std::size_t h = 0; h < H; ++h) {
        ds[h] = 0.0;
        const std::size_t col = batch.columns[h];
        if (!batch.labels->defined(row, col)) continue;
        const double y = batch.labels->bit(row, col);
        const double w = weights.empty() ? 1.0 : weights[h][y > 0.5 ? 1 : 0];
        loss += w * (softplus(s[h]) - y * s[h]);
        ds[h] = w * (sigmoid(s[h]) - y) * inv_b;
        any = true;
      }
      if (!any) continue;

      if (model.mode_ == ModelMode::single_task) {
        for (std::size_t h = 0; h < H; ++h) {
          if (ds[h] == 0.0) continue;
          grad.biases_[h] += ds[h];
          const auto& rows = model.task_weights_[h];
          for (std::size_t j = 0; j < x.size(); ++j) {
            const auto slot = rows.slot(x.index[j]);
            if (slot < 0) throw std::logic_error("vtl gradient: feature row not allocated");
            grad.task_weights_[h].row(static_cast<std::size_t>(slot))[0] += ds[h] * x.value[j];
            if (touched) (*touched)[h].push_back(static_cast<std::uint32_t>(slot));
          }
        }
        continue;
      }

      // Multi-task: s_h = b_h + H_h . z,  z = W^T x.
      slots.resize(x.size());
      std::fill(z.begin(), z.end(), 0.0);
      for (std::size_t j = 0; j < x.size(); ++j) {
        slots[j] = model.shared_.slot(x.index[j]);
        if (slots[j] < 0) throw std::logic_error("vtl gradient: feature row not allocated");
        const double* w = model.shared_.row(static_cast<std::size_t>(slots[j]));
        for (std::size_t k = 0; k < K; ++k) z[k] += x.value[j] * w[k];
      }
      std::fill(dz.begin(), dz.end(), 0.0);
      for (std::size_t h = 0; h < H; ++h) {
        if (ds[h] == 0.0) continue;
        grad.biases_[h] += ds[h];
        double* gh = grad.head_weights_.data() + h * K;
        const double* mh = model.head_weights_.data() + h * K;
        for (std::size_t k = 0; k < K; ++k) {
          gh[k] += ds[h] * z[k];
          dz[k] += ds[h] * mh[k];
        }
      }
      for (std::size_t j = 0; j < x.size(); ++j) {
        double* gw = grad.shared_.row(static_cast<std::size_t>(slots[j]));
        for (std::size_t k = 0; k < K; ++k) gw[k] += x.value[j] * dz[k];
        if (touched) (*touched)[0].push_back(static_cast<std::uint32_t>(slots[j]));
      }
    }
    return loss * inv_b;
  }

  /// p <- p (1 - lr wd) - lr g for rows/heads; biases are not decayed.
  /// Zeroes the consumed gradient entries.
  static void apply(VtlModel& model, VtlModel& grad, std::vector<std::vector<std::uint32_t>>& touched, double lr,
                    double wd) {
    const double decay = 1.0 - lr * wd;
    if (model.mode_ == ModelMode::single_task) {
      for (std::size_t h = 0; h < model.n_heads(); ++h) {
        auto& rows = model.task_weights_[h];
        if (decay != 1.0) {
          for (double& w : rows.data()) w *= decay;
        }
        auto& t = touched[h];
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end()), t.end());
        for (auto slot : t) {
          double& g = grad.task_weights_[h].row(slot)[0];
          rows.row(slot)[0] -= lr * g;
          g = 0.0;
        }
        t.clear();
      }
    } else {
      const std::size_t K = model.bottleneck_;
      if (decay != 1.0) {
        for (double& w : model.shared_.data()) w *= decay;
        for (double& w : model.head_weights_) w *= decay;
      }
      auto& t = touched[0];
      std::sort(t.begin(), t.end());
      t.erase(std::unique(t.begin(), t.end()), t.end());
      for (auto slot : t) {
        double* w = model.shared_.row(slot);
        double* g = grad.shared_.row(slot);
        for (std::size_t k = 0; k < K; ++k) {
          w[k] -= lr * g[k];
          g[k] = 0.0;
        }
      }
      t.clear();
      for (std::size_t i = 0; i < model.head_weights_.size(); ++i) {
        model.head_weights_[i] -= lr * grad.head_weights_[i];
        grad.head_weights_[i] = 0.0;
      }
    }
    for (std::size_t h = 0; h < model.n_heads(); ++h) {
      model.biases_[h] -= lr * grad.biases_[h];
      grad.biases_[h] = 0.0;
    }
  }
};

double vtl_loss(const VtlModel& model, const LabeledBatch& batch, const ClassWeights& weights) {
  const std::size_t B = batch.rows.size();
  if (B == 0) return 0.0;
  std::vector<double> s(model.n_heads());
  double loss = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    model.logits(*batch.x[i], s);
    for (std::size_t h = 0; h < model.n_heads(); ++h) {
      const std::size_t col = batch.columns[h];
      if (!batch.labels->defined(batch.rows[i], col)) continue;
      const double y = batch.labels->bit(batch.rows[i], col);
      const double w = weights.empty() ? 1.0 : weights[h][y > 0.5 ? 1 : 0];
      loss += w * (softplus(s[h]) - y * s[h]);
    }
  }
  return loss / static_cast<double>(B);
}

VtlModel vtl_gradient(const VtlModel& model, const LabeledBatch& batch, const ClassWeights& weights) {
  VtlModel g = model.zeros_like();
  GradientAccess::accumulate(model, batch, weights, g, nullptr);
  return g;
}

ClassWeights inverse_frequency_weights(const VtlLabels& labels, std::span<const std::size_t> rows,
                                       std::span<const std::size_t> columns) {
  ClassWeights w;
  for (auto col : columns) {
    double n[2] = {0, 0};
    for (auto r : rows) {
      if (labels.defined(r, col)) n[labels.bit(r, col)] += 1;
    }
    const double total = n[0] + n[1];
    std::array<double, 2> cw{1.0, 1.0};
    for (int c = 0; c < 2; ++c) {
      if (n[c] > 0) cw[static_cast<std::size_t>(c)] = total / (2.0 * n[c]);
    }
    w.push_back(cw);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Training

namespace {

double validation_f1(const VtlModel& model, const TrainingData& data, std::span<const std::size_t> columns) {
  const std::size_t H = model.n_heads();
  std::vector<std::vector<std::uint8_t>> truth(H), pred(H);
  std::vector<double> s(H);
  for (auto r : data.val_rows) {
    model.logits((*data.features)[r], s);
    for (std::size_t h = 0; h < H; ++h) {
      if (!data.labels->defined(r, columns[h])) continue;
      truth[h].push_back(data.labels->bit(r, columns[h]));
      pred[h].push_back(sigmoid(s[h]) >= kDecisionThreshold ? 1 : 0);
    }
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t h = 0; h < H; ++h) {
    if (truth[h].empty()) continue;
    sum += macro_f1(truth[h], pred[h]);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

// Trains every head of `model` on label columns `columns`.
void fit(VtlModel& model, const TrainingData& data, std::span<const std::size_t> columns, const TrainConfig& cfg,
         std::uint64_t seed, std::vector<double>* losses, std::size_t* best_epoch_out) {
  std::vector<std::size_t> rows;
  for (auto r : data.train_rows) {
    bool any = false;
    for (auto c : columns) any = any || data.labels->defined(r, c);
    if (any) rows.push_back(r);
  }
  if (rows.empty()) return;
  for (auto r : rows) model.ensure_features((*data.features)[r]);

  const ClassWeights weights =
      cfg.class_weighting ? inverse_frequency_weights(*data.labels, rows, columns) : ClassWeights{};

  LabeledBatch full;
  full.labels = data.labels;
  full.columns.assign(columns.begin(), columns.end());
  full.rows = rows;
  for (auto r : rows) full.x.push_back(&(*data.features)[r]);

  bool early_stop = false;
  for (auto r : data.val_rows) {
    for (auto c : columns) early_stop = early_stop || data.labels->defined(r, c);
  }
  early_stop = early_stop && cfg.patience > 0;

  std::mt19937_64 rng(seed);
  VtlModel grad = model.zeros_like();
  std::vector<std::vector<std::uint32_t>> touched(std::max<std::size_t>(model.n_heads(), 1));
  VtlModel best = model;
  double best_f1 = -1.0;
  std::size_t best_epoch = 0;
  std::size_t wait = 0;

  LabeledBatch batch;
  batch.labels = data.labels;
  batch.columns = full.columns;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(rows), rng);
    for (std::size_t start = 0; start < rows.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(rows.size(), start + cfg.batch_size);
      batch.rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(start),
                        rows.begin() + static_cast<std::ptrdiff_t>(end));
      batch.x.clear();
      for (auto r : batch.rows) batch.x.push_back(&(*data.features)[r]);
      GradientAccess::accumulate(model, batch, weights, grad, &touched);
      GradientAccess::apply(model, grad, touched, cfg.learning_rate, cfg.weight_decay);
    }
    if (losses) losses->push_back(vtl_loss(model, full, weights));
    if (!early_stop) continue;
    const double f1 = validation_f1(model, data, columns);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = model;
      best_epoch = epoch;
      wait = 0;
    } else if (++wait >= cfg.patience) {
      break;
    }
  }
  if (early_stop) {
    model = std::move(best);
  } else {
    best_epoch = losses ? losses->size() : cfg.epochs;
  }
  if (best_epoch_out) *best_epoch_out = best_epoch;
}

}  // namespace

VtlModel train_vtl(const TrainingData& data, ModelMode mode, const TrainConfig& config, std::uint64_t seed,
                   TrainTrace* trace) {
  if (data.train_rows.empty()) throw data_error("EmptyTrainingSet", "no training texts");
  const VtlLabels& labels = *data.labels;
  bool any_defined = false;
  for (auto r : data.train_rows) any_defined = any_defined || labels.row_has_defined(r);
  if (!any_defined) throw data_error("NoDefinedLabels", "training texts carry no defined VTL labels");

  const std::size_t H = labels.n_tasks();
  VtlModel model(mode, labels.task_ids(), config, seed);
  if (trace) {
    trace->loss_per_head.clear();
    trace->best_epoch_per_head.clear();
  }

  if (mode == ModelMode::multi_task) {
    std::vector<std::size_t> columns(H);
    for (std::size_t h = 0; h < H; ++h) columns[h] = h;
    std::vector<double> losses;
    std::size_t best_epoch = 0;
    fit(model, data, columns, config, derive_seed(seed, 1), trace ? &losses : nullptr, &best_epoch);
    if (trace) {
      trace->loss_per_head.push_back(std::move(losses));
      trace->best_epoch_per_head.push_back(best_epoch);
    }
    return model;
  }

  // Single-task heads are fully independent: own seed stream, own early stop.
  for (std::size_t h = 0; h < H; ++h) {
    VtlModel head(ModelMode::single_task, {labels.task_ids()[h]}, config, derive_seed(seed, 2, h));
    const std::size_t column[1] = {h};
    std::vector<double> losses;
    std::size_t best_epoch = 0;
    fit(head, data, column, config, derive_seed(seed, 3, h), trace ? &losses : nullptr, &best_epoch);
    model.adopt_head(h, std::move(head));
    if (trace) {
      trace->loss_per_head.push_back(std::move(losses));
      trace->best_epoch_per_head.push_back(best_epoch);
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Prediction

PredictionSet predict_vtl(const VtlModel& model, const FeatureCache& features, std::span<const std::size_t> rows) {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (auto r : rows) ids.push_back(features.ids()[r]);
  PredictionSet out(std::move(ids), model.task_ids());
  const std::size_t H = model.n_heads();
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i);
    const auto s = model.scores(features[rows[row]]);
    for (std::size_t h = 0; h < H; ++h) out.set_score(row, h, s[h]);
  }
  return out;
}

PredictionSet predict_vtl_serial(const VtlModel& model, const FeatureCache& features,
                                 std::span<const std::size_t> rows) {
  std::vector<std::string> ids;
  for (auto r : rows) ids.push_back(features.ids()[r]);
  PredictionSet out(std::move(ids), model.task_ids());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto s = model.scores(features[rows[i]]);
    for (std::size_t h = 0; h < model.n_heads(); ++h) out.set_score(i, h, s[h]);
  }
  return out;
}

PredictionSet predict_vtl(const VtlModel& model, const FeatureCache& features) {
  std::vector<std::size_t> rows(features.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return predict_vtl(model, features, rows);
}

PredictionSet predict_vtl(const VtlModel& model, std::span<const TextDoc> texts) {
  return predict_vtl(model, FeatureCache::from_texts(texts));
}

PredictionSet import_predictions(std::istream& in, const std::vector<std::string>& text_ids,
                                 const std::vector<std::string>& task_ids) {
  std::unordered_map<std::string, std::size_t> text_at, task_at;
  for (std::size_t i = 0; i < text_ids.size(); ++i) text_at.emplace(text_ids[i], i);
  for (std::size_t i = 0; i < task_ids.size(); ++i) task_at.emplace(task_ids[i], i);

  PredictionSet out(text_ids, task_ids);
  std::vector<std::uint8_t> seen(out.bits.size(), 0);

  csv::Reader reader(in);
  std::vector<std::string> f;
  if (!reader.next(f)) throw malformed_row(0, "empty predictions file");
  const bool with_score = f.size() == 4 && f[3] == "score";
  if (f.size() < 3 || f[0] != "text_id" || f[1] != "task" || f[2] != "bit" || (f.size() == 4 && !with_score) ||
      f.size() > 4) {
    throw malformed_row(1, "header must be text_id,task,bit[,score]");
  }
  while (reader.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    const auto row = reader.record() - 1;
    if (f.size() != (with_score ? 4u : 3u)) throw malformed_row(row, "wrong field count");
    auto ti = text_at.find(f[0]);
    auto ki = task_at.find(f[1]);
    if (ti == text_at.end() || ki == task_at.end()) {
      throw data_error("UnknownCell", fmt::format("row {}: ({}, {}) is outside the grid", row, f[0], f[1]));
    }
    const std::size_t idx = ti->second * task_ids.size() + ki->second;
    if (seen[idx]) throw data_error("DuplicateCell", fmt::format("({}, {})", f[0], f[1]));
    seen[idx] = 1;
    if (f[2] != "0" && f[2] != "1") throw malformed_row(row, fmt::format("bit must be 0 or 1, got '{}'", f[2]));
    double score = f[2] == "1" ? 1.0 : 0.0;
    if (with_score && !f[3].empty()) {
      try {
        std::size_t used = 0;
        score = std::stod(f[3], &used);
        if (used != f[3].size() || !(score >= 0.0 && score <= 1.0)) throw std::invalid_argument("range");
      } catch (const std::exception&) {
        throw malformed_row(row, fmt::format("score must be a number in [0, 1], got '{}'", f[3]));
      }
    }
    out.set_score(ti->second, ki->second, score);
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw data_error("MissingCell",
                       fmt::format("({}, {})", text_ids[i / task_ids.size()], task_ids[i % task_ids.size()]));
    }
  }
  return out;
}

PredictionSet import_predictions(const std::filesystem::path& path, const std::vector<std::string>& text_ids,
                                 const std::vector<std::string>& task_ids) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("FileNotFound", path.string());
  return import_predictions(in, text_ids, task_ids);
}

void write_predictions_csv(std::ostream& out, const PredictionSet& p) {
  csv::write_row(out, {"text_id", "task", "bit", "score"});
  for (std::size_t d = 0; d < p.n_texts(); ++d) {
    for (std::size_t k = 0; k < p.n_tasks(); ++k) {
      csv::write_row(out, {p.text_ids[d], p.task_ids[k], std::to_string(p.bit(d, k)), fmt::format("{}", p.score(d, k))});
    }
  }
}

}  // namespace acqsim
