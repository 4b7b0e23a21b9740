#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "acqsim/errors.hpp"
#include "acqsim/features.hpp"
#include "acqsim/metrics.hpp"
#include "acqsim/predictor.hpp"
#include "acqsim/seeding.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace acqsim;
using testing::small_instance;

namespace {

// Two texts, one task: "xx..." is valuable and "yy..." is not.
struct Separable {
  Corpus corpus;
  FeatureCache features;
  VtlLabels labels;
};

Separable separable() {
  Separable s;
  std::vector<TextDoc> texts{{"pos", "xx xx xx xx"}, {"neg", "yy yy yy"}};
  std::vector<AnnotationRecord> r{{"pos", "a", "task0", 5}, {"pos", "b", "task0", 3}, {"neg", "a", "task0", 0},
                                  {"neg", "b", "task0", 0}};
  s.corpus = Corpus::build(texts, testing::ordinal_tasks(1), r);
  s.features = FeatureCache(s.corpus);
  s.labels = binarize(compute_fractions(s.corpus), 0.5);
  return s;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_SUITE("predictor") {

TEST_CASE("features") {
  CHECK(tokenize("Hello, WORLD! zażółć 42") == std::vector<std::string>{"hello", "world", "zażółć", "42"});
  const auto f = featurize("a b a");
  REQUIRE(f.size() == 2);
  double norm = 0.0;
  for (double v : f.value) norm += v * v;
  CHECK(norm == doctest::Approx(1.0));
  CHECK(std::is_sorted(f.index.begin(), f.index.end()));
  CHECK(featurize("").empty());
  // FNV-1a 64 reference vectors.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);

  const auto c = generate_synthetic({}, 4);
  const FeatureCache par(c);
  const auto ser = FeatureCache::build_serial(c);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) CHECK(par[i] == ser[i]);
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    CAPTURE(rep);
    CHECK(testing::random_gradient_error(rng, rep) <= 1e-5);
  }
}

TEST_CASE("gradient needs allocated rows") {
  std::mt19937_64 rng(1);
  auto inst = small_instance(rng, 3, 1);
  VtlModel model(ModelMode::single_task, inst.labels.task_ids(), {}, 1);
  CHECK_THROWS_AS(vtl_gradient(model, inst.batch), std::logic_error);
}

TEST_CASE("separable pair is learned within 50 epochs") {
  auto s = separable();
  for (auto mode : {ModelMode::single_task, ModelMode::multi_task}) {
    CAPTURE(to_string(mode));
    TrainConfig cfg;
    cfg.epochs = 50;
    TrainingData data{&s.features, &s.labels, {0, 1}, {}};
    TrainTrace trace;
    const auto model = train_vtl(data, mode, cfg, 5, &trace);
    const auto pred = predict_vtl(model, s.features);
    CHECK(pred.bit(0, 0) == 1);
    CHECK(pred.bit(1, 0) == 0);
    const auto& loss = trace.loss_per_head[0];
    REQUIRE(loss.size() == 50);
    // Untrained, both modes score 0.5 everywhere: loss log 2.
    CHECK(loss.front() < std::log(2.0));
    CHECK(loss.back() < 0.05);
    CHECK(model.all_finite());
  }
}

TEST_CASE("empty text scores sigmoid(bias)") {
  auto s = separable();
  TrainingData data{&s.features, &s.labels, {0, 1}, {}};
  for (auto mode : {ModelMode::single_task, ModelMode::multi_task}) {
    const auto model = train_vtl(data, mode, {}, 5);
    const double bias = model.to_json()["heads"][0]["bias"].get<double>();
    CHECK(model.scores(featurize(""))[0] == doctest::Approx(sigmoid(bias)).epsilon(1e-15));
  }
}

TEST_CASE("training is deterministic and seed-sensitive") {
  const auto c = generate_synthetic({}, 2);
  const FeatureCache f(c);
  const auto l = binarize(compute_fractions(c), 0.25);
  std::vector<std::size_t> train(150), val(50);
  std::iota(train.begin(), train.end(), 0);
  std::iota(val.begin(), val.end(), 150);
  TrainingData data{&f, &l, train, val};
  for (auto mode : {ModelMode::single_task, ModelMode::multi_task}) {
    const auto a = train_vtl(data, mode, {}, 1), b = train_vtl(data, mode, {}, 1), d = train_vtl(data, mode, {}, 2);
    CHECK(a == b);
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK_FALSE(a == d);
  }
}

TEST_CASE("single-task heads are independent") {
  const auto c = generate_synthetic({}, 3);
  const FeatureCache f(c);
  const auto full = binarize(compute_fractions(c), 0.25);
  auto without2 = full;
  for (std::size_t d = 0; d < c.n_texts(); ++d) without2.clear(d, 2);
  std::vector<std::size_t> train(160), val(40);
  std::iota(train.begin(), train.end(), 0);
  std::iota(val.begin(), val.end(), 160);
  const auto a = train_vtl({&f, &full, train, val}, ModelMode::single_task, {}, 9);
  const auto b = train_vtl({&f, &without2, train, val}, ModelMode::single_task, {}, 9);
  REQUIRE(a.n_heads() == 5);
  const auto ja = a.to_json(), jb = b.to_json();
  for (std::size_t h = 0; h < 5; ++h) {
    CAPTURE(h);
    if (h == 2) {
      CHECK(ja["heads"][h] != jb["heads"][h]);
    } else {
      CHECK(ja["heads"][h] == jb["heads"][h]);
    }
  }
}

TEST_CASE("training errors") {
  auto s = separable();
  CHECK_THROWS_AS(train_vtl({&s.features, &s.labels, {}, {}}, ModelMode::multi_task, {}, 1), Error);
  VtlLabels none(s.labels.text_ids(), s.labels.task_ids(), Threshold::parse("0.5"));
  try {
    train_vtl({&s.features, &none, {0, 1}, {}}, ModelMode::multi_task, {}, 1);
    FAIL("expected NoDefinedLabels");
  } catch (const Error& e) {
    CHECK(e.kind() == "NoDefinedLabels");
  }
}

TEST_CASE("prediction is a pointwise map") {
  const auto c = generate_synthetic({}, 5);
  const FeatureCache f(c);
  const auto l = binarize(compute_fractions(c), 0.25);
  std::vector<std::size_t> train(120), rows(c.n_texts());
  std::iota(train.begin(), train.end(), 0);
  std::iota(rows.begin(), rows.end(), 0);
  const auto model = train_vtl({&f, &l, train, {}}, ModelMode::multi_task, {}, 4);
  const auto base = predict_vtl(model, f, rows);
  CHECK(base == predict_vtl_serial(model, f, rows));
  for (std::size_t i = 0; i < base.bits.size(); ++i) CHECK(base.bits[i] == (base.scores[i] >= 0.5 ? 1 : 0));

  std::mt19937_64 rng(8);
  auto perm = rows;
  shuffle(std::span<std::size_t>(perm), rng);
  const auto permuted = predict_vtl(model, f, perm);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t k = 0; k < c.n_tasks(); ++k) CHECK(permuted.score(i, k) == base.score(perm[i], k));
  }
  CHECK(predict_vtl(model, c.texts()) == base);
}

TEST_CASE("model json round trip is exact") {
  const auto c = generate_synthetic({}, 6);
  const FeatureCache f(c);
  const auto l = binarize(compute_fractions(c), 0.25);
  std::vector<std::size_t> train(100);
  std::iota(train.begin(), train.end(), 0);
  testing::TempDir dir("model");
  for (auto mode : {ModelMode::single_task, ModelMode::multi_task}) {
    const auto model = train_vtl({&f, &l, train, {}}, mode, {}, 4);
    model.save(dir / "m.json");
    const auto back = VtlModel::load(dir / "m.json");
    CHECK(back == model);
    CHECK(predict_vtl(back, f) == predict_vtl(model, f));
  }
  testing::write_file(dir / "bad.json", R"({"format":"something else"})");
  CHECK_THROWS_AS(VtlModel::load(dir / "bad.json"), Error);
}

TEST_CASE("one task: multi and single mode agree on held-out bits") {
  SyntheticSpec spec;
  spec.n_tasks = 1;
  spec.tasks_per_text_min = 0;
  spec.tasks_per_text_max = 1;
  spec.n_texts = 300;
  const auto c = generate_synthetic(spec, 12);
  const FeatureCache f(c);
  const auto l = binarize(compute_fractions(c), 0.25);
  std::vector<std::size_t> train(200), val(40), test(60);
  std::iota(train.begin(), train.end(), 0);
  std::iota(val.begin(), val.end(), 200);
  std::iota(test.begin(), test.end(), 240);
  const TrainingData data{&f, &l, train, val};
  // Compare converged models; early stopping on 40 rows would add its own noise.
  TrainConfig cfg;
  cfg.patience = 0;
  const auto a = predict_vtl(train_vtl(data, ModelMode::single_task, cfg, 3), f, test);
  const auto b = predict_vtl(train_vtl(data, ModelMode::multi_task, cfg, 3), f, test);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < test.size(); ++i) agree += a.bit(i, 0) == b.bit(i, 0);
  CHECK(static_cast<double>(agree) / static_cast<double>(test.size()) >= 0.95);
}

TEST_CASE("class weighting is off by default and inverse-frequency when on") {
  std::vector<std::string> ids{"a", "b", "c", "d"};
  VtlLabels l(ids, {"k"}, Threshold::parse("0.5"));
  l.set(0, 0, 1);
  l.set(1, 0, 0);
  l.set(2, 0, 0);
  l.set(3, 0, 0);
  const std::size_t rows[] = {0, 1, 2, 3}, cols[] = {0};
  const auto w = inverse_frequency_weights(l, rows, cols);
  REQUIRE(w.size() == 1);
  CHECK(w[0][0] == doctest::Approx(4.0 / 6.0));
  CHECK(w[0][1] == doctest::Approx(2.0));
  CHECK_FALSE(TrainConfig{}.class_weighting);
}

TEST_CASE("import predictions") {
  const std::vector<std::string> texts{"t1", "t2"}, tasks{"joy", "anger"};
  auto parse = [&](const std::string& s) {
    std::istringstream in(s);
    return import_predictions(in, texts, tasks);
  };
  auto kind_of = [&](const std::string& s) {
    try {
      parse(s);
    } catch (const Error& e) {
      return e.kind();
    }
    return std::string("none");
  };
  const auto p = parse("text_id,task,bit\nt1,joy,1\nt1,anger,0\nt2,joy,0\nt2,anger,1\n");
  CHECK(p.bit(0, 0) == 1);
  CHECK(p.bit(1, 1) == 1);
  CHECK(p.score(0, 1) == 0.0);

  const auto scored = parse("text_id,task,bit,score\nt2,anger,0,0.73\nt1,joy,1,0.2\nt1,anger,0,0\nt2,joy,0,0.5\n");
  CHECK(scored.bit(1, 1) == 1);
  CHECK(scored.bit(0, 0) == 0);
  CHECK(scored.bit(1, 0) == 1);
  CHECK(scored.score(1, 1) == 0.73);

  CHECK(kind_of("text_id,task,bit\nt1,joy,1\nt1,anger,0\nt2,joy,0\n") == "MissingCell");
  CHECK(kind_of("text_id,task,bit\nt1,joy,1\nt1,joy,1\nt1,anger,0\nt2,joy,0\nt2,anger,1\n") == "DuplicateCell");
  CHECK(kind_of("text_id,task,bit\nt1,joy,1\nt1,anger,0\nt2,joy,0\nt2,anger,1\nt3,joy,1\n") == "UnknownCell");
  CHECK(kind_of("text_id,task,bit\nt1,joy,2\n") == "MalformedRow");
  CHECK(kind_of("id,task\n") == "MalformedRow");

  std::ostringstream out;
  write_predictions_csv(out, p);
  std::istringstream back(out.str());
  CHECK(import_predictions(back, texts, tasks) == p);
}

}  // TEST_SUITE
