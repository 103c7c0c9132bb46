#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>

#include <cautious/cautious.hpp>

#include "test_support.hpp"

namespace cautious {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::IoFailure;
}

// 1-D classifier whose class c scores -|x - centre_c| (k-NN with one point),
// with hand-set thresholds.
ConformalClassifier manual_classifier(const std::vector<std::tuple<ClassLabel, double, double>>& classes) {
  ConformalClassifier::ClassMap map;
  for (const auto& [label, centre, threshold] : classes) {
    auto m = std::make_shared<ClassModel>();
    m->label = label;
    m->density = std::make_shared<const DensityModel>(KnnModel(PointMatrix(1, {centre}), 1));
    m->threshold = threshold;
    m->n_fit = 1;
    map.emplace(label, std::move(m));
  }
  TrainConfig config;
  config.estimator = EstimatorKind::Knn;
  return ConformalClassifier(1, config, std::move(map));
}

// ---------------------------------------------------------------------------
// calibrate_threshold
// ---------------------------------------------------------------------------

TEST(CalibrateThreshold, EmpiricalExample) {
  const std::vector<double> s{0.5, 0.1, 0.4, 0.2, 0.3};
  EXPECT_EQ(calibrate_threshold(s, 0.2, QuantileMode::Empirical), 0.2);
}

TEST(CalibrateThreshold, FiniteSampleExample) {
  const std::vector<double> s{0.1, 0.2, 0.3, 0.4, 0.5};
  EXPECT_EQ(calibrate_threshold(s, 0.2, QuantileMode::FiniteSample), 0.1);
}

TEST(CalibrateThreshold, TinyAlphaCoversEverything) {
  const std::vector<double> s{3.0, -1.0, 2.0, 7.0};
  EXPECT_EQ(calibrate_threshold(s, 1e-9, QuantileMode::Empirical), -1.0);
  EXPECT_EQ(calibrate_threshold(s, 1e-9, QuantileMode::FiniteSample), -kInf);
}

TEST(CalibrateThreshold, Errors) {
  EXPECT_EQ(code_of([] { calibrate_threshold({}, 0.1, QuantileMode::Empirical); }), ErrorCode::InsufficientData);
  const std::vector<double> s{1.0};
  for (double a : {0.0, 1.0, -0.5, 1.5, std::nan("")}) {
    EXPECT_EQ(code_of([&] { calibrate_threshold(s, a, QuantileMode::FiniteSample); }), ErrorCode::InvalidAlpha);
  }
}

TEST(CalibrateThreshold, EmpiricalCoverageIdentity) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> n_dist(1, 300);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = n_dist(rng);
    std::vector<double> s(n);
    for (auto& x : s) x = u(rng);
    const double alpha = std::clamp(u(rng), 1e-6, 1.0 - 1e-6);
    const double t = calibrate_threshold(s, alpha, QuantileMode::Empirical);
    const double nd = static_cast<double>(n);
    const auto at_or_above = std::count_if(s.begin(), s.end(), [t](double x) { return x >= t; });
    const auto above = std::count_if(s.begin(), s.end(), [t](double x) { return x > t; });
    // t attains the bound; anything larger loses the point(s) at t.
    EXPECT_GE(static_cast<double>(at_or_above) / nd, 1.0 - alpha) << "n=" << n << " alpha=" << alpha;
    EXPECT_LT(static_cast<double>(above) / nd, 1.0 - alpha) << "n=" << n << " alpha=" << alpha;
  }
}

TEST(CalibrateThreshold, NestedInAlpha) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> s(137);
  for (auto& x : s) x = g(rng);
  for (auto mode : {QuantileMode::Empirical, QuantileMode::FiniteSample}) {
    double prev = -kInf;
    for (int i = 1; i < 100; ++i) {
      const double t = calibrate_threshold(s, 0.01 * i, mode);
      EXPECT_LE(prev, t);
      prev = t;
    }
  }
}

// ---------------------------------------------------------------------------
// conformal_pvalue
// ---------------------------------------------------------------------------

TEST(ConformalPvalue, Examples) {
  const std::vector<double> cal{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(conformal_pvalue(cal, 2.5), 0.6);
  EXPECT_DOUBLE_EQ(conformal_pvalue(cal, 10.0), 1.0);
  EXPECT_DOUBLE_EQ(conformal_pvalue(cal, -10.0), 0.2);
  EXPECT_EQ(code_of([] { conformal_pvalue({}, 1.0); }), ErrorCode::InsufficientData);
}

TEST(ConformalPvalue, AgreesWithFiniteSampleThreshold) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (std::size_t n : {1u, 4u, 19u, 99u, 250u}) {
    std::vector<double> cal(n);
    for (auto& x : cal) x = u(rng);
    std::vector<double> probes(300);
    for (auto& x : probes) x = u(rng);
    for (int i = 1; i <= 99; ++i) {
      const double alpha = 0.01 * i;
      const double t = calibrate_threshold(cal, alpha, QuantileMode::FiniteSample);
      for (double p : probes) {
        EXPECT_EQ(conformal_pvalue(cal, p) > alpha, p >= t) << "n=" << n << " alpha=" << alpha;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// train / predict_set
// ---------------------------------------------------------------------------

TEST(Train, SeparatedClassesHitNominalCoverage) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = synth_mixture(testing::two_separated_classes(1000, 100 + seed));
    const auto eval = synth_mixture(testing::two_separated_classes(4000, 900 + seed));
    TrainConfig config;
    config.seed = seed;
    const auto model = train(data, config);
    const auto report = evaluate(model, eval);
    EXPECT_GE(report.coverage, 0.86) << "seed " << seed;
    EXPECT_LE(report.coverage, 0.94) << "seed " << seed;
  }
}

TEST(Train, SplitCountsAndDeterminism) {
  const auto data = synth_mixture(testing::three_class_mixture(301, 4));
  TrainConfig config;
  config.seed = 17;
  const auto a = train(data, config);
  const auto b = train(data, config);
  const auto groups = data.points_by_class();
  for (const auto& [label, pts] : groups) {
    const auto& m = a.at(label);
    EXPECT_EQ(m.n_fit, static_cast<std::size_t>(std::ceil(0.5 * static_cast<double>(pts.size()))));
    EXPECT_EQ(m.n_fit + m.n_cal, pts.size());
    EXPECT_EQ(m, b.at(label));
  }
  EXPECT_EQ(serialize_manifest(a), serialize_manifest(b));
  config.seed = 18;
  const auto c = train(data, config);
  EXPECT_NE(a.at("a").calibration_scores, c.at("a").calibration_scores);
}

TEST(Train, ParallelFittingMatchesSequential) {
  const auto data = synth_mixture(testing::three_class_mixture(600, 8));
  TrainConfig config;
  config.interaction = InteractionConfig{};
  set_thread_count(1);
  const auto seq = train(data, config);
  set_thread_count(4);
  const auto par = train(data, config);
  set_thread_count(0);
  for (const auto& label : seq.labels()) EXPECT_EQ(seq.at(label), par.at(label));
  EXPECT_EQ(seq.shift(), par.shift());
}

TEST(Train, TinyClassIsOmitted) {
  auto data = synth_mixture(testing::three_class_mixture(300, 5));
  data.add("lonely", ClassLabel("z"), FeatureVector{0.0, 0.0});
  const auto model = train(data, TrainConfig{});
  EXPECT_TRUE(model.at("z").omitted);
  EXPECT_EQ(model.at("z").n_cal, 0u);
  EXPECT_EQ(model.at("z").threshold, kInf);
  auto without = synth_mixture(testing::three_class_mixture(300, 5));
  const auto base = train(without, TrainConfig{});
  for (const auto& label : base.labels()) {
    EXPECT_EQ(base.at(label), model.at(label));
    EXPECT_FALSE(model.at(label).omitted);
  }
  for (int i = 0; i < 50; ++i) {
    const auto set = predict_set(model, FeatureVector{0.0, 0.01 * i});
    EXPECT_FALSE(set.contains("z"));
  }
}

TEST(Train, Errors) {
  LabeledDataset empty(2);
  EXPECT_EQ(code_of([&] { train(empty, TrainConfig{}); }), ErrorCode::InsufficientData);
  LabeledDataset unlabeled(2);
  unlabeled.add("u", std::nullopt, FeatureVector{1.0, 2.0});
  EXPECT_EQ(code_of([&] { train(unlabeled, TrainConfig{}); }), ErrorCode::InsufficientData);
  const auto data = synth_mixture(testing::three_class_mixture(60, 1));
  TrainConfig bad;
  bad.alpha = 1.0;
  EXPECT_EQ(code_of([&] { train(data, bad); }), ErrorCode::InvalidAlpha);
  bad = TrainConfig{};
  bad.split_ratio = 1.0;
  EXPECT_EQ(code_of([&] { train(data, bad); }), ErrorCode::InvalidConfig);
}

TEST(PredictSet, ConstructedComparisons) {
  // class scores are -|x - centre|; thresholds at -0.5
  const auto model = manual_classifier({{"1", 0.0, -0.5}, {"2", 1.0, -0.5}});
  auto set = predict_set(model, FeatureVector{0.4});  // scores (-0.4, -0.6)
  EXPECT_EQ(set.labels, std::vector<ClassLabel>{"1"});
  EXPECT_FALSE(set.is_null);
  EXPECT_EQ(set.scores.at("1"), -0.4);
  EXPECT_DOUBLE_EQ(set.scores.at("2"), -0.6);

  set = predict_set(model, FeatureVector{0.5});  // both exactly at threshold: >= includes
  EXPECT_EQ(set.labels, (std::vector<ClassLabel>{"1", "2"}));

  set = predict_set(model, FeatureVector{5.0});
  EXPECT_TRUE(set.labels.empty());
  EXPECT_TRUE(set.is_null);

  EXPECT_EQ(code_of([&] { predict_set(model, FeatureVector{1.0, 2.0}); }), ErrorCode::DimensionMismatch);
}

TEST(PredictSet, FarQueryIsNull) {
  const auto data = synth_mixture(testing::three_class_mixture(3000, 6));
  const auto model = train(data, TrainConfig{});
  const auto set = predict_set(model, FeatureVector{100.0, -100.0});
  EXPECT_TRUE(set.is_null);
  EXPECT_EQ(set.scores.size(), 3u);
}

TEST(PredictTopk, RanksRawScores) {
  // scores at x = 0: a -> -7, b -> -1, c -> -5
  const auto model = manual_classifier({{"a", 7.0, 0.0}, {"b", 1.0, 0.0}, {"c", -5.0, 0.0}});
  EXPECT_EQ(predict_topk(model, FeatureVector{0.0}, 2), (std::vector<ClassLabel>{"b", "c"}));
  auto all = predict_topk(model, FeatureVector{0.0}, 3);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<ClassLabel>{"a", "b", "c"}));
  EXPECT_EQ(code_of([&] { predict_topk(model, FeatureVector{0.0}, 4); }), ErrorCode::InvalidK);
  EXPECT_EQ(code_of([&] { predict_topk(model, FeatureVector{0.0}, 0); }), ErrorCode::InvalidK);
}

TEST(PredictTopk, TiesByAscendingLabel) {
  const auto model = manual_classifier({{"c", 0.0, 0.0}, {"a", 0.0, 0.0}, {"b", 0.0, 0.0}});
  EXPECT_EQ(predict_topk(model, FeatureVector{3.0}, 3), (std::vector<ClassLabel>{"a", "b", "c"}));
}

TEST(PredictSet, NestedAcrossAlpha) {
  const auto data = synth_mixture(testing::three_class_mixture(900, 12));
  const auto model = train(data, TrainConfig{});
  std::mt19937_64 rng(4);
  const auto queries = testing::random_points(rng, 300, 2, -3.0, 6.0);
  for (double a1 : {0.05, 0.2, 0.5}) {
    for (double a2 : {0.1, 0.3, 0.8}) {
      if (!(a1 < a2)) continue;
      const auto m1 = with_alpha(model, a1);
      const auto m2 = with_alpha(model, a2);
      for (const auto& q : queries) {
        const auto big = predict_set(m1, q);
        for (const auto& label : predict_set(m2, q).labels) EXPECT_TRUE(big.contains(label));
      }
    }
  }
}

TEST(PredictSet, ClassIndependence) {
  const auto data = synth_mixture(testing::three_class_mixture(900, 13));
  const auto model = train(data, TrainConfig{});
  auto classes = model.classes();
  // Perturb every class except "a".
  for (const auto& label : {"b", "c"}) {
    auto changed = std::make_shared<ClassModel>(*classes.at(label));
    changed->threshold = -kInf;
    changed->density = std::make_shared<const DensityModel>(fit_kde(PointMatrix(2, {9.0, 9.0}), BandwidthRule::fixed(5.0)));
    classes[label] = changed;
  }
  const ConformalClassifier mutated(2, model.config(), classes);
  std::mt19937_64 rng(5);
  for (const auto& q : testing::random_points(rng, 500, 2, -3.0, 6.0)) {
    EXPECT_EQ(predict_set(model, q).contains("a"), predict_set(mutated, q).contains("a"));
  }
}

TEST(PredictSet, MonotoneTransformOfOneClassLeavesSetsUnchanged) {
  const auto data = synth_mixture(testing::three_class_mixture(900, 14));
  const auto model = train(data, TrainConfig{});
  const auto& b = model.at("b");
  auto g = [](double s) { return 3.0 * s + 7.0; };
  std::vector<double> transformed;
  for (double s : b.calibration_scores) transformed.push_back(g(s));
  const double t_new = calibrate_threshold(transformed, b.alpha, QuantileMode::FiniteSample);
  std::mt19937_64 rng(6);
  for (const auto& q : testing::random_points(rng, 1000, 2, -3.0, 6.0)) {
    const auto set = predict_set(model, q);
    const bool in_after = !b.omitted && g(b.density->score(q)) >= t_new;
    EXPECT_EQ(set.contains("b"), in_after);
  }
}

// ---------------------------------------------------------------------------
// class adaptivity
// ---------------------------------------------------------------------------

TEST(AddRemoveClass, RoundTripIsIdentity) {
  const auto data = synth_mixture(testing::three_class_mixture(600, 20));
  const auto model = train(data, TrainConfig{});
  std::mt19937_64 rng(7);
  const auto extra = testing::random_points(rng, 80, 2, 8.0, 10.0);
  const auto added = add_class(model, "d", extra);
  EXPECT_EQ(added.num_classes(), 4u);
  for (const auto& label : model.labels()) {
    EXPECT_EQ(added.classes().at(label).get(), model.classes().at(label).get());
  }
  const auto removed = remove_class(added, "d");
  EXPECT_EQ(serialize_manifest(removed), serialize_manifest(model));
  for (const auto& label : model.labels()) EXPECT_EQ(removed.at(label), model.at(label));
}

TEST(AddRemoveClass, AddMatchesJointTraining) {
  auto data = synth_mixture(testing::three_class_mixture(600, 21));
  std::mt19937_64 rng(8);
  const auto extra = testing::random_points(rng, 80, 2, 8.0, 10.0);
  const auto base = train(data, TrainConfig{});
  const auto added = add_class(base, "d", extra);
  for (std::size_t i = 0; i < extra.size(); ++i) data.add("x" + std::to_string(i), ClassLabel("d"), extra[i]);
  const auto joint = train(data, TrainConfig{});
  EXPECT_EQ(added.at("d"), joint.at("d"));
}

TEST(AddRemoveClass, DuplicatePointsAppearTogether) {
  const auto data = synth_mixture(testing::three_class_mixture(600, 22));
  const auto model = train(data, TrainConfig{});
  const auto a_points = data.points_by_class().at("a");
  const auto twin = add_class(model, "a_twin", a_points);
  // Same points in another class: identical density only if the split matches,
  // so compare membership rates instead of bitwise sets.
  std::size_t both = 0;
  std::size_t a_in = 0;
  for (const auto& p : a_points) {
    const auto set = predict_set(twin, p);
    if (set.contains("a")) ++a_in;
    if (set.contains("a") && set.contains("a_twin")) ++both;
  }
  EXPECT_GT(a_in, a_points.size() * 8 / 10);
  EXPECT_GT(both, a_points.size() * 7 / 10);
}

TEST(AddRemoveClass, SmallAddedClassIsOmitted) {
  const auto data = synth_mixture(testing::three_class_mixture(600, 23));
  const auto model = train(data, TrainConfig{});
  const std::vector<FeatureVector> few{{1.0, 1.0}, {1.1, 1.0}, {1.0, 1.2}};
  const auto added = add_class(model, "few", few);
  EXPECT_TRUE(added.has("few"));
  EXPECT_TRUE(added.at("few").omitted);
  EXPECT_FALSE(predict_set(added, FeatureVector{1.0, 1.0}).contains("few"));
}

TEST(AddRemoveClass, Errors) {
  const auto data = synth_mixture(testing::three_class_mixture(300, 24));
  const auto model = train(data, TrainConfig{});
  const std::vector<FeatureVector> pts{{1.0, 1.0}};
  EXPECT_EQ(code_of([&] { add_class(model, "a", pts); }), ErrorCode::DuplicateClass);
  const std::vector<FeatureVector> wrong{{1.0}};
  EXPECT_EQ(code_of([&] { add_class(model, "q", wrong); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { remove_class(model, "q"); }), ErrorCode::UnknownClass);
  const auto one = remove_class(remove_class(model, "a"), "b");
  EXPECT_EQ(code_of([&] { remove_class(one, "c"); }), ErrorCode::EmptyClassifier);
}

TEST(AddRemoveClass, RemovedLabelNeverPredicted) {
  const auto data = synth_mixture(testing::three_class_mixture(600, 25));
  const auto model = remove_class(train(data, TrainConfig{}), "b");
  for (const auto& r : data.records()) EXPECT_FALSE(predict_set(model, r.features).contains("b"));
}

TEST(AddRemoveClass, ReAddIsBitIdentical) {
  const auto data = synth_mixture(testing::three_class_mixture(600, 26));
  const auto model = train(data, TrainConfig{});
  const auto b_points = data.points_by_class().at("b");
  const auto readded = add_class(remove_class(model, "b"), "b", b_points);
  EXPECT_EQ(readded.at("b"), model.at("b"));
}

TEST(AddRemoveClass, PerClassAlpha) {
  const auto data = synth_mixture(testing::three_class_mixture(600, 27));
  const auto model = train(data, TrainConfig{});
  std::mt19937_64 rng(9);
  const auto added = add_class(model, "d", testing::random_points(rng, 100, 2, 8.0, 10.0), 0.3);
  EXPECT_EQ(added.at("d").alpha, 0.3);
  EXPECT_EQ(added.config().class_alpha.at("d"), 0.3);
}

// ---------------------------------------------------------------------------
// interaction mode
// ---------------------------------------------------------------------------

TEST(Interaction, QueryPathMatchesInteractionAdjust) {
  const auto data = synth_mixture(testing::three_class_mixture(600, 30));
  TrainConfig config;
  config.interaction = InteractionConfig{};
  const auto model = train(data, config);
  EXPECT_DOUBLE_EQ(model.lambda(), 0.5);
  std::mt19937_64 rng(10);
  for (const auto& q : testing::random_points(rng, 50, 2, -2.0, 5.0)) {
    const auto raw = model.raw_scores(q.values());
    const auto conf = model.conformity_from_raw(raw);
    std::map<ClassLabel, double> by_label;
    const auto labels = model.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]] = raw[i];
    for (std::size_t i = 0; i < labels.size(); ++i) {
      EXPECT_NEAR(conf[i], interaction_adjust(by_label, labels[i], model.lambda(), model.shift()), 1e-15);
    }
  }
}

TEST(Interaction, ShiftIsMaxCalibrationLogScore) {
  const auto data = synth_mixture(testing::three_class_mixture(300, 31));
  TrainConfig config;
  config.interaction = InteractionConfig{0.25};
  const auto model = train(data, config);
  double expected = -kInf;
  for (const auto& [label, m] : model.classes()) {
    for (std::size_t i = 0; i < m->calibration_points.size(); ++i) {
      for (const auto& [other, o] : model.classes()) {
        expected = std::max(expected, o->density->score(m->calibration_points.row(i)));
      }
    }
  }
  EXPECT_EQ(model.shift(), expected);
  EXPECT_EQ(model.lambda(), 0.25);
}

TEST(Interaction, ZeroLambdaGivesIndependentSets) {
  const auto data = synth_mixture(testing::three_class_mixture(900, 32));
  TrainConfig config;
  const auto plain = train(data, config);
  config.interaction = InteractionConfig{0.0};
  const auto coupled = train(data, config);
  std::mt19937_64 rng(11);
  for (const auto& q : testing::random_points(rng, 500, 2, -2.0, 5.0)) {
    EXPECT_EQ(predict_set(plain, q).labels, predict_set(coupled, q).labels);
  }
}

TEST(Interaction, AddRemoveRecalibrates) {
  const auto data = synth_mixture(testing::three_class_mixture(600, 33));
  TrainConfig config;
  config.interaction = InteractionConfig{};
  const auto model = train(data, config);
  std::mt19937_64 rng(12);
  const auto added = add_class(model, "d", testing::random_points(rng, 100, 2, 2.0, 3.0));
  EXPECT_DOUBLE_EQ(added.lambda(), 1.0 / 3.0);
  EXPECT_NE(added.at("a").threshold, model.at("a").threshold);
  const auto back = remove_class(added, "d");
  for (const auto& label : model.labels()) EXPECT_EQ(back.at(label), model.at(label));
  EXPECT_EQ(back.shift(), model.shift());
}

TEST(Interaction, KnnEstimatorSupported) {
  const auto data = synth_mixture(testing::three_class_mixture(600, 34));
  TrainConfig config;
  config.estimator = EstimatorKind::Knn;
  config.interaction = InteractionConfig{};
  const auto model = train(data, config);
  const auto report = evaluate(model, synth_mixture(testing::three_class_mixture(1500, 35)));
  EXPECT_GT(report.coverage, 0.8);
}

}  // namespace
}  // namespace cautious
