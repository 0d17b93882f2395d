#include <gtest/gtest.h>

#include <cmath>

#include "fedora/dataset.hpp"
#include "fedora/models/boost.hpp"
#include "fedora/models/cart.hpp"
#include "fedora/models/forest.hpp"
#include "fedora/models/metrics.hpp"
#include "fedora/models/mlp.hpp"
#include "fedora/models/registry.hpp"
#include "helpers.hpp"

using namespace fedora;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

struct Fit {
  Dataset train;
  Dataset test;
};

Fit synth_fit(std::size_t n, double noise, std::uint64_t seed) {
  SplitDataset s = split(synth_interaction(n, noise, seed), seed);
  return {concat(s.train, s.validation), s.test};
}

// ---------------------------------------------------------------------------
// Decision tree

TEST(Tree, SingleClassIsDepthZero) {
  auto model = fit_tree(random_matrix(20, 3, 1), Labels(20, 1));
  EXPECT_EQ(model.tree().depth(), 0u);
  EXPECT_EQ(model.tree().node_count(), 1u);
  EXPECT_EQ(model.predict(random_matrix(7, 3, 2)), Labels(7, 1));
}

TEST(Tree, OneDimensionalThreshold) {
  Matrix x = column({-3, -2, -1, -0.5, 0, 0.5, 1, 2});
  Labels y{0, 0, 0, 0, 1, 1, 1, 1};
  auto model = fit_tree(x, y);
  EXPECT_EQ(model.tree().depth(), 1u);
  EXPECT_EQ(model.predict(x), y);
  EXPECT_EQ(model.tree().nodes()[0].threshold, -0.25);
}

TEST(Tree, TiesGoToLowestFeatureThenThreshold) {
  // Columns 0 and 1 are identical so both split equally well.
  Matrix x(6, 2);
  x << 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6;
  auto model = fit_tree(x, Labels{0, 0, 0, 1, 1, 1});
  EXPECT_EQ(model.tree().nodes()[0].feature, 0);

  // Two equally good thresholds on one column: 0|1 0|1 pattern with pure ends.
  Matrix z = column({1, 2, 3, 4});
  TreeParams stump;
  stump.max_depth = 1;
  auto s = fit_tree(z, Labels{0, 1, 1, 0}, stump);
  EXPECT_EQ(s.tree().nodes()[0].threshold, 1.5);
}

TEST(Tree, ErrorsAndValidation) {
  expect_code(ErrorCode::EmptyTrainingSet, [] { fit_tree(Matrix(0, 2), Labels{}); });
  TreeParams bad;
  bad.max_depth = 0;
  expect_code(ErrorCode::ConfigInvalid, [&] { fit_tree(column({1, 2}), Labels{0, 1}, bad); });
  bad = {};
  bad.min_samples_split = 1;
  expect_code(ErrorCode::ConfigInvalid, [&] { fit_tree(column({1, 2}), Labels{0, 1}, bad); });
}

TEST(Tree, RawInteractionIsPartlyLearnable) {
  Fit f = synth_fit(600, 0.05, 3);
  TreeParams p;
  p.max_depth = 5;
  const double bacc = balanced_accuracy(f.test.labels, fit_tree(f.train.features, f.train.labels, p).predict(f.test.features));
  EXPECT_GT(bacc, 0.5);
  EXPECT_LT(bacc, 1.0);
}

TEST(Tree, PositiveColumnScalingMetamorphic) {
  Fit f = synth_fit(400, 0.1, 8);
  const Labels base = fit_tree(f.train.features, f.train.labels).predict(f.test.features);
  // Powers of two keep midpoints exact, so thresholds scale bit-for-bit.
  for (double c : {0.25, 8.0, 1024.0}) {
    for (Eigen::Index j = 0; j < f.train.features.cols(); ++j) {
      Matrix tr = f.train.features, te = f.test.features;
      tr.col(j) *= c;
      te.col(j) *= c;
      EXPECT_EQ(fit_tree(tr, f.train.labels).predict(te), base) << "c=" << c << " col " << j;
    }
  }
}

TEST(Tree, Deterministic) {
  Fit f = synth_fit(300, 0.05, 4);
  TreeParams p;
  p.features_per_split = 2;
  Rng a(5), b(5);
  EXPECT_EQ(fit_tree(f.train.features, f.train.labels, p, a).predict(f.test.features),
            fit_tree(f.train.features, f.train.labels, p, b).predict(f.test.features));
}

// ---------------------------------------------------------------------------
// Forest

TEST(Forest, SingleUnbaggedTreeEqualsTree) {
  Fit f = synth_fit(400, 0.05, 2);
  ForestParams p;
  p.n_estimators = 1;
  p.bootstrap = false;
  p.features_per_split = static_cast<std::size_t>(f.train.features.cols());
  TreeParams t;
  t.max_depth = p.max_depth;
  EXPECT_EQ(fit_forest(f.train.features, f.train.labels, p, 17).predict(f.test.features),
            fit_tree(f.train.features, f.train.labels, t).predict(f.test.features));
}

TEST(Forest, SingleBaggedTreeEqualsTreeOnItsSample) {
  Fit f = synth_fit(300, 0.05, 6);
  ForestParams p;
  p.n_estimators = 1;
  p.features_per_split = static_cast<std::size_t>(f.train.features.cols());
  ForestModel forest = fit_forest(f.train.features, f.train.labels, p, 99);
  // Replay the bootstrap draw.
  Rng rng(derive_seed({99, 0}));
  std::vector<std::size_t> rows(f.train.rows());
  for (auto& r : rows) r = uniform_index(rng, f.train.rows());
  TreeParams t;
  t.max_depth = p.max_depth;
  auto tree = fit_tree_on(f.train.features, f.train.labels, rows, t, nullptr);
  EXPECT_EQ(forest.predict(f.test.features), tree.predict(f.test.features));
}

TEST(Forest, PaperConfigurationAndDeterminism) {
  Fit f = synth_fit(300, 0.05, 1);
  ForestParams p;
  p.n_estimators = 5;
  p.max_depth = 5;
  ForestModel a = fit_forest(f.train.features, f.train.labels, p, 3);
  EXPECT_EQ(a.trees().size(), 5u);
  for (const auto& t : a.trees()) EXPECT_LE(t.tree().depth(), 5u);
  EXPECT_EQ(a.predict(f.test.features), fit_forest(f.train.features, f.train.labels, p, 3).predict(f.test.features));
  p.n_estimators = 0;
  expect_code(ErrorCode::ConfigInvalid, [&] { fit_forest(f.train.features, f.train.labels, p, 3); });
}

TEST(Forest, VoteTiesGoToLowerClass) {
  // Two stumps trained on disjoint pure halves disagree on every point.
  Matrix x = column({0, 1});
  std::vector<DecisionTreeModel> trees{fit_tree(x, Labels{1, 1}), fit_tree(x, Labels{0, 0})};
  ForestModel forest(std::move(trees), 2);
  EXPECT_EQ(forest.predict(x), (Labels{0, 0}));
}

// ---------------------------------------------------------------------------
// Boosting

TEST(Boost, ZeroRoundsPredictsMajority) {
  BoostParams p;
  p.n_rounds = 0;
  Matrix x = random_matrix(10, 2, 1);
  Labels y{1, 1, 1, 0, 1, 0, 1, 1, 0, 1};
  BoostModel m = fit_boost(x, y, p);
  EXPECT_EQ(m.rounds(), 0u);
  EXPECT_EQ(m.predict(random_matrix(5, 2, 9)), Labels(5, 1));
  EXPECT_EQ(m.loss_trace().size(), 1u);
}

TEST(Boost, SeparableOneDimensional) {
  Matrix x = column({-5, -4, -3, -2, -1, 1, 2, 3, 4, 5});
  Labels y{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  BoostParams p;
  p.n_rounds = 10;
  EXPECT_EQ(balanced_accuracy(y, fit_boost(x, y, p).predict(x)), 1.0);
}

TEST(Boost, TrainingLossNonIncreasing) {
  Fit f = synth_fit(400, 0.1, 12);
  BoostParams p;
  p.n_rounds = 40;
  p.max_depth = 3;
  const BoostModel model = fit_boost(f.train.features, f.train.labels, p);
  const auto& trace = model.loss_trace();
  ASSERT_EQ(trace.size(), 41u);
  for (std::size_t r = 1; r < trace.size(); ++r) EXPECT_LE(trace[r], trace[r - 1] + 1e-12) << "round " << r;
  EXPECT_LT(trace.back(), trace.front());
}

TEST(Boost, Errors) {
  expect_code(ErrorCode::MulticlassUnsupported,
              [] { fit_boost(column({1, 2, 3}), Labels{0, 1, 2}, BoostParams{}); });
  BoostParams p;
  p.learning_rate = 0.0;
  expect_code(ErrorCode::ConfigInvalid, [&] { fit_boost(column({1, 2}), Labels{0, 1}, p); });
  p.learning_rate = 1.5;
  expect_code(ErrorCode::ConfigInvalid, [&] { fit_boost(column({1, 2}), Labels{0, 1}, p); });
}

// ---------------------------------------------------------------------------
// MLP

Matrix xor_x() {
  Matrix x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  return x;
}

TEST(Mlp, ZeroEpochsDeterministicPerSeed) {
  MlpParams p;
  p.epochs = 0;
  p.seed = 4;
  Matrix x = random_matrix(30, 3, 1);
  Labels y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = static_cast<int>(i % 2);
  auto a = fit_mlp(x, y, p), b = fit_mlp(x, y, p);
  EXPECT_EQ(a.network().weights().w1, b.network().weights().w1);
  EXPECT_EQ(a.predict(x), b.predict(x));
  p.seed = 5;
  EXPECT_NE(fit_mlp(x, y, p).network().weights().w1, a.network().weights().w1);
}

TEST(Mlp, LearnsXor) {
  const Labels y{0, 1, 1, 0};
  for (auto act : {Activation::Relu, Activation::Tanh}) {
    MlpParams p;
    p.hidden_units = 16;
    p.epochs = 2000;
    p.batch_size = 4;
    p.learning_rate = 0.01;
    p.activation = act;
    EXPECT_EQ(accuracy(y, fit_mlp(xor_x(), y, p).predict(xor_x())), 1.0);
  }
  MlpParams sgd;
  sgd.hidden_units = 16;
  sgd.epochs = 3000;
  sgd.batch_size = 4;
  sgd.learning_rate = 0.5;
  sgd.optimizer = Optimizer::Sgd;
  sgd.activation = Activation::Tanh;
  EXPECT_EQ(accuracy(y, fit_mlp(xor_x(), y, sgd).predict(xor_x())), 1.0);
}

/// Largest relative error between the analytic gradient and central
/// differences over every parameter.
double mlp_gradient_error(Activation act, std::uint64_t seed) {
  Rng rng(seed);
  MlpNetwork net = MlpNetwork::initialise(4, 5, 3, act, rng);
  const Matrix x = random_matrix(3, 4, seed + 1);
  const Labels y{0, 2, 1};
  const MlpWeights g = net.gradient(x, y);
  const double h = 1e-6;
  double worst = 0.0;
  auto check = [&](auto& param, const auto& grad) {
    for (Eigen::Index i = 0; i < param.size(); ++i) {
      const double keep = param.data()[i];
      param.data()[i] = keep + h;
      const double up = net.loss(x, y);
      param.data()[i] = keep - h;
      const double down = net.loss(x, y);
      param.data()[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grad.data()[i];
      worst = std::max(worst, std::abs(numeric - analytic) / std::max(1e-6, std::abs(numeric) + std::abs(analytic)));
    }
  };
  auto& w = net.weights();
  check(w.w1, g.w1);
  check(w.b1, g.b1);
  check(w.w2, g.w2);
  check(w.b2, g.b2);
  return worst;
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EXPECT_LT(mlp_gradient_error(Activation::Tanh, seed), 1e-4);
    EXPECT_LT(mlp_gradient_error(Activation::Relu, seed), 1e-4);
  }
}

TEST(Mlp, ValidationAndEmpty) {
  MlpParams p;
  p.hidden_units = 0;
  expect_code(ErrorCode::ConfigInvalid, [&] { fit_mlp(column({1, 2}), Labels{0, 1}, p); });
  expect_code(ErrorCode::EmptyTrainingSet, [] { fit_mlp(Matrix(0, 1), Labels{}, MlpParams{}); });
}

TEST(Mlp, SurvivesHugeInputs) {
  Matrix x = random_matrix(40, 2, 3) * 1e200;
  Labels y(40);
  for (Eigen::Index i = 0; i < 40; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) > 0 ? 1 : 0;
  MlpParams p;
  p.epochs = 50;
  p.learning_rate = 0.05;
  auto model = fit_mlp(x, y, p);
  EXPECT_TRUE(model.network().weights().w1.allFinite());
  EXPECT_GT(accuracy(y, model.predict(x)), 0.8);
}

// ---------------------------------------------------------------------------
// Registry

TEST(Registry, NamesRoundTrip) {
  for (ModelKind k : kAllModels) EXPECT_EQ(parse_model_kind(to_string(k)), k);
  EXPECT_EQ(parse_model_kind("DT"), ModelKind::DecisionTree);
  expect_code(ErrorCode::UnknownTester, [] { parse_model_kind("svm"); });
}

TEST(Registry, FitPredictDeterministicForAllKinds) {
  Fit f = synth_fit(300, 0.05, 5);
  ModelSettings s;
  s.mlp.epochs = 5;
  s.boost.n_rounds = 10;
  for (ModelKind k : kAllModels) {
    Labels a = fit_predict(k, s, f.train.features, f.train.labels, f.test.features, 7);
    EXPECT_EQ(a, fit_predict(k, s, f.train.features, f.train.labels, f.test.features, 7)) << to_string(k);
    EXPECT_EQ(a.size(), f.test.rows());
  }
}

// ---------------------------------------------------------------------------
// Balanced accuracy

TEST(BalancedAccuracy, Examples) {
  EXPECT_EQ(balanced_accuracy({0, 1, 1, 0}, {0, 1, 1, 0}), 1.0);
  EXPECT_EQ(balanced_accuracy({0, 1, 1, 0, 1}, {1, 1, 1, 1, 1}), 0.5);
  EXPECT_EQ(balanced_accuracy({0, 1, 1, 0, 1}, {0, 0, 0, 0, 0}), 0.5);
  // TPR 4/5, TNR 3/5.
  Labels truth{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  Labels pred{1, 1, 1, 1, 0, 0, 0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(balanced_accuracy(truth, pred), 0.7);
}

TEST(BalancedAccuracy, Errors) {
  expect_code(ErrorCode::SingleClassTruth, [] { balanced_accuracy({1, 1, 1}, {1, 0, 1}); });
  expect_code(ErrorCode::InvalidDataset, [] { balanced_accuracy({1, 0}, {1}); });
  expect_code(ErrorCode::InvalidDataset, [] { balanced_accuracy({}, {}); });
}

TEST(BalancedAccuracy, LabelSwapInvariant) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 50;
    Labels truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng() % 2);
      pred[i] = static_cast<int>(rng() % 2);
    }
    truth[0] = 0;
    truth[1] = 1;
    Labels st = truth, sp = pred;
    for (auto& v : st) v = 1 - v;
    for (auto& v : sp) v = 1 - v;
    const double a = balanced_accuracy(truth, pred);
    EXPECT_DOUBLE_EQ(a, balanced_accuracy(st, sp));
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

}  // namespace
