#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "fedora/dataset.hpp"
#include "fedora/models/cart.hpp"
#include "fedora/models/metrics.hpp"
#include "helpers.hpp"

using namespace fedora;

namespace {

Dataset from_text(const std::string& text, const std::string& label = "y") {
  std::istringstream in(text);
  return parse_csv(in, label);
}

Dataset labelled(const std::vector<int>& labels) {
  Dataset ds;
  ds.features = Matrix(static_cast<Eigen::Index>(labels.size()), 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ds.features(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    ds.features(static_cast<Eigen::Index>(i), 1) = -static_cast<double>(i);
  }
  ds.labels = labels;
  ds.column_names = {"a", "b"};
  return ds;
}

TEST(LoadCsv, ThreeRows) {
  Dataset ds = from_text("a,b,y\n1,2,no\n3,4,yes\n5,6,no\n");
  EXPECT_EQ(ds.rows(), 3u);
  EXPECT_EQ(ds.cols(), 2u);
  EXPECT_EQ(ds.labels, (Labels{0, 1, 0}));
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"no", "yes"}));
  EXPECT_EQ(ds.column_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.features(1, 1), 4.0);
}

TEST(LoadCsv, LabelColumnAnywhereAndNumericLabels) {
  Dataset ds = from_text("y,a,b\n7,1,2\n3,3,4\n7,5,6\n");
  EXPECT_EQ(ds.labels, (Labels{0, 1, 0}));
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"7", "3"}));
  EXPECT_EQ(ds.features(2, 0), 5.0);
}

TEST(LoadCsv, QuotedCellsAndCrLf) {
  Dataset ds = from_text("\"a\",b,y\r\n\"1.5\",2e3,\"x, y\"\r\n");
  EXPECT_EQ(ds.features(0, 0), 1.5);
  EXPECT_EQ(ds.features(0, 1), 2000.0);
  EXPECT_EQ(ds.class_names.front(), "x, y");
}

TEST(LoadCsv, NonNumericCellReportsRowAndColumn) {
  try {
    from_text("a,b,y\n1,2,no\n3,abc,yes\n");
    ADD_FAILURE();
  } catch (const NonNumericCellError& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonNumericCell);
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), "b");
  }
}

TEST(LoadCsv, Errors) {
  expect_code(ErrorCode::EmptyFile, [] { from_text(""); });
  expect_code(ErrorCode::EmptyFile, [] { from_text("a,b,y\n"); });
  expect_code(ErrorCode::MissingLabelColumn, [] { from_text("a,b,c\n1,2,3\n"); });
  expect_code(ErrorCode::NonNumericCell, [] { from_text("a,b,y\n1,,0\n"); });
  expect_code(ErrorCode::NonNumericCell, [] { from_text("a,b,y\n1,nan,0\n"); });
  expect_code(ErrorCode::InvalidDataset, [] { from_text("a,b,y\n1,2\n"); });
  expect_code(ErrorCode::Io, [] { load_csv("/nonexistent/file.csv", "y"); });
}

TEST(LoadCsv, SaveLoadIdempotent) {
  Dataset ds = synth_interaction(120, 0.1, 3);
  auto dir = scratch_dir("csv_roundtrip");
  save_csv((dir / "a.csv").string(), ds, "label");
  Dataset once = load_csv((dir / "a.csv").string(), "label");
  EXPECT_EQ(once.features, ds.features);
  // Ids follow first appearance, names survive.
  ASSERT_EQ(once.labels.size(), ds.labels.size());
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    EXPECT_EQ(once.class_names[static_cast<std::size_t>(once.labels[i])],
              ds.class_names[static_cast<std::size_t>(ds.labels[i])]);
  save_csv((dir / "b.csv").string(), once, "label");
  EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
}

// ---------------------------------------------------------------------------
// Split

void check_split_invariants(const Dataset& ds, const SplitDataset& s) {
  const std::size_t n = ds.rows();
  EXPECT_EQ(s.train_rows.size(), static_cast<std::size_t>(std::lround(0.4 * n)));
  EXPECT_EQ(s.validation_rows.size(), static_cast<std::size_t>(std::lround(0.4 * n)));
  EXPECT_EQ(s.test_rows.size(), n - s.train_rows.size() - s.validation_rows.size());

  std::vector<std::size_t> all;
  for (const auto* r : {&s.train_rows, &s.validation_rows, &s.test_rows}) all.insert(all.end(), r->begin(), r->end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(all[i], i);  // bijection

  const auto global = class_counts(ds.labels);
  for (const Dataset* sub : {&s.train, &s.validation, &s.test}) {
    const auto counts = class_counts(sub->labels);
    for (std::size_t k = 0; k < global.size(); ++k) {
      const double expected = static_cast<double>(global[k]) * static_cast<double>(sub->rows()) / n;
      const double got = k < counts.size() ? static_cast<double>(counts[k]) : 0.0;
      EXPECT_LE(std::abs(got - expected), 1.0) << "class " << k << " subset size " << sub->rows();
      EXPECT_GE(got, 1.0);
    }
  }
  EXPECT_EQ(s.train.rows(), s.train_rows.size());
  for (std::size_t i = 0; i < s.train_rows.size(); ++i)
    EXPECT_EQ(s.train.labels[i], ds.labels[s.train_rows[i]]);
}

TEST(Split, BalancedHundred) {
  std::vector<int> y(100);
  for (int i = 0; i < 100; ++i) y[static_cast<std::size_t>(i)] = i % 2;
  Dataset ds = labelled(y);
  SplitDataset s = split(ds, 1);
  EXPECT_EQ(s.train.rows(), 40u);
  EXPECT_EQ(s.validation.rows(), 40u);
  EXPECT_EQ(s.test.rows(), 20u);
  for (const Dataset* sub : {&s.train, &s.validation, &s.test}) {
    auto counts = class_counts(sub->labels);
    EXPECT_EQ(counts[0], counts[1]);
  }
  check_split_invariants(ds, s);
}

TEST(Split, TenRows) {
  Dataset ds = labelled({0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
  SplitDataset s = split(ds, 0);
  EXPECT_EQ(s.train.rows(), 4u);
  EXPECT_EQ(s.validation.rows(), 4u);
  EXPECT_EQ(s.test.rows(), 2u);
  check_split_invariants(ds, s);
}

TEST(Split, DeterministicAndSeedSensitive) {
  Dataset ds = synth_interaction(300, 0.05, 1);
  SplitDataset a = split(ds, 5), b = split(ds, 5), c = split(ds, 6);
  EXPECT_EQ(a.train_rows, b.train_rows);
  EXPECT_EQ(a.validation_rows, b.validation_rows);
  EXPECT_EQ(a.test_rows, b.test_rows);
  EXPECT_NE(a.train_rows, c.train_rows);
}

TEST(Split, InvariantsOverRandomImbalancedData) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 10 + rng() % 300;
    const std::size_t classes = 2 + rng() % 4;
    std::vector<int> y(n);
    // Every class gets at least three members, the rest is skewed.
    for (std::size_t i = 0; i < n; ++i)
      y[i] = i < 3 * classes ? static_cast<int>(i % classes) : static_cast<int>((rng() % 10 < 7) ? 0 : rng() % classes);
    Dataset ds = labelled(y);
    SCOPED_TRACE("n=" + std::to_string(n) + " classes=" + std::to_string(classes));
    const std::size_t n_test = n - 2 * static_cast<std::size_t>(std::lround(0.4 * n));
    if (n_test < classes) {
      expect_code(ErrorCode::ClassTooSmall, [&] { split(ds, 0); });
      continue;
    }
    check_split_invariants(ds, split(ds, rng()));
  }
}

TEST(Split, Errors) {
  expect_code(ErrorCode::ClassTooSmall, [] { split(labelled({0, 0, 0, 0, 0, 0, 0, 0, 1, 1}), 0); });
  expect_code(ErrorCode::InvalidDataset, [] { split(labelled({0, 1, 0, 1, 0, 1}), 0); });
  expect_code(ErrorCode::InvalidDataset, [] { split(labelled(std::vector<int>(12, 0)), 0); });
}

TEST(Split, ManifestRoundTrip) {
  Dataset ds = synth_interaction(150, 0.05, 2);
  SplitDataset s = split(ds, 9);
  SplitDataset back = split_from_manifest(ds, nlohmann::json::parse(split_manifest(s).dump()));
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.train_rows, s.train_rows);
  EXPECT_EQ(back.test.features, s.test.features);
}

// ---------------------------------------------------------------------------
// Synthetic data

double stump_accuracy(const Matrix& train_x, const Labels& train_y, const Matrix& test_x, const Labels& test_y) {
  TreeParams stump;
  stump.max_depth = 1;
  return balanced_accuracy(test_y, fit_tree(train_x, train_y, stump).predict(test_x));
}

TEST(SynthInteraction, Shape) {
  Dataset ds = synth_interaction(200, 0.0, 1);
  EXPECT_EQ(ds.rows(), 200u);
  EXPECT_EQ(ds.cols(), 6u);
  EXPECT_EQ(ds.num_classes(), 2u);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    EXPECT_EQ(ds.labels[i], ds.features(r, 0) * ds.features(r, 1) > 0 ? 1 : 0);
  }
  expect_code(ErrorCode::InvalidDataset, [] { synth_interaction(50, 0.0, 1); });
}

TEST(SynthInteraction, StumpOnRawFeaturesIsWeak) {
  Dataset ds = synth_interaction(1000, 0.0, 11);
  SplitDataset s = split(ds, 0);
  const Dataset fit = concat(s.train, s.validation);
  EXPECT_LE(stump_accuracy(fit.features, fit.labels, s.test.features, s.test.labels), 0.6);
}

TEST(SynthInteraction, StumpOnProductSeparates) {
  Dataset ds = synth_interaction(1000, 0.0, 11);
  SplitDataset s = split(ds, 0);
  const Dataset fit = concat(s.train, s.validation);
  auto product = [](const Matrix& x) { return Matrix(x.col(0).cwiseProduct(x.col(1))); };
  EXPECT_GE(stump_accuracy(product(fit.features), fit.labels, product(s.test.features), s.test.labels), 0.95);
}

TEST(SynthInteraction, PureNoiseIsChance) {
  Dataset ds = synth_interaction(4000, 0.5, 5);
  SplitDataset s = split(ds, 0);
  const Dataset fit = concat(s.train, s.validation);
  auto product = [](const Matrix& x) { return Matrix(x.col(0).cwiseProduct(x.col(1))); };
  EXPECT_NEAR(stump_accuracy(product(fit.features), fit.labels, product(s.test.features), s.test.labels), 0.5, 0.05);
}

}  // namespace
