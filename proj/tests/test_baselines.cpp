#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <numeric>

#include "fedora/baselines/baseline.hpp"
#include "helpers.hpp"

using namespace fedora;

namespace {

double pairwise_distance_gap(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.rows(); ++j)
      worst = std::max(worst, std::abs((a.row(i) - a.row(j)).norm() - (b.row(i) - b.row(j)).norm()));
  return worst;
}

Matrix low_rank(Eigen::Index n, Eigen::Index d, Eigen::Index rank, std::uint64_t seed) {
  return random_matrix(n, rank, seed) * random_matrix(rank, d, seed + 1);
}

// ---------------------------------------------------------------------------
// PCA

TEST(Pca, RankOneLine) {
  Matrix x(5, 2);
  x << -2, -4, -1, -2, 0, 0, 1, 2, 3, 6;
  PcaModel m = fit_pca(x, 1);
  EXPECT_NEAR(m.components.col(0).norm(), 1.0, 1e-12);
  EXPECT_NEAR(m.components(1, 0) / m.components(0, 0), 2.0, 1e-12);
  EXPECT_GT(m.components(1, 0), 0.0);  // largest loading positive
  Matrix back = (m.transform(x) * m.components.transpose()).rowwise() + m.mean.transpose();
  EXPECT_LT((back - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pca, FullRankIsIsometry) {
  Matrix x = random_matrix(40, 5, 3);
  PcaModel m = fit_pca(x, 5);
  EXPECT_LT((m.components.transpose() * m.components - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(pairwise_distance_gap(x, m.transform(x)), 1e-8);
}

TEST(Pca, VariancesMatchCovarianceEigenvalues) {
  Matrix x = random_matrix(50, 5, 11);
  x.col(2) *= 4.0;
  x.col(4) += 0.5 * x.col(0);
  PcaModel m = fit_pca(x, 5);

  const Matrix centred = x.rowwise() - x.colwise().mean();
  const Matrix cov = centred.transpose() * centred / 49.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double oracle = eig.eigenvalues()[4 - i];  // ascending order
    EXPECT_NEAR(m.explained_variance[i], oracle, 1e-8);
    // Axis agrees up to sign, and the projected variance equals the eigenvalue.
    EXPECT_NEAR(std::abs(m.components.col(i).dot(eig.eigenvectors().col(4 - i))), 1.0, 1e-8);
    const Vector proj = m.transform(x).col(i);
    EXPECT_NEAR(proj.squaredNorm() / 49.0, oracle, 1e-8);
  }
  for (Eigen::Index i = 1; i < 5; ++i) EXPECT_GE(m.explained_variance[i - 1], m.explained_variance[i]);
}

TEST(Pca, SignConvention) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    PcaModel m = fit_pca(random_matrix(30, 4, seed), 3);
    for (Eigen::Index c = 0; c < 3; ++c) {
      Eigen::Index arg = 0;
      m.components.col(c).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(m.components(arg, c), 0.0);
    }
  }
}

TEST(Pca, Errors) {
  Matrix x = random_matrix(10, 3, 1);
  expect_code(ErrorCode::KTooLarge, [&] { fit_pca(x, 4); });
  expect_code(ErrorCode::KTooLarge, [&] { fit_pca(x, 0); });
  expect_code(ErrorCode::EmptyTrainingSet, [] { fit_pca(Matrix(1, 3), 1); });
}

// ---------------------------------------------------------------------------
// SOM

TEST(Som, SingleUnitApproachesMean) {
  Matrix x = random_matrix(200, 3, 4);
  x.col(0).array() += 5.0;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  SomParams p;
  p.epochs = 30;
  p.record_history = true;

  // An online step moves the unit by lr * (sample - unit), so one epoch-end
  // snapshot sits about lr * |sample - mean| from the mean and jitters with the
  // last sample drawn. Averaged over seeds and blocks of epochs the distance
  // falls monotonically with the learning rate.
  constexpr std::size_t seeds = 40, width = 5;
  std::vector<double> block(p.epochs / width, 0.0);
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    SomModel m = fit_som(x, 1, p, seed);
    ASSERT_EQ(m.history.size(), p.epochs);
    for (std::size_t e = 0; e < p.epochs; ++e) block[e / width] += (m.history[e].row(0) - mean).norm();
    EXPECT_LT((m.codebook.row(0) - mean).norm(), 0.15);  // samples sit ~1.7 away
  }
  for (std::size_t b = 1; b < block.size(); ++b) EXPECT_LT(block[b], block[b - 1]) << "block " << b;
}

TEST(Som, TwoClustersOneUnitEach) {
  Matrix x(200, 2);
  Matrix noise = random_matrix(200, 2, 9) * 0.3;
  for (Eigen::Index i = 0; i < 200; ++i) x.row(i) = noise.row(i).array() + (i < 100 ? -10.0 : 10.0);
  SomModel m = fit_som(x, 2, SomParams{}, 1);
  const Eigen::RowVectorXd lo_min = x.topRows(100).colwise().minCoeff(), lo_max = x.topRows(100).colwise().maxCoeff();
  const Eigen::RowVectorXd hi_min = x.bottomRows(100).colwise().minCoeff(), hi_max = x.bottomRows(100).colwise().maxCoeff();
  auto inside = [](const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& lo, const Eigen::RowVectorXd& hi) {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  };
  const bool a = inside(m.codebook.row(0), lo_min, lo_max) && inside(m.codebook.row(1), hi_min, hi_max);
  const bool b = inside(m.codebook.row(1), lo_min, lo_max) && inside(m.codebook.row(0), hi_min, hi_max);
  EXPECT_TRUE(a || b) << m.codebook;
}

TEST(Som, TransformIsDistanceToUnits) {
  Matrix x = random_matrix(50, 4, 2);
  SomParams p;
  p.epochs = 5;
  SomModel m = fit_som(x, 3, p, 3);
  Matrix t = m.transform(x);
  ASSERT_EQ(t.cols(), 3);
  EXPECT_NEAR(t(7, 2), (x.row(7) - m.codebook.row(2)).norm(), 1e-12);
  EXPECT_EQ(fit_som(x, 3, p, 3).codebook, m.codebook);
  EXPECT_NE(fit_som(x, 3, p, 4).codebook, m.codebook);
}

TEST(Som, MoreUnitsThanRows) {
  Matrix x = random_matrix(3, 2, 1);
  SomModel m = fit_som(x, 5, SomParams{}, 0);
  EXPECT_EQ(m.transform(x).cols(), 5);
  EXPECT_TRUE(m.codebook.allFinite());
  expect_code(ErrorCode::ConfigInvalid, [&] { fit_som(x, 0, SomParams{}, 0); });
}

// ---------------------------------------------------------------------------
// Autoencoder

TEST(Autoencoder, LossNonIncreasingOnStandardisedData) {
  Matrix x = random_matrix(300, 6, 5);
  x.col(3) = x.col(0) + 0.1 * x.col(3);
  AeModel m = fit_autoencoder(x, 3, AeParams{}, 1);
  ASSERT_EQ(m.loss_trace.size(), 51u);
  for (std::size_t e = 1; e < m.loss_trace.size(); ++e)
    EXPECT_LE(m.loss_trace[e], m.loss_trace[e - 1] + 1e-12) << "epoch " << e;
  EXPECT_LT(m.loss_trace.back(), m.loss_trace.front());
}

TEST(Autoencoder, RecoversRankKSubspace) {
  Matrix x = low_rank(400, 6, 2, 3);
  AeParams p;
  p.epochs = 300;
  AeModel m = fit_autoencoder(x, 2, p, 2);
  const Matrix xs = m.scaler.apply(x);
  const double variance = xs.squaredNorm() / static_cast<double>(xs.size());
  EXPECT_LT(m.network.loss(xs), 0.01 * variance);
}

TEST(Autoencoder, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  LinearAutoencoder net = LinearAutoencoder::initialise(4, 5, 2, rng);
  const Matrix x = random_matrix(3, 4, 6);
  const AeWeights g = net.gradient(x);
  const double h = 1e-6;
  double worst = 0.0;
  auto& w = net.weights();
  for (std::size_t l = 0; l < 4; ++l) {
    auto probe = [&](double& slot, double analytic) {
      const double keep = slot;
      slot = keep + h;
      const double up = net.loss(x);
      slot = keep - h;
      const double down = net.loss(x);
      slot = keep;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(numeric - analytic) / std::max(1e-6, std::abs(numeric) + std::abs(analytic)));
    };
    for (Eigen::Index i = 0; i < w.w[l].size(); ++i) probe(w.w[l].data()[i], g.w[l].data()[i]);
    for (Eigen::Index i = 0; i < w.b[l].size(); ++i) probe(w.b[l].data()[i], g.b[l].data()[i]);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Autoencoder, DivergenceDetected) {
  AeParams p;
  p.learning_rate = 50.0;
  p.epochs = 50;
  expect_code(ErrorCode::DivergenceDetected, [&] { fit_autoencoder(random_matrix(100, 5, 1), 2, p, 0); });
}

// ---------------------------------------------------------------------------
// Shared contract

TEST(Baselines, OutputExactlyKColumns) {
  Matrix x = random_matrix(80, 6, 12);
  BaselineSettings s;
  s.som.epochs = 3;
  s.autoencoder.epochs = 3;
  for (auto kind : {BaselineKind::Pca, BaselineKind::Som, BaselineKind::Autoencoder})
    for (std::size_t k : {1u, 3u, 6u}) {
      FittedBaseline b = fit_baseline(kind, k, x, s, 5);
      EXPECT_EQ(b.k(), k);
      Matrix t = b.transform(random_matrix(9, 6, 13));
      EXPECT_EQ(t.cols(), static_cast<Eigen::Index>(k)) << to_string(kind);
      EXPECT_EQ(t.rows(), 9);
    }
  expect_code(ErrorCode::KTooLarge, [&] { fit_baseline(BaselineKind::Pca, 7, x, s, 0); });
  EXPECT_EQ(fit_baseline(BaselineKind::Som, 7, x, s, 0).k(), 7u);
}

TEST(Baselines, TestRowsDoNotLeak) {
  Matrix train = random_matrix(60, 4, 1);
  Matrix test = random_matrix(20, 4, 2);
  Matrix both(80, 4);
  both << train, test;
  BaselineSettings s;
  s.som.epochs = 5;
  s.autoencoder.epochs = 5;
  for (auto kind : {BaselineKind::Pca, BaselineKind::Som, BaselineKind::Autoencoder}) {
    FittedBaseline b = fit_baseline(kind, 2, train, s, 9);
    EXPECT_EQ(b.transform(both).bottomRows(20), b.transform(test)) << to_string(kind);
    EXPECT_EQ(b.transform(both).topRows(60), b.transform(train)) << to_string(kind);
  }
}

TEST(Baselines, KindNames) {
  for (auto kind : {BaselineKind::Pca, BaselineKind::Som, BaselineKind::Autoencoder})
    EXPECT_EQ(parse_baseline_kind(to_string(kind)), kind);
  expect_code(ErrorCode::ConfigInvalid, [] { parse_baseline_kind("umap"); });
}

}  // namespace
