#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "batchvr/glm.hpp"
#include "batchvr/random.hpp"
#include "helpers.hpp"

using namespace batchvr;

TEST_CASE("loss derivative scalars") {
  const SparseDataset ds(1, {0, 1, 2, 3}, {0, 0, 0}, {1.0, 1.0, 1.0}, {1.0, -1.0, 2.0});
  const SparseDataset bin(1, {0, 1, 2}, {0, 0}, {1.0, 1.0}, {1.0, -1.0});
  const CompositeObjective logit(bin, LossKind::Logistic, Regularizer::none());
  CHECK(logit.loss_derivative(0, 0.0) == 0.5);
  CHECK(logit.loss_derivative(1, 0.0) == -0.5);
  const CompositeObjective sq(ds, LossKind::SquaredError, Regularizer::none());
  CHECK(sq.loss_derivative(2, 2.0) == 0.0);

  // Guarded exponentials: finite and saturated at extreme margins.
  for (double m : {-1e4, -800.0, 800.0, 1e4}) {
    CHECK(std::isfinite(logit.loss_value(0, m)));
    CHECK(std::isfinite(logit.loss_derivative(0, m)));
  }
  CHECK(logit.loss_derivative(0, 1e4) == 1.0);
  CHECK(logit.loss_derivative(0, -1e4) == 0.0);
  CHECK(logit.loss_value(0, 1e4) == doctest::Approx(1e4));
}

TEST_CASE("logistic objective needs binary labels") {
  const SparseDataset ds(1, {0, 1}, {0}, {1.0}, {2.0});
  CHECK_THROWS_AS(CompositeObjective(ds, LossKind::Logistic, Regularizer::none()),
                  std::invalid_argument);
  CHECK_THROWS(Regularizer::l1(-1.0));
}

TEST_CASE("component gradient has the row's support") {
  const SparseDataset ds(2, {0, 1, 1}, {0}, {1.0}, {1.0, -1.0});
  const CompositeObjective obj(ds, LossKind::Logistic, Regularizer::none());
  const std::vector<double> w(2, 0.0);
  const SparseVector g = obj.component_gradient(0, w);
  REQUIRE(g.indices.size() == 1);
  CHECK(g.indices[0] == 0);
  CHECK(g.values[0] == 0.5);
  CHECK(obj.component_gradient(1, w).indices.empty());
  CHECK_THROWS_AS(obj.component_gradient(2, w), std::out_of_range);
}

TEST_CASE("full gradient equals the mean of component gradients") {
  Rng rng(5);
  const SparseDataset ds = testutil::random_dataset(rng, 3, 4, 0.7, true);
  const CompositeObjective obj(ds, LossKind::Logistic, Regularizer::l2(0.3));
  std::vector<double> w(4);
  for (double& v : w) v = rng.normal();
  const std::vector<double> full = obj.full_gradient(w);
  std::vector<double> mean(4, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    const SparseVector g = obj.component_gradient(i, w);
    for (std::size_t k = 0; k < g.indices.size(); ++k) mean[g.indices[k]] += g.values[k];
  }
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(full[j] - mean[j] / 3.0) <= 1e-15);

  const SparseDataset one = testutil::random_dataset(rng, 1, 4, 1.0, true);
  const CompositeObjective single(one, LossKind::Logistic, Regularizer::none());
  const SparseVector g = single.component_gradient(0, w);
  const std::vector<double> f = single.full_gradient(w);
  for (std::size_t k = 0; k < g.indices.size(); ++k) CHECK(f[g.indices[k]] == g.values[k]);
}

TEST_CASE("balanced labels on identical rows cancel at zero") {
  const SparseDataset ds(2, {0, 2, 4}, {0, 1, 0, 1}, {0.3, -2.0, 0.3, -2.0}, {1.0, -1.0});
  const CompositeObjective obj(ds, LossKind::Logistic, Regularizer::none());
  const std::vector<double> g = obj.full_gradient(std::vector<double>(2, 0.0));
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
}

TEST_CASE("objective value") {
  Rng rng(9);
  const SparseDataset ds = testutil::random_dataset(rng, 7, 3, 0.5, true);
  const CompositeObjective obj(ds, LossKind::Logistic, Regularizer::l1(0.2));
  CHECK(obj.objective_value(std::vector<double>(3, 0.0)) == doctest::Approx(std::log(2.0)));

  // Squared loss with zero residuals isolates the regulariser.
  const SparseDataset zero(2, {0, 0}, {}, {}, {0.0});
  const CompositeObjective l1(zero, LossKind::SquaredError, Regularizer::l1(1.0));
  CHECK(l1.objective_value(std::vector<double>{1.0, -2.0}) == 3.0);
  const CompositeObjective l2(zero, LossKind::SquaredError, Regularizer::l2(1.0));
  CHECK(l2.objective_value(std::vector<double>{1.0, -2.0}) == 2.5);
}

TEST_CASE("objective matches a dense evaluation") {
  Rng rng(21);
  for (LossKind loss : {LossKind::Logistic, LossKind::SquaredError}) {
    const SparseDataset ds = testutil::random_dataset(rng, 5, 4, 0.6, loss == LossKind::Logistic);
    const Eigen::MatrixXd X = testutil::dense(ds);
    Eigen::VectorXd w(4);
    for (int j = 0; j < 4; ++j) w[j] = rng.normal();
    for (Regularizer reg : {Regularizer::l1(0.1), Regularizer::l2(0.4), Regularizer::none()}) {
      const CompositeObjective obj(ds, loss, reg);
      const Eigen::VectorXd m = X * w;
      double f = 0.0;
      for (int i = 0; i < 5; ++i) {
        const double y = ds.label(static_cast<std::size_t>(i));
        f += loss == LossKind::Logistic ? std::log1p(std::exp(y * m[i])) : 0.5 * (m[i] - y) * (m[i] - y);
      }
      f /= 5.0;
      if (reg.kind == Regularizer::Kind::L1) f += reg.lambda * w.lpNorm<1>();
      if (reg.kind == Regularizer::Kind::L2) f += 0.5 * reg.lambda * w.squaredNorm();
      const std::vector<double> wv(w.data(), w.data() + 4);
      CHECK(std::abs(obj.objective_value(wv) - f) <= 1e-12);
    }
  }
}

TEST_CASE("estimate_constants") {
  // One row of squared norm 4.
  const SparseDataset ds(2, {0, 1}, {0}, {2.0}, {1.0});
  const CompositeObjective obj(ds, LossKind::Logistic, Regularizer::l2(0.1));
  const ProblemConstants c = obj.estimate_constants();
  CHECK(c.L == doctest::Approx(1.1));
  CHECK(c.mu == 0.1);
  CHECK(c.kappa == doctest::Approx(11.0));

  const SparseDataset eye(2, {0, 1, 2}, {0, 1}, {1.0, 1.0}, {0.5, -0.5});
  const CompositeObjective sq(eye, LossKind::SquaredError, Regularizer::none(), 0.5);
  const ProblemConstants s = sq.estimate_constants();
  CHECK(s.L == 1.0);
  CHECK(s.kappa == 2.0);

  const CompositeObjective l1(eye, LossKind::SquaredError, Regularizer::l1(0.1));
  CHECK_THROWS_AS(l1.estimate_constants(), MissingStrongConvexity);
  CHECK(l1.smoothness() == 1.0);
}

TEST_CASE("L bounds the largest Hessian eigenvalue") {
  Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const SparseDataset ds = testutil::random_dataset(rng, 10, 5, 0.6, true);
    const double lam = rng.uniform(0.0, 0.5);
    const CompositeObjective obj(ds, LossKind::Logistic, Regularizer::l2(lam));
    const Eigen::MatrixXd X = testutil::dense(ds);
    Eigen::VectorXd w(5);
    for (int j = 0; j < 5; ++j) w[j] = rng.normal();
    const Eigen::VectorXd m = X * w;
    Eigen::VectorXd dvec(10);
    for (int i = 0; i < 10; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-m[i]));
      dvec[i] = s * (1.0 - s);
    }
    const Eigen::MatrixXd H = X.transpose() * dvec.asDiagonal() * X / 10.0 +
                              lam * Eigen::MatrixXd::Identity(5, 5);
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff();
    CHECK(obj.smoothness() >= top - 1e-12);
    // The worst case over all w: curvature bound times the Gram matrix.
    const Eigen::MatrixXd G = 0.25 * X.transpose() * X / 10.0 + lam * Eigen::MatrixXd::Identity(5, 5);
    CHECK(obj.smoothness() >= Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().maxCoeff() - 1e-12);
  }
}

TEST_CASE("gradients match central finite differences") {
  Rng rng(77);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const bool logistic = trial % 2 == 0;
    const SparseDataset ds = testutil::random_dataset(rng, 6, 5, 0.6, logistic);
    const CompositeObjective obj(ds, logistic ? LossKind::Logistic : LossKind::SquaredError,
                                 Regularizer::none());
    std::vector<double> w(5);
    for (double& v : w) v = rng.normal();
    const std::vector<double> g = obj.full_gradient(w);
    const std::size_t i = static_cast<std::size_t>(rng.below(6));
    const SparseVector gi = obj.component_gradient(i, w);
    std::vector<double> gi_dense(5, 0.0);
    for (std::size_t k = 0; k < gi.indices.size(); ++k) gi_dense[gi.indices[k]] = gi.values[k];
    for (std::size_t j = 0; j < 5; ++j) {
      const double h = 1e-5;
      std::vector<double> wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd = (obj.smooth_value(wp) - obj.smooth_value(wm)) / (2 * h);
      const double fdi = (obj.loss_value(i, obj.margin(i, wp)) - obj.loss_value(i, obj.margin(i, wm))) / (2 * h);
      const double scale = std::max(1e-3, std::abs(g[j]));
      CHECK(std::abs(fd - g[j]) / scale < 1e-6);
      CHECK(std::abs(fdi - gi_dense[j]) / std::max(1e-3, std::abs(gi_dense[j])) < 1e-6);
      ++checked;
    }
  }
  CHECK(checked == 500);
}

TEST_CASE("convexity and smoothness witnesses") {
  Rng rng(88);
  for (int trial = 0; trial < 200; ++trial) {
    const bool logistic = trial % 2 == 0;
    const SparseDataset ds = testutil::random_dataset(rng, 8, 4, 0.5, logistic);
    const CompositeObjective obj(ds, logistic ? LossKind::Logistic : LossKind::SquaredError,
                                 Regularizer::none());
    std::vector<double> a(4), b(4);
    for (double& v : a) v = 2 * rng.normal();
    for (double& v : b) v = 2 * rng.normal();
    const std::vector<double> ga = obj.full_gradient(a);
    const std::vector<double> gb = obj.full_gradient(b);
    double lin = 0.0, dg = 0.0, dw = 0.0;
    for (int j = 0; j < 4; ++j) {
      lin += ga[j] * (b[j] - a[j]);
      dg += (ga[j] - gb[j]) * (ga[j] - gb[j]);
      dw += (a[j] - b[j]) * (a[j] - b[j]);
    }
    CHECK(obj.smooth_value(b) >= obj.smooth_value(a) + lin - 1e-12);
    CHECK(std::sqrt(dg) <= obj.smoothness() * std::sqrt(dw) + 1e-12);
  }
}
