#include <doctest.h>

#include <cmath>

#include "msfactor/errors.hpp"
#include "msfactor/whitening.hpp"
#include "test_support.hpp"

using namespace msf;

TEST_CASE("cholesky") {
  CHECK(cholesky(Eigen::MatrixXd::Identity(2, 2)).isApprox(Eigen::MatrixXd::Identity(2, 2)));

  Eigen::MatrixXd s(2, 2);
  s << 4, 2, 2, 3;
  const Eigen::MatrixXd l = cholesky(s);
  CHECK(l(0, 0) == doctest::Approx(2.0));
  CHECK(l(0, 1) == 0.0);
  CHECK(l(1, 0) == doctest::Approx(1.0));
  CHECK(l(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK((l * l.transpose() - s).norm() / s.norm() < 1e-10);

  Eigen::MatrixXd rank1(2, 2);
  rank1 << 1, 1, 1, 1;
  CHECK_THROWS_AS(cholesky(rank1), NotPositiveDefiniteError);

  Eigen::MatrixXd asym(2, 2);
  asym << 2, 1, 0, 2;
  CHECK_THROWS_AS(cholesky(asym), DomainError);
}

TEST_CASE("whiten small cases") {
  Eigen::MatrixXd x(2, 1);
  x << 1, -1;
  const Eigen::MatrixXd q = whiten(x);
  CHECK(q(0, 0) == doctest::Approx(0.7071068).epsilon(1e-7));
  CHECK(q(1, 0) == doctest::Approx(-0.7071068).epsilon(1e-7));

  Rng rng = make_rng(2);
  Eigen::MatrixXd g(6, 3);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = standard_normal(rng);
  const Eigen::MatrixXd frame = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(6, 3);
  CHECK((whiten(frame) - frame).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rank error carries the failing pivot") {
  Eigen::MatrixXd x(4, 3);
  x << 1, 1, 0, 2, 2, 1, 3, 3, 0, 4, 4, 1;
  try {
    whiten(x);
    FAIL("expected a rank error");
  } catch (const RankError& e) {
    CHECK(e.pivot() == 1);
  }
}

TEST_CASE("structured X has at most 2^j values per column, constant on cells") {
  Rng rng = make_rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rp = random_partition(8, 3, rng);
    const auto values = testing::random_values(3, rng);
    const Eigen::MatrixXd x = build_x(rp.indicator(), values);
    if (!rank_ok(x)) continue;
    const Eigen::MatrixXd q = whiten(x);
    for (int j = 1; j <= 3; ++j) {
      CHECK(testing::count_unique(q.col(j - 1), kGroupingTolerance) <= (1 << j));
      // grouping of the column refines to exactly the generating cells
      const auto labels = extract_column_partition(q.col(j - 1));
      for (const auto& [label, nodes] : rp.cells_at_level(j)) {
        for (int i : nodes) CHECK(labels[i] == labels[nodes.front()]);
      }
    }
  }
}

TEST_CASE("extract_column_partition") {
  Eigen::VectorXd c(4);
  c << 0.5, 0.5, -0.5, -0.5;
  CHECK(extract_column_partition(c, 1e-8) == std::vector<int>{0, 0, 1, 1});
  CHECK(extract_column_partition(Eigen::VectorXd::Constant(5, 3.0), 1e-3) == std::vector<int>(5, 0));
  Eigen::VectorXd d(5);
  d << 2.0, -1.0, 2.0 + 1e-10, 0.3, -1.0;
  CHECK(extract_column_partition(d, 1e-8) == std::vector<int>{0, 1, 0, 2, 1});
}

TEST_CASE("rank_ok") {
  Eigen::MatrixXd dup(3, 2);
  dup << 1, 1, 2, 2, 5, 5;
  CHECK_FALSE(rank_ok(dup));
  CHECK(rank_ok(Eigen::MatrixXd::Identity(5, 3)));

  // column 2 reuses column 1's split and values
  Rng rng = make_rng(8);
  const auto rp = random_partition(6, 1, rng);
  Eigen::MatrixXd w(6, 2);
  w.col(0) = rp.indicator().col(0);
  w.col(1) = w.col(0);
  const ColumnValues same{Eigen::Vector2d(0.7, 0.7), Eigen::Vector2d(-1.2, -1.2)};
  CHECK_FALSE(rank_ok(build_x(w, same)));
}

TEST_CASE("column j of Q depends only on columns 1..j of X") {
  Rng rng = make_rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10, k = 4;
    Eigen::MatrixXd x(n, k);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    const Eigen::MatrixXd q = whiten(x);
    for (int j = 0; j + 1 < k; ++j) {
      Eigen::MatrixXd perturbed = x;
      for (int c = j + 1; c < k; ++c) {
        for (int i = 0; i < n; ++i) perturbed(i, c) += standard_normal(rng);
      }
      const Eigen::MatrixXd qp = whiten(perturbed);
      CHECK((qp.leftCols(j + 1) - q.leftCols(j + 1)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("positive column rescaling leaves Q unchanged; Q is orthonormal") {
  Rng rng = make_rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + trial % 20, k = 1 + trial % 5;
    Eigen::MatrixXd x(n, k);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    Eigen::VectorXd c(k);
    for (int j = 0; j < k; ++j) c[j] = std::exp(standard_normal(rng));
    const Eigen::MatrixXd q = whiten(x);
    CHECK(orthonormality_error(q) <= 1e-10);
    CHECK((whiten(x * c.asDiagonal()) - q).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("whiten_backward matches finite differences") {
  Rng rng = make_rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 6, k = 3;
    Eigen::MatrixXd x(n, k), weights(n, k);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x.data()[i] = standard_normal(rng);
      weights.data()[i] = standard_normal(rng);
    }
    // f(X) = sum(weights .* Q(X)) + sum(Q(X).^3)
    auto f = [&](const Eigen::VectorXd& v) {
      const Eigen::MatrixXd q = whiten(v.reshaped(n, k));
      return (weights.array() * q.array()).sum() + q.array().cube().sum();
    };
    const Whitening wt = whiten_with_factor(x);
    const Eigen::MatrixXd grad_q = weights + 3.0 * wt.q.array().square().matrix();
    const Eigen::MatrixXd analytic = whiten_backward(x, wt, grad_q);
    const Eigen::VectorXd numeric = testing::central_difference(f, x.reshaped());
    CHECK(testing::max_relative_error(analytic.reshaped(), numeric) < 1e-7);
  }
}
