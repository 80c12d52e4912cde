#include <doctest.h>

#include <cmath>

#include "msfactor/errors.hpp"
#include "msfactor/prior.hpp"
#include "msfactor/whitening.hpp"
#include "test_support.hpp"

using namespace msf;

TEST_CASE("build_x") {
  Eigen::MatrixXd w(2, 1);
  w << 1, 0;
  const Eigen::MatrixXd x = build_x(w, {Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Constant(1, -1.0)});
  CHECK(x(0, 0) == 2.0);
  CHECK(x(1, 0) == -1.0);

  const ColumnValues v{Eigen::Vector2d(1.5, -0.3), Eigen::Vector2d(0.2, 0.9)};
  const Eigen::MatrixXd ones = build_x(Eigen::MatrixXd::Ones(4, 2), v);
  CHECK((ones.col(0).array() == 1.5).all());
  CHECK((ones.col(1).array() == -0.3).all());
  CHECK_FALSE(rank_ok(ones));

  const Eigen::MatrixXd half = build_x(Eigen::MatrixXd::Constant(3, 1, 0.5), {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)});
  CHECK((half.array() == 0.5).all());

  CHECK_THROWS_AS(build_x(Eigen::MatrixXd::Ones(3, 2), {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)}), DimensionError);
}

TEST_CASE("sample_prior") {
  SUBCASE("full rank and deterministic") {
    Rng r1 = make_rng(21), r2 = make_rng(21);
    const PriorDraw d1 = sample_prior(8, 2, r1);
    const PriorDraw d2 = sample_prior(8, 2, r2);
    CHECK(rank_ok(build_x(d1.structured)));
    CHECK(d1.structured.w == d2.structured.w);
    CHECK(d1.values.a == d2.values.a);
    CHECK(((d1.structured.w.array() == 0.0) || (d1.structured.w.array() == 1.0)).all());
  }
  SUBCASE("single column, single node") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng = make_rng(seed);
      CHECK(sample_prior(1, 1, rng).attempts == 1);
    }
  }
  SUBCASE("full-scale draws stay within the attempt cap") {
    int total_attempts = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng = make_rng(seed);
      const PriorDraw d = sample_prior(128, 30, rng);
      CHECK(rank_ok(build_x(d.structured)));
      total_attempts += d.attempts;
    }
    const double rejection_rate = 1.0 - 50.0 / total_attempts;
    MESSAGE("n=128, k=30 prior rejection rate: " << rejection_rate);
    CHECK(rejection_rate < 1.0);
  }
  SUBCASE("n < k") {
    Rng rng = make_rng(1);
    CHECK_THROWS_AS(sample_prior(2, 3, rng), DimensionError);
  }
  SUBCASE("attempt cap") {
    // n = k = 2 with p near 0 or 1 almost always gives two constant columns
    int rejections = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng = make_rng(seed);
      try {
        sample_prior(2, 2, rng, 1);
      } catch (const PriorRejectionError&) {
        ++rejections;
      }
    }
    CHECK(rejections > 0);
  }
}

TEST_CASE("row exchangeability of sample_prior") {
  // Chi-squared homogeneity of Pr(w_i1 = 1) across rows.
  const int n = 6, draws = 3000;
  std::vector<double> ones(n, 0.0);
  for (int s = 0; s < draws; ++s) {
    Rng rng = make_rng(1000 + s);
    const PriorDraw d = sample_prior(n, 2, rng);
    for (int i = 0; i < n; ++i) ones[i] += d.structured.w(i, 0);
  }
  double total = 0.0;
  for (double o : ones) total += o;
  const double expected1 = total / n, expected0 = draws - expected1;
  double chi2 = 0.0;
  for (double o : ones) {
    chi2 += (o - expected1) * (o - expected1) / expected1 + (o - expected1) * (o - expected1) / expected0;
  }
  CHECK(chi2 < 20.52);  // chi-squared(5) 0.999 quantile
}

TEST_CASE("log_g") {
  CHECK(log_g(Eigen::MatrixXd::Ones(1, 1), {Eigen::VectorXd::Constant(1, 0.5)}) == doctest::Approx(-0.6931472));
  CHECK(log_g(Eigen::MatrixXd::Ones(5, 3), {Eigen::VectorXd::Constant(3, 0.5)}) == doctest::Approx(15 * std::log(0.5)));
  Eigen::MatrixXd w(2, 2);
  w << 1, 0, 0, 1;
  CHECK(log_g(w, {Eigen::Vector2d(0.2, 0.7)}) == doctest::Approx(-3.393229).epsilon(1e-6));
  CHECK_THROWS_AS(log_g(w, {Eigen::Vector2d(0.0, 0.7)}), DomainError);
  CHECK_THROWS_AS(log_g(w, {Eigen::Vector2d(0.2, 1.0)}), DomainError);
}

TEST_CASE("log_gaussian_ab") {
  CHECK(log_gaussian_ab({Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)}) == 0.0);
  CHECK(log_gaussian_ab({Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -1.0)}) == -1.0);
  CHECK(log_gaussian_ab({Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 0)}) == -2.5);
}

TEST_CASE("log_det_m_term") {
  CHECK(log_det_m_term(Eigen::MatrixXd::Identity(6, 3)) == doctest::Approx(0.0));
  Eigen::MatrixXd x(2, 1);
  x << 1, -1;
  CHECK(log_det_m_term(x) == 0.0);
  Eigen::MatrixXd x3(3, 2);
  x3 << 1, 0, 1, 1, 0, 1;
  CHECK(log_det_m_term(x3) == 0.0);
  Eigen::MatrixXd x4(4, 2);
  x4 << 1, 0, 1, 1, 0, 1, 0, 0;
  CHECK(log_det_m_term(x4) == doctest::Approx(0.5 * std::log(3.0)));
  Eigen::MatrixXd flat(4, 2);
  flat << 1, 2, 1, 2, 1, 2, 1, 2;
  CHECK_THROWS_AS(log_det_m_term(flat), RankError);
}

TEST_CASE("label swap leaves X unchanged and maps log_g to p -> 1 - p") {
  Rng rng = make_rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 7, k = 3;
    const PriorDraw d = sample_prior(n, k, rng);
    const int j = trial % k;
    StructuredMatrix swapped = d.structured;
    std::swap(swapped.values.a[j], swapped.values.b[j]);
    swapped.w.col(j) = (1.0 - swapped.w.col(j).array()).matrix();
    MixtureProbs flipped = d.probs;
    flipped.p[j] = 1.0 - flipped.p[j];
    CHECK(build_x(swapped) == build_x(d.structured));
    CHECK(whiten(build_x(swapped)) == whiten(build_x(d.structured)));
    CHECK(log_g(swapped.w, flipped) == doctest::Approx(log_g(d.structured.w, d.probs)));
  }
}
