#include <doctest.h>

#include <random>

#include "cgmm/dataset.hpp"
#include "cgmm/moments.hpp"
#include "test_util.hpp"

using namespace cgmm;

namespace {

Dataset RandomData(Index n, Index p, Index q, std::mt19937_64& rng) {
  return Dataset(test::RandomMatrix(n, p, rng), test::RandomVector(n, rng), test::RandomMatrix(n, q, rng));
}

}  // namespace

TEST_CASE("moment_count") {
  CHECK(MomentSpec{MomentFamily::kIv}.moment_count(2, 3) == 3);
  CHECK(MomentSpec{MomentFamily::kGcd}.moment_count(2, 3) == 6);
  CHECK(MomentSpec{MomentFamily::kHybrid}.moment_count(2, 3) == 9);
  CHECK(MomentSpec{MomentFamily::kOls}.moment_count(2, 3) == 2);
}

TEST_CASE("instrument_block: GCD univariate and IV") {
  std::mt19937_64 rng(10);
  const Dataset d = RandomData(8, 1, 1, rng);
  const Matrix g = instrument_block({MomentFamily::kGcd}, d);
  for (Index i = 0; i < 8; ++i) CHECK(g(i, 0) == d.E()(i, 0) * d.X()(i, 0));
  CHECK(instrument_block({MomentFamily::kIv}, d) == d.E());
  CHECK(instrument_block({MomentFamily::kOls}, d) == d.X());
}

TEST_CASE("instrument_block: hybrid concatenates IV and GCD blocks") {
  std::mt19937_64 rng(11);
  const Dataset d = RandomData(8, 2, 1, rng);
  const Matrix g = instrument_block({MomentFamily::kHybrid}, d);
  REQUIRE(g.cols() == 3);
  for (Index i = 0; i < 8; ++i) {
    CHECK(g(i, 0) == d.E()(i, 0));
    CHECK(g(i, 1) == d.E()(i, 0) * d.X()(i, 0));
    CHECK(g(i, 2) == d.E()(i, 0) * d.X()(i, 1));
  }
  MomentSpec literal{MomentFamily::kHybrid, true};
  const Matrix gx = instrument_block(literal, d);
  REQUIRE(gx.cols() == 4);
  CHECK(gx.leftCols(2) == d.X());
}

TEST_CASE("sample_moment: worked example") {
  Matrix e(2, 1), x(2, 1);
  Vector y(2), beta(1);
  e << 1, -1;
  x << 1, 2;
  y << 3, 5;
  beta << 1;
  const Vector m = sample_moment({MomentFamily::kGcd}, Dataset(x, y, e), beta);
  CHECK(m(0) == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("sample_moment: zero at exact fit") {
  std::mt19937_64 rng(12);
  const Matrix x = test::RandomMatrix(20, 3, rng);
  const Vector beta = test::RandomVector(3, rng);
  const Dataset d(x, x * beta, test::RandomMatrix(20, 2, rng));
  for (auto fam : {MomentFamily::kIv, MomentFamily::kGcd, MomentFamily::kHybrid, MomentFamily::kOls}) {
    CHECK(sample_moment({fam}, d, beta).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sample_moment rejects bad beta") {
  std::mt19937_64 rng(13);
  const Dataset d = RandomData(5, 2, 1, rng);
  CHECK_THROWS(sample_moment({MomentFamily::kGcd}, d, Vector::Zero(3)));
  Vector nan = Vector::Zero(2);
  nan(0) = std::nan("");
  CHECK_THROWS(sample_moment({MomentFamily::kGcd}, d, nan));
}

TEST_CASE("sample_moment is affine with slope minus the Jacobian") {
  std::mt19937_64 rng(14);
  for (auto fam : {MomentFamily::kIv, MomentFamily::kGcd, MomentFamily::kHybrid, MomentFamily::kOls}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Dataset d = RandomData(30, 1 + trial % 3, 1 + trial % 2, rng);
      const Vector beta = test::RandomVector(d.p(), rng);
      const Vector lhs = sample_moment({fam}, d, beta);
      const Vector rhs = sample_moment({fam}, d, Vector::Zero(d.p())) - moment_jacobian({fam}, d) * beta;
      CHECK(test::MaxRelDiff(lhs, rhs) < 1e-12);
    }
  }
}

TEST_CASE("moment_jacobian: univariate GCD and zero X") {
  std::mt19937_64 rng(15);
  const Dataset d = RandomData(9, 1, 1, rng);
  double oracle = 0.0;
  for (Index i = 0; i < 9; ++i) oracle += d.E()(i, 0) * d.X()(i, 0) * d.X()(i, 0);
  CHECK(moment_jacobian({MomentFamily::kGcd}, d)(0, 0) == doctest::Approx(oracle / 9.0).epsilon(1e-14));
  const Dataset zero(Matrix::Zero(9, 2), d.Y(), d.E());
  CHECK(moment_jacobian({MomentFamily::kIv}, zero).isZero(0.0));
}

TEST_CASE("moment_jacobian matches central finite differences") {
  std::mt19937_64 rng(16);
  const MomentSpec spec{MomentFamily::kHybrid};
  const Dataset d = RandomData(25, 3, 2, rng);
  const Vector beta = test::RandomVector(3, rng);
  const Matrix j = moment_jacobian(spec, d);
  const double h = 1e-4;
  for (Index c = 0; c < 3; ++c) {
    Vector up = beta, down = beta;
    up(c) += h;
    down(c) -= h;
    const Vector fd = -(sample_moment(spec, d, up) - sample_moment(spec, d, down)) / (2.0 * h);
    CHECK(test::MaxRelDiff(fd, j.col(c)) < 1e-8);
  }
}

TEST_CASE("two-environment GCD moment is a multiple of the CD constraint") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Index p = 1 + trial % 3;
    const auto t = test::RandomTwoEnv(7 + trial, 19, p, rng);
    const Index n0 = t.x0.rows(), n1 = t.x1.rows(), n = n0 + n1;
    Matrix x(n, p);
    x << t.x1, t.x0;
    Vector y(n);
    y << t.y1, t.y0;
    std::vector<std::string> labels(static_cast<std::size_t>(n), "b");
    for (Index i = 0; i < n1; ++i) labels[static_cast<std::size_t>(i)] = "a";
    const Dataset d = make_environment_dataset(x, y, EnvironmentLabels(labels));
    const Vector beta = test::RandomVector(p, rng);
    const Vector gcd = sample_moment({MomentFamily::kGcd}, d, beta);
    const Vector cd = t.x1.transpose() * (t.y1 - t.x1 * beta) / static_cast<double>(n1) -
                      t.x0.transpose() * (t.y0 - t.x0 * beta) / static_cast<double>(n0);
    // With the centered coding, m_GCD = (n0 n1 / n^2) times the CD difference.
    const double c = static_cast<double>(n0) * static_cast<double>(n1) / (static_cast<double>(n) * n);
    CHECK(test::MaxRelDiff(gcd, c * cd) < 1e-12);
  }
}

TEST_CASE("hybrid sample moment concatenates IV and GCD moments") {
  std::mt19937_64 rng(18);
  const Dataset d = RandomData(40, 2, 2, rng);
  const Vector beta = test::RandomVector(2, rng);
  const Vector iv = sample_moment({MomentFamily::kIv}, d, beta);
  const Vector gcd = sample_moment({MomentFamily::kGcd}, d, beta);
  const Vector hyb = sample_moment({MomentFamily::kHybrid}, d, beta);
  REQUIRE(hyb.size() == iv.size() + gcd.size());
  CHECK(hyb.head(iv.size()) == iv);
  CHECK(hyb.tail(gcd.size()) == gcd);
}

TEST_CASE("parse_family") {
  CHECK(parse_family("gcd") == MomentFamily::kGcd);
  CHECK(parse_family("hybrid") == MomentFamily::kHybrid);
  CHECK(to_string(MomentFamily::kIv) == "iv");
  CHECK_THROWS(parse_family("bogus"));
}
