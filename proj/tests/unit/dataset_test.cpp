#include <doctest.h>

#include <cmath>
#include <random>

#include "cgmm/dataset.hpp"
#include "cgmm/error.hpp"
#include "test_util.hpp"

using namespace cgmm;

TEST_CASE("encode_environments: balanced two environments") {
  const Matrix e = encode_environments(EnvironmentLabels({"A", "A", "B", "B"}));
  REQUIRE(e.cols() == 1);
  CHECK(e(0, 0) == 0.5);
  CHECK(e(1, 0) == 0.5);
  CHECK(e(2, 0) == -0.5);
  CHECK(e(3, 0) == -0.5);
}

TEST_CASE("encode_environments: unbalanced matches centered indicator") {
  const Matrix e = encode_environments(EnvironmentLabels({"A", "B", "B", "B"}));
  Vector indicator(4);
  indicator << 1, 0, 0, 0;
  const Vector oracle = indicator.array() - indicator.mean();
  CHECK((e.col(0) - oracle).cwiseAbs().maxCoeff() == 0.0);
  CHECK(e(0, 0) == 0.75);
  CHECK(e(1, 0) == -0.25);
}

TEST_CASE("encode_environments: single environment is rejected") {
  CHECK_THROWS_AS(EnvironmentLabels({"A", "A", "A", "A"}), InvalidInput);
}

TEST_CASE("encode_environments: reference is the last level") {
  const EnvironmentLabels labels({"b", "c", "a", "c", "b"});
  CHECK(labels.levels() == std::vector<std::string>{"a", "b", "c"});
  const Matrix e = encode_environments(labels);
  REQUIRE(e.cols() == 2);
  CHECK(e(2, 0) == doctest::Approx(1.0 - 1.0 / 5.0));
  CHECK(e(0, 1) == doctest::Approx(1.0 - 2.0 / 5.0));
}

TEST_CASE("encode_environments: columns have zero mean for random label multisets") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int r = 2 + static_cast<int>(rng() % 5);
    const int n = r + static_cast<int>(rng() % 40);
    std::vector<std::string> labels;
    for (int i = 0; i < n; ++i) labels.push_back("L" + std::to_string(i < r ? i : static_cast<int>(rng() % r)));
    const Matrix e = encode_environments(EnvironmentLabels(labels));
    CHECK(e.cols() == r - 1);
    for (Index j = 0; j < e.cols(); ++j) {
      CHECK(std::abs(e.col(j).sum()) <= 4.0 * n * std::numeric_limits<double>::epsilon());
    }
  }
}

TEST_CASE("rowwise_kronecker: index formula") {
  Matrix a(1, 2), b(1, 2);
  a << 1, 2;
  b << 3, 4;
  Matrix expected(1, 4);
  expected << 3, 4, 6, 8;
  CHECK(rowwise_kronecker(a, b) == expected);
}

TEST_CASE("rowwise_kronecker: single column and ones") {
  std::mt19937_64 rng(2);
  const Matrix a = test::RandomMatrix(6, 3, rng);
  const Matrix s = test::RandomMatrix(6, 1, rng);
  const Matrix out = rowwise_kronecker(a, s);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 3; ++j) CHECK(out(i, j) == a(i, j) * s(i, 0));
  CHECK(rowwise_kronecker(Matrix::Ones(6, 1), a) == a);
}

TEST_CASE("rowwise_kronecker: rows are vectorized outer products") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 4, q = 1 + trial % 3, p = 1 + trial % 4;
    const Matrix e = test::RandomMatrix(n, q, rng);
    const Matrix x = test::RandomMatrix(n, p, rng);
    const Matrix k = rowwise_kronecker(e, x);
    for (Index i = 0; i < n; ++i) {
      // Brute-force outer product E_i X_i^T, read out row by row of E.
      const Matrix outer = e.row(i).transpose() * x.row(i);
      for (Index j = 0; j < q; ++j)
        for (Index c = 0; c < p; ++c) CHECK(k(i, j * p + c) == outer(j, c));
    }
  }
}

TEST_CASE("rowwise_kronecker: row mismatch") {
  CHECK_THROWS_AS(rowwise_kronecker(Matrix::Ones(3, 1), Matrix::Ones(4, 1)), InvalidInput);
}

TEST_CASE("center_columns") {
  Matrix m(3, 1);
  m << 1, 2, 3;
  const Matrix c = center_columns(m);
  CHECK(c(0, 0) == -1.0);
  CHECK(c(1, 0) == 0.0);
  CHECK(c(2, 0) == 1.0);
  CHECK(center_columns(c) == c);
  Matrix k(2, 1);
  k << 5, 5;
  CHECK(center_columns(k).isZero(0.0));
}

TEST_CASE("Dataset validates shapes and finiteness") {
  const Matrix x = Matrix::Ones(3, 1);
  const Vector y = Vector::Ones(3);
  const Matrix e = Matrix::Ones(3, 1);
  CHECK_NOTHROW(Dataset(x, y, e));
  CHECK_THROWS_AS(Dataset(Matrix::Ones(1, 1), Vector::Ones(1), Matrix::Ones(1, 1)), InvalidInput);
  CHECK_THROWS_AS(Dataset(x, Vector::Ones(2), e), InvalidInput);
  CHECK_THROWS_AS(Dataset(Matrix(3, 0), y, e), InvalidInput);
  Matrix bad = x;
  bad(1, 0) = std::nan("");
  CHECK_THROWS_AS(Dataset(bad, y, e), InvalidInput);
}

namespace {
const CsvRoles kEnvRoles{"y", {"x1"}, {}, std::string("env")};
}

TEST_CASE("parse_csv: smallest environment file") {
  const Dataset d = parse_csv("y,x1,env\n1,2,obs\n2,3,obs\n3,5,intv\n4,4,intv\n", kEnvRoles);
  CHECK(d.n() == 4);
  CHECK(d.p() == 1);
  CHECK(d.q() == 1);
  REQUIRE(d.labels());
  // "obs" sorts last and is the reference; column codes membership of "intv".
  CHECK(d.E()(0, 0) == -0.5);
  CHECK(d.E()(2, 0) == 0.5);
}

TEST_CASE("parse_csv: NaN cell names the location") {
  try {
    parse_csv("y,x1,env\n1,2,obs\n2,NaN,obs\n3,5,intv\n", kEnvRoles);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(e.column() == 2);
    CHECK(std::string(e.what()).find("x1") != std::string::npos);
  }
}

TEST_CASE("parse_csv: distinct errors") {
  CHECK_THROWS_AS(parse_csv("y,x1,env\n1,2,obs\n2,3,obs\n", kEnvRoles), InvalidInput);
  CHECK_THROWS_AS(parse_csv("y,x2,env\n1,2,obs\n2,3,intv\n", kEnvRoles), ParseError);
  CHECK_THROWS_AS(parse_csv("", kEnvRoles), ParseError);
  CHECK_THROWS_AS(parse_csv("y,x1,env\n1,abc,obs\n2,3,intv\n", kEnvRoles), ParseError);
  CHECK_THROWS_AS(parse_csv("y,x1,env\n1,2\n2,3,intv\n", kEnvRoles), ParseError);
}

TEST_CASE("parse_csv: numeric instruments are centered, raw kept") {
  const CsvRoles roles{"y", {"x"}, {"z"}, std::nullopt};
  const Dataset d = parse_csv("y,x,z\n1,1,1\n2,3,2\n3,2,6\n", roles);
  CHECK(d.E()(0, 0) == -2.0);
  CHECK(d.E()(2, 0) == 3.0);
  CHECK(d.raw_instruments()(2, 0) == 6.0);
}

TEST_CASE("load_csv / to_csv round trip is bit exact") {
  std::mt19937_64 rng(4);
  const CsvRoles roles{"y", {"x1", "x2"}, {"e1", "e2"}, std::nullopt};
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix x = test::RandomMatrix(7, 2, rng) * 1e3;
    const Vector y = test::RandomVector(7, rng) * 1e-7;
    const Matrix raw = test::RandomMatrix(7, 2, rng);
    const Dataset d = parse_csv(to_csv(Dataset(x, y, center_columns(raw), {"y", {"x1", "x2"}, {"e1", "e2"}}, {}, raw)),
                                roles);
    CHECK(d.X() == x);
    CHECK(d.Y() == y);
    CHECK(d.raw_instruments() == raw);
  }
  const Dataset env = parse_csv("y,x1,env\n0.1,2,obs\n2,3,obs\n3,5,intv\n", kEnvRoles);
  const Dataset again = parse_csv(to_csv(env), kEnvRoles);
  CHECK(again.X() == env.X());
  CHECK(again.E() == env.E());
  CHECK(again.labels()->labels() == env.labels()->labels());
}

TEST_CASE("Dataset::center_xy and select_instruments") {
  std::mt19937_64 rng(5);
  const Matrix e = test::RandomMatrix(10, 3, rng);
  const Dataset d(test::RandomMatrix(10, 2, rng), test::RandomVector(10, rng), e);
  const Dataset c = d.center_xy();
  CHECK(c.X().colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(c.Y().sum()) < 1e-12);
  CHECK(c.E() == e);
  const Dataset s = d.select_instruments({2});
  CHECK(s.q() == 1);
  CHECK(s.E().col(0) == e.col(2));
  CHECK_THROWS_AS(d.select_instruments({3}), InvalidInput);
}
