#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <random>

#include "drest/model_matrix.hpp"

using namespace drest;

namespace {

Dataset toy_dataset() {
  Dataset d;
  Eigen::VectorXd x(3), y(3), z1(3), z2(3);
  x << 1, 0, 1;
  y << 2.0, -0.5, 3.5;
  z1 << 0.5, -1.0, 2.0;
  z2 << 1.0, 2.0, 3.0;
  d.set_exposure("x", x);
  d.set_outcome("y", y);
  d.add_covariate("z1", z1);
  d.add_covariate("z2", z2);
  return d;
}

// Independent Harrell-form evaluation, kept deliberately separate from the
// library implementation.
double rcs_oracle(double x, const Eigen::VectorXd& t, int j) {
  auto cp = [](double u) { return u > 0 ? u * u * u : 0.0; };
  const auto k = t.size();
  const double norm = (t[k - 1] - t[0]) * (t[k - 1] - t[0]);
  return (cp(x - t[j]) - cp(x - t[k - 2]) * (t[k - 1] - t[j]) / (t[k - 1] - t[k - 2]) +
          cp(x - t[k - 1]) * (t[k - 2] - t[j]) / (t[k - 1] - t[k - 2])) /
         norm;
}

}  // namespace

TEST_CASE("compute_knots matches the linear-interpolation percentile oracle") {
  Eigen::VectorXd values(100);
  for (int i = 0; i < 100; ++i) values[i] = i + 1;
  Eigen::VectorXd pcts(4);
  pcts << 5, 35, 65, 95;
  const Eigen::VectorXd k = compute_knots(values, pcts);
  // frozen from the order-statistic interpolation oracle
  CHECK(k[0] == doctest::Approx(5.95).epsilon(1e-12));
  CHECK(k[1] == doctest::Approx(35.65).epsilon(1e-12));
  CHECK(k[2] == doctest::Approx(65.35).epsilon(1e-12));
  CHECK(k[3] == doctest::Approx(95.05).epsilon(1e-12));
}

TEST_CASE("compute_knots is invariant to input order") {
  std::mt19937 gen(42);
  Eigen::VectorXd values(57);
  for (int i = 0; i < values.size(); ++i)
    values[i] = std::uniform_real_distribution<>(-3, 9)(gen);
  Eigen::VectorXd pcts(3);
  pcts << 10, 50, 90;
  const Eigen::VectorXd k1 = compute_knots(values, pcts);
  std::shuffle(values.data(), values.data() + values.size(), gen);
  const Eigen::VectorXd k2 = compute_knots(values, pcts);
  CHECK(k1 == k2);
}

TEST_CASE("compute_knots rejects degenerate inputs") {
  Eigen::VectorXd pcts(3);
  pcts << 25, 50, 75;
  CHECK_THROWS_AS(compute_knots(Eigen::VectorXd::Constant(10, 4.2), pcts),
                  DegenerateKnotsError);
  Eigen::VectorXd two(6);
  two << 0, 1, 0, 1, 0, 1;
  CHECK_THROWS_AS(compute_knots(two, pcts), DegenerateKnotsError);
  Eigen::VectorXd bad_pcts(3);
  bad_pcts << 25, 25, 75;
  Eigen::VectorXd ok(5);
  ok << 1, 2, 3, 4, 5;
  CHECK_THROWS_AS(compute_knots(ok, bad_pcts), InputError);
}

TEST_CASE("rcs_basis vanishes at and left of the first knot") {
  SplineBasis basis;
  basis.covariate = "z";
  basis.knots.resize(4);
  basis.knots << 1, 2, 4, 8;
  Eigen::VectorXd x(2);
  x << 1.0, 0.0;
  const Eigen::MatrixXd b = rcs_basis(x, basis);
  REQUIRE(b.cols() == 3);
  CHECK(b(0, 0) == 1.0);
  CHECK(b(0, 1) == 0.0);
  CHECK(b(0, 2) == 0.0);
  CHECK(b(1, 1) == 0.0);
  CHECK(b(1, 2) == 0.0);
}

TEST_CASE("rcs_basis matches the hand-coded Harrell form") {
  SplineBasis basis;
  basis.covariate = "z";
  basis.knots.resize(4);
  basis.knots << 1, 2, 4, 8;
  Eigen::VectorXd x(8);
  x << 1.0, 2.0, 4.0, 8.0, 0.0, 3.0, 5.5, 10.0;
  const Eigen::MatrixXd b = rcs_basis(x, basis);
  // frozen spot values from the independent evaluation
  CHECK(b(1, 1) == doctest::Approx(0.02040816326530612).epsilon(1e-14));
  CHECK(b(3, 1) == doctest::Approx(4.714285714285714).epsilon(1e-14));
  CHECK(b(3, 2) == doctest::Approx(2.4489795918367347).epsilon(1e-14));
  CHECK(b(6, 1) == doctest::Approx(1.7391581632653061).epsilon(1e-14));
  CHECK(b(7, 2) == doctest::Approx(3.9183673469387754).epsilon(1e-14));
  for (int i = 0; i < x.size(); ++i)
    for (int j = 0; j + 2 < basis.knots.size(); ++j)
      CHECK(b(i, j + 1) == doctest::Approx(rcs_oracle(x[i], basis.knots, j)).epsilon(1e-13));
}

TEST_CASE("rcs_basis is linear beyond the boundary knots") {
  SplineBasis basis;
  basis.covariate = "z";
  basis.knots.resize(4);
  basis.knots << -2, 0, 1, 5;
  // arbitrary combination of the basis columns
  Eigen::Vector3d coef(0.7, -1.3, 2.1);
  auto f = [&](double v) {
    Eigen::VectorXd one(1);
    one << v;
    return (rcs_basis(one, basis) * coef)(0);
  };
  const double h = 1e-3;
  for (double v : {6.0, 9.0, 25.0, -3.0, -10.0}) {
    const double second = (f(v + h) - 2.0 * f(v) + f(v - h)) / (h * h);
    CHECK(std::abs(second) < 1e-6);
  }
}

TEST_CASE("model spec grammar round-trips and validates") {
  const ModelSpec spec = ModelSpec::parse("1, z1, x*z1, rcs(z2, 5 35 65 95)", "y");
  REQUIRE(spec.terms.size() == 4);
  CHECK(spec.terms[0].kind == Term::Kind::Intercept);
  CHECK(spec.terms[2].kind == Term::Kind::Product);
  CHECK(spec.terms[3].kind == Term::Kind::Spline);
  CHECK(spec.terms[3].percentiles.size() == 4);
  CHECK(spec.response == "y");

  CHECK_THROWS_AS(ModelSpec::parse("1, 1, z1"), InputError);
  CHECK_THROWS_AS(ModelSpec::parse("z1, z1"), InputError);
  CHECK_THROWS_AS(ModelSpec::parse("z1*z2, z2*z1"), InputError);
  CHECK_THROWS_AS(ModelSpec::parse("rcs(z1, 5 35)"), InputError);
  CHECK_THROWS_AS(ModelSpec::parse("rcs(z1, 5 35 120)"), InputError);
  CHECK_THROWS_AS(ModelSpec::parse(""), InputError);
}

TEST_CASE("build_design: intercept only") {
  const Dataset d = toy_dataset();
  const DesignMatrix m = build_design(d, ModelSpec::parse("1"));
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 1);
  CHECK(m.values == Eigen::MatrixXd::Ones(3, 1));
  CHECK(m.labels[0] == "1");
}

TEST_CASE("build_design matches a hand-computed interaction matrix") {
  Dataset d;
  Eigen::VectorXd x(2), y(2), z1(2), z2(2);
  x << 1, 0;
  y << 0, 0;
  z1 << 2.0, -3.0;
  z2 << 5.0, 0.5;
  d.set_exposure("x", x);
  d.set_outcome("y", y);
  d.add_covariate("z1", z1);
  d.add_covariate("z2", z2);
  const DesignMatrix m = build_design(d, ModelSpec::parse("1, z1, z2, z1*z2"));
  Eigen::MatrixXd expected(2, 4);
  expected << 1, 2, 5, 10, 1, -3, 0.5, -1.5;
  CHECK(m.values == expected);
  CHECK(m.labels == std::vector<std::string>{"1", "z1", "z2", "z1*z2"});
}

TEST_CASE("build_design reproduces the centered-quadratic misspecified design") {
  Dataset d;
  Eigen::VectorXd x(3), y(3), z1(3), dev2(3);
  x << 1, 0, 1;
  y << 0, 0, 0;
  z1 << 150.0, 155.0, 163.0;
  for (int i = 0; i < 3; ++i) dev2[i] = (z1[i] - 155.0) * (z1[i] - 155.0);
  d.set_exposure("x", x);
  d.set_outcome("y", y);
  d.add_covariate("z1", z1);
  d.add_covariate("z1_dev2", dev2);
  const DesignMatrix m = build_design(d, ModelSpec::parse("1, x, z1_dev2"));
  CHECK(m.cols() == 3);
  CHECK(m.values(0, 2) == 25.0);
  CHECK(m.values(1, 2) == 0.0);
  CHECK(m.values(2, 2) == 64.0);
}

TEST_CASE("build_design errors: unknown covariate, non-finite input") {
  const Dataset d = toy_dataset();
  CHECK_THROWS_AS(build_design(d, ModelSpec::parse("1, nope")), SchemaError);

  Dataset bad = toy_dataset();
  Eigen::VectorXd z(3);
  z << 1.0, std::numeric_limits<double>::infinity(), 2.0;
  bad.add_covariate("zinf", z);
  CHECK_THROWS_AS(build_design(bad, ModelSpec::parse("1, zinf")), InputError);
}

TEST_CASE("build_design row order follows the dataset row order") {
  std::mt19937 gen(7);
  Dataset d;
  const int n = 40;
  Eigen::VectorXd x(n), y(n), z1(n), z2(n);
  for (int i = 0; i < n; ++i) {
    x[i] = i % 2;
    y[i] = std::normal_distribution<>()(gen);
    z1[i] = std::normal_distribution<>(2.0, 1.5)(gen);
    z2[i] = std::uniform_real_distribution<>()(gen);
  }
  d.set_exposure("x", x);
  d.set_outcome("y", y);
  d.add_covariate("z1", z1);
  d.add_covariate("z2", z2);

  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);

  const ModelSpec spec = ModelSpec::parse("1, z1, z1*z2, rcs(z2, 10 50 90)");
  const DesignMatrix base = build_design(d, spec);
  const DesignMatrix shuffled = build_design(d.permuted(perm), spec);
  for (int i = 0; i < n; ++i)
    CHECK(shuffled.values.row(i) == base.values.row(perm[i]));
}

TEST_CASE("build_design is deterministic") {
  const Dataset d = toy_dataset();
  const ModelSpec spec = ModelSpec::parse("1, z1, z2, x*z2");
  const DesignMatrix a = build_design(d, spec);
  const DesignMatrix b = build_design(d, spec);
  CHECK(a.values == b.values);
  CHECK(a.labels == b.labels);
}
