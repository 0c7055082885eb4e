#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "oracles.hpp"

#include "sadi/occupation.hpp"

#include <cmath>

using namespace sadi;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v(k++) = x;
  return v;
}

TestFunction linear(const Vector& a) {
  return {"lin", [a](const Vector& x) { return a.dot(x); }, [a](const Vector&) { return a; }, 0.0};
}

// g(x) = ½ xᵀAx + bᵀx
TestFunction quadratic(const Matrix& A, const Vector& b) {
  return {"quad", [A, b](const Vector& x) { return 0.5 * x.dot(A * x) + b.dot(x); },
          [A, b](const Vector& x) { return Vector(A * x + b); }, 0.0};
}

Trajectory sgd_run(std::int64_t N, std::uint64_t seed) {
  return run_sgd(abs_function(), vec({1}), StepSchedule::power(1.0, 0.6), NoiseModel::gaussian(0.5), N, seed);
}

}  // namespace

TEST_CASE("accumulate examples") {
  Trajectory t(1, vec({1}), 0);
  t.push_step(vec({0.5}), vec({0}), 0.5, 0.0);
  const auto mu = accumulate(t);
  REQUIRE(mu.size() == 1);
  CHECK(mu.total_weight() == 0.5);
  CHECK(mu.position(0)(0) == 1.0);
  CHECK(mu.velocity(0)(0) == -1.0);

  OccupationMeasure two(1);
  two.add(vec({0}), vec({1}), 0.3);
  two.add(vec({5}), vec({1}), 0.3);
  CHECK(residence_time(two, Ball{vec({0}), 1.0}) == 0.5);
}

TEST_CASE("merge equals concatenation") {
  const auto t = sgd_run(5000, 3);
  auto a = accumulate_range(t, 0, 2000);
  a.merge(accumulate_range(t, 2000, 5000));
  const auto whole = accumulate(t);
  REQUIRE(a.size() == whole.size());
  CHECK(a.total_weight() == whole.total_weight());
  for (std::size_t j = 0; j < a.size(); ++j) {
    CHECK(a.position(j) == whole.position(j));
    CHECK(a.velocity(j) == whole.velocity(j));
    CHECK(a.weight(j) == whole.weight(j));
  }
  const auto g = quadratic(Matrix::Identity(1, 1), vec({0.3}));
  CHECK(closed_residual(a, g) == closed_residual(whole, g));
  CHECK(residence_time(a, Ball{vec({0}), 0.1}) == residence_time(whole, Ball{vec({0}), 0.1}));
  CHECK(velocity_moment(a, 2.0) == velocity_moment(whole, 2.0));
}

TEST_CASE("total weight and mass") {
  const auto t = sgd_run(20000, 4);
  const auto mu = accumulate(t);
  double s = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) s += mu.weight(j);
  CHECK(std::abs(mu.total_weight() - s) <= 1e-12 * s);
  CHECK(std::abs(mu.total_weight() - t.time(t.steps())) <= 1e-12 * s);
  auto [lo, hi] = mu.bounding_box();
  CHECK(residence_time(mu, Box{lo, Vector(hi.array() + 1.0)}) == 1.0);
}

TEST_CASE("thinning keeps the total weight") {
  const auto t = sgd_run(10000, 5);
  OccupationMeasure mu(1, 1000, 9);
  for (std::int64_t j = 0; j < t.steps(); ++j) mu.add(t.state(j), t.velocity(j), t.step(j));
  CHECK(mu.thinned());
  CHECK(mu.size() <= 1000);
  CHECK(std::abs(mu.total_weight() - accumulate(t).total_weight()) <= 1e-12 * mu.total_weight());
  double s = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) s += mu.weight(j);
  CHECK(std::abs(s - mu.total_weight()) <= 1e-12 * s);
}

TEST_CASE("residence_time examples and additivity") {
  OccupationMeasure mu(2);
  mu.add(vec({0, 0}), vec({1, 0}), 1.0);
  mu.add(vec({0.5, 0.5}), vec({1, 0}), 1.0);
  CHECK(residence_time(mu, Ball{vec({0, 0}), 10.0}) == 1.0);
  CHECK(residence_time(mu, Ball{vec({5, 5}), 1.0}) == 0.0);
  CHECK(residence_time(mu, Ball{vec({0, 0}), 0.1}) == 0.5);

  const auto t = sgd_run(20000, 6);
  const auto m = accumulate(t);
  // Half-open boxes tile the line.
  const double left = residence_time(m, Box{vec({-10}), vec({0})});
  const double mid = residence_time(m, Box{vec({0}), vec({0.01})});
  const double right = residence_time(m, Box{vec({0.01}), vec({10})});
  const double all = residence_time(m, Box{vec({-10}), vec({10})});
  CHECK(std::abs((left + mid + right) - all) <= 1e-12);
  CHECK(all == doctest::Approx(1.0));
}

TEST_CASE("essential accumulation examples") {
  OccupationMeasure point(2);
  for (int k = 0; k < 10; ++k) point.add(vec({0.33, -0.71}), vec({0, 0}), 1.0);
  auto cells = essential_accumulation_estimate({point, point}, 0.1, 1.0);
  REQUIRE(cells.size() == 1);
  CHECK(contains(cells[0].box, vec({0.33, -0.71})));

  OccupationMeasure two(1);
  for (int k = 0; k < 50; ++k) {
    two.add(vec({0.001 * k}), vec({0}), 1.0);
    two.add(vec({10 + 0.001 * k}), vec({0}), 1.0);
  }
  cells = essential_accumulation_estimate({two}, 0.1, 0.4);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].peak_residence == doctest::Approx(0.5));
  CHECK(cells[1].peak_residence == doctest::Approx(0.5));
  CHECK_THROWS_AS((void)essential_accumulation_estimate({}, 0.1, 0.4), std::invalid_argument);
}

TEST_CASE("essential accumulation uses only the later checkpoints") {
  OccupationMeasure early(1), late(1);
  early.add(vec({5}), vec({0}), 1.0);
  late.add(vec({0}), vec({0}), 1.0);
  const auto cells = essential_accumulation_estimate({early, early, late, late}, 0.5, 0.5);
  REQUIRE(cells.size() == 1);
  CHECK(contains(cells[0].box, vec({0})));
}

TEST_CASE("closed_residual examples") {
  OccupationMeasure mu(2);
  mu.add(vec({1, 2}), vec({0.3, -0.4}), 1.0);
  mu.add(vec({1, 2}), vec({-0.3, 0.4}), 1.0);
  const auto q = quadratic(Matrix::Identity(2, 2), vec({1, -1}));
  CHECK(closed_residual(mu, q) == 0.0);

  OccupationMeasure one(2);
  one.add(vec({1, 2}), vec({0.3, -0.4}), 0.7);
  CHECK(closed_residual(one, linear(vec({2, 1}))) == doctest::Approx(0.2));
}

TEST_CASE("circulation examples") {
  const auto mu = accumulate(sgd_run(5000, 7));
  CHECK(circulation(mu, [](const Vector& x) { return Vector(Vector::Zero(x.size())); }) == 0.0);
  const auto g = quadratic(2.0 * Matrix::Identity(1, 1), vec({0.5}));
  CHECK(circulation(mu, g.gradient) == closed_residual(mu, g));
}

TEST_CASE("interpolated_residual examples") {
  Trajectory still(1, vec({2}), 0);
  for (int k = 0; k < 5; ++k) still.push_step(vec({2}), vec({0}), 0.1, 0.0);
  CHECK(interpolated_residual(still, linear(vec({1}))) == 0.0);

  const auto t = sgd_run(1000, 8);
  const double expected = (t.last_state()(0) - t.state(0)(0)) / t.time(t.steps());
  CHECK(interpolated_residual(t, linear(vec({1}))) == expected);

  Trajectory empty(1, vec({0}), 0);
  CHECK_THROWS((void)interpolated_residual(empty, linear(vec({1}))));
}

TEST_CASE("telescoping identity matches quadrature") {
  const auto t = run_sgd(l1_norm(2), vec({1, -0.5}), StepSchedule::power(0.5, 0.7), NoiseModel::gaussian(0.4), 400, 9);
  std::vector<Vector> xs, vs;
  std::vector<double> eps;
  for (std::int64_t j = 0; j < t.steps(); ++j) {
    xs.emplace_back(t.state(j));
    vs.emplace_back(t.velocity(j));
    eps.push_back(t.step(j));
  }
  Matrix A(2, 2);
  A << 2.0, 0.5, 0.5, 1.0;
  const auto g = quadratic(A, vec({0.2, -0.3}));
  const double quad = oracle::path_average(xs, vs, eps, g.gradient, 1000000);
  CHECK(std::abs(interpolated_residual(t, g) - quad) <= 1e-8);
}

TEST_CASE("interpolation_bound examples") {
  Trajectory still(1, vec({2}), 0);
  for (int k = 0; k < 5; ++k) still.push_step(vec({2}), vec({0}), 0.1, 0.0);
  CHECK(interpolation_bound(still, 3.0) == 0.0);

  Trajectory jump(1, vec({0}), 0);
  jump.push_step(vec({4}), vec({0}), 2.0, 0.0);  // ε‖v‖ = 4 ≥ 1
  CHECK(interpolation_bound(jump, 3.0) == doctest::Approx(3.0 * 4.0 / 2.0));
}

TEST_CASE("residual sandwich on every bank function") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto t = sgd_run(50000, seed);
    const auto mu = accumulate(t);
    auto [lo, hi] = mu.bounding_box();
    const auto bank = make_test_bank(lo, hi);
    REQUIRE(bank.functions.size() >= 5);
    for (const auto& g : bank.functions) {
      const double gap = std::abs(closed_residual(mu, g) - interpolated_residual(t, g));
      CHECK(gap <= interpolation_bound(t, g.gradient_bound) + 1e-9);
    }
  }
  const auto t2 = run_sgd(l1_norm(2), vec({1, -0.5}), StepSchedule::power(0.5, 0.7), NoiseModel::gaussian(0.4), 20000, 2);
  const auto mu2 = accumulate(t2);
  auto [lo2, hi2] = mu2.bounding_box();
  for (const auto& g : make_test_bank(lo2, hi2).functions) {
    const double gap = std::abs(closed_residual(mu2, g) - interpolated_residual(t2, g));
    CHECK(gap <= interpolation_bound(t2, g.gradient_bound) + 1e-9);
  }
}

TEST_CASE("bank gradients match finite differences") {
  const Vector lo = vec({-1, -0.5}), hi = vec({2, 1});
  const auto bank = make_test_bank(lo, hi, 3, 4, 11);
  Rng rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& g : bank.functions) {
    for (int trial = 0; trial < 20; ++trial) {
      const Vector x = lo + (hi - lo).cwiseProduct(vec({u(rng), u(rng)}));
      const Vector grad = g.gradient(x);
      for (int k = 0; k < 2; ++k) {
        const Vector e = Vector::Unit(2, k);
        CHECK(std::abs(oracle::directional_fd(g.value, x, e) - grad(k)) <= 1e-4);
      }
    }
  }
  for (const auto& psi : bank.weights) {
    const double v = psi.value(vec({0.1, 0.2}));
    CHECK(std::isfinite(v));
    CHECK(std::abs(v) <= 1.0 + 1e-12);
  }
}

TEST_CASE("bank gradient bounds dominate sampled Lipschitz and sup estimates") {
  const Vector lo = vec({-0.3}), hi = vec({1.2});
  const auto bank = make_test_bank(lo, hi, 3, 3, 5);
  for (const auto& g : bank.functions) {
    double sup = 0.0, lip = 0.0;
    Vector prev;
    for (int k = 0; k <= 3000; ++k) {
      const Vector x = vec({lo(0) + (hi(0) - lo(0)) * k / 3000.0});
      const Vector grad = g.gradient(x);
      sup = std::max(sup, grad.norm());
      if (k > 0) lip = std::max(lip, (grad - prev).norm() / ((hi(0) - lo(0)) / 3000.0));
      prev = grad;
    }
    CHECK(g.gradient_bound >= 2.0 * sup - 1e-12);
    CHECK(g.gradient_bound >= lip - 1e-9);
  }
}

TEST_CASE("centroid field examples") {
  OccupationMeasure pm(1);
  pm.add(vec({0.5}), vec({2}), 1.0);
  pm.add(vec({0.5}), vec({-2}), 1.0);
  CHECK(centroid_field_estimate(pm, vec({0.5}), 0.1)->norm() == 0.0);

  OccupationMeasure one(2);
  one.add(vec({1, 1}), vec({0.3, -0.7}), 0.2);
  CHECK(*centroid_field_estimate(one, vec({1, 1}), 0.05) == vec({0.3, -0.7}));
  CHECK_FALSE(centroid_field_estimate(one, vec({3, 3}), 0.05).has_value());

  // Clusters 10 apart with h = 0.05.
  OccupationMeasure clusters(1);
  Rng rng(1);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01), vel(-1.0, 1.0), w(0.1, 1.0);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double wa = w(rng), va = vel(rng);
    clusters.add(vec({jitter(rng)}), vec({va}), wa);
    num += wa * va;
    den += wa;
    clusters.add(vec({10 + jitter(rng)}), vec({vel(rng)}), w(rng));
  }
  // The kernel varies across a cluster of width 0.02; compare against the kernel-weighted mean.
  const auto est = centroid_field_estimate(clusters, vec({0}), 0.05);
  double knum = 0.0, kden = 0.0;
  for (std::size_t j = 0; j < clusters.size(); ++j) {
    const double d = clusters.position(j)(0);
    if (std::abs(d) > 1) continue;
    const double kw = clusters.weight(j) * std::exp(-d * d / (2 * 0.05 * 0.05));
    knum += kw * clusters.velocity(j)(0);
    kden += kw;
  }
  CHECK(std::abs((*est)(0) - knum / kden) <= 1e-6);

  OccupationMeasure tight(1);
  double tnum = 0.0, tden = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double wa = w(rng), va = vel(rng);
    tight.add(vec({1e-6 * jitter(rng)}), vec({va}), wa);
    tnum += wa * va;
    tden += wa;
    tight.add(vec({10}), vec({vel(rng)}), w(rng));
  }
  CHECK(std::abs((*centroid_field_estimate(tight, vec({0}), 0.05))(0) - tnum / tden) <= 1e-6);
  (void)num;
  (void)den;
}

TEST_CASE("centroid membership examples") {
  const SetValuedMap minus(1, [](const Vector& x) { return Polytope({Vector(-x)}); });
  Trajectory one(1, vec({0.8}), 0);
  one.push_step(vec({0.0}), vec({0}), 1.0, 0.0);
  const auto mu = accumulate(one);
  CHECK(centroid_membership_gap(mu, minus, {vec({0.8})}, 0.1).gap <= 1e-9);

  // Samples on the graph of x ↦ −x, separated by ≫ h.
  OccupationMeasure graph(1);
  std::vector<Vector> probes;
  for (int k = 0; k < 20; ++k) {
    const double x = -1.0 + 0.1 * k;
    graph.add(vec({x}), vec({-x}), 1.0);
    probes.push_back(vec({x}));
  }
  const auto gap = centroid_membership_gap(graph, minus, probes, 1e-3);
  CHECK(gap.gap <= 1e-6);
  CHECK(gap.defined == probes.size());
  CHECK_THROWS_AS((void)centroid_membership_gap(graph, minus, {vec({50})}, 1e-3), std::domain_error);
}

TEST_CASE("oscillation statistic examples and linearity") {
  OccupationMeasure mu(1);
  for (int k = 0; k < 10; ++k) mu.add(vec({0.1 * k}), vec({k % 2 ? 1.0 : -1.0}), 1.0);
  CHECK(oscillation_statistic(mu, constant_weight(0.0)).average.norm() == 0.0);
  CHECK_FALSE(oscillation_statistic(mu, constant_weight(0.0)).conditional().has_value());
  CHECK(oscillation_statistic(mu, constant_weight(1.0)).average.norm() == 0.0);

  OccupationMeasure drift(2);
  for (int k = 0; k < 10; ++k) drift.add(vec({0.1 * k, 0}), vec({0.5, -1}), 0.1 + k);
  CHECK((oscillation_statistic(drift, constant_weight(1.0)).average - vec({0.5, -1})).norm() < 1e-15);

  const auto t = run_sgd(l1_norm(2), vec({1, -0.5}), StepSchedule::power(0.5, 0.7), NoiseModel::gaussian(0.4), 20000, 3);
  const auto m = accumulate(t);
  const auto psi1 = bump_weight(vec({0, 0}), 0.5);
  const WeightFunction psi2{"sig", [](const Vector& x) { return 1.0 / (1.0 + std::exp(-3.0 * x(0))); }};
  const WeightFunction sum{"sum", [&](const Vector& x) { return psi1.value(x) + psi2.value(x); }};
  const auto s = oscillation_statistic(m, sum);
  const auto a = oscillation_statistic(m, psi1);
  const auto b = oscillation_statistic(m, psi2);
  CHECK((s.average - (a.average + b.average)).norm() <= 1e-12 * (1.0 + s.average.norm()));
  CHECK(std::abs(s.psi_mass - (a.psi_mass + b.psi_mass)) <= 1e-12);
}

TEST_CASE("velocity_moment examples") {
  OccupationMeasure still(1);
  still.add(vec({1}), vec({0}), 1.0);
  CHECK(velocity_moment(still, 2.0) == 0.0);
  OccupationMeasure one(2);
  one.add(vec({1, 1}), vec({0, 2}), 0.3);
  CHECK(velocity_moment(one, 2.0) == doctest::Approx(4.0));
  CHECK_THROWS_AS((void)velocity_moment(one, 1.0), std::invalid_argument);
}

TEST_CASE("bump weight") {
  const auto psi = bump_weight(vec({0}), 0.5);
  CHECK(psi.value(vec({0})) == 1.0);
  CHECK(psi.value(vec({0.5})) == 0.0);
  CHECK(psi.value(vec({0.25})) > 0.0);
}
