#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sadi/games.hpp"
#include "sadi/iterate_engine.hpp"

#include <cmath>

using namespace sadi;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v(k++) = x;
  return v;
}

SetValuedMap linear_map(double k) {
  return SetValuedMap(1, [k](const Vector& x) { return Polytope({Vector(k * x)}); });
}

SetValuedMap constant_map(const Vector& c) {
  return SetValuedMap(c.size(), [c](const Vector&) { return Polytope({c}); });
}

bool identical(const Trajectory& a, const Trajectory& b) {
  if (a.steps() != b.steps()) return false;
  for (std::int64_t i = 0; i <= a.steps(); ++i)
    if (a.state(i) != b.state(i)) return false;
  for (std::int64_t j = 0; j < a.steps(); ++j)
    if (a.velocity(j) != b.velocity(j) || a.noise(j) != b.noise(j)) return false;
  return true;
}

}  // namespace

TEST_CASE("step schedules") {
  const auto p = StepSchedule::power(2.0, 0.5);
  CHECK(p(0) == 2.0);
  CHECK(p(3) == doctest::Approx(1.0));
  CHECK(StepSchedule::logarithmic(1.0)(0) == doctest::Approx(1.0 / std::log(2.0)));
  CHECK(StepSchedule::constant(0.3)(1000) == 0.3);
  CHECK(p.conforming());
  CHECK(StepSchedule::logarithmic(1.0).conforming());
  CHECK_FALSE(StepSchedule::constant(0.3).conforming());
  CHECK_THROWS_AS((void)StepSchedule::power(-1.0, 0.5), std::invalid_argument);
  CHECK_FALSE(StepSchedule::power(1.0, 1.5).conforming());
  CHECK_THROWS_AS((void)StepSchedule::power(1.0, 0.0), std::invalid_argument);
  for (std::int64_t i = 0; i < 1000; ++i) CHECK(p(i + 1) < p(i));
}

TEST_CASE("noise models are centred with the declared moments") {
  Rng rng(17);
  const std::vector<std::pair<NoiseModel, Eigen::Index>> models = {
      {NoiseModel::gaussian(0.5), 1}, {NoiseModel::gaussian(0.5), 3},
      {NoiseModel::uniform_ball(2.0), 2}, {NoiseModel::student_t(5.0, 1.0), 1}};
  for (const auto& [model, n] : models) {
    const int draws = 100000;
    Vector mean = Vector::Zero(n);
    double moment = 0.0;
    for (int k = 0; k < draws; ++k) {
      const Vector eta = model.draw(n, rng);
      mean += eta;
      moment += std::pow(eta.norm(), model.q);
    }
    mean /= draws;
    moment /= draws;
    const double analytic = *model.analytic_moment(n);
    CHECK(mean.cwiseAbs().maxCoeff() < 5.0 * std::sqrt(analytic / draws));
    CHECK(moment < 3.0 * analytic);
    CHECK(moment > analytic / 3.0);
  }
  CHECK(NoiseModel::none().draw(2, rng) == Vector::Zero(2));
  CHECK_THROWS_AS((void)NoiseModel::student_t(2.0, 1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS((void)NoiseModel::gaussian(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("sa_step examples") {
  Rng rng(1);
  auto r = sa_step(vec({1}), 0, linear_map(-1.0), StepSchedule::constant(1.0), NoiseModel::none(), 0.0, rng);
  CHECK(r.x_next(0) == 0.0);
  CHECK(r.velocity(0) == -1.0);

  r = sa_step_with_noise(vec({0}), 0.1, constant_map(vec({-1})), 0.0, vec({0.5}), rng);
  CHECK(r.x_next(0) == doctest::Approx(-0.05).epsilon(1e-15));
  CHECK(r.velocity(0) == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("returned velocity is the difference quotient") {
  Rng rng(2);
  const auto H = subdifferential_map(l1_norm(2)).negated();
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int k = 0; k < 500; ++k) {
    const Vector x = vec({unif(rng), unif(rng)});
    const auto r = sa_step(x, k, H, StepSchedule::power(0.7, 0.8), NoiseModel::gaussian(1.0), 0.05, rng);
    CHECK(((r.x_next - x) / StepSchedule::power(0.7, 0.8)(k)) == r.velocity);
  }
}

TEST_CASE("run_sa examples") {
  const auto t = run_sa(vec({1}), linear_map(-1.0), StepSchedule::constant(0.5), NoiseModel::none(), 3, 0);
  CHECK(t.steps() == 3);
  CHECK(t.state(1)(0) == 0.5);
  CHECK(t.state(2)(0) == 0.25);
  CHECK(t.state(3)(0) == 0.125);
  CHECK_FALSE(t.status().escaped);

  RunOptions opts;
  opts.guard_radius = 10.0;
  const auto e = run_sa(vec({1}), linear_map(1.0), StepSchedule::constant(1.0), NoiseModel::none(), 100, 0, opts);
  CHECK(e.status().escaped);
  CHECK(e.status().escape_index == 4);
  CHECK(e.status().escape_norm == 16.0);

  opts.guard_radius = 0.5;
  CHECK_THROWS_AS((void)run_sa(vec({1}), linear_map(1.0), StepSchedule::constant(1.0), NoiseModel::none(), 1, 0, opts),
                  std::invalid_argument);
}

TEST_CASE("non-finite iterates escape") {
  RunOptions opts;
  opts.guard_radius = std::numeric_limits<double>::infinity();
  const auto e = run_sa(vec({1}), linear_map(1e300), StepSchedule::constant(1.0), NoiseModel::none(), 10, 0, opts);
  CHECK(e.status().escaped);
}

TEST_CASE("trajectory clock and velocities") {
  const auto t = run_sgd(half_squared_norm(2), vec({1, -2}), StepSchedule::power(0.5, 0.7),
                         NoiseModel::gaussian(0.3), 2000, 9);
  CHECK(t.time(0) == 0.0);
  for (std::int64_t i = 0; i < t.steps(); ++i) {
    CHECK(t.time(i + 1) > t.time(i));
    CHECK(((t.state(i + 1) - t.state(i)) / t.step(i)) == t.velocity(i));
  }
}

TEST_CASE("run_sgd on |x| with constant step") {
  RunOptions opts;
  opts.rule = SelectionRule::min_norm;
  const auto t = run_sgd(abs_function(), vec({1}), StepSchedule::constant(0.4), NoiseModel::none(), 50, 0, opts);
  CHECK(t.state(1)(0) == doctest::Approx(0.6));
  CHECK(t.state(2)(0) == doctest::Approx(0.2));
  for (std::int64_t i = 2; i <= 50; ++i) CHECK(std::abs(t.state(i)(0)) <= 0.2 + 1e-12);
}

TEST_CASE("run_sgd on a quadratic matches the product formula") {
  const double a = 0.5;
  const auto t = run_sgd(half_squared_norm(1), vec({3}), StepSchedule::power(a, 1.0), NoiseModel::none(), 500, 0);
  double x = 3.0;
  for (std::int64_t i = 0; i < 500; ++i) {
    x *= 1.0 - a / static_cast<double>(i + 1);
    CHECK(t.state(i + 1)(0) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("reproducibility") {
  const auto run = [](std::uint64_t seed) {
    return run_sgd(abs_function(), vec({1}), StepSchedule::power(1.0, 0.6), NoiseModel::gaussian(0.5), 20000, seed);
  };
  CHECK(identical(run(42), run(42)));
  CHECK_FALSE(identical(run(42), run(43)));
}

TEST_CASE("drift decomposition lies in the enlargement") {
  RunOptions opts;
  opts.delta = DeltaSchedule{0.5, 0.5};
  const auto H = subdifferential_map(l1_norm(2)).negated();
  const auto t = run_sa(vec({0.3, -0.2}), H, StepSchedule::power(0.3, 0.7), NoiseModel::gaussian(0.5), 2000, 5, opts);
  for (std::int64_t j = 0; j < t.steps(); ++j) {
    const Vector drift = t.velocity(j) - t.noise(j);
    CHECK(enlargement_slack(H, t.state(j), drift, t.delta(j)) <= 1e-9);
  }
}

TEST_CASE("SGD on |x| stays bounded and the noise average decays") {
  // x_0 = 1, a = 1, ρ = 0.6, σ = 0.5, 10 seeds.
  int completed = 0, decayed = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RunOptions opts;
    opts.guard_radius = 100.0;
    const auto t = run_sgd(abs_function(), vec({1}), StepSchedule::power(1.0, 0.6), NoiseModel::gaussian(0.5),
                           1000000, seed, opts);
    if (!t.status().escaped) ++completed;
    double sum = 0.0, avg_small = 0.0;
    for (std::int64_t j = 0; j < t.steps(); ++j) {
      sum += t.step(j) * t.noise(j)(0);
      if (j + 1 == 10000) avg_small = std::abs(sum) / t.time(j + 1);
    }
    const double avg_large = std::abs(sum) / t.time(t.steps());
    if (avg_large < avg_small) ++decayed;
  }
  CHECK(completed >= 9);
  CHECK(decayed >= 9);
}

TEST_CASE("heavy ball arithmetic") {
  const auto run = run_shb(half_squared_norm(1), vec({1}), vec({0}), StepSchedule::constant(0.5),
                           StepSchedule::constant(0.5), 1.0, NoiseModel::none(), 1, 0);
  const Vector x1 = run.trajectory.state(1);
  CHECK(x1(1) == -0.5);
  CHECK(x1(0) == 0.75);
}

TEST_CASE("heavy ball with beta = 1 is memoryless") {
  Rng rng(3);
  const auto run = run_shb(abs_function(), vec({0.7}), vec({0}), StepSchedule::constant(0.2),
                           StepSchedule::constant(1.0), 0.2, NoiseModel::gaussian(0.4), 200, 8);
  const auto& t = run.trajectory;
  for (std::int64_t i = 0; i < t.steps(); ++i) {
    const double q = t.state(i)(0);
    const double g = q > 0 ? 1.0 : -1.0;
    const double eta = t.noise(i)(1);
    CHECK(t.state(i + 1)(1) == doctest::Approx(-g + eta).epsilon(1e-14));
  }
}

TEST_CASE("heavy ball single-line form matches the two-line recursion") {
  const double c = 2.0;
  const auto beta = StepSchedule::power(0.3, 0.75);
  const auto alpha = StepSchedule::power(c * 0.3, 0.75);
  const auto f = max_of_quadratics({vec({1, 0}), vec({-1, 0.5})}, {vec({1, 2}), vec({3, 0.5})});
  const auto two = run_shb(f, vec({1, 1}), vec({0.2, -0.1}), alpha, beta, c, NoiseModel::none(), 5000, 4);
  const auto one = run_shb_single_line(f, vec({1, 1}), vec({0.2, -0.1}), alpha, beta, NoiseModel::none(), 5000, 4);
  double worst = 0.0;
  for (std::int64_t i = 0; i <= 5000; ++i)
    worst = std::max(worst, (two.trajectory.state(i).head(2) - one[static_cast<std::size_t>(i)]).norm());
  CHECK(worst <= 1e-12);
  const auto cv = shb_change_of_variables(alpha, beta, 3);
  CHECK(cv.alpha_prime == doctest::Approx(alpha(3) / alpha(2) * (1.0 - beta(3))));
  CHECK(cv.beta_prime == doctest::Approx(alpha(3) * beta(3)));
  CHECK_THROWS_AS((void)shb_change_of_variables(alpha, beta, 0), std::invalid_argument);
}

TEST_CASE("heavy ball steps are exact instances of the recursion") {
  const auto beta = StepSchedule::power(0.5, 0.7);
  const auto alpha = StepSchedule::power(0.5, 0.7);
  const auto run = run_shb(l1_norm(2), vec({1, 0.5}), vec({0, 0}), alpha, beta, 1.0, NoiseModel::gaussian(0.3), 1000, 2);
  const auto H = heavy_ball_map(l1_norm(2), 1.0);
  const auto& t = run.trajectory;
  for (std::int64_t j = 0; j < t.steps(); ++j) {
    CHECK(t.noise(j).head(2).norm() == 0.0);
    const Vector drift = t.velocity(j) - t.noise(j);
    CHECK(enlargement_slack(H, t.state(j), drift, t.delta(j)) <= 1e-9);
  }
}

TEST_CASE("fictitious play averaging") {
  // A game where action 0 strictly dominates for both players.
  const Game g({2, 2}, {{3, 3, 0, 0}, {3, 0, 3, 0}});
  const Vector xi0 = vec({0, 1, 0, 1});
  const Vector e = vec({1, 0, 1, 0});
  const auto t = run_fictitious_play(g, xi0, 200, 1);
  CHECK((t.state(1) - (xi0 + e) / 2.0).norm() < 1e-15);
  for (std::int64_t n = 1; n <= 200; ++n) {
    const double nn = static_cast<double>(n);
    CHECK((t.state(n) - (xi0 + nn * e) / (nn + 1.0)).norm() < 1e-12);
    CHECK(t.state(n)(0) > t.state(n - 1)(0));
  }
}

TEST_CASE("fictitious play velocities are best responses") {
  const Game g = generalized_rps(1.0, 2.0);
  const auto H = game_map(g);
  const auto t = run_fictitious_play(g, uniform_profile(g), 3000, 6);
  for (std::int64_t j = 0; j < t.steps(); ++j) {
    CHECK(distance_to_hull(t.velocity(j), H(t.state(j))) <= 1e-9);
    CHECK(g.on_product_simplex(t.state(j + 1)));
  }
}

TEST_CASE("fictitious play in matching pennies") {
  const Game g = matching_pennies();
  const auto t = run_fictitious_play(g, vec({1, 0, 1, 0}), 100000, 0);
  CHECK((t.last_state() - vec({0.5, 0.5, 0.5, 0.5})).cwiseAbs().maxCoeff() <= 0.05);
}
