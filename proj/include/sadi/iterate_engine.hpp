#pragma once

// The stochastic approximation recursion
//   x_{i+1} = x_i + ε_i (y_i + η_{i+1}),   y_i ∈ H^{δ_i}(x_i),
// its step schedules and noise models, and the application engines built on it.

#include "sadi/setvalued_maps.hpp"
#include "sadi/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sadi {

class Game;

/// Deterministic step sizes ε_i, i = 0, 1, ...
struct StepSchedule {
  enum class Kind { power, logarithmic, constant };

  Kind kind = Kind::power;
  double a = 1.0;
  double rho = 1.0;

  static StepSchedule power(double a, double rho);
  static StepSchedule logarithmic(double a);
  /// Non-conforming: ε_i does not vanish. Negative controls only.
  static StepSchedule constant(double a);

  [[nodiscard]] double operator()(std::int64_t i) const;
  /// Σ ε_i = ∞ and ε_i → 0.
  [[nodiscard]] bool conforming() const;
};

/// δ_i = d / (i+1)^σ; d = 0 gives the plain recursion.
struct DeltaSchedule {
  double d = 0.0;
  double sigma = 1.0;

  static DeltaSchedule zero() { return {}; }
  [[nodiscard]] double operator()(std::int64_t i) const;
};

/// Martingale-difference noise, i.i.d. across steps and zero mean per coordinate.
struct NoiseModel {
  enum class Kind { none, gaussian, uniform_ball, student_t };

  Kind kind = Kind::none;
  double scale = 0.0;  // σ, ball radius, or t scale
  double df = 0.0;     // student_t only
  double q = 2.0;      // declared moment order, > 1

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double sigma, double q = 2.0);
  static NoiseModel uniform_ball(double radius, double q = 2.0);
  /// Requires df > q.
  static NoiseModel student_t(double df, double scale, double q = 2.0);

  [[nodiscard]] Vector draw(Eigen::Index n, Rng& rng) const;
  /// E‖η‖^q in dimension n where a closed form is known.
  [[nodiscard]] std::optional<double> analytic_moment(Eigen::Index n) const;
};

struct RunStatus {
  bool escaped = false;
  std::int64_t escape_index = -1;  // i with ‖x_i‖ > R
  double escape_norm = 0.0;
};

/// Full record of a run. Row j of the per-step arrays belongs to step j → j+1:
/// velocity(j) = v_{j+1} = (x_{j+1} − x_j)/ε_j, noise(j) = η_{j+1}.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(Eigen::Index dimension, const Vector& x0, std::uint64_t seed);

  void reserve(std::int64_t steps);
  /// Appends x_{j+1} and computes v_{j+1} from the stored x_j.
  void push_step(const Vector& x_next, const Vector& eta, double eps, double delta);

  [[nodiscard]] Eigen::Index dimension() const { return dim_; }
  [[nodiscard]] std::int64_t steps() const { return static_cast<std::int64_t>(eps_.size()); }
  [[nodiscard]] Eigen::Map<const Vector> state(std::int64_t i) const;
  [[nodiscard]] Eigen::Map<const Vector> velocity(std::int64_t j) const;
  [[nodiscard]] Eigen::Map<const Vector> noise(std::int64_t j) const;
  [[nodiscard]] double step(std::int64_t j) const { return eps_[static_cast<std::size_t>(j)]; }
  [[nodiscard]] double delta(std::int64_t j) const { return delta_[static_cast<std::size_t>(j)]; }
  /// t_i = Σ_{j<i} ε_j, accumulated left to right.
  [[nodiscard]] double time(std::int64_t i) const { return t_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] Eigen::Map<const Vector> last_state() const { return state(steps()); }

  [[nodiscard]] const RunStatus& status() const { return status_; }
  void mark_escaped(std::int64_t index, double norm);
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

 private:
  Eigen::Index dim_ = 0;
  std::vector<double> x_, v_, eta_, eps_, delta_, t_;
  RunStatus status_;
  std::uint64_t seed_ = 0;
};

struct StepResult {
  Vector x_next;
  Vector velocity;
  Vector eta;
};

/// One step with the noise drawn from `noise`.
[[nodiscard]] StepResult sa_step(const Vector& x, std::int64_t i, const SetValuedMap& H,
                                 const StepSchedule& schedule, const NoiseModel& noise, double delta,
                                 Rng& rng, SelectionRule rule = SelectionRule::random_hull);

/// One step with a caller-supplied noise value.
[[nodiscard]] StepResult sa_step_with_noise(const Vector& x, double eps, const SetValuedMap& H,
                                            double delta, const Vector& eta, Rng& rng,
                                            SelectionRule rule = SelectionRule::random_hull);

struct RunOptions {
  double guard_radius = 1e3;
  SelectionRule rule = SelectionRule::random_hull;
  DeltaSchedule delta = DeltaSchedule::zero();
};

/// Iterates sa_step N times or until ‖x_i‖ > guard radius (or non-finite).
/// The run is a pure function of its arguments and `seed`.
[[nodiscard]] Trajectory run_sa(const Vector& x0, const SetValuedMap& H, const StepSchedule& schedule,
                                const NoiseModel& noise, std::int64_t N, std::uint64_t seed,
                                const RunOptions& options = {});

/// run_sa with H = −∂f and δ ≡ 0.
[[nodiscard]] Trajectory run_sgd(const MaxOfSmoothFunction& f, const Vector& x0,
                                 const StepSchedule& schedule, const NoiseModel& noise,
                                 std::int64_t N, std::uint64_t seed, const RunOptions& options = {});

/// Heavy ball:
///   p_{i+1} = (1−β_i) p_i − β_i g_i + β_i η_{i+1},   g_i ∈ ∂f(q_i)
///   q_{i+1} = q_i + α_i p_{i+1}
/// The trajectory is over x = (q, p) with ε_i = β_i and recorded noise (0, η).
/// Its drift y_i = (α_i/β_i · p_{i+1}, −g_i − p_i) is at distance
/// ‖α_i/β_i · p_{i+1} − c p_i‖ from heavy_ball_map(f, c)(x_i); that distance
/// is recorded as δ_i, so every step is an exact instance of the recursion.
struct HeavyBallRun {
  Trajectory trajectory;
  std::vector<double> alpha;
  std::vector<double> beta;
  double c = 1.0;
};

[[nodiscard]] HeavyBallRun run_shb(const MaxOfSmoothFunction& f, const Vector& q0, const Vector& p0,
                                   const StepSchedule& alpha, const StepSchedule& beta, double c,
                                   const NoiseModel& noise, std::int64_t N, std::uint64_t seed,
                                   const RunOptions& options = {});

/// Coefficients (α′_i, β′_i) = (α_i α_{i−1}^{−1}(1−β_i), α_i β_i) of the
/// single-variable form q_{i+1} = q_i + β′_i(−g_i + η_{i+1}) + α′_i (q_i − q_{i−1}).
/// Requires i ≥ 1.
struct ShbCoefficients {
  double alpha_prime;
  double beta_prime;
};
[[nodiscard]] ShbCoefficients shb_change_of_variables(const StepSchedule& alpha,
                                                      const StepSchedule& beta, std::int64_t i);

/// q_0 .. q_N from the single-variable recursion; the first step uses
/// α_0(1−β_0) p_0 in place of α′_0 (q_0 − q_{−1}). Same noise stream and
/// selection rule as run_shb, so equal seeds give comparable sequences.
[[nodiscard]] std::vector<Vector> run_shb_single_line(const MaxOfSmoothFunction& f, const Vector& q0,
                                                      const Vector& p0, const StepSchedule& alpha,
                                                      const StepSchedule& beta, const NoiseModel& noise,
                                                      std::int64_t N, std::uint64_t seed,
                                                      SelectionRule rule = SelectionRule::random_hull);

/// H(q, p) = (c p, −∂f(q) − p), the drift of the heavy-ball recursion when α_i = c β_i.
[[nodiscard]] SetValuedMap heavy_ball_map(const MaxOfSmoothFunction& f, double c);

/// Fictitious play on the averaged profile ξ (players concatenated).
///   ξ_{n+1} = ξ_n + ε_n (x_{n+1} − ξ_n),   ε_n = 1/(n+2),
/// so ξ_n is the average of ξ_0 and the n plays. x_{n+1} draws each player's
/// action uniformly among its best-response vertices against ξ_n; η ≡ 0.
[[nodiscard]] Trajectory run_fictitious_play(const Game& game, const Vector& xi0, std::int64_t N,
                                             std::uint64_t seed);

}  // namespace sadi
