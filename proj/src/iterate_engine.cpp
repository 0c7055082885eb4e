#include "sadi/iterate_engine.hpp"

#include <cmath>
#include <stdexcept>

namespace sadi {

StepSchedule StepSchedule::power(double a, double rho) {
  if (!(a > 0.0)) throw std::invalid_argument("StepSchedule::power: a must be > 0");
  if (!(rho > 0.0)) throw std::invalid_argument("StepSchedule::power: rho must be > 0");
  return {Kind::power, a, rho};
}

StepSchedule StepSchedule::logarithmic(double a) {
  if (!(a > 0.0)) throw std::invalid_argument("StepSchedule::logarithmic: a must be > 0");
  return {Kind::logarithmic, a, 0.0};
}

StepSchedule StepSchedule::constant(double a) {
  if (!(a > 0.0)) throw std::invalid_argument("StepSchedule::constant: a must be > 0");
  return {Kind::constant, a, 0.0};
}

double StepSchedule::operator()(std::int64_t i) const {
  const auto k = static_cast<double>(i);
  switch (kind) {
    case Kind::power: return a / std::pow(k + 1.0, rho);
    case Kind::logarithmic: return a / std::log(k + 2.0);
    case Kind::constant: return a;
  }
  return a;
}

bool StepSchedule::conforming() const {
  switch (kind) {
    case Kind::power: return a > 0.0 && rho > 0.0 && rho <= 1.0;
    case Kind::logarithmic: return a > 0.0;
    case Kind::constant: return false;
  }
  return false;
}

double DeltaSchedule::operator()(std::int64_t i) const {
  if (d == 0.0) return 0.0;
  return d / std::pow(static_cast<double>(i) + 1.0, sigma);
}

NoiseModel NoiseModel::gaussian(double sigma, double q) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("NoiseModel::gaussian: sigma must be >= 0");
  if (!(q > 1.0)) throw std::invalid_argument("NoiseModel: moment order q must be > 1");
  return {Kind::gaussian, sigma, 0.0, q};
}

NoiseModel NoiseModel::uniform_ball(double radius, double q) {
  if (!(radius >= 0.0)) throw std::invalid_argument("NoiseModel::uniform_ball: radius must be >= 0");
  if (!(q > 1.0)) throw std::invalid_argument("NoiseModel: moment order q must be > 1");
  return {Kind::uniform_ball, radius, 0.0, q};
}

NoiseModel NoiseModel::student_t(double df, double scale, double q) {
  if (!(q > 1.0)) throw std::invalid_argument("NoiseModel: moment order q must be > 1");
  if (!(df > q)) throw std::invalid_argument("NoiseModel::student_t: need df > q for a finite q-moment");
  if (!(scale >= 0.0)) throw std::invalid_argument("NoiseModel::student_t: scale must be >= 0");
  return {Kind::student_t, scale, df, q};
}

Vector NoiseModel::draw(Eigen::Index n, Rng& rng) const {
  switch (kind) {
    case Kind::none:
      return Vector::Zero(n);
    case Kind::gaussian: {
      std::normal_distribution<double> gauss(0.0, scale);
      Vector e(n);
      for (Eigen::Index k = 0; k < n; ++k) e(k) = gauss(rng);
      return e;
    }
    case Kind::uniform_ball:
      return scale * uniform_unit_ball(n, rng);
    case Kind::student_t: {
      std::student_t_distribution<double> t(df);
      Vector e(n);
      for (Eigen::Index k = 0; k < n; ++k) e(k) = scale * t(rng);
      return e;
    }
  }
  return Vector::Zero(n);
}

std::optional<double> NoiseModel::analytic_moment(Eigen::Index n) const {
  const auto dn = static_cast<double>(n);
  switch (kind) {
    case Kind::none:
      return 0.0;
    case Kind::gaussian:
      return std::pow(scale, q) * std::pow(2.0, q / 2.0) *
             std::exp(std::lgamma((dn + q) / 2.0) - std::lgamma(dn / 2.0));
    case Kind::uniform_ball:
      return std::pow(scale, q) * dn / (dn + q);
    case Kind::student_t:
      if (n != 1) return std::nullopt;
      return std::pow(scale, q) * std::pow(df, q / 2.0) *
             std::exp(std::lgamma((q + 1.0) / 2.0) + std::lgamma((df - q) / 2.0) -
                      std::lgamma(df / 2.0)) /
             std::sqrt(M_PI);
  }
  return std::nullopt;
}

Trajectory::Trajectory(Eigen::Index dimension, const Vector& x0, std::uint64_t seed)
    : dim_(dimension), seed_(seed) {
  if (x0.size() != dimension) throw std::invalid_argument("Trajectory: x0 dimension mismatch");
  x_.assign(x0.data(), x0.data() + x0.size());
  t_.push_back(0.0);
}

void Trajectory::reserve(std::int64_t steps) {
  const auto s = static_cast<std::size_t>(steps);
  const auto n = static_cast<std::size_t>(dim_);
  x_.reserve((s + 1) * n);
  v_.reserve(s * n);
  eta_.reserve(s * n);
  eps_.reserve(s);
  delta_.reserve(s);
  t_.reserve(s + 1);
}

void Trajectory::push_step(const Vector& x_next, const Vector& eta, double eps, double delta) {
  if (x_next.size() != dim_ || eta.size() != dim_) {
    throw std::invalid_argument("Trajectory::push_step: dimension mismatch");
  }
  const std::size_t base = x_.size() - static_cast<std::size_t>(dim_);
  for (Eigen::Index k = 0; k < dim_; ++k) {
    const double prev = x_[base + static_cast<std::size_t>(k)];
    v_.push_back((x_next(k) - prev) / eps);
  }
  x_.insert(x_.end(), x_next.data(), x_next.data() + dim_);
  eta_.insert(eta_.end(), eta.data(), eta.data() + dim_);
  eps_.push_back(eps);
  delta_.push_back(delta);
  t_.push_back(t_.back() + eps);
}

Eigen::Map<const Vector> Trajectory::state(std::int64_t i) const {
  return {x_.data() + i * dim_, dim_};
}

Eigen::Map<const Vector> Trajectory::velocity(std::int64_t j) const {
  return {v_.data() + j * dim_, dim_};
}

Eigen::Map<const Vector> Trajectory::noise(std::int64_t j) const {
  return {eta_.data() + j * dim_, dim_};
}

void Trajectory::mark_escaped(std::int64_t index, double norm) {
  status_.escaped = true;
  status_.escape_index = index;
  status_.escape_norm = norm;
}

StepResult sa_step_with_noise(const Vector& x, double eps, const SetValuedMap& H, double delta,
                              const Vector& eta, Rng& rng, SelectionRule rule) {
  if (!(eps > 0.0)) throw std::invalid_argument("sa_step: step size must be > 0");
  const Vector y = enlargement_sample(H, x, delta, rng, rule);
  StepResult r;
  r.x_next = x + eps * (y + eta);
  r.velocity = (r.x_next - x) / eps;
  r.eta = eta;
  return r;
}

StepResult sa_step(const Vector& x, std::int64_t i, const SetValuedMap& H, const StepSchedule& schedule,
                   const NoiseModel& noise, double delta, Rng& rng, SelectionRule rule) {
  const double eps = schedule(i);
  if (!(eps > 0.0)) throw std::invalid_argument("sa_step: step size must be > 0");
  const Vector y = enlargement_sample(H, x, delta, rng, rule);
  const Vector eta = noise.draw(x.size(), rng);
  StepResult r;
  r.x_next = x + eps * (y + eta);
  r.velocity = (r.x_next - x) / eps;
  r.eta = eta;
  return r;
}

namespace {

bool out_of_guard(const Vector& x, double radius, double& norm) {
  norm = x.norm();
  return !std::isfinite(norm) || norm > radius;
}

}  // namespace

Trajectory run_sa(const Vector& x0, const SetValuedMap& H, const StepSchedule& schedule,
                  const NoiseModel& noise, std::int64_t N, std::uint64_t seed, const RunOptions& options) {
  if (N < 1) throw std::invalid_argument("run_sa: N must be >= 1");
  if (!(options.guard_radius > x0.norm())) {
    throw std::invalid_argument("run_sa: guard radius must exceed ‖x0‖");
  }
  Rng rng(seed);
  Trajectory traj(x0.size(), x0, seed);
  traj.reserve(N);
  Vector x = x0;
  for (std::int64_t i = 0; i < N; ++i) {
    const double delta = options.delta(i);
    StepResult r = sa_step(x, i, H, schedule, noise, delta, rng, options.rule);
    traj.push_step(r.x_next, r.eta, schedule(i), delta);
    x = std::move(r.x_next);
    double norm = 0.0;
    if (out_of_guard(x, options.guard_radius, norm)) {
      traj.mark_escaped(i + 1, norm);
      break;
    }
  }
  return traj;
}

Trajectory run_sgd(const MaxOfSmoothFunction& f, const Vector& x0, const StepSchedule& schedule,
                   const NoiseModel& noise, std::int64_t N, std::uint64_t seed, const RunOptions& options) {
  RunOptions opts = options;
  opts.delta = DeltaSchedule::zero();
  return run_sa(x0, subdifferential_map(f).negated(), schedule, noise, N, seed, opts);
}

SetValuedMap heavy_ball_map(const MaxOfSmoothFunction& f, double c) {
  const Eigen::Index m = f.dimension();
  return SetValuedMap(2 * m, [f, c, m](const Vector& x) {
    const Vector q = x.head(m);
    const Vector p = x.tail(m);
    const Polytope sub = clarke_subdifferential(f, q);
    Matrix gens(2 * m, sub.size());
    for (Eigen::Index k = 0; k < sub.size(); ++k) {
      gens.col(k).head(m) = c * p;
      gens.col(k).tail(m) = -sub.generator(k) - p;
    }
    return Polytope(std::move(gens));
  });
}

HeavyBallRun run_shb(const MaxOfSmoothFunction& f, const Vector& q0, const Vector& p0,
                     const StepSchedule& alpha, const StepSchedule& beta, double c,
                     const NoiseModel& noise, std::int64_t N, std::uint64_t seed,
                     const RunOptions& options) {
  const Eigen::Index m = f.dimension();
  if (q0.size() != m || p0.size() != m) throw std::invalid_argument("run_shb: dimension mismatch");
  if (N < 1) throw std::invalid_argument("run_shb: N must be >= 1");
  if (!(c > 0.0)) throw std::invalid_argument("run_shb: c must be > 0");

  Vector x(2 * m);
  x << q0, p0;
  if (!(options.guard_radius > x.norm())) {
    throw std::invalid_argument("run_shb: guard radius must exceed ‖x0‖");
  }

  HeavyBallRun out;
  out.c = c;
  out.trajectory = Trajectory(2 * m, x, seed);
  out.trajectory.reserve(N);
  out.alpha.reserve(static_cast<std::size_t>(N));
  out.beta.reserve(static_cast<std::size_t>(N));

  Rng rng(seed);
  Vector q = q0, p = p0;
  Vector eta_full = Vector::Zero(2 * m);
  Vector x_next(2 * m);
  for (std::int64_t i = 0; i < N; ++i) {
    const double a = alpha(i), b = beta(i);
    if (!(a > 0.0) || !(b > 0.0) || b > 1.0) {
      throw std::invalid_argument("run_shb: need alpha_i > 0 and 0 < beta_i <= 1");
    }
    const Vector g = select(clarke_subdifferential(f, q), options.rule, rng);
    const Vector eta = noise.draw(m, rng);
    const Vector p_next = (1.0 - b) * p - b * g + b * eta;
    const Vector q_next = q + a * p_next;
    const double drift_gap = ((a / b) * p_next - c * p).norm();

    x_next << q_next, p_next;
    eta_full.tail(m) = eta;
    out.trajectory.push_step(x_next, eta_full, b, drift_gap);
    out.alpha.push_back(a);
    out.beta.push_back(b);
    q = q_next;
    p = p_next;

    double norm = 0.0;
    if (out_of_guard(x_next, options.guard_radius, norm)) {
      out.trajectory.mark_escaped(i + 1, norm);
      break;
    }
  }
  return out;
}

ShbCoefficients shb_change_of_variables(const StepSchedule& alpha, const StepSchedule& beta,
                                        std::int64_t i) {
  if (i < 1) throw std::invalid_argument("shb_change_of_variables: i must be >= 1");
  const double a = alpha(i), a_prev = alpha(i - 1), b = beta(i);
  return {a / a_prev * (1.0 - b), a * b};
}

std::vector<Vector> run_shb_single_line(const MaxOfSmoothFunction& f, const Vector& q0, const Vector& p0,
                                        const StepSchedule& alpha, const StepSchedule& beta,
                                        const NoiseModel& noise, std::int64_t N, std::uint64_t seed,
                                        SelectionRule rule) {
  const Eigen::Index m = f.dimension();
  if (q0.size() != m || p0.size() != m) throw std::invalid_argument("run_shb_single_line: dimension mismatch");
  Rng rng(seed);
  std::vector<Vector> qs;
  qs.reserve(static_cast<std::size_t>(N) + 1);
  qs.push_back(q0);
  for (std::int64_t i = 0; i < N; ++i) {
    const Vector& q = qs.back();
    const Vector g = select(clarke_subdifferential(f, q), rule, rng);
    const Vector eta = noise.draw(m, rng);
    Vector momentum;
    double beta_prime = 0.0;
    if (i == 0) {
      momentum = alpha(0) * (1.0 - beta(0)) * p0;
      beta_prime = alpha(0) * beta(0);
    } else {
      const ShbCoefficients cv = shb_change_of_variables(alpha, beta, i);
      momentum = cv.alpha_prime * (q - qs[static_cast<std::size_t>(i) - 1]);
      beta_prime = cv.beta_prime;
    }
    qs.push_back(q + beta_prime * (-g + eta) + momentum);
  }
  return qs;
}

}  // namespace sadi
