#include "sadi/di_flow.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace sadi {

Curve::Curve(Eigen::Index dimension, double dt, SelectionRule rule) : dim_(dimension), dt_(dt), rule_(rule) {
  if (dim_ < 1) throw std::invalid_argument("Curve: dimension must be >= 1");
  if (!(dt_ > 0.0)) throw std::invalid_argument("Curve: dt must be > 0");
}

void Curve::push(const Vector& point) {
  if (point.size() != dim_) throw std::invalid_argument("Curve::push: dimension mismatch");
  points_.insert(points_.end(), point.data(), point.data() + dim_);
}

Eigen::Map<const Vector> Curve::point(std::size_t k) const {
  return {points_.data() + k * static_cast<std::size_t>(dim_), dim_};
}

Curve euler_di(const SetValuedMap& H, const Vector& x0, double dt, double T, SelectionRule rule,
               std::uint64_t seed) {
  if (!(dt > 0.0)) throw std::invalid_argument("euler_di: dt must be > 0");
  if (!(T >= dt)) throw std::invalid_argument("euler_di: need T >= dt");
  const auto steps = static_cast<std::int64_t>(std::floor(T / dt + 0.5));
  Rng rng(seed);
  Curve curve(x0.size(), dt, rule);
  curve.push(x0);
  Vector x = x0;
  for (std::int64_t k = 0; k < steps; ++k) {
    x = x + dt * selection(H, x, rule, rng);
    if (!x.allFinite()) throw std::domain_error("euler_di: non-finite state");
    curve.push(x);
  }
  return curve;
}

double euler_consistency(const SetValuedMap& H, const Curve& curve) {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < curve.size(); ++k) {
    const Vector slope = (curve.point(k + 1) - curve.point(k)) / curve.dt();
    worst = std::max(worst, distance_to_hull(slope, H(curve.point(k))));
  }
  return worst;
}

std::vector<Vector> limit_set_estimate(const Curve& curve, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) {
    throw std::invalid_argument("limit_set_estimate: tail_fraction must lie in (0, 1)");
  }
  const std::size_t n = curve.size();
  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n))));
  std::vector<Vector> cloud;
  cloud.reserve(count);
  for (std::size_t k = n - std::min(count, n); k < n; ++k) cloud.emplace_back(curve.point(k));
  return cloud;
}

bool recurrence_proxy(const SetValuedMap& H, const Vector& x, const RecurrenceOptions& options, std::uint64_t seed) {
  if (!(options.min_return_time < options.T)) {
    throw std::invalid_argument("recurrence_proxy: need min_return_time < T");
  }
  std::uint64_t stream = seed;
  for (SelectionRule rule : options.rules) {
    const int runs = rule == SelectionRule::min_norm ? 1 : 1 + options.restarts;
    for (int r = 0; r < runs; ++r) {
      const Curve curve = euler_di(H, x, options.dt, options.T, rule, stream++);
      for (std::size_t k = 0; k < curve.size(); ++k) {
        if (curve.time(k) < options.min_return_time) continue;
        if ((curve.point(k) - x).norm() <= options.return_radius) return true;
      }
    }
  }
  return false;
}

std::vector<LyapunovReport> lyapunov_check(const std::function<double(const Vector&)>& V, double lipschitz_V,
                                           const std::vector<Curve>& curves,
                                           const std::function<bool(const Vector&)>& in_lambda) {
  std::vector<LyapunovReport> reports;
  reports.reserve(curves.size());
  for (const auto& curve : curves) {
    LyapunovReport rep;
    double prev = V(curve.point(0));
    const double first = prev;
    double max_speed = 0.0;
    for (std::size_t k = 1; k < curve.size(); ++k) {
      const double cur = V(curve.point(k));
      rep.max_increase = std::max(rep.max_increase, cur - prev);
      max_speed = std::max(max_speed, (curve.point(k) - curve.point(k - 1)).norm() / curve.dt());
      prev = cur;
    }
    rep.tolerance = lipschitz_V * curve.dt() * max_speed;
    rep.starts_in_lambda = in_lambda(curve.point(0));
    rep.realized_decrease = first - prev;
    reports.push_back(rep);
  }
  return reports;
}

bool stable_zero_check(const SetValuedMap& H, const Vector& x, double T, double dt, int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("stable_zero_check: trials must be >= 1");
  if (distance_to_hull(Vector::Zero(x.size()), H(x)) > 1e-9) return false;
  const double stay = 10.0 * dt * (1.0 + x.norm());
  const SelectionRule random_rules[] = {SelectionRule::random_vertex, SelectionRule::random_hull};
  for (int t = 0; t < trials; ++t) {
    const SelectionRule rule = random_rules[t % 2];
    const Curve curve = euler_di(H, x, dt, T, rule, seed + static_cast<std::uint64_t>(t));
    for (std::size_t k = 0; k < curve.size(); ++k) {
      if ((curve.point(k) - x).norm() > stay) return false;
    }
  }
  return true;
}

void write_curve_csv(std::ostream& out, const Curve& curve) {
  out << "s";
  for (Eigen::Index k = 0; k < curve.dimension(); ++k) out << ",g" << k;
  out << "\r\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out << curve.time(i);
    const auto p = curve.point(i);
    for (Eigen::Index k = 0; k < p.size(); ++k) out << ',' << p(k);
    out << "\r\n";
  }
}

}  // namespace sadi
