#pragma once

// Explicit Euler integration of the differential inclusion x'(t) ∈ H(x(t))
// through selections, and sampled proxies for limit sets, recurrence,
// Lyapunov decrease and stable zeros.

#include "sadi/setvalued_maps.hpp"
#include "sadi/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace sadi {

class Curve {
 public:
  Curve(Eigen::Index dimension, double dt, SelectionRule rule);

  void push(const Vector& point);

  [[nodiscard]] Eigen::Index dimension() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return points_.size() / static_cast<std::size_t>(dim_); }
  [[nodiscard]] double dt() const { return dt_; }
  [[nodiscard]] SelectionRule rule() const { return rule_; }
  /// s_k = k·dt.
  [[nodiscard]] double time(std::size_t k) const { return static_cast<double>(k) * dt_; }
  [[nodiscard]] Eigen::Map<const Vector> point(std::size_t k) const;
  [[nodiscard]] Eigen::Map<const Vector> back() const { return point(size() - 1); }

 private:
  Eigen::Index dim_;
  double dt_;
  SelectionRule rule_;
  std::vector<double> points_;
};

/// γ(s_{k+1}) = γ(s_k) + dt·selection(H, γ(s_k)) for ⌊T/dt + ½⌋ steps.
/// Throws std::domain_error on a non-finite state.
[[nodiscard]] Curve euler_di(const SetValuedMap& H, const Vector& x0, double dt, double T, SelectionRule rule,
                             std::uint64_t seed = 0);

/// Largest d((γ(s_{k+1}) − γ(s_k))/dt, H(γ(s_k))) along the curve.
[[nodiscard]] double euler_consistency(const SetValuedMap& H, const Curve& curve);

/// Points of the last `tail_fraction` of the curve.
[[nodiscard]] std::vector<Vector> limit_set_estimate(const Curve& curve, double tail_fraction);

struct RecurrenceOptions {
  double T = 20.0;
  double dt = 1e-2;
  double return_radius = 0.1;
  double min_return_time = 1.0;
  std::vector<SelectionRule> rules{SelectionRule::min_norm, SelectionRule::random_vertex,
                                   SelectionRule::random_hull};
  int restarts = 2;  // extra seeds per random rule
};

/// True when some integrated curve from x comes back within return_radius of
/// x at a time ≥ min_return_time. False only means no witness was found.
[[nodiscard]] bool recurrence_proxy(const SetValuedMap& H, const Vector& x, const RecurrenceOptions& options,
                                    std::uint64_t seed = 0);

struct LyapunovReport {
  double max_increase = 0.0;   // max_k V(γ(s_{k+1})) − V(γ(s_k)), floored at 0
  double tolerance = 0.0;      // L_V · dt · max_k ‖γ(s_{k+1}) − γ(s_k)‖/dt
  bool starts_in_lambda = false;
  double realized_decrease = 0.0;  // V(γ(0)) − V(γ(end))
  [[nodiscard]] bool passed() const {
    return max_increase <= tolerance && (starts_in_lambda || realized_decrease > 0.0);
  }
};

[[nodiscard]] std::vector<LyapunovReport> lyapunov_check(const std::function<double(const Vector&)>& V,
                                                         double lipschitz_V, const std::vector<Curve>& curves,
                                                         const std::function<bool(const Vector&)>& in_lambda);

/// True when 0 ∈ H(x) within 1e−9 and every one of `trials` curves from x
/// (random rules and seeds) stays within 10·dt·(1 + ‖x‖) of x up to T.
[[nodiscard]] bool stable_zero_check(const SetValuedMap& H, const Vector& x, double T, double dt, int trials,
                                     std::uint64_t seed = 0);

/// CSV with header s,g0,...,g{n-1}.
void write_curve_csv(std::ostream& out, const Curve& curve);

}  // namespace sadi
