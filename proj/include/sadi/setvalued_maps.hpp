#pragma once

// Set-valued maps H: R^n ⇉ R^n with finitely generated convex values,
// Clarke subdifferentials of max-of-smooth functions, and the δ-enlargement
//   H^δ(x) = { y : ∃ z, ‖z − x‖ ≤ δ and d(y, H(z)) ≤ δ }.

#include "sadi/convex_geometry.hpp"
#include "sadi/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sadi {

enum class SelectionRule { min_norm, random_vertex, random_hull };

/// Throws std::invalid_argument for an unknown rule name.
[[nodiscard]] SelectionRule parse_selection_rule(std::string_view name);
[[nodiscard]] const char* to_string(SelectionRule rule) noexcept;

class SetValuedMap {
 public:
  using Evaluator = std::function<Polytope(const Vector&)>;

  SetValuedMap(Eigen::Index dimension, Evaluator evaluate,
               std::optional<double> growth_bound = std::nullopt);

  [[nodiscard]] Eigen::Index dimension() const { return dim_; }
  [[nodiscard]] std::optional<double> growth_bound() const { return growth_; }

  /// Generators of H(x). Must be a pure function of x.
  [[nodiscard]] Polytope operator()(const Vector& x) const;

  /// max_g ‖g‖ − C(1 + ‖x‖) over generators of H(x); ≤ 0 when the declared
  /// linear growth bound holds at x. Returns nullopt without a declared bound.
  [[nodiscard]] std::optional<double> growth_excess(const Vector& x) const;

  [[nodiscard]] SetValuedMap negated() const;

 private:
  Eigen::Index dim_;
  Evaluator eval_;
  std::optional<double> growth_;
};

/// One smooth piece of a max-of-smooth function.
struct SmoothPiece {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

/// f(x) = max_k f_k(x) with smooth pieces f_k.
class MaxOfSmoothFunction {
 public:
  MaxOfSmoothFunction(Eigen::Index dimension, std::vector<SmoothPiece> pieces,
                      double activity_tolerance = 1e-8);

  [[nodiscard]] Eigen::Index dimension() const { return dim_; }
  [[nodiscard]] double activity_tolerance() const { return tau_act_; }
  [[nodiscard]] const std::vector<SmoothPiece>& pieces() const { return pieces_; }

  [[nodiscard]] double operator()(const Vector& x) const;

  /// Largest |FD − analytic| over piece gradients at `trials` random points
  /// in [−radius, radius]^n, central differences with step `h`.
  [[nodiscard]] double gradient_check(Rng& rng, int trials = 20, double radius = 2.0,
                                      double h = 1e-6) const;

 private:
  Eigen::Index dim_;
  std::vector<SmoothPiece> pieces_;
  double tau_act_;
};

/// Hull of the gradients of the pieces within τ_act of the maximum.
[[nodiscard]] Polytope clarke_subdifferential(const MaxOfSmoothFunction& f, const Vector& x);

/// H = ∂f, with growth bound when `growth_bound` is given.
[[nodiscard]] SetValuedMap subdifferential_map(MaxOfSmoothFunction f,
                                               std::optional<double> growth_bound = std::nullopt);

// Built-in functions.
[[nodiscard]] MaxOfSmoothFunction abs_function();                        // |x| = max(x, −x)
[[nodiscard]] MaxOfSmoothFunction half_squared_norm(Eigen::Index dim);   // ‖x‖²/2
[[nodiscard]] MaxOfSmoothFunction l1_norm(Eigen::Index dim);             // max over sign vectors s of <s, x>
/// max_k ½ (x − c_k)ᵀ diag(scales_k) (x − c_k) for the given centres.
[[nodiscard]] MaxOfSmoothFunction max_of_quadratics(std::vector<Vector> centers,
                                                    std::vector<Vector> scales);

/// Selection from H(x) under the rule. Only random rules consume rng.
[[nodiscard]] Vector select(const Polytope& values, SelectionRule rule, Rng& rng);
[[nodiscard]] Vector selection(const SetValuedMap& H, const Vector& x, SelectionRule rule, Rng& rng);

/// y = h + δ·w with z = x + δ·u, u and w uniform on the closed unit ball and
/// h a selection from H(z). Collapses to a selection from H(x) when δ = 0.
[[nodiscard]] Vector enlargement_sample(const SetValuedMap& H, const Vector& x, double delta, Rng& rng,
                                        SelectionRule rule = SelectionRule::random_hull);

/// min over probed z in the closed δ-ball of d(y, H(z)) − δ. Probes z = x,
/// a deterministic grid when n ≤ 3 (with radial projections to the sphere), and `z_samples` uniform draws from a
/// fixed internal stream. ≤ 0 certifies y ∈ H^δ(x); a positive value is only
/// an upper bound on the true slack.
[[nodiscard]] double enlargement_slack(const SetValuedMap& H, const Vector& x, const Vector& y,
                                       double delta, int z_samples = 64);

/// Uniform draw from the closed unit ball in R^n.
[[nodiscard]] Vector uniform_unit_ball(Eigen::Index n, Rng& rng);

}  // namespace sadi
