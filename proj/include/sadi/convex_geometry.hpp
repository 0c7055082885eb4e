#pragma once

// Convex primitives over polytopes in generator (V-) representation.

#include "sadi/types.hpp"

#include <initializer_list>
#include <span>
#include <vector>

namespace sadi {

/// conv(generators) for a non-empty list of same-dimension vectors.
/// Generators are stored column-wise.
class Polytope {
 public:
  /// Throws std::invalid_argument on an empty list or mixed dimensions.
  explicit Polytope(std::span<const Vector> generators);
  explicit Polytope(const std::vector<Vector>& generators)
      : Polytope(std::span<const Vector>(generators)) {}
  /// Columns of `generators` are the generators.
  explicit Polytope(Matrix generators);
  Polytope(std::initializer_list<Vector> generators)
      : Polytope(std::span<const Vector>(generators.begin(), generators.size())) {}

  static Polytope singleton(const Vector& point);

  [[nodiscard]] Eigen::Index dimension() const { return gens_.rows(); }
  [[nodiscard]] Eigen::Index size() const { return gens_.cols(); }
  [[nodiscard]] auto generator(Eigen::Index k) const { return gens_.col(k); }
  [[nodiscard]] const Matrix& generators() const { return gens_; }

  /// Σ weights[k] · generator(k). Weights are not checked for summing to 1.
  [[nodiscard]] Vector combination(const Vector& weights) const;

  [[nodiscard]] Polytope translated(const Vector& offset) const;
  [[nodiscard]] Polytope negated() const;
  [[nodiscard]] Polytope scaled(double factor) const;

 private:
  Matrix gens_;
};

/// Result of the minimum-norm-point solve: the point and its convex weights.
struct MinNormResult {
  Vector point;
  Vector weights;
  int iterations = 0;
};

/// Wolfe's active-set minimum-norm-point algorithm.
/// Terminates when min_g <p, g - p> >= -tol with tol = 1e-12 * max(1, max ||g||^2);
/// ties among candidate generators go to the lowest index.
[[nodiscard]] MinNormResult min_norm_point_with_weights(const Polytope& P);

[[nodiscard]] Vector min_norm_point(const Polytope& P);

/// Euclidean distance from y to conv(generators).
[[nodiscard]] double distance_to_hull(const Vector& y, const Polytope& P);

/// max_g <g, direction>. Throws std::invalid_argument for a zero direction.
[[nodiscard]] double support_value(const Polytope& P, const Vector& direction);

/// min_g <p, g - p>; non-negative exactly when p is the minimum-norm point.
[[nodiscard]] double wolfe_certificate(const Polytope& P, const Vector& p);

/// Uniform weights on the probability simplex (Dirichlet(1,...,1)).
[[nodiscard]] Vector random_simplex_weights(Eigen::Index count, Rng& rng);

}  // namespace sadi
