#include "sadi/convex_geometry.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sadi {

Polytope::Polytope(std::span<const Vector> generators) {
  if (generators.empty()) {
    throw std::invalid_argument("Polytope: empty generator list");
  }
  const Eigen::Index n = generators.front().size();
  if (n < 1) throw std::invalid_argument("Polytope: zero-dimensional generator");
  gens_.resize(n, static_cast<Eigen::Index>(generators.size()));
  for (std::size_t k = 0; k < generators.size(); ++k) {
    if (generators[k].size() != n) {
      throw std::invalid_argument("Polytope: generator dimension mismatch");
    }
    gens_.col(static_cast<Eigen::Index>(k)) = generators[k];
  }
}

Polytope::Polytope(Matrix generators) : gens_(std::move(generators)) {
  if (gens_.cols() < 1 || gens_.rows() < 1) {
    throw std::invalid_argument("Polytope: empty generator list");
  }
}

Polytope Polytope::singleton(const Vector& point) { return Polytope(Matrix(point)); }

Vector Polytope::combination(const Vector& weights) const {
  if (weights.size() != gens_.cols()) {
    throw std::invalid_argument("Polytope::combination: weight count mismatch");
  }
  return gens_ * weights;
}

Polytope Polytope::translated(const Vector& offset) const {
  if (offset.size() != gens_.rows()) {
    throw std::invalid_argument("Polytope::translated: dimension mismatch");
  }
  Matrix g = gens_;
  g.colwise() += offset;
  return Polytope(std::move(g));
}

Polytope Polytope::negated() const { return Polytope(Matrix(-gens_)); }

Polytope Polytope::scaled(double factor) const { return Polytope(Matrix(factor * gens_)); }

namespace {

// Minimiser of ||sum_k a_k g_k|| over the affine hull of the active generators.
Vector affine_min_norm(const Matrix& G, const std::vector<Eigen::Index>& active) {
  const auto s = static_cast<Eigen::Index>(active.size());
  Vector alpha = Vector::Zero(s);
  if (s == 1) {
    alpha(0) = 1.0;
    return alpha;
  }
  const Vector base = G.col(active[0]);
  Matrix D(G.rows(), s - 1);
  for (Eigen::Index k = 1; k < s; ++k) D.col(k - 1) = G.col(active[k]) - base;
  const Vector beta = D.completeOrthogonalDecomposition().solve(-base);
  alpha(0) = 1.0 - beta.sum();
  alpha.tail(s - 1) = beta;
  return alpha;
}

Eigen::Index argmin_lowest(const Vector& values) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < values.size(); ++k) {
    if (values(k) < values(best)) best = k;
  }
  return best;
}

}  // namespace

MinNormResult min_norm_point_with_weights(const Polytope& P) {
  const Matrix& G = P.generators();
  const Eigen::Index m = G.cols();

  const Vector sq = G.colwise().squaredNorm().transpose();
  const double tol = 1e-12 * std::max(1.0, sq.maxCoeff());

  std::vector<Eigen::Index> active{argmin_lowest(sq)};
  Vector lambda = Vector::Ones(1);
  Vector x = G.col(active[0]);

  MinNormResult result;
  const int max_major = 100 + 10 * static_cast<int>(m);
  for (int major = 0; major < max_major; ++major) {
    ++result.iterations;
    const Vector dots = G.transpose() * x;
    const Eigen::Index j = argmin_lowest(dots);
    if (dots(j) >= x.squaredNorm() - tol) break;
    if (std::find(active.begin(), active.end(), j) != active.end()) break;

    active.push_back(j);
    lambda.conservativeResize(lambda.size() + 1);
    lambda(lambda.size() - 1) = 0.0;

    for (;;) {
      const Vector alpha = affine_min_norm(G, active);
      if ((alpha.array() > 0.0).all()) {
        lambda = alpha;
        break;
      }
      double theta = 1.0;
      Eigen::Index blocking = -1;
      for (Eigen::Index k = 0; k < alpha.size(); ++k) {
        if (alpha(k) <= 0.0) {
          const double denom = lambda(k) - alpha(k);
          const double t = denom > 0.0 ? lambda(k) / denom : 0.0;
          if (t < theta) {
            theta = t;
            blocking = k;
          }
        }
      }
      lambda += theta * (alpha - lambda);
      if (blocking >= 0) lambda(blocking) = 0.0;

      std::vector<Eigen::Index> kept;
      std::vector<double> kept_w;
      for (Eigen::Index k = 0; k < lambda.size(); ++k) {
        if (lambda(k) > 0.0) {
          kept.push_back(active[static_cast<std::size_t>(k)]);
          kept_w.push_back(lambda(k));
        }
      }
      active = std::move(kept);
      lambda = Eigen::Map<const Vector>(kept_w.data(), static_cast<Eigen::Index>(kept_w.size()));
      lambda /= lambda.sum();
      if (active.size() <= 1) break;
    }

    x.setZero();
    for (std::size_t k = 0; k < active.size(); ++k) {
      x += lambda(static_cast<Eigen::Index>(k)) * G.col(active[k]);
    }
  }

  result.weights = Vector::Zero(m);
  for (std::size_t k = 0; k < active.size(); ++k) {
    result.weights(active[k]) = lambda(static_cast<Eigen::Index>(k));
  }
  result.point = x;
  return result;
}

Vector min_norm_point(const Polytope& P) {
  if (P.size() == 1) return P.generator(0);
  return min_norm_point_with_weights(P).point;
}

double distance_to_hull(const Vector& y, const Polytope& P) {
  if (y.size() != P.dimension()) {
    throw std::invalid_argument("distance_to_hull: dimension mismatch");
  }
  if (P.size() == 1) return (P.generator(0) - y).norm();
  return min_norm_point(P.translated(-y)).norm();
}

double support_value(const Polytope& P, const Vector& direction) {
  if (direction.size() != P.dimension()) {
    throw std::invalid_argument("support_value: dimension mismatch");
  }
  if (direction.isZero(0.0)) throw std::invalid_argument("support_value: zero direction");
  return (P.generators().transpose() * direction).maxCoeff();
}

double wolfe_certificate(const Polytope& P, const Vector& p) {
  return (P.generators().transpose() * p).minCoeff() - p.squaredNorm();
}

Vector random_simplex_weights(Eigen::Index count, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Vector w(count);
  for (Eigen::Index k = 0; k < count; ++k) w(k) = expo(rng);
  const double total = w.sum();
  if (!(total > 0.0)) {
    w.setConstant(1.0 / static_cast<double>(count));
    return w;
  }
  return w / total;
}

}  // namespace sadi
