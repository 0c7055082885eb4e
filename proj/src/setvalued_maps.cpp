#include "sadi/setvalued_maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sadi {

SelectionRule parse_selection_rule(std::string_view name) {
  if (name == "min_norm") return SelectionRule::min_norm;
  if (name == "random_vertex") return SelectionRule::random_vertex;
  if (name == "random_hull") return SelectionRule::random_hull;
  throw std::invalid_argument("unknown selection rule: " + std::string(name));
}

const char* to_string(SelectionRule rule) noexcept {
  switch (rule) {
    case SelectionRule::min_norm: return "min_norm";
    case SelectionRule::random_vertex: return "random_vertex";
    case SelectionRule::random_hull: return "random_hull";
  }
  return "unknown";
}

SetValuedMap::SetValuedMap(Eigen::Index dimension, Evaluator evaluate,
                           std::optional<double> growth_bound)
    : dim_(dimension), eval_(std::move(evaluate)), growth_(growth_bound) {
  if (dim_ < 1) throw std::invalid_argument("SetValuedMap: dimension must be >= 1");
  if (!eval_) throw std::invalid_argument("SetValuedMap: missing evaluator");
}

Polytope SetValuedMap::operator()(const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("SetValuedMap: point dimension mismatch");
  Polytope values = eval_(x);
  if (values.dimension() != dim_) {
    throw std::logic_error("SetValuedMap: evaluator returned wrong dimension");
  }
  return values;
}

std::optional<double> SetValuedMap::growth_excess(const Vector& x) const {
  if (!growth_) return std::nullopt;
  const Polytope values = (*this)(x);
  const double largest = values.generators().colwise().norm().maxCoeff();
  return largest - *growth_ * (1.0 + x.norm());
}

SetValuedMap SetValuedMap::negated() const {
  return SetValuedMap(dim_, [eval = eval_](const Vector& x) { return eval(x).negated(); }, growth_);
}

MaxOfSmoothFunction::MaxOfSmoothFunction(Eigen::Index dimension, std::vector<SmoothPiece> pieces,
                                         double activity_tolerance)
    : dim_(dimension), pieces_(std::move(pieces)), tau_act_(activity_tolerance) {
  if (dim_ < 1) throw std::invalid_argument("MaxOfSmoothFunction: dimension must be >= 1");
  if (pieces_.empty()) throw std::invalid_argument("MaxOfSmoothFunction: no pieces");
  if (!(tau_act_ > 0.0)) throw std::invalid_argument("MaxOfSmoothFunction: activity tolerance must be > 0");
}

double MaxOfSmoothFunction::operator()(const Vector& x) const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& piece : pieces_) best = std::max(best, piece.value(x));
  return best;
}

double MaxOfSmoothFunction::gradient_check(Rng& rng, int trials, double radius, double h) const {
  std::uniform_real_distribution<double> unif(-radius, radius);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vector x(dim_);
    for (Eigen::Index k = 0; k < dim_; ++k) x(k) = unif(rng);
    for (const auto& piece : pieces_) {
      const Vector g = piece.gradient(x);
      for (Eigen::Index k = 0; k < dim_; ++k) {
        Vector xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        const double fd = (piece.value(xp) - piece.value(xm)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - g(k)));
      }
    }
  }
  return worst;
}

Polytope clarke_subdifferential(const MaxOfSmoothFunction& f, const Vector& x) {
  if (x.size() != f.dimension()) throw std::invalid_argument("clarke_subdifferential: dimension mismatch");
  const auto& pieces = f.pieces();
  std::vector<double> values(pieces.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    values[k] = pieces[k].value(x);
    top = std::max(top, values[k]);
  }
  std::vector<Vector> gens;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (values[k] >= top - f.activity_tolerance()) gens.push_back(pieces[k].gradient(x));
  }
  return Polytope(gens);
}

SetValuedMap subdifferential_map(MaxOfSmoothFunction f, std::optional<double> growth_bound) {
  const Eigen::Index n = f.dimension();
  return SetValuedMap(
      n, [f = std::move(f)](const Vector& x) { return clarke_subdifferential(f, x); }, growth_bound);
}

MaxOfSmoothFunction abs_function() {
  std::vector<SmoothPiece> pieces;
  pieces.push_back({[](const Vector& x) { return x(0); }, [](const Vector&) { return Vector::Constant(1, 1.0); }});
  pieces.push_back({[](const Vector& x) { return -x(0); }, [](const Vector&) { return Vector::Constant(1, -1.0); }});
  return MaxOfSmoothFunction(1, std::move(pieces));
}

MaxOfSmoothFunction half_squared_norm(Eigen::Index dim) {
  std::vector<SmoothPiece> pieces;
  pieces.push_back({[](const Vector& x) { return 0.5 * x.squaredNorm(); }, [](const Vector& x) { return Vector(x); }});
  return MaxOfSmoothFunction(dim, std::move(pieces));
}

MaxOfSmoothFunction l1_norm(Eigen::Index dim) {
  if (dim < 1 || dim > 12) throw std::invalid_argument("l1_norm: dimension must be in [1, 12]");
  std::vector<SmoothPiece> pieces;
  const unsigned count = 1u << static_cast<unsigned>(dim);
  for (unsigned mask = 0; mask < count; ++mask) {
    Vector s(dim);
    for (Eigen::Index k = 0; k < dim; ++k) s(k) = ((mask >> k) & 1u) ? -1.0 : 1.0;
    pieces.push_back({[s](const Vector& x) { return s.dot(x); }, [s](const Vector&) { return s; }});
  }
  return MaxOfSmoothFunction(dim, std::move(pieces));
}

MaxOfSmoothFunction max_of_quadratics(std::vector<Vector> centers, std::vector<Vector> scales) {
  if (centers.empty() || centers.size() != scales.size()) {
    throw std::invalid_argument("max_of_quadratics: need matching non-empty centres and scales");
  }
  const Eigen::Index n = centers.front().size();
  std::vector<SmoothPiece> pieces;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    if (centers[k].size() != n || scales[k].size() != n) {
      throw std::invalid_argument("max_of_quadratics: dimension mismatch");
    }
    Vector c = centers[k], s = scales[k];
    pieces.push_back({[c, s](const Vector& x) { return 0.5 * (x - c).cwiseProduct(s).dot(x - c); },
                      [c, s](const Vector& x) { return Vector((x - c).cwiseProduct(s)); }});
  }
  return MaxOfSmoothFunction(n, std::move(pieces));
}

Vector uniform_unit_ball(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector u(n);
  double norm = 0.0;
  do {
    for (Eigen::Index k = 0; k < n; ++k) u(k) = gauss(rng);
    norm = u.norm();
  } while (norm == 0.0);
  const double radius = std::pow(unif(rng), 1.0 / static_cast<double>(n));
  return u * (radius / norm);
}

Vector select(const Polytope& values, SelectionRule rule, Rng& rng) {
  if (values.size() == 1) return values.generator(0);
  switch (rule) {
    case SelectionRule::min_norm:
      return min_norm_point(values);
    case SelectionRule::random_vertex: {
      std::uniform_int_distribution<Eigen::Index> pick(0, values.size() - 1);
      return values.generator(pick(rng));
    }
    case SelectionRule::random_hull:
      return values.combination(random_simplex_weights(values.size(), rng));
  }
  throw std::invalid_argument("select: unknown rule");
}

Vector selection(const SetValuedMap& H, const Vector& x, SelectionRule rule, Rng& rng) {
  return select(H(x), rule, rng);
}

Vector enlargement_sample(const SetValuedMap& H, const Vector& x, double delta, Rng& rng,
                          SelectionRule rule) {
  if (!(delta >= 0.0)) throw std::invalid_argument("enlargement_sample: delta must be >= 0");
  if (delta == 0.0) return selection(H, x, rule, rng);
  const Eigen::Index n = x.size();
  const Vector z = x + delta * uniform_unit_ball(n, rng);
  const Vector h = selection(H, z, rule, rng);
  return h + delta * uniform_unit_ball(n, rng);
}

double enlargement_slack(const SetValuedMap& H, const Vector& x, const Vector& y, double delta,
                         int z_samples) {
  if (z_samples < 1) throw std::invalid_argument("enlargement_slack: z_samples must be >= 1");
  if (!(delta >= 0.0)) throw std::invalid_argument("enlargement_slack: delta must be >= 0");
  double best = distance_to_hull(y, H(x));
  if (delta == 0.0) return best;

  const Eigen::Index n = x.size();
  // An offset u is probed at x + δu when inside the ball and at x + δu/‖u‖:
  // kinks near the boundary are often only reachable at full radius.
  auto probe = [&](const Vector& u) {
    const double r = u.norm();
    if (r <= 1.0) best = std::min(best, distance_to_hull(y, H(x + delta * u)));
    if (r > 0.0 && r != 1.0) best = std::min(best, distance_to_hull(y, H(x + delta * (u / r))));
  };

  if (n <= 3) {
    constexpr int half = 4;
    const int side = 2 * half + 1;
    int total = 1;
    for (Eigen::Index k = 0; k < n; ++k) total *= side;
    Vector offset(n);
    for (int idx = 0; idx < total; ++idx) {
      int rest = idx;
      for (Eigen::Index k = 0; k < n; ++k) {
        offset(k) = static_cast<double>(rest % side - half) / half;
        rest /= side;
      }
      if (!offset.isZero(0.0)) probe(offset);
    }
  }
  const Vector toward = y - min_norm_point(H(x));
  if (toward.norm() > 0.0) probe(toward.normalized());

  Rng stream(0x5eed5eedULL);
  for (int s = 0; s < z_samples; ++s) probe(uniform_unit_ball(n, stream));
  return best - delta;
}

}  // namespace sadi
