#include "sadi/occupation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace sadi {

OccupationMeasure::OccupationMeasure(Eigen::Index dimension, std::size_t capacity,
                                     std::uint64_t thinning_seed)
    : dim_(dimension), capacity_(capacity), thin_rng_(thinning_seed) {
  if (dim_ < 1) throw std::invalid_argument("OccupationMeasure: dimension must be >= 1");
  if (capacity_ < 2) throw std::invalid_argument("OccupationMeasure: capacity must be >= 2");
}

void OccupationMeasure::add(std::span<const double> x, std::span<const double> v, double weight) {
  if (static_cast<Eigen::Index>(x.size()) != dim_ || static_cast<Eigen::Index>(v.size()) != dim_) {
    throw std::invalid_argument("OccupationMeasure::add: dimension mismatch");
  }
  if (!(weight > 0.0)) throw std::invalid_argument("OccupationMeasure::add: weight must be > 0");
  xs_.insert(xs_.end(), x.begin(), x.end());
  vs_.insert(vs_.end(), v.begin(), v.end());
  weights_.push_back(weight);
  total_ += weight;
  if (weights_.size() > capacity_) thin();
}

void OccupationMeasure::add(const Vector& x, const Vector& v, double weight) {
  add(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
      std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), weight);
}

void OccupationMeasure::merge(const OccupationMeasure& other) {
  if (other.dim_ != dim_) throw std::invalid_argument("OccupationMeasure::merge: dimension mismatch");
  const auto n = static_cast<std::size_t>(dim_);
  xs_.insert(xs_.end(), other.xs_.begin(), other.xs_.end());
  vs_.insert(vs_.end(), other.vs_.begin(), other.vs_.end());
  weights_.insert(weights_.end(), other.weights_.begin(), other.weights_.end());
  // Same summation order as adding the samples one by one.
  for (double w : other.weights_) total_ += w;
  thinned_ = thinned_ || other.thinned_;
  (void)n;
  while (weights_.size() > capacity_) thin();
}

void OccupationMeasure::thin() {
  const auto n = static_cast<std::size_t>(dim_);
  const std::size_t count = weights_.size();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::size_t out = 0;
  for (std::size_t j = 0; j < count; j += 2, ++out) {
    std::size_t keep = j;
    double w = weights_[j];
    if (j + 1 < count) {
      const double w_next = weights_[j + 1];
      if (unif(thin_rng_) * (w + w_next) >= w) keep = j + 1;
      w += w_next;
    }
    std::copy_n(xs_.begin() + static_cast<std::ptrdiff_t>(keep * n), n, xs_.begin() + static_cast<std::ptrdiff_t>(out * n));
    std::copy_n(vs_.begin() + static_cast<std::ptrdiff_t>(keep * n), n, vs_.begin() + static_cast<std::ptrdiff_t>(out * n));
    weights_[out] = w;
  }
  xs_.resize(out * n);
  vs_.resize(out * n);
  weights_.resize(out);
  total_ = 0.0;
  for (double w : weights_) total_ += w;
  thinned_ = true;
}

Eigen::Map<const Vector> OccupationMeasure::position(std::size_t j) const {
  return {xs_.data() + j * static_cast<std::size_t>(dim_), dim_};
}

Eigen::Map<const Vector> OccupationMeasure::velocity(std::size_t j) const {
  return {vs_.data() + j * static_cast<std::size_t>(dim_), dim_};
}

std::pair<Vector, Vector> OccupationMeasure::bounding_box() const {
  if (empty()) throw std::logic_error("OccupationMeasure::bounding_box: empty measure");
  Vector lo = position(0), hi = position(0);
  for (std::size_t j = 1; j < size(); ++j) {
    lo = lo.cwiseMin(position(j));
    hi = hi.cwiseMax(position(j));
  }
  return {lo, hi};
}

OccupationMeasure accumulate(const Trajectory& traj, std::optional<std::int64_t> steps) {
  return accumulate_range(traj, 0, steps.value_or(traj.steps()));
}

OccupationMeasure accumulate_range(const Trajectory& traj, std::int64_t first, std::int64_t last) {
  if (first < 0 || last <= first || last > traj.steps()) {
    throw std::invalid_argument("accumulate: step range out of bounds");
  }
  OccupationMeasure mu(traj.dimension(), OccupationMeasure::kDefaultCapacity, traj.seed());
  const auto n = static_cast<std::size_t>(traj.dimension());
  for (std::int64_t j = first; j < last; ++j) {
    mu.add(std::span<const double>(traj.state(j).data(), n), std::span<const double>(traj.velocity(j).data(), n),
           traj.step(j));
  }
  return mu;
}

bool contains(const Region& region, const Vector& x) {
  return std::visit(
      [&](const auto& r) -> bool {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Ball>) {
          return (x - r.center).norm() <= r.radius;
        } else {
          return ((x.array() >= r.lo.array()) && (x.array() < r.hi.array())).all();
        }
      },
      region);
}

double residence_time(const OccupationMeasure& mu, const Region& region) {
  if (mu.empty()) throw std::invalid_argument("residence_time: empty measure");
  double inside = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (contains(region, mu.position(j))) inside += mu.weight(j);
  }
  return inside / mu.total_weight();
}

std::vector<std::int64_t> CellGrid::index_of(const Vector& x) const {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(x.size()));
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    idx[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(std::floor((x(k) - origin(k)) / cell_size));
  }
  return idx;
}

Box CellGrid::cell(const std::vector<std::int64_t>& index) const {
  Box b{origin, origin};
  for (Eigen::Index k = 0; k < origin.size(); ++k) {
    b.lo(k) = origin(k) + static_cast<double>(index[static_cast<std::size_t>(k)]) * cell_size;
    b.hi(k) = b.lo(k) + cell_size;
  }
  return b;
}

std::map<CellKey, double> residence_grid(const OccupationMeasure& mu, const CellGrid& grid) {
  if (!(grid.cell_size > 0.0)) throw std::invalid_argument("residence_grid: cell size must be > 0");
  std::map<CellKey, double> mass;
  for (std::size_t j = 0; j < mu.size(); ++j) mass[grid.index_of(mu.position(j))] += mu.weight(j);
  for (auto& [key, m] : mass) m /= mu.total_weight();
  return mass;
}

std::vector<AccumulationCell> essential_accumulation_estimate(const std::vector<OccupationMeasure>& checkpoints,
                                                              double cell_size, double threshold) {
  if (checkpoints.empty()) throw std::invalid_argument("essential_accumulation_estimate: no checkpoints");
  if (!(threshold > 0.0)) throw std::invalid_argument("essential_accumulation_estimate: threshold must be > 0");
  if (!(cell_size > 0.0)) throw std::invalid_argument("essential_accumulation_estimate: cell size must be > 0");
  Vector lo, hi;
  for (const auto& mu : checkpoints) {
    if (mu.empty()) throw std::invalid_argument("essential_accumulation_estimate: empty checkpoint");
    auto [l, h] = mu.bounding_box();
    if (lo.size() == 0) {
      lo = l;
      hi = h;
    } else {
      if (l.size() != lo.size()) throw std::invalid_argument("essential_accumulation_estimate: dimension mismatch");
      lo = lo.cwiseMin(l);
      hi = hi.cwiseMax(h);
    }
  }
  const CellGrid grid{lo, cell_size};
  const std::size_t K = checkpoints.size();
  const std::size_t recent = (K + 1) / 2;
  std::map<CellKey, double> peaks;
  for (std::size_t c = K - recent; c < K; ++c) {
    for (const auto& [key, tau] : residence_grid(checkpoints[c], grid)) {
      if (tau >= threshold) {
        auto& peak = peaks[key];
        peak = std::max(peak, tau);
      }
    }
  }
  std::vector<AccumulationCell> cells;
  for (const auto& [key, peak] : peaks) cells.push_back({key, grid.cell(key), peak});
  return cells;
}

double farthest_distance(const Box& box, const Vector& point) {
  const Vector far = (box.lo - point).cwiseAbs().cwiseMax((box.hi - point).cwiseAbs());
  return far.norm();
}

WeightFunction bump_weight(const Vector& center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("bump_weight: radius must be > 0");
  return {"bump", [center, radius](const Vector& x) {
            const double r2 = (x - center).squaredNorm() / (radius * radius);
            if (r2 >= 1.0) return 0.0;
            return std::exp(1.0 - 1.0 / (1.0 - r2));
          }};
}

WeightFunction constant_weight(double value) {
  return {"constant", [value](const Vector&) { return value; }};
}

namespace {

void enumerate_exponents(Eigen::Index n, int degree, std::vector<int>& current, Eigen::Index k, int remaining,
                         std::vector<std::vector<int>>& out) {
  if (k == n) {
    int total = 0;
    for (int e : current) total += e;
    if (total >= 1) out.push_back(current);
    return;
  }
  for (int e = 0; e <= remaining; ++e) {
    current[static_cast<std::size_t>(k)] = e;
    enumerate_exponents(n, degree, current, k + 1, remaining - e, out);
  }
  current[static_cast<std::size_t>(k)] = 0;
}

double int_pow(double base, int e) {
  double r = 1.0;
  for (int k = 0; k < e; ++k) r *= base;
  return r;
}

TestFunction monomial(const std::vector<int>& alpha, const Vector& center, const Vector& half) {
  const Eigen::Index n = center.size();
  std::string name = "mono";
  for (int e : alpha) name += "_" + std::to_string(e);

  auto value = [alpha, center, half, n](const Vector& x) {
    double r = 1.0;
    for (Eigen::Index k = 0; k < n; ++k) r *= int_pow((x(k) - center(k)) / half(k), alpha[static_cast<std::size_t>(k)]);
    return r;
  };
  auto gradient = [alpha, center, half, n](const Vector& x) {
    Vector g(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const int ak = alpha[static_cast<std::size_t>(k)];
      if (ak == 0) {
        g(k) = 0.0;
        continue;
      }
      double r = ak / half(k);
      for (Eigen::Index l = 0; l < n; ++l) {
        const int e = alpha[static_cast<std::size_t>(l)] - (l == k ? 1 : 0);
        r *= int_pow((x(l) - center(l)) / half(l), e);
      }
      g(k) = r;
    }
    return g;
  };
  // |u_k| ≤ 1 on the box, so every monomial factor is bounded by 1.
  double grad_sq = 0.0, hess_sq = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double ak = alpha[static_cast<std::size_t>(k)];
    grad_sq += (ak / half(k)) * (ak / half(k));
    for (Eigen::Index l = 0; l < n; ++l) {
      const double al = alpha[static_cast<std::size_t>(l)];
      const double entry = (k == l ? ak * (ak - 1.0) : ak * al) / (half(k) * half(l));
      hess_sq += entry * entry;
    }
  }
  const double bound = std::max(std::sqrt(hess_sq), 2.0 * std::sqrt(grad_sq));
  return {name, value, gradient, bound};
}

TestFunction gaussian_bump(const Vector& center, double width, int id) {
  auto value = [center, width](const Vector& x) {
    return std::exp(-(x - center).squaredNorm() / (2.0 * width * width));
  };
  auto gradient = [center, width](const Vector& x) {
    const double g = std::exp(-(x - center).squaredNorm() / (2.0 * width * width));
    return Vector(-(x - center) * (g / (width * width)));
  };
  const double bound = std::max(1.0 / (width * width), 2.0 * std::exp(-0.5) / width);
  return {"bump_" + std::to_string(id), value, gradient, bound};
}

}  // namespace

TestFunctionBank make_test_bank(const Vector& lo, const Vector& hi, int degree, int bumps, std::uint64_t seed) {
  if (lo.size() != hi.size() || lo.size() < 1) throw std::invalid_argument("make_test_bank: bad box");
  if (degree < 1) throw std::invalid_argument("make_test_bank: degree must be >= 1");
  if (bumps < 0) throw std::invalid_argument("make_test_bank: bumps must be >= 0");
  const Eigen::Index n = lo.size();
  TestFunctionBank bank{lo, hi, {}, {}};
  const Vector center = (lo + hi) / 2.0;
  const Vector half = ((hi - lo) / 2.0).cwiseMax(1e-6);

  std::vector<std::vector<int>> exponents;
  std::vector<int> current(static_cast<std::size_t>(n), 0);
  enumerate_exponents(n, degree, current, 0, degree, exponents);
  for (const auto& alpha : exponents) bank.functions.push_back(monomial(alpha, center, half));

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double scale = half.mean();
  for (int b = 0; b < bumps; ++b) {
    Vector c(n);
    for (Eigen::Index k = 0; k < n; ++k) c(k) = lo(k) + unif(rng) * (hi(k) - lo(k));
    const double width = scale * (0.2 + 0.6 * unif(rng));
    bank.functions.push_back(gaussian_bump(c, width, b));
  }

  bank.weights.push_back(constant_weight(1.0));
  for (Eigen::Index k = 0; k < n; ++k) {
    const double ck = center(k), hk = half(k);
    bank.weights.push_back({"sigmoid_" + std::to_string(k), [k, ck, hk](const Vector& x) {
                              return 1.0 / (1.0 + std::exp(-(x(k) - ck) / hk));
                            }});
  }
  WeightFunction bump = bump_weight(center, half.norm());
  bump.name = "bump_center";
  bank.weights.push_back(bump);
  return bank;
}

double circulation(const OccupationMeasure& mu, const std::function<Vector(const Vector&)>& field) {
  if (mu.empty()) throw std::invalid_argument("circulation: empty measure");
  double acc = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    acc += mu.weight(j) * field(mu.position(j)).dot(mu.velocity(j));
  }
  return acc / mu.total_weight();
}

double closed_residual(const OccupationMeasure& mu, const TestFunction& g) {
  return circulation(mu, g.gradient);
}

double interpolated_residual(const Trajectory& traj, const TestFunction& g, std::optional<std::int64_t> steps) {
  const std::int64_t N = steps.value_or(traj.steps());
  if (N < 1 || N > traj.steps()) throw std::invalid_argument("interpolated_residual: step count out of range");
  const double t = traj.time(N);
  if (!(t > 0.0)) throw std::domain_error("interpolated_residual: zero elapsed clock");
  return (g.value(traj.state(N)) - g.value(traj.state(0))) / t;
}

double interpolation_bound(const Trajectory& traj, double L, std::optional<std::int64_t> steps) {
  const std::int64_t N = steps.value_or(traj.steps());
  if (N < 1 || N > traj.steps()) throw std::invalid_argument("interpolation_bound: step count out of range");
  double acc = 0.0;
  for (std::int64_t j = 0; j < N; ++j) {
    const double move = traj.step(j) * traj.velocity(j).norm();
    acc += move * std::min(1.0, move);
  }
  return L * acc / traj.time(N);
}

std::optional<Vector> centroid_field_estimate(const OccupationMeasure& mu, const Vector& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("centroid_field_estimate: bandwidth must be > 0");
  if (x.size() != mu.dimension()) throw std::invalid_argument("centroid_field_estimate: dimension mismatch");
  const double reach2 = 25.0 * h * h;
  const double cutoff2 = 1600.0 * h * h;
  bool defined = false;
  std::vector<std::pair<std::size_t, double>> terms;
  double top = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double d2 = (mu.position(j) - x).squaredNorm();
    if (d2 > cutoff2) continue;
    if (d2 <= reach2) defined = true;
    const double w = mu.weight(j) * std::exp(-d2 / (2.0 * h * h));
    terms.emplace_back(j, w);
    top = std::max(top, w);
  }
  if (!defined || !(top > 0.0)) return std::nullopt;
  // Weights relative to the largest one, so a lone sample returns its velocity exactly.
  double denom = 0.0;
  Vector num = Vector::Zero(mu.dimension());
  for (const auto& [j, w] : terms) {
    const double r = w / top;
    denom += r;
    num += r * mu.velocity(j);
  }
  return Vector(num / denom);
}

double bandwidth_rule(const OccupationMeasure& mu) {
  if (mu.empty()) throw std::invalid_argument("bandwidth_rule: empty measure");
  const Eigen::Index n = mu.dimension();
  Vector mean = Vector::Zero(n);
  for (std::size_t j = 0; j < mu.size(); ++j) mean += mu.weight(j) * mu.position(j);
  mean /= mu.total_weight();
  double var = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) var += mu.weight(j) * (mu.position(j) - mean).squaredNorm();
  const double sigma = std::sqrt(var / mu.total_weight() / static_cast<double>(n));
  const double M = static_cast<double>(mu.size());
  return 1.06 * sigma * std::pow(M, -1.0 / (4.0 + static_cast<double>(n)));
}

MembershipGap centroid_membership_gap(const OccupationMeasure& mu, const SetValuedMap& H,
                                      const std::vector<Vector>& probes, double h) {
  MembershipGap out;
  for (const auto& x : probes) {
    const auto v = centroid_field_estimate(mu, x, h);
    if (!v) {
      out.per_probe.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double d = distance_to_hull(*v, H(x));
    out.per_probe.push_back(d);
    out.gap = std::max(out.gap, d);
    ++out.defined;
  }
  if (out.defined == 0) throw std::domain_error("centroid_membership_gap: estimator undefined at every probe");
  return out;
}

std::optional<Vector> OscillationStatistic::conditional() const {
  if (psi_mass == 0.0) return std::nullopt;
  return Vector(average / psi_mass);
}

OscillationStatistic oscillation_statistic(const OccupationMeasure& mu, const WeightFunction& psi) {
  if (mu.empty()) throw std::invalid_argument("oscillation_statistic: empty measure");
  Vector acc = Vector::Zero(mu.dimension());
  double mass = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double w = mu.weight(j) * psi.value(mu.position(j));
    acc += w * mu.velocity(j);
    mass += w;
  }
  return {acc / mu.total_weight(), mass / mu.total_weight()};
}

double velocity_moment(const OccupationMeasure& mu, double q) {
  if (!(q > 1.0)) throw std::invalid_argument("velocity_moment: q must be > 1");
  if (mu.empty()) throw std::invalid_argument("velocity_moment: empty measure");
  double acc = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) acc += mu.weight(j) * std::pow(mu.velocity(j).norm(), q);
  return acc / mu.total_weight();
}

}  // namespace sadi
