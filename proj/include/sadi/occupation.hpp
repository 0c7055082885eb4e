#pragma once

// Step-weighted occupation measures over (position, velocity) pairs
//   μ_i = Σ_{j≤i} ε_j δ_(x_j, v_{j+1}) / Σ_{j≤i} ε_j
// and the diagnostics computed from them.

#include "sadi/iterate_engine.hpp"
#include "sadi/setvalued_maps.hpp"
#include "sadi/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sadi {

class OccupationMeasure {
 public:
  static constexpr std::size_t kDefaultCapacity = 1'000'000;

  explicit OccupationMeasure(Eigen::Index dimension, std::size_t capacity = kDefaultCapacity,
                             std::uint64_t thinning_seed = 0);

  /// Appends one weighted sample. Beyond capacity the store is thinned by
  /// pairing adjacent samples, keeping one of each pair with probability
  /// proportional to its weight and giving it the pair's summed weight.
  void add(const Vector& x, const Vector& v, double weight);
  void add(std::span<const double> x, std::span<const double> v, double weight);

  /// Appends all samples of `other` after this store's samples.
  void merge(const OccupationMeasure& other);

  [[nodiscard]] Eigen::Index dimension() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return weights_.size(); }
  [[nodiscard]] bool empty() const { return weights_.empty(); }
  [[nodiscard]] double total_weight() const { return total_; }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] bool thinned() const { return thinned_; }

  [[nodiscard]] Eigen::Map<const Vector> position(std::size_t j) const;
  [[nodiscard]] Eigen::Map<const Vector> velocity(std::size_t j) const;
  [[nodiscard]] double weight(std::size_t j) const { return weights_[j]; }

  /// Componentwise min and max of the stored positions.
  [[nodiscard]] std::pair<Vector, Vector> bounding_box() const;

 private:
  void thin();

  Eigen::Index dim_;
  std::size_t capacity_;
  std::vector<double> xs_, vs_, weights_;
  double total_ = 0.0;
  bool thinned_ = false;
  Rng thin_rng_;
};

/// Samples (x_j, v_{j+1}, ε_j) for j < steps (default: the whole trajectory).
[[nodiscard]] OccupationMeasure accumulate(const Trajectory& traj,
                                           std::optional<std::int64_t> steps = std::nullopt);
/// Samples for first ≤ j < last; used to build stores incrementally.
[[nodiscard]] OccupationMeasure accumulate_range(const Trajectory& traj, std::int64_t first, std::int64_t last);

/// Closed ball, or half-open axis box [lo, hi).
struct Ball {
  Vector center;
  double radius;
};
struct Box {
  Vector lo;
  Vector hi;
};
using Region = std::variant<Ball, Box>;

[[nodiscard]] bool contains(const Region& region, const Vector& x);

/// τ^U: normalised weight of the samples with x_j ∈ U.
[[nodiscard]] double residence_time(const OccupationMeasure& mu, const Region& region);

/// Axis-aligned grid anchored at `origin` with side `cell_size`.
struct CellGrid {
  Vector origin;
  double cell_size;

  [[nodiscard]] std::vector<std::int64_t> index_of(const Vector& x) const;
  [[nodiscard]] Box cell(const std::vector<std::int64_t>& index) const;
};

using CellKey = std::vector<std::int64_t>;

/// Residence time of every occupied cell.
[[nodiscard]] std::map<CellKey, double> residence_grid(const OccupationMeasure& mu, const CellGrid& grid);

struct AccumulationCell {
  CellKey index;
  Box box;
  double peak_residence;  // max over the examined checkpoints
};

/// Finite-horizon proxy for lim sup_i τ_i^U > 0: cells of a grid over the
/// joint bounding box whose residence time reaches `threshold` in at least
/// one of the last ⌈K/2⌉ of the K checkpoints (given in increasing order).
[[nodiscard]] std::vector<AccumulationCell> essential_accumulation_estimate(
    const std::vector<OccupationMeasure>& checkpoints, double cell_size, double threshold);

/// Largest distance from `point` to any point of the box.
[[nodiscard]] double farthest_distance(const Box& box, const Vector& point);

/// Smooth test function with its gradient. `gradient_bound` is a constant C
/// with ‖∇g(x) − ∇g(y)‖ ≤ C·min(1, ‖x − y‖) on the box the bank was built
/// for, i.e. C ≥ max(Lip(∇g), 2 sup‖∇g‖).
struct TestFunction {
  std::string name;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  double gradient_bound = 0.0;
};

/// Bounded continuous weight ψ.
struct WeightFunction {
  std::string name;
  std::function<double(const Vector&)> value;
};

struct TestFunctionBank {
  Vector lo, hi;
  std::vector<TestFunction> functions;
  std::vector<WeightFunction> weights;
};

/// Monomials of total degree 1..degree in the box-normalised coordinates
/// u = (x − centre)/half_width, `bumps` Gaussian radial bumps with centres
/// and widths drawn from `seed`, and weights: constant 1, one sigmoid per
/// coordinate, and a compact bump at the box centre.
[[nodiscard]] TestFunctionBank make_test_bank(const Vector& lo, const Vector& hi, int degree = 2,
                                              int bumps = 3, std::uint64_t seed = 7);

/// ψ(x) = exp(1 − 1/(1 − ‖x − c‖²/r²)) inside the open ball, 0 outside.
[[nodiscard]] WeightFunction bump_weight(const Vector& center, double radius);
[[nodiscard]] WeightFunction constant_weight(double value = 1.0);

/// Σ ε_j <ξ(x_j), v_{j+1}> / Σ ε_j.
[[nodiscard]] double circulation(const OccupationMeasure& mu,
                                 const std::function<Vector(const Vector&)>& field);

/// circulation with ξ = ∇g.
[[nodiscard]] double closed_residual(const OccupationMeasure& mu, const TestFunction& g);

/// (g(x_N) − g(x_0)) / t_N over the first N steps (default all).
[[nodiscard]] double interpolated_residual(const Trajectory& traj, const TestFunction& g,
                                           std::optional<std::int64_t> steps = std::nullopt);

/// L/t_N · Σ_{j<N} ε_j‖v_{j+1}‖·min(1, ε_j‖v_{j+1}‖).
[[nodiscard]] double interpolation_bound(const Trajectory& traj, double L,
                                         std::optional<std::int64_t> steps = std::nullopt);

/// Nadaraya–Watson estimate of the centroid field with a Gaussian kernel;
/// nullopt when no sample lies within 5h of x.
[[nodiscard]] std::optional<Vector> centroid_field_estimate(const OccupationMeasure& mu, const Vector& x,
                                                            double h);

/// h = 1.06 σ̂ M^{−1/(4+n)}, σ̂ the weighted RMS deviation of the positions per coordinate.
[[nodiscard]] double bandwidth_rule(const OccupationMeasure& mu);

struct MembershipGap {
  double gap = 0.0;        // max over defined probes of d(v̂(x), H(x))
  std::size_t defined = 0; // probes where the estimator was defined
  std::vector<double> per_probe;  // NaN where undefined
};

/// Throws std::domain_error when the estimator is undefined at every probe.
[[nodiscard]] MembershipGap centroid_membership_gap(const OccupationMeasure& mu, const SetValuedMap& H,
                                                    const std::vector<Vector>& probes, double h);

struct OscillationStatistic {
  Vector average;    // Σ ε_j ψ(x_j) v_{j+1} / Σ ε_j
  double psi_mass;   // Σ ε_j ψ(x_j) / Σ ε_j
  /// Σ ε_j ψ(x_j) v_{j+1} / Σ ε_j ψ(x_j); empty when psi_mass = 0.
  [[nodiscard]] std::optional<Vector> conditional() const;
};

[[nodiscard]] OscillationStatistic oscillation_statistic(const OccupationMeasure& mu, const WeightFunction& psi);

/// Σ ε_j ‖v_{j+1}‖^q / Σ ε_j. Requires q > 1.
[[nodiscard]] double velocity_moment(const OccupationMeasure& mu, double q);

}  // namespace sadi
