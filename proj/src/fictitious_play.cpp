#include "sadi/games.hpp"
#include "sadi/iterate_engine.hpp"

#include <stdexcept>

namespace sadi {

Trajectory run_fictitious_play(const Game& game, const Vector& xi0, std::int64_t N, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("run_fictitious_play: N must be >= 1");
  if (!game.on_product_simplex(xi0)) {
    throw std::invalid_argument("run_fictitious_play: initial profile must lie on the product of simplices");
  }
  Rng rng(seed);
  const Eigen::Index dim = game.profile_dimension();
  Trajectory traj(dim, xi0, seed);
  traj.reserve(N);
  const Vector zero = Vector::Zero(dim);
  Vector xi = xi0;
  Vector play(dim);
  for (std::int64_t n = 0; n < N; ++n) {
    play.setZero();
    for (int i = 0; i < game.players(); ++i) {
      play(game.offset(i) + strategy_draw(game, i, xi, rng)) = 1.0;
    }
    const double eps = 1.0 / (static_cast<double>(n) + 2.0);
    xi = xi + eps * (play - xi);
    traj.push_step(xi, zero, eps, 0.0);
  }
  return traj;
}

}  // namespace sadi
