#pragma once

// Finite-action games on products of simplices. A mixed profile ξ is stored as
// one vector with the players' simplices concatenated in player order.

#include "sadi/convex_geometry.hpp"
#include "sadi/setvalued_maps.hpp"
#include "sadi/types.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sadi {

class Game {
 public:
  /// payoffs[i] is player i's payoff tensor over pure profiles, row-major with
  /// player 0's action the slowest index. Throws std::invalid_argument on
  /// inconsistent shapes or non-finite entries.
  Game(std::vector<int> action_counts, std::vector<std::vector<double>> payoffs,
       double br_tolerance = 1e-9);

  /// {"players": m, "action_counts": [...], "payoff_tensors": [nested arrays]}.
  static Game from_json(const nlohmann::json& doc);
  [[nodiscard]] nlohmann::json to_json() const;

  [[nodiscard]] int players() const { return static_cast<int>(counts_.size()); }
  [[nodiscard]] int actions(int player) const { return counts_.at(static_cast<std::size_t>(player)); }
  [[nodiscard]] const std::vector<int>& action_counts() const { return counts_; }
  [[nodiscard]] Eigen::Index profile_dimension() const { return total_; }
  /// Offset of player i's block inside a profile vector.
  [[nodiscard]] Eigen::Index offset(int player) const { return offsets_.at(static_cast<std::size_t>(player)); }
  [[nodiscard]] double br_tolerance() const { return tau_br_; }

  [[nodiscard]] double payoff(int player, const std::vector<int>& pure_profile) const;
  [[nodiscard]] const std::vector<double>& payoff_tensor(int player) const {
    return payoffs_.at(static_cast<std::size_t>(player));
  }

  /// u_a = U^i(e_a, ξ^{−i}) for each pure action a of player i; player i's own block of ξ is ignored.
  [[nodiscard]] Vector action_payoffs(int player, const Vector& profile) const;
  /// U^i(ξ) for the full mixed profile.
  [[nodiscard]] double expected_payoff(int player, const Vector& profile) const;

  [[nodiscard]] bool is_zero_sum() const;
  /// Copy with player i's payoffs multiplied by factor.
  [[nodiscard]] Game with_scaled_payoffs(int player, double factor) const;

  /// Every block non-negative to −tol and summing to 1 within tol.
  [[nodiscard]] bool on_product_simplex(const Vector& profile, double tol = 1e-9) const;
  [[nodiscard]] Vector vertex(int player, int action) const;

 private:
  std::vector<int> counts_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index total_ = 0;
  std::vector<std::vector<double>> payoffs_;
  double tau_br_;
};

/// Pure actions within τ_BR of the best per-action payoff, lowest index first.
[[nodiscard]] std::vector<int> best_response_actions(const Game& game, int player, const Vector& profile);

/// BR^i(ξ^{−i}) as the hull of its vertices e_a in R^{k_i}.
[[nodiscard]] Polytope best_response(const Game& game, int player, const Vector& profile);

/// H(ξ) = (BR^1(ξ^{−1}) − ξ^1) × … × (BR^m(ξ^{−m}) − ξ^m), generated by all
/// combinations of best-response vertices.
[[nodiscard]] SetValuedMap game_map(const Game& game);

/// Uniform draw among the best-response vertices; returns the action index.
[[nodiscard]] int strategy_draw(const Game& game, int player, const Vector& profile, Rng& rng);

// Built-in games.
/// U^1 = [[1, −1], [−1, 1]], U^2 = −U^1.
[[nodiscard]] Game matching_pennies();
/// 3×3 cyclic game for both players: 0 on the diagonal, +win for a win, −loss for a loss.
[[nodiscard]] Game generalized_rps(double win, double loss);
/// Coordination game U^1 = U^2 = [[2, 0], [0, 1]].
[[nodiscard]] Game potential_2x2();
/// Exact potential of potential_2x2 at a mixed profile.
[[nodiscard]] double potential_2x2_potential(const Vector& profile);

/// Built-in lookup by name: "matching_pennies", "generalized_rps", "potential_2x2".
/// `params` may carry {"win": a, "loss": b} for generalized_rps.
[[nodiscard]] Game builtin_game(const std::string& name, const nlohmann::json& params = {});

/// The uniform profile (each block 1/k_i).
[[nodiscard]] Vector uniform_profile(const Game& game);

}  // namespace sadi
