#include "sadi/games.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace sadi {

namespace {

std::size_t tensor_size(const std::vector<int>& counts) {
  std::size_t s = 1;
  for (int k : counts) s *= static_cast<std::size_t>(k);
  return s;
}

// Advances a mixed-radix counter; returns false after the last profile.
bool next_profile(std::vector<int>& profile, const std::vector<int>& counts) {
  for (std::size_t i = profile.size(); i-- > 0;) {
    if (++profile[i] < counts[i]) return true;
    profile[i] = 0;
  }
  return false;
}

void flatten_nested(const nlohmann::json& node, std::size_t depth, const std::vector<int>& counts,
                    std::vector<double>& out) {
  if (depth == counts.size()) {
    if (!node.is_number()) throw std::invalid_argument("payoff tensor: expected a number at full depth");
    out.push_back(node.get<double>());
    return;
  }
  if (!node.is_array() || node.size() != static_cast<std::size_t>(counts[depth])) {
    throw std::invalid_argument("payoff tensor: shape does not match action_counts");
  }
  for (const auto& child : node) flatten_nested(child, depth + 1, counts, out);
}

nlohmann::json nest(const std::vector<double>& flat, std::size_t depth, std::size_t& pos,
                    const std::vector<int>& counts) {
  if (depth == counts.size()) return flat[pos++];
  nlohmann::json arr = nlohmann::json::array();
  for (int a = 0; a < counts[depth]; ++a) arr.push_back(nest(flat, depth + 1, pos, counts));
  return arr;
}

}  // namespace

Game::Game(std::vector<int> action_counts, std::vector<std::vector<double>> payoffs, double br_tolerance)
    : counts_(std::move(action_counts)), payoffs_(std::move(payoffs)), tau_br_(br_tolerance) {
  if (counts_.empty()) throw std::invalid_argument("Game: need at least one player");
  for (int k : counts_) {
    if (k < 1) throw std::invalid_argument("Game: every player needs at least one action");
  }
  if (payoffs_.size() != counts_.size()) throw std::invalid_argument("Game: one payoff tensor per player");
  const std::size_t cells = tensor_size(counts_);
  for (const auto& u : payoffs_) {
    if (u.size() != cells) throw std::invalid_argument("Game: payoff tensor size mismatch");
    for (double value : u) {
      if (!std::isfinite(value)) throw std::invalid_argument("Game: non-finite payoff");
    }
  }
  if (!(tau_br_ >= 0.0)) throw std::invalid_argument("Game: best-response tolerance must be >= 0");
  for (int k : counts_) {
    offsets_.push_back(total_);
    total_ += k;
  }
}

Game Game::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("game: document must be an object");
  for (const char* key : {"players", "action_counts", "payoff_tensors"}) {
    if (!doc.contains(key)) throw std::invalid_argument(std::string("game: missing field ") + key);
  }
  const int m = doc.at("players").get<int>();
  auto counts = doc.at("action_counts").get<std::vector<int>>();
  if (static_cast<int>(counts.size()) != m) throw std::invalid_argument("game: action_counts length != players");
  const auto& tensors = doc.at("payoff_tensors");
  if (!tensors.is_array() || static_cast<int>(tensors.size()) != m) {
    throw std::invalid_argument("game: payoff_tensors length != players");
  }
  std::vector<std::vector<double>> payoffs;
  for (const auto& t : tensors) {
    std::vector<double> flat;
    flatten_nested(t, 0, counts, flat);
    payoffs.push_back(std::move(flat));
  }
  const double tol = doc.value("br_tolerance", 1e-9);
  return Game(std::move(counts), std::move(payoffs), tol);
}

nlohmann::json Game::to_json() const {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& u : payoffs_) {
    std::size_t pos = 0;
    tensors.push_back(nest(u, 0, pos, counts_));
  }
  return {{"players", players()}, {"action_counts", counts_}, {"payoff_tensors", tensors},
          {"br_tolerance", tau_br_}};
}

double Game::payoff(int player, const std::vector<int>& pure_profile) const {
  if (pure_profile.size() != counts_.size()) throw std::invalid_argument("Game::payoff: profile size mismatch");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (pure_profile[i] < 0 || pure_profile[i] >= counts_[i]) {
      throw std::invalid_argument("Game::payoff: action out of range");
    }
    idx = idx * static_cast<std::size_t>(counts_[i]) + static_cast<std::size_t>(pure_profile[i]);
  }
  return payoffs_.at(static_cast<std::size_t>(player))[idx];
}

Vector Game::action_payoffs(int player, const Vector& profile) const {
  if (profile.size() != total_) throw std::invalid_argument("Game::action_payoffs: profile dimension mismatch");
  const auto ip = static_cast<std::size_t>(player);
  Vector u = Vector::Zero(counts_.at(ip));
  const auto& tensor = payoffs_[ip];
  std::vector<int> pure(counts_.size(), 0);
  std::size_t idx = 0;
  do {
    double w = 1.0;
    for (std::size_t j = 0; j < counts_.size() && w != 0.0; ++j) {
      if (j != ip) w *= profile(offsets_[j] + pure[j]);
    }
    if (w != 0.0) u(pure[ip]) += w * tensor[idx];
    ++idx;
  } while (next_profile(pure, counts_));
  return u;
}

double Game::expected_payoff(int player, const Vector& profile) const {
  const Vector u = action_payoffs(player, profile);
  return u.dot(profile.segment(offset(player), actions(player)));
}

bool Game::is_zero_sum() const {
  if (players() != 2) return false;
  for (std::size_t k = 0; k < payoffs_[0].size(); ++k) {
    if (payoffs_[0][k] + payoffs_[1][k] != 0.0) return false;
  }
  return true;
}

Game Game::with_scaled_payoffs(int player, double factor) const {
  auto payoffs = payoffs_;
  for (double& v : payoffs.at(static_cast<std::size_t>(player))) v *= factor;
  return Game(counts_, std::move(payoffs), tau_br_);
}

bool Game::on_product_simplex(const Vector& profile, double tol) const {
  if (profile.size() != total_) return false;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const auto block = profile.segment(offsets_[i], counts_[i]);
    if (block.minCoeff() < -tol) return false;
    if (std::abs(block.sum() - 1.0) > tol) return false;
  }
  return true;
}

Vector Game::vertex(int player, int action) const {
  Vector e = Vector::Zero(actions(player));
  e(action) = 1.0;
  return e;
}

std::vector<int> best_response_actions(const Game& game, int player, const Vector& profile) {
  const Vector u = game.action_payoffs(player, profile);
  const double top = u.maxCoeff();
  std::vector<int> best;
  for (Eigen::Index a = 0; a < u.size(); ++a) {
    if (u(a) >= top - game.br_tolerance()) best.push_back(static_cast<int>(a));
  }
  return best;
}

Polytope best_response(const Game& game, int player, const Vector& profile) {
  const auto actions = best_response_actions(game, player, profile);
  Matrix gens = Matrix::Zero(game.actions(player), static_cast<Eigen::Index>(actions.size()));
  for (std::size_t k = 0; k < actions.size(); ++k) gens(actions[k], static_cast<Eigen::Index>(k)) = 1.0;
  return Polytope(std::move(gens));
}

SetValuedMap game_map(const Game& game) {
  return SetValuedMap(game.profile_dimension(), [game](const Vector& xi) {
    const int m = game.players();
    std::vector<std::vector<int>> br(static_cast<std::size_t>(m));
    std::vector<int> sizes(static_cast<std::size_t>(m));
    Eigen::Index combos = 1;
    for (int i = 0; i < m; ++i) {
      br[static_cast<std::size_t>(i)] = best_response_actions(game, i, xi);
      sizes[static_cast<std::size_t>(i)] = static_cast<int>(br[static_cast<std::size_t>(i)].size());
      combos *= sizes[static_cast<std::size_t>(i)];
    }
    Matrix gens(xi.size(), combos);
    std::vector<int> pick(static_cast<std::size_t>(m), 0);
    Eigen::Index col = 0;
    do {
      gens.col(col) = -xi;
      for (int i = 0; i < m; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        gens(game.offset(i) + br[ui][static_cast<std::size_t>(pick[ui])], col) += 1.0;
      }
      ++col;
    } while (next_profile(pick, sizes));
    return Polytope(std::move(gens));
  }, 2.0);
}

int strategy_draw(const Game& game, int player, const Vector& profile, Rng& rng) {
  const auto actions = best_response_actions(game, player, profile);
  if (actions.size() == 1) return actions.front();
  std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
  return actions[pick(rng)];
}

Game matching_pennies() {
  std::vector<double> u1{1.0, -1.0, -1.0, 1.0};
  std::vector<double> u2{-1.0, 1.0, 1.0, -1.0};
  return Game({2, 2}, {u1, u2});
}

Game generalized_rps(double win, double loss) {
  if (!(win > 0.0) || !(loss > 0.0)) {
    throw std::invalid_argument("generalized_rps: win and loss payoffs must be > 0");
  }
  // Action a beats action b when a − b ≡ 1 (mod 3): paper > rock > scissors > paper.
  auto outcome = [&](int a, int b) {
    if (a == b) return 0.0;
    return ((a - b + 3) % 3 == 1) ? win : -loss;
  };
  std::vector<double> u1(9), u2(9);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      u1[static_cast<std::size_t>(3 * a + b)] = outcome(a, b);
      u2[static_cast<std::size_t>(3 * a + b)] = outcome(b, a);
    }
  }
  return Game({3, 3}, {u1, u2});
}

Game potential_2x2() {
  std::vector<double> u{2.0, 0.0, 0.0, 1.0};
  return Game({2, 2}, {u, u});
}

double potential_2x2_potential(const Vector& profile) {
  if (profile.size() != 4) throw std::invalid_argument("potential_2x2_potential: expects a 2x2 profile");
  return 2.0 * profile(0) * profile(2) + profile(1) * profile(3);
}

Game builtin_game(const std::string& name, const nlohmann::json& params) {
  if (name == "matching_pennies") return matching_pennies();
  if (name == "potential_2x2") return potential_2x2();
  if (name == "generalized_rps") {
    const double win = params.is_object() ? params.value("win", 1.0) : 1.0;
    const double loss = params.is_object() ? params.value("loss", 2.0) : 2.0;
    return generalized_rps(win, loss);
  }
  throw std::invalid_argument("unknown built-in game: " + name);
}

Vector uniform_profile(const Game& game) {
  Vector xi(game.profile_dimension());
  for (int i = 0; i < game.players(); ++i) {
    xi.segment(game.offset(i), game.actions(i)).setConstant(1.0 / game.actions(i));
  }
  return xi;
}

}  // namespace sadi
