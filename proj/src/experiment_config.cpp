#include "sadi/experiment.hpp"

#include <cmath>
#include <sstream>

namespace sadi {

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError(std::string(where) + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

double number(const json& obj, const char* key, const char* where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw ConfigError(std::string(where) + "." + key + ": expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const char* where) {
  if (!obj.contains(key)) return fallback;
  return number(obj, key, where);
}

Vector vector_from(const json& v, const char* where) {
  if (!v.is_array()) throw ConfigError(std::string(where) + ": expected an array");
  std::vector<double> flat;
  for (const auto& e : v) {
    if (e.is_array()) {
      for (const auto& inner : e) {
        if (!inner.is_number()) throw ConfigError(std::string(where) + ": expected numbers");
        flat.push_back(inner.get<double>());
      }
    } else if (e.is_number()) {
      flat.push_back(e.get<double>());
    } else {
      throw ConfigError(std::string(where) + ": expected numbers");
    }
  }
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

StepSchedule parse_schedule(const json& obj, const char* where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  const std::string kind = require(obj, "kind", where).get<std::string>();
  StepSchedule s;
  s.a = number(obj, "a", where);
  if (kind == "power") {
    s.kind = StepSchedule::Kind::power;
    s.rho = number(obj, "rho", where);
  } else if (kind == "logarithmic") {
    s.kind = StepSchedule::Kind::logarithmic;
    s.rho = 0.0;
  } else if (kind == "constant") {
    s.kind = StepSchedule::Kind::constant;
    s.rho = 0.0;
  } else {
    throw ConfigError(std::string(where) + ": unknown schedule kind '" + kind + "'");
  }
  return s;
}

NoiseModel parse_noise(const json& obj) {
  NoiseModel n;
  if (obj.is_null()) return n;
  if (!obj.is_object()) throw ConfigError("noise: expected an object");
  const std::string kind = require(obj, "kind", "noise").get<std::string>();
  n.q = number_or(obj, "q", 2.0, "noise");
  if (kind == "none") {
    n.kind = NoiseModel::Kind::none;
  } else if (kind == "gaussian") {
    n.kind = NoiseModel::Kind::gaussian;
    n.scale = number(obj, "sigma", "noise");
  } else if (kind == "uniform_ball") {
    n.kind = NoiseModel::Kind::uniform_ball;
    n.scale = number(obj, "radius", "noise");
  } else if (kind == "student_t") {
    n.kind = NoiseModel::Kind::student_t;
    n.df = number(obj, "df", "noise");
    n.scale = number_or(obj, "scale", 1.0, "noise");
  } else {
    throw ConfigError("noise: unknown kind '" + kind + "'");
  }
  return n;
}

std::vector<Vector> builtin_nash(const std::string& name, const Game& game) {
  if (name == "matching_pennies" || name == "generalized_rps") return {uniform_profile(game)};
  if (name == "potential_2x2") {
    Vector a(4), b(4), mixed(4);
    a << 1, 0, 1, 0;
    b << 0, 1, 0, 1;
    mixed << 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0;
    return {a, b, mixed};
  }
  return {};
}

void parse_diagnostics(const json& obj, DiagnosticsToggles& d) {
  if (obj.is_null()) return;
  if (!obj.is_object()) throw ConfigError("diagnostics: expected an object");
  auto flag = [&](const char* key, bool& target) {
    if (obj.contains(key)) {
      if (!obj.at(key).is_boolean()) throw ConfigError(std::string("diagnostics.") + key + ": expected a boolean");
      target = obj.at(key).get<bool>();
    }
  };
  flag("closed_residual", d.closed_residual);
  flag("oscillation", d.oscillation);
  flag("velocity_moment", d.velocity_moment);
  flag("residence", d.residence);
  flag("essential_accumulation", d.essential_accumulation);
  flag("centroid_gap", d.centroid_gap);
  flag("circulation", d.circulation);
  d.q = number_or(obj, "q", d.q, "diagnostics");
  d.cell_size = number_or(obj, "cell_size", d.cell_size, "diagnostics");
  d.threshold = number_or(obj, "threshold", d.threshold, "diagnostics");
  d.bank_degree = static_cast<int>(number_or(obj, "bank_degree", d.bank_degree, "diagnostics"));
  d.bank_bumps = static_cast<int>(number_or(obj, "bank_bumps", d.bank_bumps, "diagnostics"));
  if (obj.contains("bank_seed")) d.bank_seed = obj.at("bank_seed").get<std::uint64_t>();
  d.probe_count = static_cast<int>(number_or(obj, "probe_count", d.probe_count, "diagnostics"));
  if (obj.contains("probes") && !obj.at("probes").is_null()) {
    for (const auto& p : obj.at("probes")) {
      d.probes.push_back(p.is_array() ? vector_from(p, "diagnostics.probes") : Vector::Constant(1, p.get<double>()));
    }
  }
}

Eigen::Index function_dimension(const std::string& name, Eigen::Index declared) {
  if (name == "abs") return 1;
  if (name != "half_squared_norm" && name != "l1" && name != "max_quadratics") {
    throw ConfigError("problem.function: unknown function '" + name + "'");
  }
  return declared;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config: document must be a JSON object");
  ExperimentConfig cfg;
  cfg.source = doc;
  try {
    cfg.name = doc.value("name", std::string("experiment"));
    const json& problem = require(doc, "problem", "config");
    const std::string kind = require(problem, "kind", "problem").get<std::string>();

    if (doc.contains("schedule")) cfg.schedule = parse_schedule(doc.at("schedule"), "schedule");
    cfg.noise = parse_noise(doc.value("noise", json()));
    if (doc.contains("delta") && !doc.at("delta").is_null()) {
      cfg.delta.d = number_or(doc.at("delta"), "d", 0.0, "delta");
      cfg.delta.sigma = number_or(doc.at("delta"), "sigma", 1.0, "delta");
    }
    if (doc.contains("selection")) cfg.rule = parse_selection_rule(doc.at("selection").get<std::string>());

    if (kind == "sgd" || kind == "shb") {
      cfg.problem = kind == "sgd" ? ExperimentConfig::Problem::sgd : ExperimentConfig::Problem::shb;
      cfg.function = require(problem, "function", "problem").get<std::string>();
      cfg.dimension = function_dimension(cfg.function, problem.value("dimension", 1));
      const char* start = kind == "sgd" ? "x0" : "q0";
      cfg.x0 = problem.contains(start) ? vector_from(problem.at(start), "problem.x0")
                                       : Vector::Ones(cfg.dimension);
      if (kind == "shb") {
        cfg.p0 = problem.contains("p0") ? vector_from(problem.at("p0"), "problem.p0") : Vector::Zero(cfg.dimension);
        cfg.c = number_or(problem, "c", 1.0, "problem");
        cfg.beta_schedule = parse_schedule(require(problem, "beta_schedule", "problem"), "problem.beta_schedule");
      }
    } else if (kind == "fictitious_play") {
      cfg.problem = ExperimentConfig::Problem::fictitious_play;
      const json& g = require(problem, "game", "problem");
      if (g.is_string()) {
        cfg.game_name = g.get<std::string>();
        cfg.game = builtin_game(cfg.game_name, problem.value("game_params", json::object()));
        cfg.nash = builtin_nash(cfg.game_name, *cfg.game);
      } else {
        cfg.game_name = "custom";
        cfg.game = Game::from_json(g);
        if (g.contains("nash")) {
          for (const auto& p : g.at("nash")) cfg.nash.push_back(vector_from(p, "game.nash"));
        }
      }
      cfg.dimension = cfg.game->profile_dimension();
      if (problem.contains("xi0")) {
        cfg.x0 = vector_from(problem.at("xi0"), "problem.xi0");
      } else {
        cfg.x0 = Vector::Zero(cfg.dimension);
        for (int i = 0; i < cfg.game->players(); ++i) cfg.x0(cfg.game->offset(i)) = 1.0;
      }
    } else if (kind == "custom_map") {
      cfg.problem = ExperimentConfig::Problem::custom_map;
      cfg.map_name = require(problem, "map", "problem").get<std::string>();
      cfg.dimension = problem.value("dimension", cfg.map_name == "rotation" ? 2 : 1);
      cfg.x0 = problem.contains("x0") ? vector_from(problem.at("x0"), "problem.x0") : Vector::Ones(cfg.dimension);
    } else {
      throw ConfigError("problem: unknown kind '" + kind + "'");
    }

    if (doc.contains("N")) cfg.N = doc.at("N").get<std::int64_t>();
    cfg.guard_R = number_or(doc, "guard_R", cfg.guard_R, "config");
    if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    if (doc.contains("checkpoint_base")) cfg.checkpoint_base = doc.at("checkpoint_base").get<std::int64_t>();
    cfg.strict_boundedness = doc.value("strict_boundedness", false);
    cfg.allow_nonconforming = doc.value("allow_nonconforming", false);
    cfg.output_dir = doc.value("output_dir", std::string("out"));
    parse_diagnostics(doc.value("diagnostics", json()), cfg.diagnostics);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

namespace {

// Limit behaviour of α_i/β_i for two parametric schedules.
enum class RatioLimit { zero, positive, infinite };

RatioLimit ratio_limit(const StepSchedule& alpha, const StepSchedule& beta, double& limit) {
  using K = StepSchedule::Kind;
  // Decay rank: constant < logarithmic < power(ρ); within power, larger ρ decays faster.
  auto rank = [](const StepSchedule& s) -> std::pair<int, double> {
    switch (s.kind) {
      case K::constant: return {0, 0.0};
      case K::logarithmic: return {1, 0.0};
      case K::power: return {2, s.rho};
    }
    return {0, 0.0};
  };
  const auto ra = rank(alpha), rb = rank(beta);
  if (ra == rb) {
    limit = alpha.a / beta.a;
    return RatioLimit::positive;
  }
  return ra > rb ? RatioLimit::zero : RatioLimit::infinite;
}

void check_schedule(const StepSchedule& s, const std::string& label, bool allow_nonconforming,
                    std::vector<std::string>& out) {
  if (!(s.a > 0.0)) out.push_back(label + ": step sizes must be positive: step-size assumption fails");
  switch (s.kind) {
    case StepSchedule::Kind::power:
      if (s.rho > 1.0) out.push_back(label + ": sum of steps converges: step-size assumption (i) fails");
      if (!(s.rho > 0.0)) out.push_back(label + ": steps do not vanish: step-size assumption (ii) fails");
      break;
    case StepSchedule::Kind::logarithmic:
      break;
    case StepSchedule::Kind::constant:
      if (!allow_nonconforming) {
        out.push_back(label + ": steps do not vanish (constant schedule): step-size assumption (ii) fails");
      }
      break;
  }
}

}  // namespace

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  using P = ExperimentConfig::Problem;

  if (cfg.problem != P::fictitious_play) {
    check_schedule(cfg.schedule, cfg.problem == P::shb ? "alpha schedule" : "schedule", cfg.allow_nonconforming, out);
  }
  if (cfg.problem == P::shb) {
    check_schedule(cfg.beta_schedule, "beta schedule", cfg.allow_nonconforming, out);
    if (cfg.beta_schedule(0) > 1.0) out.push_back("beta schedule: beta_0 > 1, momentum weight 1 - beta_i turns negative");
    double limit = 0.0;
    switch (ratio_limit(cfg.schedule, cfg.beta_schedule, limit)) {
      case RatioLimit::zero:
        out.push_back("alpha_i/beta_i -> 0, no positive c: heavy-ball step assumption fails");
        break;
      case RatioLimit::infinite:
        out.push_back("alpha_i/beta_i -> infinity, no finite c: heavy-ball step assumption fails");
        break;
      case RatioLimit::positive:
        if (std::abs(limit - cfg.c) > 1e-9 * std::max(1.0, std::abs(cfg.c))) {
          std::ostringstream msg;
          msg << "declared c = " << cfg.c << " but alpha_i/beta_i -> " << limit
              << ": heavy-ball step assumption constant mismatch";
          out.push_back(msg.str());
        }
        break;
    }
    if (cfg.p0.size() != cfg.dimension) out.push_back("problem.p0: dimension mismatch");
  }

  const NoiseModel& n = cfg.noise;
  if (!(n.q > 1.0)) out.push_back("noise: moment order q must exceed 1: noise assumption fails");
  if (!(n.scale >= 0.0)) out.push_back("noise: scale must be non-negative: noise assumption fails");
  if (n.kind == NoiseModel::Kind::student_t && !(n.df > n.q)) {
    out.push_back("noise: student_t with df <= q has an infinite q-th moment: noise assumption fails");
  }
  if (cfg.delta.d < 0.0) out.push_back("delta: d must be >= 0");
  if (cfg.delta.d > 0.0 && !(cfg.delta.sigma > 0.0)) out.push_back("delta: sigma must be > 0 so that delta_i -> 0");

  if (cfg.N < 1) out.push_back("N must be >= 1");
  if (cfg.checkpoint_base < 1) out.push_back("checkpoint_base must be >= 1");
  if (cfg.N < cfg.checkpoint_base) out.push_back("N must be >= checkpoint_base");
  if (cfg.seeds.empty()) out.push_back("seeds must be non-empty");
  if (cfg.x0.size() != cfg.dimension) out.push_back("initial point: dimension mismatch");
  if (!(cfg.guard_R > 0.0)) out.push_back("guard_R must be > 0");
  Vector start = cfg.x0;
  if (cfg.problem == P::shb && cfg.p0.size() == cfg.x0.size()) {
    start.resize(2 * cfg.dimension);
    start << cfg.x0, cfg.p0;
  }
  if (!(cfg.guard_R > start.norm())) out.push_back("guard_R must exceed the norm of the initial state");

  if (cfg.problem == P::fictitious_play && cfg.game && !cfg.game->on_product_simplex(cfg.x0)) {
    out.push_back("problem.xi0: initial profile must lie on the product of simplices");
  }
  if (cfg.problem == P::custom_map) {
    if (cfg.map_name != "linear_contraction" && cfg.map_name != "neg_abs_subgradient" && cfg.map_name != "rotation") {
      out.push_back("problem.map: unknown map '" + cfg.map_name + "'");
    }
    if (cfg.map_name == "neg_abs_subgradient" && cfg.dimension != 1) out.push_back("neg_abs_subgradient is one-dimensional");
    if (cfg.map_name == "rotation" && cfg.dimension != 2) out.push_back("rotation is two-dimensional");
  }
  if (cfg.problem == P::sgd || cfg.problem == P::shb) {
    if (cfg.function != "abs" && cfg.function != "half_squared_norm" && cfg.function != "l1" &&
        cfg.function != "max_quadratics") {
      out.push_back("problem.function: unknown function '" + cfg.function + "'");
    }
  }

  const auto& d = cfg.diagnostics;
  if (!(d.q > 1.0)) out.push_back("diagnostics.q must exceed 1");
  if (!(d.cell_size > 0.0)) out.push_back("diagnostics.cell_size must be > 0");
  if (!(d.threshold > 0.0)) out.push_back("diagnostics.threshold must be > 0");
  if (d.bank_degree < 1) out.push_back("diagnostics.bank_degree must be >= 1");
  if (d.bank_bumps < 0) out.push_back("diagnostics.bank_bumps must be >= 0");
  for (const auto& p : d.probes) {
    if (p.size() != (cfg.problem == P::shb ? 2 * cfg.dimension : cfg.dimension)) {
      out.push_back("diagnostics.probes: dimension mismatch");
      break;
    }
  }
  return out;
}

std::vector<std::string> validate_config(const nlohmann::json& doc) {
  try {
    return validate_config(parse_config(doc));
  } catch (const ConfigError& e) {
    return {e.what()};
  }
}

}  // namespace sadi
