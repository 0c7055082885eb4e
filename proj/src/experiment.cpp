#include "sadi/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

namespace sadi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

MaxOfSmoothFunction named_function(const std::string& name, Eigen::Index dim) {
  if (name == "abs") return abs_function();
  if (name == "half_squared_norm") return half_squared_norm(dim);
  if (name == "l1") return l1_norm(dim);
  if (name == "max_quadratics") {
    Vector e = Vector::Zero(dim);
    e(0) = 1.0;
    return max_of_quadratics({e, Vector(-e)}, {Vector::Ones(dim), Vector::Ones(dim)});
  }
  throw ConfigError("unknown function '" + name + "'");
}

SetValuedMap named_map(const std::string& name, Eigen::Index dim) {
  if (name == "linear_contraction") {
    return SetValuedMap(dim, [](const Vector& x) { return Polytope::singleton(-x); }, 1.0);
  }
  if (name == "neg_abs_subgradient") return subdifferential_map(abs_function(), 1.0).negated();
  if (name == "rotation") {
    return SetValuedMap(2, [](const Vector& x) {
      Vector r(2);
      r << -x(1), x(0);
      return Polytope::singleton(r);
    }, 1.0);
  }
  throw ConfigError("unknown map '" + name + "'");
}

json to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) arr.push_back(v(k));
  return arr;
}

Vector from_json(const json& arr) {
  std::vector<double> flat = arr.get<std::vector<double>>();
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::vector<std::int64_t> checkpoint_schedule(std::int64_t N0, std::int64_t N) {
  if (N0 < 1 || N < 1) throw std::invalid_argument("checkpoint_schedule: N0 and N must be >= 1");
  std::vector<std::int64_t> out;
  for (std::int64_t c = N0; c < N; c *= 2) out.push_back(c);
  out.push_back(N);
  return out;
}

DiagnosticContext make_context(const ExperimentConfig& cfg, const Vector& box_lo, const Vector& box_hi,
                               const Vector& final_state) {
  using P = ExperimentConfig::Problem;
  DiagnosticContext ctx;
  ctx.toggles = cfg.diagnostics;
  ctx.bank = make_test_bank(box_lo, box_hi, cfg.diagnostics.bank_degree, cfg.diagnostics.bank_bumps,
                            cfg.diagnostics.bank_seed);
  switch (cfg.problem) {
    case P::sgd: {
      MaxOfSmoothFunction f = named_function(cfg.function, cfg.dimension);
      ctx.H = subdifferential_map(f).negated();
      ctx.circulation_field = [f](const Vector& x) { return min_norm_point(clarke_subdifferential(f, x)); };
      break;
    }
    case P::shb: {
      MaxOfSmoothFunction f = named_function(cfg.function, cfg.dimension);
      ctx.H = heavy_ball_map(f, cfg.c);
      const Eigen::Index m = cfg.dimension;
      const double c = cfg.c;
      ctx.circulation_field = [f, m, c](const Vector& x) {
        Vector g(2 * m);
        g << min_norm_point(clarke_subdifferential(f, x.head(m))), c * x.tail(m);
        return g;
      };
      break;
    }
    case P::fictitious_play:
      ctx.H = game_map(*cfg.game);
      break;
    case P::custom_map:
      ctx.H = named_map(cfg.map_name, cfg.dimension);
      if (cfg.map_name == "linear_contraction") {
        ctx.circulation_field = [](const Vector& x) { return Vector(x); };
      } else if (cfg.map_name == "neg_abs_subgradient") {
        const MaxOfSmoothFunction f = abs_function();
        ctx.circulation_field = [f](const Vector& x) { return min_norm_point(clarke_subdifferential(f, x)); };
      }
      break;
  }
  if (!cfg.diagnostics.probes.empty()) {
    ctx.probes = cfg.diagnostics.probes;
  } else {
    const int count = std::max(2, cfg.diagnostics.probe_count);
    for (int k = 0; k < count; ++k) {
      const double s = static_cast<double>(k) / (count - 1);
      ctx.probes.push_back(box_lo + s * (box_hi - box_lo));
    }
    ctx.probes.push_back(final_state);
  }
  return ctx;
}

CheckpointDiagnostics compute_checkpoint_diagnostics(const OccupationMeasure& mu, std::int64_t iteration,
                                                     const DiagnosticContext& ctx) {
  CheckpointDiagnostics d;
  d.iteration = iteration;
  d.total_weight = mu.total_weight();
  const auto& t = ctx.toggles;
  if (t.closed_residual) {
    for (const auto& g : ctx.bank.functions) {
      const double r = closed_residual(mu, g);
      d.closed_residuals[g.name] = r;
      d.max_abs_closed_residual = std::max(d.max_abs_closed_residual, std::abs(r));
    }
  }
  if (t.oscillation) {
    for (const auto& psi : ctx.bank.weights) d.oscillation.emplace(psi.name, oscillation_statistic(mu, psi));
  }
  if (t.velocity_moment) d.velocity_moment = velocity_moment(mu, t.q);
  if (t.residence) {
    const CellGrid grid{ctx.bank.lo, t.cell_size};
    for (const auto& [key, tau] : residence_grid(mu, grid)) {
      if (tau >= t.threshold) d.residence.emplace_back(key, tau);
    }
  }
  if (t.centroid_gap && ctx.H) {
    const double h = bandwidth_rule(mu);
    d.bandwidth = h;
    if (h > 0.0) {
      try {
        d.centroid_gap = centroid_membership_gap(mu, *ctx.H, ctx.probes, h).gap;
      } catch (const std::domain_error&) {
        d.centroid_gap.reset();
      }
    }
  }
  if (t.circulation && ctx.circulation_field) d.circulation = circulation(mu, ctx.circulation_field);
  return d;
}

json CheckpointDiagnostics::to_json() const {
  json j;
  j["iteration"] = iteration;
  j["total_weight"] = total_weight;
  j["closed_residuals"] = closed_residuals;
  j["max_abs_closed_residual"] = max_abs_closed_residual;
  json osc = json::object();
  for (const auto& [name, stat] : oscillation) {
    osc[name] = {{"average", sadi::to_json(stat.average)}, {"norm", stat.average.norm()}, {"psi_mass", stat.psi_mass}};
  }
  j["oscillation"] = osc;
  j["velocity_moment"] = velocity_moment ? json(*velocity_moment) : json();
  json cells = json::array();
  for (const auto& [key, tau] : residence) cells.push_back({{"cell", key}, {"tau", tau}});
  j["residence_cells"] = cells;
  j["bandwidth"] = bandwidth ? json(*bandwidth) : json();
  j["centroid_gap"] = centroid_gap ? json(*centroid_gap) : json();
  j["circulation"] = circulation ? json(*circulation) : json();
  return j;
}

json RunReport::to_json() const {
  json j;
  j["seed"] = seed;
  j["status"] = status.escaped ? "escaped" : "completed";
  if (status.escaped) {
    j["escape"] = {{"index", status.escape_index}, {"norm", status.escape_norm}};
  }
  j["steps"] = steps;
  json cps = json::array();
  for (const auto& c : checkpoints) cps.push_back(c.to_json());
  j["checkpoints"] = cps;
  json cells = json::array();
  for (const auto& c : accumulation_cells) {
    cells.push_back({{"cell", c.index}, {"lo", sadi::to_json(c.box.lo)}, {"hi", sadi::to_json(c.box.hi)},
                     {"peak_residence", c.peak_residence}});
  }
  j["essential_accumulation_cells"] = cells;
  j["trajectory_checks"] = trajectory_checks;
  j["final_state"] = sadi::to_json(final_state);
  if (nash_distance_inf) j["nash_distance_inf"] = *nash_distance_inf;
  return j;
}

double DiagnosticsReport::bounded_fraction() const {
  if (runs.empty()) return 0.0;
  const auto bounded = std::count_if(runs.begin(), runs.end(), [](const RunReport& r) { return !r.status.escaped; });
  return static_cast<double>(bounded) / static_cast<double>(runs.size());
}

bool DiagnosticsReport::any_escaped() const {
  return std::any_of(runs.begin(), runs.end(), [](const RunReport& r) { return r.status.escaped; });
}

std::string config_hash(const json& doc) {
  const std::string text = doc.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

fs::path sidecar_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

void write_checkpoint(const fs::path& csv_path, const OccupationMeasure& mu, std::int64_t first_index,
                      const json& sidecar) {
  std::ostringstream out;
  const Eigen::Index n = mu.dimension();
  out << "j";
  for (Eigen::Index k = 0; k < n; ++k) out << ",x" << k;
  for (Eigen::Index k = 0; k < n; ++k) out << ",v" << k;
  out << ",weight\r\n" << std::setprecision(17);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    out << first_index + static_cast<std::int64_t>(j);
    const auto x = mu.position(j);
    const auto v = mu.velocity(j);
    for (Eigen::Index k = 0; k < n; ++k) out << ',' << x(k);
    for (Eigen::Index k = 0; k < n; ++k) out << ',' << v(k);
    out << ',' << mu.weight(j) << "\r\n";
  }
  write_text(csv_path, out.str());
  json meta = sidecar;
  meta["dimension"] = n;
  meta["total_weight"] = mu.total_weight();
  write_text(sidecar_path(csv_path), meta.dump(2) + "\n");
}

LoadedCheckpoint read_checkpoint(const fs::path& csv_path) {
  std::ifstream side(sidecar_path(csv_path));
  if (!side) throw IoError("cannot open checkpoint sidecar: " + sidecar_path(csv_path).string());
  json meta;
  try {
    side >> meta;
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint sidecar: " + std::string(e.what()));
  }
  const auto n = meta.at("dimension").get<Eigen::Index>();

  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty checkpoint: " + csv_path.string());
  const auto header = split_csv_line(line);
  if (static_cast<Eigen::Index>(header.size()) != 2 * n + 2) throw IoError("checkpoint header does not match dimension");

  OccupationMeasure mu(n, std::max<std::size_t>(OccupationMeasure::kDefaultCapacity, 2), meta.value("seed", 0ULL));
  std::vector<double> x(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n));
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (static_cast<Eigen::Index>(fields.size()) != 2 * n + 2) throw IoError("checkpoint row has wrong field count");
    try {
      for (Eigen::Index k = 0; k < n; ++k) {
        x[static_cast<std::size_t>(k)] = std::stod(fields[static_cast<std::size_t>(1 + k)]);
        v[static_cast<std::size_t>(k)] = std::stod(fields[static_cast<std::size_t>(1 + n + k)]);
      }
      mu.add(x, v, std::stod(fields.back()));
    } catch (const std::logic_error& e) {
      throw IoError("checkpoint row is not numeric: " + std::string(e.what()));
    }
  }
  return {std::move(mu), std::move(meta)};
}

CheckpointDiagnostics diagnose_checkpoint(const fs::path& csv_path) {
  LoadedCheckpoint loaded = read_checkpoint(csv_path);
  const json& meta = loaded.sidecar;
  const ExperimentConfig cfg = parse_config(meta.at("config"));
  const DiagnosticContext ctx = make_context(cfg, from_json(meta.at("bank_box").at("lo")),
                                             from_json(meta.at("bank_box").at("hi")),
                                             from_json(meta.at("final_state")));
  return compute_checkpoint_diagnostics(loaded.measure, meta.at("iteration").get<std::int64_t>(), ctx);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const Eigen::Index n = traj.dimension();
  out << "i,t";
  for (Eigen::Index k = 0; k < n; ++k) out << ",x" << k;
  for (Eigen::Index k = 0; k < n; ++k) out << ",v" << k;
  out << ",eps,delta";
  for (Eigen::Index k = 0; k < n; ++k) out << ",eta" << k;
  out << "\r\n" << std::setprecision(17);
  for (std::int64_t i = 0; i <= traj.steps(); ++i) {
    out << i << ',' << traj.time(i);
    const auto x = traj.state(i);
    for (Eigen::Index k = 0; k < n; ++k) out << ',' << x(k);
    if (i < traj.steps()) {
      const auto v = traj.velocity(i);
      const auto e = traj.noise(i);
      for (Eigen::Index k = 0; k < n; ++k) out << ',' << v(k);
      out << ',' << traj.step(i) << ',' << traj.delta(i);
      for (Eigen::Index k = 0; k < n; ++k) out << ',' << e(k);
    } else {
      for (Eigen::Index k = 0; k < 2 * n + 2; ++k) out << ',';
    }
    out << "\r\n";
  }
}

namespace {

Trajectory simulate(const ExperimentConfig& cfg, std::uint64_t seed) {
  using P = ExperimentConfig::Problem;
  RunOptions opts;
  opts.guard_radius = cfg.guard_R;
  opts.rule = cfg.rule;
  opts.delta = cfg.delta;
  switch (cfg.problem) {
    case P::sgd:
      return run_sgd(named_function(cfg.function, cfg.dimension), cfg.x0, cfg.schedule, cfg.noise, cfg.N, seed, opts);
    case P::shb:
      return run_shb(named_function(cfg.function, cfg.dimension), cfg.x0, cfg.p0, cfg.schedule, cfg.beta_schedule,
                     cfg.c, cfg.noise, cfg.N, seed, opts)
          .trajectory;
    case P::fictitious_play:
      return run_fictitious_play(*cfg.game, cfg.x0, cfg.N, seed);
    case P::custom_map:
      return run_sa(cfg.x0, named_map(cfg.map_name, cfg.dimension), cfg.schedule, cfg.noise, cfg.N, seed, opts);
  }
  throw ConfigError("unknown problem kind");
}

}  // namespace

RunReport run_single(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path* seed_dir) {
  const Trajectory traj = simulate(cfg, seed);
  RunReport report;
  report.seed = seed;
  report.status = traj.status();
  report.steps = traj.steps();
  report.final_state = traj.last_state();

  Vector lo = traj.state(0), hi = traj.state(0);
  for (std::int64_t i = 1; i <= traj.steps(); ++i) {
    lo = lo.cwiseMin(traj.state(i));
    hi = hi.cwiseMax(traj.state(i));
  }
  const DiagnosticContext ctx = make_context(cfg, lo, hi, report.final_state);

  const auto marks = checkpoint_schedule(std::min(cfg.checkpoint_base, traj.steps()), traj.steps());
  std::vector<OccupationMeasure> stores;
  OccupationMeasure mu(traj.dimension(), OccupationMeasure::kDefaultCapacity, seed);
  std::int64_t filled = 0;
  report.trajectory_checks = json::array();
  for (std::int64_t mark : marks) {
    mu.merge(accumulate_range(traj, filled, mark));
    filled = mark;
    report.checkpoints.push_back(compute_checkpoint_diagnostics(mu, mark, ctx));
    stores.push_back(mu);

    json checks = json::object();
    checks["iteration"] = mark;
    checks["clock"] = traj.time(mark);
    bool sandwich = true;
    for (const auto& g : ctx.bank.functions) {
      const double closed = closed_residual(mu, g);
      const double interp = interpolated_residual(traj, g, mark);
      const double bound = interpolation_bound(traj, g.gradient_bound, mark);
      sandwich = sandwich && std::abs(closed - interp) <= bound + 1e-9;
      checks["functions"][g.name] = {{"interpolated_residual", interp}, {"interpolation_bound", bound}};
    }
    checks["sandwich_holds"] = sandwich;
    report.trajectory_checks.push_back(checks);

    if (seed_dir) {
      json side;
      side["iteration"] = mark;
      side["seed"] = seed;
      side["config"] = cfg.source;
      side["bank_box"] = {{"lo", to_json(lo)}, {"hi", to_json(hi)}};
      side["final_state"] = to_json(report.final_state);
      write_checkpoint(*seed_dir / ("checkpoint_" + std::to_string(mark) + ".csv"), mu, 0, side);
    }
  }
  if (cfg.diagnostics.essential_accumulation) {
    report.accumulation_cells =
        essential_accumulation_estimate(stores, cfg.diagnostics.cell_size, cfg.diagnostics.threshold);
  }
  if (!cfg.nash.empty()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& eq : cfg.nash) {
      if (eq.size() == report.final_state.size()) {
        best = std::min(best, (report.final_state - eq).cwiseAbs().maxCoeff());
      }
    }
    if (std::isfinite(best)) report.nash_distance_inf = best;
  }

  if (seed_dir) {
    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    write_text(*seed_dir / "trajectory.csv", csv.str());
    write_text(*seed_dir / "summary.json", report.to_json().dump(2) + "\n");
  }
  return report;
}

DiagnosticsReport run_experiment(const ExperimentConfig& config, const RunRequest& request) {
  ExperimentConfig cfg = config;
  if (request.seeds) cfg.seeds = *request.seeds;
  const fs::path out_root = request.output_dir.value_or(fs::path(cfg.output_dir));
  const fs::path exp_dir = out_root / cfg.name;

  std::error_code ec;
  fs::create_directories(exp_dir, ec);
  if (ec) throw IoError("cannot create output directory " + exp_dir.string() + ": " + ec.message());
  for (auto seed : cfg.seeds) {
    fs::create_directories(exp_dir / std::to_string(seed), ec);
    if (ec) throw IoError("cannot create seed directory: " + ec.message());
  }

  DiagnosticsReport report;
  report.name = cfg.name;
  report.config_hash = config_hash(cfg.source);
  report.runs.resize(cfg.seeds.size());

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  auto worker = [&] {
    for (std::size_t k = next++; k < cfg.seeds.size(); k = next++) {
      try {
        const fs::path dir = exp_dir / std::to_string(cfg.seeds[k]);
        report.runs[k] = run_single(cfg, cfg.seeds[k], &dir);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(request.jobs, static_cast<int>(cfg.seeds.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  json files = json::array();
  for (const auto& entry : fs::recursive_directory_iterator(exp_dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
      files.push_back(fs::relative(entry.path(), exp_dir).generic_string());
    }
  }
  std::vector<std::string> sorted = files.get<std::vector<std::string>>();
  std::sort(sorted.begin(), sorted.end());
  json manifest;
  manifest["experiment"] = cfg.name;
  manifest["config_hash"] = report.config_hash;
  manifest["config"] = cfg.source;
  manifest["seeds"] = cfg.seeds;
  manifest["bounded_fraction"] = report.bounded_fraction();
  manifest["files"] = sorted;
  write_text(exp_dir / "manifest.json", manifest.dump(2) + "\n");
  return report;
}

}  // namespace sadi
