#ifndef PLATFORM_EGT_CLI_HPP
#define PLATFORM_EGT_CLI_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "platform_egt/config_io.hpp"
#include "platform_egt/csv.hpp"
#include "platform_egt/domain.hpp"
#include "platform_egt/dynamics.hpp"
#include "platform_egt/metrics.hpp"
#include "platform_egt/oracle.hpp"
#include "platform_egt/sweep.hpp"

namespace platform_egt::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kConfigInvalid = 1, kIoError = 2, kSolverFailure = 3, kOracleMismatch = 4 };

// "lo:hi[:step]", inclusive of hi up to roundoff.
inline std::vector<double> parse_range(const std::string& text, bool integer) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(':', start);
    const std::string tok = text.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("range", "malformed range '" + text + "' (expected lo:hi[:step])");
    }
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (parts.size() < 2 || parts.size() > 3) {
    throw ConfigError("range", "malformed range '" + text + "' (expected lo:hi[:step])");
  }
  const double lo = parts[0];
  const double hi = parts[1];
  const double step = parts.size() == 3 ? parts[2] : 1.0;
  if (!(step > 0.0) || hi < lo) throw ConfigError("range", "range needs lo <= hi and step > 0");
  if (integer && (std::floor(lo) != lo || std::floor(hi) != hi || std::floor(step) != step)) {
    throw ConfigError("range", "integer axis needs integer lo, hi and step");
  }
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(lo + static_cast<double>(i) * step);
  return v;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline unsigned resolve_threads(std::optional<unsigned> flag) {
  if (flag) return std::max(1u, *flag);
  if (const char* env = std::getenv("PLATFORM_EGT_THREADS")) {
    try {
      std::size_t used = 0;
      const long v = std::stol(env, &used);
      if (used == std::string(env).size() && v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError("PLATFORM_EGT_THREADS", "PLATFORM_EGT_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Output directory with a manifest that is written before anything else and
// rewritten at the end with every table and its row count.
class Bundle {
 public:
  Bundle(std::filesystem::path dir, const std::string& command, const ModelConfig& cfg, std::uint64_t seed,
         unsigned threads)
      : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    manifest_["tool"] = "platform_egt";
    manifest_["version"] = kVersion;
    manifest_["command"] = command;
    manifest_["started_utc"] = utc_timestamp();
    manifest_["seed"] = seed;
    manifest_["threads"] = threads;
    manifest_["config"] = config_to_json(cfg);
    manifest_["tables"] = nlohmann::ordered_json::array();
    manifest_["status"] = "running";
    write_manifest();
  }

  nlohmann::ordered_json& manifest() { return manifest_; }

  void table(const std::string& name, const csv::Table& t) {
    std::ofstream out(dir_ / name, std::ios::binary);
    t.write(out);
    out.close();
    if (!out) throw IoError("cannot write '" + (dir_ / name).string() + "'");
    manifest_["tables"].push_back({{"file", name}, {"rows", t.size()}, {"columns", t.header()}});
  }

  void metrics(const nlohmann::ordered_json& j) { write_json("metrics.json", j); }

  void finish(const std::string& status, const std::string& message = "") {
    manifest_["status"] = status;
    if (!message.empty()) manifest_["error"] = message;
    manifest_["finished_utc"] = utc_timestamp();
    write_manifest();
  }

 private:
  void write_json(const std::string& name, const nlohmann::ordered_json& j) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << j.dump(2) << '\n';
    out.close();
    if (!out) throw IoError("cannot write '" + (dir_ / name).string() + "'");
  }
  void write_manifest() { write_json("manifest.json", manifest_); }

  std::filesystem::path dir_;
  nlohmann::ordered_json manifest_;
};

inline nlohmann::ordered_json to_json(const metrics::MetricsReport& m) {
  nlohmann::ordered_json j;
  j["coop_mass_m"] = m.coop_mass_m;
  j["coop_mass_d"] = m.coop_mass_d;
  j["mostly_cooperative_m"] = m.mostly_cooperative_m;
  j["mostly_cooperative_d"] = m.mostly_cooperative_d;
  j["regime"] = metrics::to_string(m.regime);
  j["regime_anomalous"] = m.regime == metrics::Regime::BPrime;
  j["sigma_star_m"] = m.sigma_star_m;
  j["sigma_star_d"] = m.sigma_star_d;
  j["ux"] = m.ux;
  j["u_bar_m"] = m.u_bar_m;
  j["u_bar_d"] = m.u_bar_d;
  j["dpr"] = m.dpr;
  j["dpr_degenerate"] = m.dpr_degenerate;
  return j;
}

inline nlohmann::ordered_json policy_json(const PlatformPolicy& p) { return {{"k_g", p.k_g}, {"k_m", p.k_m}}; }

struct Options {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<unsigned> threads;
  std::uint64_t seed = 1;
};

// ---------------------------------------------------------------------------
// Commands

inline int cmd_stationary(const ModelConfig& cfg, Bundle& bundle) {
  const auto ev = metrics::evaluate(cfg);
  csv::Table dist({"h_m", "h_d", "prob"});
  csv::Table drift({"h_m", "h_d", "d_m", "d_d"});
  for (std::size_t i = 0; i < ev.stationary.distribution.size(); ++i) {
    const auto s = state_at(i, cfg.population);
    dist.row(s.h_m, s.h_d, ev.stationary.distribution[i]);
    drift.row(s.h_m, s.h_d, ev.stationary.drift[i].d_m, ev.stationary.drift[i].d_d);
  }
  bundle.table("stationary.csv", dist);
  bundle.table("drift.csv", drift);
  auto j = to_json(ev.metrics);
  j["solver"] = {{"method", ev.stationary.method},
                 {"residual", ev.stationary.residual},
                 {"iterations", ev.stationary.iterations}};
  bundle.metrics(j);
  return kOk;
}

inline void add_sweep_rows(csv::Table& t, const sweep::SweepResult& r) {
  for (const auto& row : r.rows) {
    const auto& m = row.metrics;
    const std::string axis = sweep::is_integer_axis(r.axis) ? std::to_string(std::lround(row.axis_value))
                                                            : csv::format(row.axis_value);
    t.row(axis, m.ux, m.dpr, m.coop_mass_m, m.coop_mass_d, m.u_bar_m, m.u_bar_d, metrics::to_string(m.regime));
  }
}

inline nlohmann::ordered_json sweep_summary(const sweep::SweepResult& r) {
  nlohmann::ordered_json j;
  j["axis"] = sweep::to_string(r.axis);
  j["rows"] = r.rows.size();
  auto cps = nlohmann::ordered_json::array();
  for (auto i : r.changepoints) {
    cps.push_back({{"axis_value", r.rows[i].axis_value},
                   {"from", metrics::to_string(r.rows[i - 1].metrics.regime)},
                   {"to", metrics::to_string(r.rows[i].metrics.regime)}});
  }
  j["changepoints"] = cps;
  std::string seq;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (i == 0 || r.rows[i].metrics.regime != r.rows[i - 1].metrics.regime) {
      if (!seq.empty()) seq += ">";
      seq += metrics::to_string(r.rows[i].metrics.regime);
    }
  }
  j["regime_sequence"] = seq;
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    if (r.rows[i].metrics.dpr > r.rows[best].metrics.dpr) best = i;
  }
  if (!r.rows.empty()) j["argmax_dpr"] = r.rows[best].axis_value;
  if (const auto c = sweep::best_dpr_in_regime_c(r)) j["argmax_dpr_regime_c"] = r.rows[*c].axis_value;
  return j;
}

inline int cmd_sweep(ModelConfig cfg, const std::string& axis_name, const std::string& range, bool auto_kg,
                     unsigned threads, Bundle& bundle) {
  const auto axis = sweep::parse_axis(axis_name);
  if (!axis) throw ConfigError("axis", "unknown axis '" + axis_name + "' (expected kg, km, eps or gamma)");
  auto values = parse_range(range, sweep::is_integer_axis(*axis));
  sweep::Evaluator ev(threads);
  nlohmann::ordered_json summary;
  if (auto_kg) {
    if (*axis != sweep::Axis::KM) throw ConfigError("auto-kg", "--auto-kg applies to the km axis only");
    ModelConfig at_zero = cfg;
    at_zero.policy = PlatformPolicy{0, 0};
    cfg.policy.k_g = sweep::select_kg_ux_dpr(sweep::sweep_kg(at_zero, 0, cfg.users.k, ev));
    cfg.policy.k_m = 0;
    summary["selected_k_g"] = cfg.policy.k_g;
    bundle.manifest()["selected_k_g"] = cfg.policy.k_g;
    // The selected k_G is not known up front, so k_M values above it are dropped.
    std::erase_if(values, [&](double v) { return v > cfg.policy.k_g; });
    if (values.empty()) throw ConfigError("range", "no k_M value in range is <= selected k_G " + std::to_string(cfg.policy.k_g));
  }
  for (double v : values) validate(sweep::apply_axis(cfg, *axis, v));
  const auto result = sweep::sweep(cfg, *axis, values, ev);
  csv::Table t({"axis_value", "ux", "dpr", "coop_m", "coop_d", "u_bar_m", "u_bar_d", "regime"});
  add_sweep_rows(t, result);
  bundle.table("sweep.csv", t);
  const auto extra = sweep_summary(result);
  for (auto& [k, v] : extra.items()) summary[k] = v;
  bundle.metrics(summary);
  return kOk;
}

inline int cmd_pareto(const ModelConfig& cfg, bool all_policies, bool regime_c_only, unsigned threads,
                      Bundle& bundle) {
  std::vector<PlatformPolicy> candidates;
  if (all_policies) {
    candidates = sweep::all_policies(cfg.users.k);
  } else {
    for (int kg = cfg.policy.k_m; kg <= cfg.users.k; ++kg) candidates.push_back(PlatformPolicy{kg, cfg.policy.k_m});
  }
  sweep::Evaluator ev(threads);
  const auto front = sweep::pareto_front(cfg, candidates, regime_c_only, ev);
  csv::Table t({"k_g", "k_m", "ux", "dpr", "on_front"});
  auto members = nlohmann::ordered_json::array();
  for (const auto& p : front.points) {
    t.row(p.policy.k_g, p.policy.k_m, p.metrics.ux, p.metrics.dpr, p.on_front);
    if (p.on_front) members.push_back(policy_json(p.policy));
  }
  bundle.table("pareto.csv", t);
  bundle.metrics({{"candidates", front.points.size()}, {"regime_c_only", regime_c_only}, {"front", members}});
  return kOk;
}

inline int cmd_map(const ModelConfig& cfg, int grid, unsigned threads, Bundle& bundle) {
  if (grid < 1) throw ConfigError("grid", "--grid must be at least 1");
  const auto axis = sweep::open_unit_grid(grid);
  sweep::Evaluator ev(threads);
  const auto map = sweep::kg_dpr_map(cfg, axis, axis, ev);
  csv::Table t({"epsilon", "gamma", "kg_dpr", "feasible"});
  std::size_t infeasible = 0;
  for (const auto& c : map.cells) {
    t.row(c.epsilon, c.gamma, c.kg_dpr ? std::to_string(*c.kg_dpr) : std::string(), c.kg_dpr.has_value());
    if (!c.kg_dpr) ++infeasible;
  }
  bundle.table("map.csv", t);
  // Monotonicity over feasible neighbours.
  bool mono_eps = true;
  bool mono_gamma = true;
  for (std::size_t i = 0; i < map.epsilons.size(); ++i) {
    for (std::size_t j = 0; j < map.gammas.size(); ++j) {
      const auto& here = map.at(i, j).kg_dpr;
      if (!here) continue;
      if (i + 1 < map.epsilons.size() && map.at(i + 1, j).kg_dpr && *map.at(i + 1, j).kg_dpr < *here) mono_eps = false;
      if (j + 1 < map.gammas.size() && map.at(i, j + 1).kg_dpr && *map.at(i, j + 1).kg_dpr < *here) mono_gamma = false;
    }
  }
  bundle.metrics({{"grid", grid},
                  {"cells", map.cells.size()},
                  {"infeasible_cells", infeasible},
                  {"nondecreasing_in_epsilon", mono_eps},
                  {"nondecreasing_in_gamma", mono_gamma}});
  return kOk;
}

inline constexpr double kDivergenceThreshold = 0.02;

inline int cmd_uncertainty(const ModelConfig& cfg, double eps_true, const std::string& widths_range, int grid_points,
                           const std::string& feasibility, unsigned threads, Bundle& bundle) {
  sweep::Feasibility feas = sweep::Feasibility::EveryGridPoint;
  if (feasibility == "midpoint") feas = sweep::Feasibility::Midpoint;
  else if (feasibility != "every") throw ConfigError("feasibility", "--feasibility must be 'every' or 'midpoint'");
  if (!(eps_true >= 0.0 && eps_true <= 1.0)) throw ConfigError("eps-true", "--eps-true must lie in [0, 1]");
  const auto widths = parse_range(widths_range, false);
  const auto candidates = sweep::all_policies(cfg.users.k);
  sweep::Evaluator ev(threads);
  csv::Table t({"width", "objective", "k_g", "k_m", "worst_dpr", "avg_dpr", "baseline_worst_dpr"});
  auto per_width = nlohmann::ordered_json::array();
  std::optional<double> divergence;
  bool baseline_dominated = true;
  for (double w : widths) {
    nlohmann::ordered_json entry{{"width", w}};
    std::optional<double> worst[2];
    for (const auto obj : {sweep::Objective::ExpectedDpr, sweep::Objective::MaximinDpr}) {
      const auto spec = sweep::centred_spec(eps_true, w, obj, grid_points, feas);
      try {
        const auto r = sweep::optimize_under_uncertainty(spec, cfg, candidates, ev);
        const std::string base = r.baseline ? csv::format(r.baseline->worst) : std::string();
        t.row(w, sweep::to_string(obj), r.chosen.policy.k_g, r.chosen.policy.k_m, r.chosen.worst, r.chosen.average,
              base);
        worst[obj == sweep::Objective::MaximinDpr] = r.chosen.worst;
        if (r.baseline && r.chosen.worst < r.baseline->worst) baseline_dominated = false;
        entry[sweep::to_string(obj)] = {{"policy", policy_json(r.chosen.policy)},
                                        {"worst_dpr", r.chosen.worst},
                                        {"avg_dpr", r.chosen.average}};
      } catch (const sweep::InfeasibleError& e) {
        t.row(w, sweep::to_string(obj), std::string(), std::string(), std::string(), std::string(), std::string());
        entry[sweep::to_string(obj)] = {{"infeasible", e.what()}};
      }
    }
    if (worst[0] && worst[1] && std::abs(*worst[0] - *worst[1]) >= kDivergenceThreshold && !divergence) {
      divergence = w;
    }
    per_width.push_back(entry);
  }
  bundle.table("uncertainty.csv", t);
  nlohmann::ordered_json j{{"epsilon_true", eps_true},
                           {"grid_points", grid_points},
                           {"feasibility", feasibility},
                           {"divergence_threshold", kDivergenceThreshold},
                           {"first_divergent_width", divergence ? nlohmann::ordered_json(*divergence) : nlohmann::ordered_json(nullptr)},
                           {"objectives_at_least_baseline", baseline_dominated},
                           {"widths", per_width}};
  bundle.metrics(j);
  return kOk;
}

inline int cmd_oracle_check(std::uint64_t seed, std::size_t cases, std::uint64_t episodes, unsigned threads,
                            Bundle& bundle, std::ostream& err) {
  const auto rows = oracle::check_battery(seed, cases, episodes, threads);
  csv::Table t({"category", "exact", "empirical", "stderr", "z_score"});
  double max_z = 0.0;
  std::size_t failures = 0;
  for (const auto& r : rows) {
    t.row(r.category, r.exact, r.empirical, r.stderr_, r.z_score);
    max_z = std::max(max_z, std::abs(r.z_score));
    if (std::abs(r.z_score) > oracle::kZLimit) {
      ++failures;
      err << "oracle mismatch: " << r.category << " exact " << r.exact << " empirical " << r.empirical << " z "
          << r.z_score << '\n';
    }
  }
  bundle.table("oracle.csv", t);
  bundle.metrics({{"cases", cases},
                  {"episodes", episodes},
                  {"checks", rows.size()},
                  {"max_abs_z", max_z},
                  {"z_limit", oracle::kZLimit},
                  {"failures", failures}});
  return failures ? kOracleMismatch : kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Exact evolutionary model of a two-group service platform"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  app.add_option("--config", opt.config_path, "model configuration (JSON); defaults apply when omitted");
  app.add_option("--out", opt.out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", opt.threads, "worker threads (fallback: PLATFORM_EGT_THREADS)");
  app.add_option("--seed", opt.seed, "seed for Monte Carlo commands")->capture_default_str();

  auto* stationary = app.add_subcommand("stationary", "stationary distribution, drift field and metrics");

  std::string axis;
  std::string range;
  bool auto_kg = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "one-dimensional parameter sweep");
  sweep_cmd->add_option("--axis", axis, "kg | km | eps | gamma")->required();
  sweep_cmd->add_option("--range", range, "lo:hi[:step]")->required();
  sweep_cmd->add_flag("--auto-kg", auto_kg, "km axis: pick k_G maximizing UX*DPR at k_M = 0 first");

  bool all_policies = false;
  bool regime_c_only = false;
  auto* pareto = app.add_subcommand("pareto", "Pareto front over (UX, DPR)");
  pareto->add_flag("--all-policies", all_policies, "every 0 <= k_M <= k_G <= k instead of k_G in [k_m, k]");
  pareto->add_flag("--regime-c-only", regime_c_only, "only regime-C candidates may enter the front");

  int grid = 9;
  auto* map = app.add_subcommand("map", "k_G maximizing DPR over an (epsilon, gamma) grid");
  map->add_option("--grid", grid, "points per axis, placed at i/(n+1)")->capture_default_str();

  std::optional<double> eps_true;
  std::string widths = "0:0.7:0.035";
  int grid_points = 15;
  std::string feasibility = "every";
  auto* uncertainty = app.add_subcommand("uncertainty", "policy choice under a uniform belief over epsilon");
  uncertainty->add_option("--eps-true", eps_true, "centre of the belief interval (default: config epsilon)");
  uncertainty->add_option("--widths", widths, "interval widths lo:hi:step")->capture_default_str();
  uncertainty->add_option("--grid-points", grid_points, "belief grid points")->capture_default_str();
  uncertainty->add_option("--feasibility", feasibility, "every | midpoint")->capture_default_str();

  std::size_t cases = 20;
  std::uint64_t episodes = 1'000'000;
  auto* oracle_cmd = app.add_subcommand("oracle-check", "compare the exact engine with Monte Carlo replay");
  oracle_cmd->add_option("--cases", cases, "random configurations")->capture_default_str();
  oracle_cmd->add_option("--episodes", episodes, "episodes per simulation")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigInvalid;
  }

  std::optional<Bundle> bundle;
  try {
    const unsigned threads = resolve_threads(opt.threads);
    ModelConfig cfg = opt.config_path.empty() ? validate(ModelConfig{}) : load_config(opt.config_path);
    const std::string command = app.get_subcommands().front()->get_name();
    bundle.emplace(opt.out_dir, command, cfg, opt.seed, threads);
    int code = kOk;
    if (*stationary) code = cmd_stationary(cfg, *bundle);
    else if (*sweep_cmd) code = cmd_sweep(cfg, axis, range, auto_kg, threads, *bundle);
    else if (*pareto) code = cmd_pareto(cfg, all_policies, regime_c_only, threads, *bundle);
    else if (*map) code = cmd_map(cfg, grid, threads, *bundle);
    else if (*uncertainty) {
      code = cmd_uncertainty(cfg, eps_true.value_or(cfg.users.epsilon), widths, grid_points, feasibility, threads,
                             *bundle);
    } else if (*oracle_cmd) {
      code = cmd_oracle_check(opt.seed, cases, episodes, threads, *bundle, err);
    }
    bundle->finish(code == kOk ? "ok" : "oracle_mismatch");
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    if (bundle) bundle->finish("error", e.what());
    return kConfigInvalid;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << '\n';
    if (bundle) bundle->finish("error", e.what());
    return kConfigInvalid;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const dynamics::SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    if (bundle) bundle->finish("error", e.what());
    return kSolverFailure;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    if (bundle) bundle->finish("error", e.what());
    return kSolverFailure;
  }
}

}  // namespace platform_egt::cli

#endif  // PLATFORM_EGT_CLI_HPP
