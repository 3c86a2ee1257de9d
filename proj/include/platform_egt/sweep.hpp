#ifndef PLATFORM_EGT_SWEEP_HPP
#define PLATFORM_EGT_SWEEP_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "platform_egt/domain.hpp"
#include "platform_egt/metrics.hpp"
#include "platform_egt/parallel.hpp"
#include "platform_egt/payoff.hpp"

namespace platform_egt::sweep {

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evaluates batches of configurations on a fixed number of workers and
// memoizes both choice caches and metric reports across calls.
class Evaluator {
 public:
  explicit Evaluator(unsigned threads = 1) : threads_(std::max(1u, threads)) {}

  unsigned threads() const { return threads_; }

  std::vector<metrics::MetricsReport> run(std::span<const ModelConfig> configs) {
    for (const auto& c : configs) validate(c);

    // Distinct choice caches not built yet.
    std::vector<ChoiceKey> cache_keys;
    for (const auto& c : configs) {
      const auto key = choice_key(c);
      if (!caches_.contains(key) && std::find(cache_keys.begin(), cache_keys.end(), key) == cache_keys.end()) {
        cache_keys.push_back(key);
      }
    }
    std::vector<const ModelConfig*> cache_cfg(cache_keys.size());
    for (std::size_t i = 0; i < cache_keys.size(); ++i) {
      cache_cfg[i] = &*std::find_if(configs.begin(), configs.end(),
                                    [&](const ModelConfig& c) { return choice_key(c) == cache_keys[i]; });
    }
    auto built = parallel_map<std::shared_ptr<const payoff::ChoiceCache>>(
        cache_keys.size(), threads_, [&](std::size_t i) {
          const auto& c = *cache_cfg[i];
          return std::make_shared<const payoff::ChoiceCache>(c.population, c.users, c.policy);
        });
    for (std::size_t i = 0; i < cache_keys.size(); ++i) caches_.emplace(cache_keys[i], std::move(built[i]));

    std::vector<std::size_t> todo;
    std::vector<ReportKey> todo_keys;
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const auto key = report_key(configs[i]);
      if (!reports_.contains(key) && std::find(todo_keys.begin(), todo_keys.end(), key) == todo_keys.end()) {
        todo.push_back(i);
        todo_keys.push_back(key);
      }
    }
    auto fresh = parallel_map<metrics::MetricsReport>(todo.size(), threads_, [&](std::size_t j) {
      const auto& c = configs[todo[j]];
      return metrics::evaluate(c, *caches_.at(choice_key(c))).metrics;
    });
    for (std::size_t j = 0; j < todo.size(); ++j) reports_.emplace(todo_keys[j], fresh[j]);

    std::vector<metrics::MetricsReport> out;
    out.reserve(configs.size());
    for (const auto& c : configs) out.push_back(reports_.at(report_key(c)));
    return out;
  }

  metrics::MetricsReport run(const ModelConfig& cfg) { return run(std::span<const ModelConfig>(&cfg, 1)).front(); }

 private:
  using ChoiceKey = std::tuple<int, int, int, std::uint64_t, int, int>;
  using ReportKey = std::tuple<ChoiceKey, std::uint64_t, std::uint64_t, std::uint64_t, std::uint64_t,
                               std::uint64_t, int, int>;

  static std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

  static ChoiceKey choice_key(const ModelConfig& c) {
    return {c.population.z_d, c.population.z_m, c.users.k, bits(c.users.gamma), c.policy.k_g, c.policy.k_m};
  }
  static ReportKey report_key(const ModelConfig& c) {
    return {choice_key(c),
            bits(c.users.epsilon),
            bits(c.economics.b),
            bits(c.economics.c),
            bits(c.evolution.beta),
            bits(c.evolution.mu),
            static_cast<int>(c.fermi_sign),
            static_cast<int>(c.focal_conditioning)};
  }

  unsigned threads_;
  std::map<ChoiceKey, std::shared_ptr<const payoff::ChoiceCache>> caches_;
  std::map<ReportKey, metrics::MetricsReport> reports_;
};

// ---------------------------------------------------------------------------
// One-dimensional sweeps

enum class Axis { KG, KM, Epsilon, Gamma };

inline std::string to_string(Axis a) {
  switch (a) {
    case Axis::KG: return "kg";
    case Axis::KM: return "km";
    case Axis::Epsilon: return "eps";
    case Axis::Gamma: return "gamma";
  }
  return "?";
}

inline std::optional<Axis> parse_axis(std::string_view s) {
  if (s == "kg") return Axis::KG;
  if (s == "km") return Axis::KM;
  if (s == "eps") return Axis::Epsilon;
  if (s == "gamma") return Axis::Gamma;
  return std::nullopt;
}

inline bool is_integer_axis(Axis a) { return a == Axis::KG || a == Axis::KM; }

inline ModelConfig apply_axis(ModelConfig cfg, Axis axis, double value) {
  switch (axis) {
    case Axis::KG: cfg.policy.k_g = static_cast<int>(std::lround(value)); break;
    case Axis::KM: cfg.policy.k_m = static_cast<int>(std::lround(value)); break;
    case Axis::Epsilon: cfg.users.epsilon = value; break;
    case Axis::Gamma: cfg.users.gamma = value; break;
  }
  return cfg;
}

struct SweepRow {
  double axis_value = 0.0;
  ModelConfig config;
  metrics::MetricsReport metrics;
};

struct SweepResult {
  Axis axis = Axis::KG;
  std::vector<SweepRow> rows;
  std::vector<std::size_t> changepoints;  // rows whose regime differs from the previous row
};

inline SweepResult sweep(const ModelConfig& base, Axis axis, std::span<const double> values, Evaluator& ev) {
  SweepResult out;
  out.axis = axis;
  std::vector<ModelConfig> configs;
  configs.reserve(values.size());
  for (double v : values) configs.push_back(apply_axis(base, axis, v));
  const auto reports = ev.run(configs);
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.rows.push_back(SweepRow{values[i], configs[i], reports[i]});
    if (i > 0 && reports[i].regime != reports[i - 1].regime) out.changepoints.push_back(i);
  }
  return out;
}

inline std::vector<double> integer_range(int lo, int hi) {
  std::vector<double> v;
  for (int x = lo; x <= hi; ++x) v.push_back(x);
  return v;
}

inline SweepResult sweep_kg(const ModelConfig& base, int lo, int hi, Evaluator& ev) {
  if (lo < 0 || hi > base.users.k || lo > hi) throw DomainError("k_G range must lie within [0, k]");
  const auto values = integer_range(lo, hi);
  return sweep(base, Axis::KG, values, ev);
}

// Row maximizing DPR among regime-C rows; ties go to the earlier row.
inline std::optional<std::size_t> best_dpr_in_regime_c(const SweepResult& s) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    if (s.rows[i].metrics.regime != metrics::Regime::C) continue;
    if (!best || s.rows[i].metrics.dpr > s.rows[*best].metrics.dpr) best = i;
  }
  return best;
}

// k_G maximizing UX * DPR over a k_G sweep, restricted to regime C whenever
// any row reaches it.
inline int select_kg_ux_dpr(const SweepResult& kg_sweep) {
  if (kg_sweep.rows.empty()) throw DomainError("empty k_G sweep");
  const bool any_c = std::any_of(kg_sweep.rows.begin(), kg_sweep.rows.end(),
                                 [](const SweepRow& r) { return r.metrics.regime == metrics::Regime::C; });
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < kg_sweep.rows.size(); ++i) {
    const auto& m = kg_sweep.rows[i].metrics;
    if (any_c && m.regime != metrics::Regime::C) continue;
    if (!best || m.ux * m.dpr > kg_sweep.rows[*best].metrics.ux * kg_sweep.rows[*best].metrics.dpr) best = i;
  }
  return kg_sweep.rows[*best].config.policy.k_g;
}

struct KmScan {
  int k_g = 0;
  SweepResult rows;
  int best_km = 0;  // argmax DPR, smallest on ties
};

inline KmScan sweep_km(const ModelConfig& base, int lo, int hi, Evaluator& ev) {
  if (lo < 0 || hi > base.policy.k_g || lo > hi) throw DomainError("k_M range must lie within [0, k_G]");
  KmScan out;
  out.k_g = base.policy.k_g;
  const auto values = integer_range(lo, hi);
  out.rows = sweep(base, Axis::KM, values, ev);
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.rows.rows.size(); ++i) {
    if (out.rows.rows[i].metrics.dpr > out.rows.rows[best].metrics.dpr) best = i;
  }
  out.best_km = out.rows.rows[best].config.policy.k_m;
  return out;
}

// Chooses k_G by the UX * DPR rule at k_M = 0, then scans k_M over [0, k_G].
inline KmScan anti_discrimination_scan(const ModelConfig& base, Evaluator& ev) {
  ModelConfig at_zero = base;
  at_zero.policy.k_m = 0;
  at_zero.policy.k_g = 0;
  const auto kg_rows = sweep_kg(at_zero, 0, base.users.k, ev);
  at_zero.policy.k_g = select_kg_ux_dpr(kg_rows);
  return sweep_km(at_zero, 0, at_zero.policy.k_g, ev);
}

// ---------------------------------------------------------------------------
// Pareto front over (UX, DPR)

struct Objectives {
  double ux = 0.0;
  double dpr = 0.0;
};

inline bool dominates(const Objectives& a, const Objectives& b) {
  return a.ux >= b.ux && a.dpr >= b.dpr && (a.ux > b.ux || a.dpr > b.dpr);
}

// Nondominated flags, O(n log n). Points with identical objectives are kept
// together.
inline std::vector<bool> nondominated(std::span<const Objectives> pts) {
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pts[a].ux != pts[b].ux) return pts[a].ux > pts[b].ux;
    return pts[a].dpr > pts[b].dpr;
  });
  std::vector<bool> keep(pts.size(), false);
  double best_higher = -std::numeric_limits<double>::infinity();  // best dpr at strictly larger ux
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    while (end < order.size() && pts[order[end]].ux == pts[order[g]].ux) ++end;
    const double top = pts[order[g]].dpr;
    for (std::size_t i = g; i < end; ++i) {
      const double d = pts[order[i]].dpr;
      keep[order[i]] = d == top && d > best_higher;
    }
    best_higher = std::max(best_higher, top);
    g = end;
  }
  return keep;
}

struct ParetoPoint {
  PlatformPolicy policy;
  metrics::MetricsReport metrics;
  bool eligible = true;
  bool on_front = false;
};

struct ParetoFront {
  std::vector<ParetoPoint> points;  // every evaluated candidate, in input order

  std::vector<PlatformPolicy> front() const {
    std::vector<PlatformPolicy> out;
    for (const auto& p : points) {
      if (p.on_front) out.push_back(p.policy);
    }
    return out;
  }
};

// With `regime_c_only`, candidates outside regime C are evaluated and kept but
// cannot enter the front.
inline ParetoFront pareto_front(const ModelConfig& base, std::span<const PlatformPolicy> candidates,
                                bool regime_c_only, Evaluator& ev) {
  if (candidates.empty()) throw DomainError("pareto_front needs at least one candidate");
  std::vector<ModelConfig> configs;
  for (const auto& pol : candidates) {
    ModelConfig c = base;
    c.policy = pol;
    configs.push_back(c);
  }
  const auto reports = ev.run(configs);
  ParetoFront out;
  std::vector<Objectives> obj;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    ParetoPoint p{candidates[i], reports[i], true, false};
    p.eligible = !regime_c_only || reports[i].regime == metrics::Regime::C;
    if (p.eligible) {
      obj.push_back(Objectives{reports[i].ux, reports[i].dpr});
      idx.push_back(i);
    }
    out.points.push_back(p);
  }
  const auto keep = nondominated(obj);
  for (std::size_t j = 0; j < idx.size(); ++j) out.points[idx[j]].on_front = keep[j];
  return out;
}

// ---------------------------------------------------------------------------
// k_G^DPR over an (epsilon, gamma) grid

// n points strictly inside (0, 1): i / (n + 1).
inline std::vector<double> open_unit_grid(int n) {
  std::vector<double> v;
  for (int i = 1; i <= n; ++i) v.push_back(static_cast<double>(i) / static_cast<double>(n + 1));
  return v;
}

struct MapCell {
  double epsilon = 0.0;
  double gamma = 0.0;
  std::optional<int> kg_dpr;  // nullopt when no k_G reaches regime C
};

struct KgDprMap {
  std::vector<double> epsilons;
  std::vector<double> gammas;
  std::vector<MapCell> cells;  // epsilon-major

  const MapCell& at(std::size_t i_eps, std::size_t i_gamma) const { return cells.at(i_eps * gammas.size() + i_gamma); }
};

inline KgDprMap kg_dpr_map(const ModelConfig& base, std::span<const double> epsilons, std::span<const double> gammas,
                           Evaluator& ev) {
  KgDprMap out;
  out.epsilons.assign(epsilons.begin(), epsilons.end());
  out.gammas.assign(gammas.begin(), gammas.end());
  const int k = base.users.k;
  std::vector<ModelConfig> configs;
  for (double e : epsilons) {
    for (double g : gammas) {
      for (int kg = base.policy.k_m; kg <= k; ++kg) {
        ModelConfig c = base;
        c.users.epsilon = e;
        c.users.gamma = g;
        c.policy.k_g = kg;
        configs.push_back(c);
      }
    }
  }
  const auto reports = ev.run(configs);
  std::size_t pos = 0;
  for (double e : epsilons) {
    for (double g : gammas) {
      MapCell cell{e, g, std::nullopt};
      double best = -1.0;
      for (int kg = base.policy.k_m; kg <= k; ++kg, ++pos) {
        const auto& m = reports[pos];
        if (m.regime == metrics::Regime::C && m.dpr > best) {
          best = m.dpr;
          cell.kg_dpr = kg;
        }
      }
      out.cells.push_back(cell);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Policy choice under a uniform belief over epsilon

enum class Objective { ExpectedDpr, MaximinDpr };
enum class Feasibility { EveryGridPoint, Midpoint };

inline std::string to_string(Objective o) { return o == Objective::ExpectedDpr ? "expected_dpr" : "maximin_dpr"; }

struct UncertaintySpec {
  double epsilon_min = 0.0;
  double epsilon_max = 0.0;
  int grid_points = 15;
  Objective objective = Objective::MaximinDpr;
  Feasibility feasibility = Feasibility::EveryGridPoint;

  double width() const { return epsilon_max - epsilon_min; }
};

inline void check(const UncertaintySpec& s) {
  if (!(s.epsilon_min >= 0.0 && s.epsilon_max <= 1.0 && s.epsilon_min <= s.epsilon_max)) {
    throw DomainError("belief interval must satisfy 0 <= eps_min <= eps_max <= 1");
  }
  if (s.width() > 0.0 && s.grid_points < 2) throw DomainError("belief grid needs at least 2 points");
}

// Interval of the given width centred on eps_true, clipped to [0, 1].
inline UncertaintySpec centred_spec(double eps_true, double width, Objective obj, int grid_points = 15,
                                    Feasibility feas = Feasibility::EveryGridPoint) {
  UncertaintySpec s;
  s.epsilon_min = std::max(0.0, eps_true - width / 2.0);
  s.epsilon_max = std::min(1.0, eps_true + width / 2.0);
  s.grid_points = grid_points;
  s.objective = obj;
  s.feasibility = feas;
  return s;
}

inline std::vector<double> belief_grid(const UncertaintySpec& s) {
  check(s);
  if (s.width() == 0.0) return {s.epsilon_min};
  std::vector<double> v;
  const int n = s.grid_points;
  for (int i = 0; i < n; ++i) {
    v.push_back(i + 1 == n ? s.epsilon_max
                           : s.epsilon_min + s.width() * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return v;
}

inline std::vector<PlatformPolicy> all_policies(int k) {
  std::vector<PlatformPolicy> v;
  for (int kg = 0; kg <= k; ++kg) {
    for (int km = 0; km <= kg; ++km) v.push_back(PlatformPolicy{kg, km});
  }
  return v;
}

struct PolicyProfile {
  PlatformPolicy policy;
  std::vector<double> dpr;  // one entry per belief-grid point
  std::vector<metrics::Regime> regimes;
  bool feasible = false;
  double worst = 0.0;
  double average = 0.0;
};

struct UncertaintyResult {
  UncertaintySpec spec;
  std::vector<double> grid;
  PolicyProfile chosen;
  std::optional<PolicyProfile> baseline;  // best k_M = 0 policy under the same objective
};

namespace detail {

inline double score(const PolicyProfile& p, Objective o) { return o == Objective::ExpectedDpr ? p.average : p.worst; }

inline std::optional<std::size_t> argmax_feasible(const std::vector<PolicyProfile>& profiles, Objective o,
                                                  bool k_m_zero_only) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& p = profiles[i];
    if (!p.feasible || (k_m_zero_only && p.policy.k_m != 0)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = profiles[*best];
    const double sp = score(p, o);
    const double sb = score(b, o);
    // Ties: smaller k_G, then smaller k_M.
    if (sp > sb || (sp == sb && std::tie(p.policy.k_g, p.policy.k_m) < std::tie(b.policy.k_g, b.policy.k_m))) best = i;
  }
  return best;
}

}  // namespace detail

inline UncertaintyResult optimize_under_uncertainty(const UncertaintySpec& spec, const ModelConfig& base,
                                                    std::span<const PlatformPolicy> candidates, Evaluator& ev) {
  if (candidates.empty()) throw DomainError("no candidate policies");
  UncertaintyResult out;
  out.spec = spec;
  out.grid = belief_grid(spec);
  const double midpoint = 0.5 * (spec.epsilon_min + spec.epsilon_max);
  const std::size_t per = out.grid.size() + 1;  // grid points plus the midpoint

  std::vector<ModelConfig> configs;
  configs.reserve(candidates.size() * per);
  for (const auto& pol : candidates) {
    for (std::size_t j = 0; j < per; ++j) {
      ModelConfig c = base;
      c.policy = pol;
      c.users.epsilon = j < out.grid.size() ? out.grid[j] : midpoint;
      configs.push_back(c);
    }
  }
  const auto reports = ev.run(configs);

  std::vector<PolicyProfile> profiles;
  profiles.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    PolicyProfile p;
    p.policy = candidates[i];
    CompensatedSum sum;
    p.worst = std::numeric_limits<double>::infinity();
    bool all_c = true;
    for (std::size_t j = 0; j < out.grid.size(); ++j) {
      const auto& m = reports[i * per + j];
      p.dpr.push_back(m.dpr);
      p.regimes.push_back(m.regime);
      sum += m.dpr;
      p.worst = std::min(p.worst, m.dpr);
      all_c = all_c && m.regime == metrics::Regime::C;
    }
    p.average = sum.value() / static_cast<double>(out.grid.size());
    p.feasible = spec.feasibility == Feasibility::EveryGridPoint
                     ? all_c
                     : reports[i * per + out.grid.size()].regime == metrics::Regime::C;
    profiles.push_back(std::move(p));
  }

  const auto best = detail::argmax_feasible(profiles, spec.objective, false);
  if (!best) {
    throw InfeasibleError("no candidate policy keeps regime C over the belief interval [" +
                          std::to_string(spec.epsilon_min) + ", " + std::to_string(spec.epsilon_max) + "]");
  }
  out.chosen = profiles[*best];
  if (const auto base_idx = detail::argmax_feasible(profiles, spec.objective, true)) out.baseline = profiles[*base_idx];
  return out;
}

}  // namespace platform_egt::sweep

#endif  // PLATFORM_EGT_SWEEP_HPP
