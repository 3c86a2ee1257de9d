#ifndef PLATFORM_EGT_METRICS_HPP
#define PLATFORM_EGT_METRICS_HPP

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "platform_egt/combinatorics.hpp"
#include "platform_egt/domain.hpp"
#include "platform_egt/dynamics.hpp"
#include "platform_egt/payoff.hpp"

namespace platform_egt::metrics {

// B' (only the marginalised group mostly cooperative) is anomalous.
enum class Regime { A, B, C, BPrime };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::A: return "A";
    case Regime::B: return "B";
    case Regime::C: return "C";
    case Regime::BPrime: return "B'";
  }
  return "?";
}

inline constexpr double kMostlyCooperative = 0.5;

inline void check_distribution(std::span<const double> h, const ProviderPopulation& pop) {
  if (h.size() != lattice_size(pop)) throw DomainError("distribution does not cover the lattice");
}

// Stationary mass on the edge h_g = Z_g.
inline double cooperation_mass(std::span<const double> h, const ProviderPopulation& pop, Group g) {
  check_distribution(h, pop);
  CompensatedSum s;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (state_at(i, pop).high(g) == pop.size(g)) s += h[i];
  }
  return s.value();
}

inline Regime regime(bool coop_m, bool coop_d) {
  if (coop_m && coop_d) return Regime::C;
  if (coop_d) return Regime::B;
  if (coop_m) return Regime::BPrime;
  return Regime::A;
}

inline Regime regime(double mass_m, double mass_d) {
  return regime(mass_m > kMostlyCooperative, mass_d > kMostlyCooperative);
}

// Expected share of H-players in group g.
inline double expected_high_fraction(std::span<const double> h, const ProviderPopulation& pop, Group g) {
  check_distribution(h, pop);
  CompensatedSum s;
  const double zg = static_cast<double>(pop.size(g));
  for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * state_at(i, pop).high(g) / zg;
  return s.value();
}

inline double user_experience(std::span<const double> h, const ProviderPopulation& pop) {
  const double sm = expected_high_fraction(h, pop, Group::Marginalised);
  const double sd = expected_high_fraction(h, pop, Group::Dominant);
  return (sm * pop.z_m + sd * pop.z_d) / static_cast<double>(pop.total());
}

// Strategy-share-weighted mean utility of group g at one state.
inline double group_average_utility(const State& s, const payoff::UtilityTable& u, const ProviderPopulation& pop,
                                    Group g) {
  const double zg = static_cast<double>(pop.size(g));
  const double h = static_cast<double>(s.high(g));
  return u.at(g, Strategy::Low) * (zg - h) / zg + u.at(g, Strategy::High) * h / zg;
}

struct ParityResult {
  double u_bar_m = 0.0;
  double u_bar_d = 0.0;
  double dpr = 1.0;
  bool degenerate = false;  // both averages zero
};

inline ParityResult demographic_parity(std::span<const double> h, std::span<const payoff::UtilityTable> utilities,
                                       const ProviderPopulation& pop) {
  check_distribution(h, pop);
  if (utilities.size() != h.size()) throw DomainError("utility field does not cover the lattice");
  CompensatedSum um;
  CompensatedSum ud;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto s = state_at(i, pop);
    um += h[i] * group_average_utility(s, utilities[i], pop, Group::Marginalised);
    ud += h[i] * group_average_utility(s, utilities[i], pop, Group::Dominant);
  }
  ParityResult out;
  out.u_bar_m = um.value();
  out.u_bar_d = ud.value();
  if (out.u_bar_m < 0.0 || out.u_bar_d < 0.0) throw std::logic_error("negative average utility");
  const double hi = std::max(out.u_bar_m, out.u_bar_d);
  if (hi == 0.0) {
    out.degenerate = true;
    out.dpr = 1.0;
  } else {
    out.dpr = std::min(out.u_bar_m, out.u_bar_d) / hi;
  }
  return out;
}

struct MetricsReport {
  double coop_mass_m = 0.0;
  double coop_mass_d = 0.0;
  bool mostly_cooperative_m = false;
  bool mostly_cooperative_d = false;
  Regime regime = Regime::A;
  double sigma_star_m = 0.0;
  double sigma_star_d = 0.0;
  double ux = 0.0;
  double u_bar_m = 0.0;
  double u_bar_d = 0.0;
  double dpr = 1.0;
  bool dpr_degenerate = false;
};

inline MetricsReport report(std::span<const double> h, std::span<const payoff::UtilityTable> utilities,
                            const ProviderPopulation& pop) {
  MetricsReport r;
  r.coop_mass_m = cooperation_mass(h, pop, Group::Marginalised);
  r.coop_mass_d = cooperation_mass(h, pop, Group::Dominant);
  r.mostly_cooperative_m = r.coop_mass_m > kMostlyCooperative;
  r.mostly_cooperative_d = r.coop_mass_d > kMostlyCooperative;
  r.regime = regime(r.mostly_cooperative_m, r.mostly_cooperative_d);
  r.sigma_star_m = expected_high_fraction(h, pop, Group::Marginalised);
  r.sigma_star_d = expected_high_fraction(h, pop, Group::Dominant);
  r.ux = (r.sigma_star_m * pop.z_m + r.sigma_star_d * pop.z_d) / static_cast<double>(pop.total());
  const auto parity = demographic_parity(h, utilities, pop);
  r.u_bar_m = parity.u_bar_m;
  r.u_bar_d = parity.u_bar_d;
  r.dpr = parity.dpr;
  r.dpr_degenerate = parity.degenerate;
  return r;
}

// Full pipeline for one configuration.
struct Evaluation {
  std::vector<payoff::UtilityTable> utilities;
  dynamics::StationaryResult stationary;
  MetricsReport metrics;
};

inline Evaluation evaluate(const ModelConfig& cfg, const payoff::ChoiceCache& cache) {
  validate(cfg);
  Evaluation ev;
  ev.utilities = payoff::utility_field(cfg, cache);
  const auto p = dynamics::transition_matrix(cfg, ev.utilities);
  ev.stationary = dynamics::stationary(p);
  ev.metrics = report(ev.stationary.distribution, ev.utilities, cfg.population);
  return ev;
}

inline Evaluation evaluate(const ModelConfig& cfg) {
  validate(cfg);
  const payoff::ChoiceCache cache(cfg.population, cfg.users, cfg.policy);
  return evaluate(cfg, cache);
}

}  // namespace platform_egt::metrics

#endif  // PLATFORM_EGT_METRICS_HPP
