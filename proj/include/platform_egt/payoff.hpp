#ifndef PLATFORM_EGT_PAYOFF_HPP
#define PLATFORM_EGT_PAYOFF_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "platform_egt/combinatorics.hpp"
#include "platform_egt/domain.hpp"
#include "platform_egt/recsel.hpp"

namespace platform_egt::payoff {

// Probability that a provider's last interaction is reported as Good.
inline double rating_probability(Group g, Strategy s, double epsilon) {
  if (s == Strategy::Low) return 0.0;
  return g == Group::Marginalised ? 1.0 - epsilon : 1.0;
}

inline double rating_probability(Group g, Strategy s, Rating r, double epsilon) {
  const double good = rating_probability(g, s, epsilon);
  return r == Rating::Good ? good : 1.0 - good;
}

struct FocalType {
  Group group = Group::Marginalised;
  Strategy strategy = Strategy::High;
  Rating rating = Rating::Good;
};

// H-players among the focal's group-mates. A focal whose (group, strategy)
// category is empty in `state` is treated as a switched member of the other
// strategy, so the remaining members keep the state's counts.
inline int other_high(const State& state, const ProviderPopulation& pop, Group g, Strategy s) {
  const int h = state.high(g);
  return s == Strategy::High ? std::max(h - 1, 0) : std::min(h, pop.size(g) - 1);
}

// Good-rated dominant providers seen by a focal (group, strategy).
inline int good_dominant(const State& state, const ProviderPopulation& pop, Group g, Strategy s) {
  if (g == Group::Marginalised) return state.h_d;
  return other_high(state, pop, Group::Dominant, s) + (s == Strategy::High ? 1 : 0);
}

inline void check_focal(const FocalType& f) {
  if (f.strategy == Strategy::Low && f.rating == Rating::Good) {
    throw DomainError("a low-effort provider is never rated Good");
  }
}

// Binomial(n, p) masses for n = 0..max_n.
class BinomialRows {
 public:
  BinomialRows(int max_n, double p) : p_(p) {
    rows_.reserve(static_cast<std::size_t>(max_n) + 1);
    for (int n = 0; n <= max_n; ++n) rows_.push_back(binomial_pmf(n, p));
  }
  const std::vector<double>& row(int n) const { return rows_.at(static_cast<std::size_t>(n)); }
  double probability() const { return p_; }

 private:
  double p_;
  std::vector<std::vector<double>> rows_;
};

// Distribution of Z_GM seen by the focal, indexed by z = 0..Z_M. `rows` must
// hold Binomial(n, 1 - epsilon) for n up to Z_M.
inline std::vector<double> gm_mixture(const State& state, const FocalType& focal, FocalConditioning mode,
                                      const ProviderPopulation& pop, const BinomialRows& rows) {
  if (!in_bounds(state, pop)) throw DomainError("state outside the lattice");
  check_focal(focal);
  std::vector<double> mass(static_cast<std::size_t>(pop.z_m) + 1, 0.0);

  if (mode == FocalConditioning::Naive) {
    // Binomial(h_M, 1 - eps) as printed, with z clamped into the range the
    // focal's own category allows.
    int lo = 0;
    int hi = pop.z_m;
    if (focal.group == Group::Marginalised) {
      if (focal.rating == Rating::Good) lo = 1;
      else hi = pop.z_m - 1;
    }
    const auto& binom = rows.row(state.h_m);
    for (std::size_t z = 0; z < binom.size(); ++z) {
      mass[static_cast<std::size_t>(std::clamp(static_cast<int>(z), lo, hi))] += binom[z];
    }
    return mass;
  }

  if (focal.group == Group::Dominant) {
    const auto& binom = rows.row(state.h_m);
    std::copy(binom.begin(), binom.end(), mass.begin());
    return mass;
  }
  const int others = other_high(state, pop, Group::Marginalised, focal.strategy);
  const int shift = focal.rating == Rating::Good ? 1 : 0;
  const auto& binom = rows.row(others);
  for (std::size_t z = 0; z < binom.size(); ++z) mass[z + static_cast<std::size_t>(shift)] = binom[z];
  return mass;
}

inline std::vector<double> gm_mixture(const State& state, const FocalType& focal, double epsilon,
                                      FocalConditioning mode, const ProviderPopulation& pop) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("epsilon outside [0, 1]");
  return gm_mixture(state, focal, mode, pop, BinomialRows(pop.z_m, 1.0 - epsilon));
}

// p(g, r | Z_GD, Z_GM) for every rating configuration of one population.
// Depends on (k, gamma, k_G, k_M) only; epsilon enters through the mixture.
class ChoiceCache {
 public:
  ChoiceCache(const ProviderPopulation& pop, const UserPopulation& users, const PlatformPolicy& policy)
      : pop_(pop), users_(users), policy_(policy) {
    const auto nd = static_cast<std::size_t>(pop.z_d + 1);
    const auto nm = static_cast<std::size_t>(pop.z_m + 1);
    values_.assign(nd * nm * 4, std::numeric_limits<double>::quiet_NaN());
    for (int gd = 0; gd <= pop.z_d; ++gd) {
      for (int gm = 0; gm <= pop.z_m; ++gm) {
        const auto table = recsel::choice_table(recsel::RatingConfiguration{pop, gd, gm}, users, policy);
        for (std::size_t slot = 0; slot < 4; ++slot) {
          if (table.choice[slot]) values_[offset(gd, gm) + slot] = *table.choice[slot];
        }
      }
    }
  }

  double at(Group g, Rating r, int good_d, int good_m) const {
    const double v = values_[offset(good_d, good_m) + recsel::category_slot(g, r)];
    if (std::isnan(v)) throw DomainError("choice probability requested for an absent category");
    return v;
  }

  const ProviderPopulation& population() const { return pop_; }
  const UserPopulation& users() const { return users_; }
  const PlatformPolicy& policy() const { return policy_; }

 private:
  std::size_t offset(int gd, int gm) const {
    return (static_cast<std::size_t>(gd) * static_cast<std::size_t>(pop_.z_m + 1) +
            static_cast<std::size_t>(gm)) *
           4;
  }

  ProviderPopulation pop_;
  UserPopulation users_;
  PlatformPolicy policy_;
  std::vector<double> values_;
};

struct UtilityTable {
  std::array<double, 4> values{};  // (M,H), (M,L), (D,H), (D,L)

  static constexpr std::size_t slot(Group g, Strategy s) {
    return (g == Group::Marginalised ? 0u : 2u) + (s == Strategy::High ? 0u : 1u);
  }
  double at(Group g, Strategy s) const { return values[slot(g, s)]; }
  double& at(Group g, Strategy s) { return values[slot(g, s)]; }
};

inline double utility(Group g, Strategy s, const State& state, const ModelConfig& cfg, const ChoiceCache& cache,
                      const BinomialRows& rows) {
  const auto& pop = cfg.population;
  const double eps = cfg.users.epsilon;
  const int gd = good_dominant(state, pop, g, s);
  CompensatedSum acc;
  for (const Rating r : {Rating::Good, Rating::Bad}) {
    const double pr = rating_probability(g, s, r, eps);
    if (pr == 0.0) continue;
    const auto mix = gm_mixture(state, FocalType{g, s, r}, cfg.focal_conditioning, pop, rows);
    for (std::size_t z = 0; z < mix.size(); ++z) {
      if (mix[z] == 0.0) continue;
      acc += pr * mix[z] * cache.at(g, r, gd, static_cast<int>(z));
    }
  }
  return cfg.economics.payoff(s) * acc.value();
}

inline void check_cache(const ModelConfig& cfg, const ChoiceCache& cache) {
  if (!(cache.population() == cfg.population && cache.users().k == cfg.users.k &&
        cache.users().gamma == cfg.users.gamma && cache.policy() == cfg.policy)) {
    throw DomainError("choice cache built for a different configuration");
  }
}

inline double utility(Group g, Strategy s, const State& state, const ModelConfig& cfg, const ChoiceCache& cache) {
  check_cache(cfg, cache);
  return utility(g, s, state, cfg, cache, BinomialRows(cfg.population.z_m, 1.0 - cfg.users.epsilon));
}

inline double utility(Group g, Strategy s, const State& state, const ModelConfig& cfg) {
  const ChoiceCache cache(cfg.population, cfg.users, cfg.policy);
  return utility(g, s, state, cfg, cache);
}

inline UtilityTable utility_table(const State& state, const ModelConfig& cfg, const ChoiceCache& cache,
                                  const BinomialRows& rows) {
  UtilityTable t;
  for (const Group g : {Group::Marginalised, Group::Dominant}) {
    for (const Strategy s : {Strategy::High, Strategy::Low}) t.at(g, s) = utility(g, s, state, cfg, cache, rows);
  }
  return t;
}

// Utility tables for every lattice state, in lattice order.
inline std::vector<UtilityTable> utility_field(const ModelConfig& cfg, const ChoiceCache& cache) {
  check_cache(cfg, cache);
  const BinomialRows rows(cfg.population.z_m, 1.0 - cfg.users.epsilon);
  const auto n = lattice_size(cfg.population);
  std::vector<UtilityTable> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = utility_table(state_at(i, cfg.population), cfg, cache, rows);
  return out;
}

inline std::vector<UtilityTable> utility_field(const ModelConfig& cfg) {
  const ChoiceCache cache(cfg.population, cfg.users, cfg.policy);
  return utility_field(cfg, cache);
}

}  // namespace platform_egt::payoff

#endif  // PLATFORM_EGT_PAYOFF_HPP
