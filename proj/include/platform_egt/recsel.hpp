#ifndef PLATFORM_EGT_RECSEL_HPP
#define PLATFORM_EGT_RECSEL_HPP

#include <algorithm>
#include <array>
#include <optional>
#include <string>

#include "platform_egt/combinatorics.hpp"
#include "platform_egt/domain.hpp"

// Exact probability that a provider is shown in a recommendation list and then
// chosen by the user.
//
// List construction, for a population with Z_GD / Z_GM Good-rated providers:
//   stage 1: k^_M = min(k_M, Z_GM) drawn from the Good-rated marginalised;
//   stage 2: k^_G - k^_M drawn from the remaining Good-rated of either group,
//            where k^_G = min(k_G, Z_G);
//   stage 3: k_R = k - k^_G drawn from everyone not yet shown.
// All draws are uniform without replacement. The user then picks one shown
// provider with weight 1 (Good) or 1 - gamma (Bad); if every weight is zero the
// pick is uniform over the k shown.
namespace platform_egt::recsel {

struct RatingConfiguration {
  ProviderPopulation population;
  int good_d = 0;  // Z_GD
  int good_m = 0;  // Z_GM

  int good() const { return good_d + good_m; }
  int bad() const { return population.total() - good(); }
  int good_in(Group g) const { return g == Group::Marginalised ? good_m : good_d; }
  int bad_in(Group g) const { return population.size(g) - good_in(g); }
  int count(Group g, Rating r) const { return r == Rating::Good ? good_in(g) : bad_in(g); }
};

inline void check(const RatingConfiguration& cfg) {
  if (cfg.good_d < 0 || cfg.good_d > cfg.population.z_d || cfg.good_m < 0 ||
      cfg.good_m > cfg.population.z_m) {
    throw DomainError("rating configuration (Z_GD=" + std::to_string(cfg.good_d) +
                      ", Z_GM=" + std::to_string(cfg.good_m) + ") outside group sizes");
  }
}

struct EffectivePolicy {
  int k_hat_m = 0;
  int k_hat_g = 0;
  int k_r = 0;

  static EffectivePolicy derive(const RatingConfiguration& cfg, int k, const PlatformPolicy& policy) {
    check(cfg);
    if (k < 1 || k > cfg.population.total()) throw DomainError("k must lie in [1, Z]");
    if (policy.k_m < 0 || policy.k_m > policy.k_g || policy.k_g > k) {
      throw DomainError("policy must satisfy 0 <= k_M <= k_G <= k");
    }
    EffectivePolicy eff;
    eff.k_hat_m = std::min(policy.k_m, cfg.good_m);
    eff.k_hat_g = std::min(policy.k_g, cfg.good());
    eff.k_r = k - eff.k_hat_g;
    return eff;
  }
};

struct Focal {
  Group group = Group::Marginalised;
  Rating rating = Rating::Good;
};

inline void check(const Focal& focal, const RatingConfiguration& cfg) {
  if (cfg.count(focal.group, focal.rating) < 1) {
    throw DomainError(std::string("focal (") + group_code(focal.group) + ", " +
                      rating_code(focal.rating) + ") absent from rating configuration");
  }
}

// Stage terms are conditional on not having been shown in an earlier stage.
struct InclusionProbability {
  double stage1 = 0.0;
  double stage2 = 0.0;
  double stage3 = 0.0;
  double total = 0.0;

  // Unconditional probability of entering the list at stages 1-2 or stage 3.
  double guaranteed() const { return stage1 + (1.0 - stage1) * stage2; }
  double residual() const { return (1.0 - stage1) * (1.0 - stage2) * stage3; }
};

namespace detail {
inline double ratio(int num, int den) {
  return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}
}  // namespace detail

inline InclusionProbability inclusion_probability(const Focal& focal, const RatingConfiguration& cfg,
                                                  const EffectivePolicy& pol) {
  check(cfg);
  check(focal, cfg);
  InclusionProbability inc;
  if (focal.rating == Rating::Good) {
    if (focal.group == Group::Marginalised) inc.stage1 = detail::ratio(pol.k_hat_m, cfg.good_m);
    inc.stage2 = detail::ratio(pol.k_hat_g - pol.k_hat_m, cfg.good() - pol.k_hat_m);
  }
  inc.stage3 = detail::ratio(pol.k_r, cfg.population.total() - pol.k_hat_g);
  inc.total = 1.0 - (1.0 - inc.stage1) * (1.0 - inc.stage2) * (1.0 - inc.stage3);
  return inc;
}

namespace detail {

// E[focal_weight / W] when the list holds `fixed_good` Good-rated members
// besides the stage-3 draws, and X ~ law Good-rated members are added by the
// remaining stage-3 draws. The list always has k members.
inline double expected_share(double focal_weight, int fixed_good, const HypergeometricLaw& law, int k,
                             double gamma) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < law.mass.size(); ++i) {
    const int good = fixed_good + law.lo + static_cast<int>(i);
    const int bad = k - good;
    const double total_weight = static_cast<double>(good) + static_cast<double>(bad) * (1.0 - gamma);
    const double share = total_weight > 0.0 ? focal_weight / total_weight : 1.0 / static_cast<double>(k);
    acc += law.mass[i] * share;
  }
  return acc.value();
}

}  // namespace detail

inline double choice_probability(const Focal& focal, const RatingConfiguration& cfg,
                                 const UserPopulation& users, const PlatformPolicy& policy) {
  const auto pol = EffectivePolicy::derive(cfg, users.k, policy);
  const auto inc = inclusion_probability(focal, cfg, pol);
  const int k = users.k;
  const int pool3 = cfg.population.total() - pol.k_hat_g;
  const int good3 = cfg.good() - pol.k_hat_g;

  CompensatedSum p;
  if (focal.rating == Rating::Good) {
    const double early = inc.guaranteed();
    if (early > 0.0) {
      // Focal already among the k^_G guaranteed slots.
      p += early * detail::expected_share(1.0, pol.k_hat_g, hypergeometric_law(pool3, good3, pol.k_r), k,
                                          users.gamma);
    }
    const double late = inc.residual();
    if (late > 0.0) {
      // Focal is one of the k_R residual draws; the others come from the rest.
      p += late * detail::expected_share(1.0, pol.k_hat_g + 1,
                                         hypergeometric_law(pool3 - 1, good3 - 1, pol.k_r - 1), k,
                                         users.gamma);
    }
  } else {
    const double late = inc.residual();
    if (late > 0.0) {
      p += late * detail::expected_share(1.0 - users.gamma, pol.k_hat_g,
                                         hypergeometric_law(pool3 - 1, good3, pol.k_r - 1), k,
                                         users.gamma);
    }
  }
  return std::clamp(p.value(), 0.0, 1.0);
}

inline constexpr std::size_t category_slot(Group g, Rating r) {
  return (g == Group::Marginalised ? 0u : 2u) + (r == Rating::Good ? 0u : 1u);
}

inline constexpr std::array<Focal, 4> kCategories = {
    Focal{Group::Marginalised, Rating::Good}, Focal{Group::Marginalised, Rating::Bad},
    Focal{Group::Dominant, Rating::Good}, Focal{Group::Dominant, Rating::Bad}};

// Per-member choice probability for every category present in the rating
// configuration. Absent categories hold no value.
struct ChoiceProbabilityTable {
  RatingConfiguration config;
  std::array<std::optional<double>, 4> choice{};
  std::array<std::optional<InclusionProbability>, 4> inclusion{};

  std::optional<double> at(Group g, Rating r) const { return choice[category_slot(g, r)]; }

  // Probability that somebody is chosen: sum of count * per-member probability.
  double total_choice() const {
    CompensatedSum s;
    for (const auto& f : kCategories) {
      if (const auto p = at(f.group, f.rating)) s += config.count(f.group, f.rating) * *p;
    }
    return s.value();
  }
};

inline ChoiceProbabilityTable choice_table(const RatingConfiguration& cfg, const UserPopulation& users,
                                           const PlatformPolicy& policy) {
  ChoiceProbabilityTable table;
  table.config = cfg;
  const auto pol = EffectivePolicy::derive(cfg, users.k, policy);
  for (const auto& f : kCategories) {
    if (cfg.count(f.group, f.rating) < 1) continue;
    const auto slot = category_slot(f.group, f.rating);
    table.choice[slot] = choice_probability(f, cfg, users, policy);
    table.inclusion[slot] = inclusion_probability(f, cfg, pol);
  }
  return table;
}

}  // namespace platform_egt::recsel

#endif  // PLATFORM_EGT_RECSEL_HPP
