#ifndef PLATFORM_EGT_ORACLE_HPP
#define PLATFORM_EGT_ORACLE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "platform_egt/domain.hpp"
#include "platform_egt/parallel.hpp"
#include "platform_egt/payoff.hpp"
#include "platform_egt/philox.hpp"
#include "platform_egt/recsel.hpp"

// Monte Carlo replay of the concrete interaction: rating draws, staged list
// build, weighted choice, payoff. Episodes run in fixed batches, each batch on
// its own counter stream, and only integer tallies are merged, so results do
// not depend on the worker count.
namespace platform_egt::oracle {

inline constexpr std::uint64_t kBatchEpisodes = 1u << 14;

struct Provider {
  Group group;
  Rating rating;
};

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;

  // A zero standard error means every episode agreed; then only roundoff
  // separates a matching exact value.
  double z_score(double exact) const {
    if (stderr_ > 0.0) return (mean - exact) / stderr_;
    return std::abs(mean - exact) <= 1e-12 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean - exact);
  }
};

// Per-episode tallies of a count in [0, n]: sum and sum of squares.
struct Tally {
  std::uint64_t sum = 0;
  std::uint64_t sum_sq = 0;

  void add(std::uint64_t v) {
    sum += v;
    sum_sq += v * v;
  }
  Tally& operator+=(const Tally& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    return *this;
  }

  // Per-member estimate when the count covers `members` exchangeable members.
  Estimate per_member(std::uint64_t episodes, int members) const {
    const double n = static_cast<double>(episodes);
    const double mean = static_cast<double>(sum) / n;
    const double var = std::max(0.0, static_cast<double>(sum_sq) / n - mean * mean);
    const double scale = members > 0 ? 1.0 / members : 0.0;
    return Estimate{mean * scale, std::sqrt(var / n) * scale};
  }
};

namespace detail {

// Moves k uniformly chosen elements of v[from, end) to v[from, from + k).
inline void partial_shuffle(std::vector<int>& v, std::size_t from, std::size_t end, int k, CounterRng& rng) {
  for (int i = 0; i < k; ++i) {
    const std::size_t pos = from + static_cast<std::size_t>(i);
    const std::size_t j = pos + rng.below(end - pos);
    std::swap(v[pos], v[j]);
  }
}

// Builds one list over `roster` and returns the index of the chosen provider.
// `shown` receives the shown indices.
inline int run_episode(const std::vector<Provider>& roster, const recsel::EffectivePolicy& pol, int k, double gamma,
                       CounterRng& rng, std::vector<int>& order, std::vector<int>& shown) {
  // order = [good M | good D | bad]; after each stage the chosen ones sit in
  // front of the remaining pool.
  order.clear();
  for (int i = 0; i < static_cast<int>(roster.size()); ++i) {
    if (roster[i].rating == Rating::Good && roster[i].group == Group::Marginalised) order.push_back(i);
  }
  const std::size_t good_m = order.size();
  for (int i = 0; i < static_cast<int>(roster.size()); ++i) {
    if (roster[i].rating == Rating::Good && roster[i].group == Group::Dominant) order.push_back(i);
  }
  const std::size_t good_end = order.size();
  for (int i = 0; i < static_cast<int>(roster.size()); ++i) {
    if (roster[i].rating == Rating::Bad) order.push_back(i);
  }

  partial_shuffle(order, 0, good_m, pol.k_hat_m, rng);  // stage 1: good M
  partial_shuffle(order, static_cast<std::size_t>(pol.k_hat_m), good_end, pol.k_hat_g - pol.k_hat_m,
                  rng);                                                              // stage 2: remaining good
  partial_shuffle(order, static_cast<std::size_t>(pol.k_hat_g), order.size(), pol.k_r, rng);  // stage 3

  shown.assign(order.begin(), order.begin() + k);
  double total = 0.0;
  for (int i : shown) total += roster[i].rating == Rating::Good ? 1.0 : 1.0 - gamma;
  if (total <= 0.0) return shown[rng.below(shown.size())];
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (int i : shown) {
    acc += roster[i].rating == Rating::Good ? 1.0 : 1.0 - gamma;
    if (u < acc) return i;
  }
  // Rounding at the upper end: last positive-weight provider.
  for (auto it = shown.rbegin(); it != shown.rend(); ++it) {
    if (roster[*it].rating == Rating::Good || gamma < 1.0) return *it;
  }
  return shown.back();
}

template <typename Batch, typename Result>
void run_batches(std::uint64_t episodes, unsigned threads, std::vector<Result>& per_batch, Batch&& batch) {
  const std::uint64_t batches = (episodes + kBatchEpisodes - 1) / kBatchEpisodes;
  per_batch.assign(batches, Result{});
  parallel_for(batches, threads, [&](std::size_t b) {
    const std::uint64_t first = b * kBatchEpisodes;
    const std::uint64_t n = std::min(kBatchEpisodes, episodes - first);
    per_batch[b] = batch(b, n);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct SelectionRun {
  std::uint64_t seed = 0;
  std::uint64_t episodes = 0;
  recsel::RatingConfiguration config;
  std::array<int, 4> members{};            // category sizes, recsel::category_slot order
  std::array<Estimate, 4> choice{};        // per-member probability of being chosen
  std::array<Estimate, 4> inclusion{};     // per-member probability of being shown
  std::array<std::uint64_t, 4> chosen{};   // raw tallies

  double total_frequency() const {
    std::uint64_t s = 0;
    for (auto c : chosen) s += c;
    return static_cast<double>(s) / static_cast<double>(episodes);
  }
};

inline SelectionRun simulate_selection(const recsel::RatingConfiguration& cfg, const UserPopulation& users,
                                       const PlatformPolicy& policy, std::uint64_t episodes, std::uint64_t seed,
                                       unsigned threads = 1) {
  if (episodes < 1) throw DomainError("episodes must be at least 1");
  recsel::check(cfg);
  const auto pol = recsel::EffectivePolicy::derive(cfg, users.k, policy);
  std::vector<Provider> roster;
  for (const auto& cat : recsel::kCategories) {
    for (int i = 0; i < cfg.count(cat.group, cat.rating); ++i) roster.push_back(Provider{cat.group, cat.rating});
  }
  if (users.k < 1 || users.k > static_cast<int>(roster.size())) throw DomainError("k must lie in [1, Z]");

  struct Counts {
    std::array<Tally, 4> chosen{};
    std::array<Tally, 4> shown{};
  };
  std::vector<Counts> per_batch;
  detail::run_batches(episodes, threads, per_batch, [&](std::uint64_t b, std::uint64_t n) {
    CounterRng rng(seed, b);
    Counts c;
    std::vector<int> order;
    std::vector<int> shown;
    for (std::uint64_t e = 0; e < n; ++e) {
      const int pick = detail::run_episode(roster, pol, users.k, users.gamma, rng, order, shown);
      std::array<std::uint64_t, 4> seen{};
      for (int i : shown) ++seen[recsel::category_slot(roster[i].group, roster[i].rating)];
      const auto slot = recsel::category_slot(roster[pick].group, roster[pick].rating);
      for (std::size_t s = 0; s < 4; ++s) {
        c.chosen[s].add(s == slot ? 1 : 0);
        c.shown[s].add(seen[s]);
      }
    }
    return c;
  });

  Counts total;
  for (const auto& c : per_batch) {
    for (std::size_t s = 0; s < 4; ++s) {
      total.chosen[s] += c.chosen[s];
      total.shown[s] += c.shown[s];
    }
  }
  SelectionRun run;
  run.seed = seed;
  run.episodes = episodes;
  run.config = cfg;
  for (const auto& cat : recsel::kCategories) {
    const auto s = recsel::category_slot(cat.group, cat.rating);
    run.members[s] = cfg.count(cat.group, cat.rating);
    run.choice[s] = total.chosen[s].per_member(episodes, run.members[s]);
    run.inclusion[s] = total.shown[s].per_member(episodes, run.members[s]);
    run.chosen[s] = total.chosen[s].sum;
  }
  return run;
}

// ---------------------------------------------------------------------------

struct UtilityRun {
  std::uint64_t seed = 0;
  std::uint64_t episodes = 0;
  Estimate payoff;  // mean payoff per interaction opportunity
};

// Focal provider of (group, strategy) at `state`. An empty category is
// handled as in the exact engine: the focal joins as a switched member and the
// rest of its group keeps the state's counts as far as possible.
inline UtilityRun simulate_utility(const State& state, Group group, Strategy strategy, const ModelConfig& cfg,
                                   std::uint64_t episodes, std::uint64_t seed, unsigned threads = 1) {
  if (episodes < 1) throw DomainError("episodes must be at least 1");
  if (cfg.focal_conditioning != FocalConditioning::Exact) {
    throw DomainError("the oracle replays exact focal conditioning only");
  }
  validate(cfg);
  const auto& pop = cfg.population;
  if (!in_bounds(state, pop)) throw DomainError("state outside the lattice");

  // Strategies of everyone; index 0 is the focal.
  struct Member {
    Group group;
    Strategy strategy;
  };
  std::vector<Member> members{{group, strategy}};
  for (const Group g : {Group::Marginalised, Group::Dominant}) {
    const int others = g == group ? pop.size(g) - 1 : pop.size(g);
    const int high = g == group ? payoff::other_high(state, pop, g, strategy) : state.high(g);
    for (int i = 0; i < others; ++i) members.push_back(Member{g, i < high ? Strategy::High : Strategy::Low});
  }
  const double eps = cfg.users.epsilon;
  const int k = cfg.users.k;
  const double gamma = cfg.users.gamma;
  const PlatformPolicy policy = cfg.policy;

  std::vector<Tally> per_batch;
  detail::run_batches(episodes, threads, per_batch, [&](std::uint64_t b, std::uint64_t n) {
    CounterRng rng(seed, b);
    Tally t;
    std::vector<Provider> roster(members.size());
    std::vector<int> order;
    std::vector<int> shown;
    for (std::uint64_t e = 0; e < n; ++e) {
      int good_d = 0;
      int good_m = 0;
      for (std::size_t i = 0; i < members.size(); ++i) {
        const double pg = payoff::rating_probability(members[i].group, members[i].strategy, eps);
        const bool good = pg >= 1.0 || (pg > 0.0 && rng.bernoulli(pg));
        roster[i] = Provider{members[i].group, good ? Rating::Good : Rating::Bad};
        if (good) ++(members[i].group == Group::Marginalised ? good_m : good_d);
      }
      const recsel::RatingConfiguration rc{pop, good_d, good_m};
      const auto pol = recsel::EffectivePolicy::derive(rc, k, policy);
      t.add(detail::run_episode(roster, pol, k, gamma, rng, order, shown) == 0 ? 1 : 0);
    }
    return t;
  });
  Tally total;
  for (const auto& t : per_batch) total += t;
  const auto freq = total.per_member(episodes, 1);
  const double pay = cfg.economics.payoff(strategy);
  return UtilityRun{seed, episodes, Estimate{pay * freq.mean, pay * freq.stderr_}};
}

// ---------------------------------------------------------------------------
// Seeded battery of random small configurations compared against the exact
// engine.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct BatteryCase {
  ModelConfig config;
  recsel::RatingConfiguration ratings;
  State state;
};

// Z_D, Z_M in [2, 6] (so Z <= 12); gamma is 0, 1 or uniform with equal odds.
inline BatteryCase random_case(std::uint64_t seed, std::uint64_t index) {
  CounterRng rng(splitmix64(seed ^ 0xC0FFEEull), index);
  BatteryCase c;
  auto& cfg = c.config;
  cfg.population.z_d = 2 + static_cast<int>(rng.below(5));
  cfg.population.z_m = 2 + static_cast<int>(rng.below(5));
  const int z = cfg.population.total();
  cfg.users.k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(z)));
  cfg.policy.k_g = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.users.k) + 1));
  cfg.policy.k_m = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.policy.k_g) + 1));
  const auto g = rng.below(3);
  cfg.users.gamma = g == 0 ? 0.0 : g == 1 ? 1.0 : rng.uniform();
  cfg.users.epsilon = rng.uniform();
  c.ratings = recsel::RatingConfiguration{cfg.population,
                                          static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.population.z_d) + 1)),
                                          static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.population.z_m) + 1))};
  c.state = State{static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.population.z_m) + 1)),
                  static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.population.z_d) + 1))};
  validate(cfg);
  return c;
}

struct CheckRow {
  std::string category;
  double exact = 0.0;
  double empirical = 0.0;
  double stderr_ = 0.0;
  double z_score = 0.0;
};

inline constexpr double kZLimit = 4.0;

// Rows per case: inclusion and choice for each present rating category, then
// utility for each (group, strategy) at a random state.
inline std::vector<CheckRow> check_case(const BatteryCase& c, std::size_t index, std::uint64_t episodes,
                                        std::uint64_t seed, unsigned threads) {
  std::vector<CheckRow> rows;
  const std::string tag = "case" + std::to_string(index);
  const auto& cfg = c.config;
  const auto table = recsel::choice_table(c.ratings, cfg.users, cfg.policy);
  const auto run = simulate_selection(c.ratings, cfg.users, cfg.policy, episodes, splitmix64(seed + 2 * index), threads);
  const auto pol = recsel::EffectivePolicy::derive(c.ratings, cfg.users.k, cfg.policy);
  for (const auto& cat : recsel::kCategories) {
    const auto s = recsel::category_slot(cat.group, cat.rating);
    if (!table.choice[s]) continue;
    const std::string name = std::string{group_code(cat.group), rating_code(cat.rating)};
    const double inc = recsel::inclusion_probability(cat, c.ratings, pol).total;
    rows.push_back({tag + "/inclusion/" + name, inc, run.inclusion[s].mean, run.inclusion[s].stderr_,
                    run.inclusion[s].z_score(inc)});
    rows.push_back({tag + "/choice/" + name, *table.choice[s], run.choice[s].mean, run.choice[s].stderr_,
                    run.choice[s].z_score(*table.choice[s])});
  }
  const payoff::ChoiceCache cache(cfg.population, cfg.users, cfg.policy);
  int n = 0;
  for (const Group g : {Group::Marginalised, Group::Dominant}) {
    for (const Strategy st : {Strategy::High, Strategy::Low}) {
      const double exact = payoff::utility(g, st, c.state, cfg, cache);
      const auto u = simulate_utility(c.state, g, st, cfg, episodes, splitmix64(seed + 2 * index + 1) + n++, threads);
      rows.push_back({tag + "/utility/" + std::string{group_code(g), strategy_code(st)}, exact, u.payoff.mean,
                      u.payoff.stderr_, u.payoff.z_score(exact)});
    }
  }
  return rows;
}

inline std::vector<CheckRow> check_battery(std::uint64_t seed, std::size_t cases, std::uint64_t episodes,
                                           unsigned threads) {
  std::vector<CheckRow> rows;
  for (std::size_t i = 0; i < cases; ++i) {
    auto r = check_case(random_case(seed, i), i, episodes, seed, threads);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

inline bool all_within(const std::vector<CheckRow>& rows, double limit = kZLimit) {
  return std::all_of(rows.begin(), rows.end(), [&](const CheckRow& r) { return std::abs(r.z_score) <= limit; });
}

}  // namespace platform_egt::oracle

#endif  // PLATFORM_EGT_ORACLE_HPP
