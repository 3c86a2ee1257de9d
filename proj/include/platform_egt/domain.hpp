#ifndef PLATFORM_EGT_DOMAIN_HPP
#define PLATFORM_EGT_DOMAIN_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace platform_egt {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class Group { Marginalised, Dominant };
enum class Strategy { Low, High };
enum class Rating { Bad, Good };

// Sign convention of the imitation rule. Standard: the better-paid strategy
// is imitated. Literal: the printed sign on u_L - u_H is applied as is.
enum class FermiSign { Standard, Literal };

// How Z_GM is mixed for a marginalised focal. Exact removes the focal from
// the binomial over the other H-players; Naive mixes Binomial(h_M, 1 - eps).
enum class FocalConditioning { Exact, Naive };

inline constexpr char group_code(Group g) { return g == Group::Marginalised ? 'M' : 'D'; }
inline constexpr char strategy_code(Strategy s) { return s == Strategy::High ? 'H' : 'L'; }
inline constexpr char rating_code(Rating r) { return r == Rating::Good ? 'G' : 'B'; }

struct ProviderPopulation {
  int z_d = 20;
  int z_m = 20;

  constexpr int total() const { return z_d + z_m; }
  constexpr int size(Group g) const { return g == Group::Marginalised ? z_m : z_d; }
  bool operator==(const ProviderPopulation&) const = default;
};

struct UserPopulation {
  double epsilon = 0.0;  // rating bias
  double gamma = 0.0;    // rating sensitivity
  int k = 10;            // consumer involvement
  bool operator==(const UserPopulation&) const = default;
};

struct PlatformPolicy {
  int k_g = 0;
  int k_m = 0;
  bool operator==(const PlatformPolicy&) const = default;
};

struct EconomicParams {
  double b = 1.2;
  double c = 1.0;

  // Per-interaction payoff of a chosen provider.
  constexpr double payoff(Strategy s) const { return s == Strategy::High ? b - c : b; }
  bool operator==(const EconomicParams&) const = default;
};

struct EvolutionParams {
  double beta = 20.0;
  double mu = 1.0 / 40.0;
  bool operator==(const EvolutionParams&) const = default;
};

struct State {
  int h_m = 0;
  int h_d = 0;

  constexpr int high(Group g) const { return g == Group::Marginalised ? h_m : h_d; }
  bool operator==(const State&) const = default;
};

struct ModelConfig {
  ProviderPopulation population;
  UserPopulation users;
  PlatformPolicy policy;
  EconomicParams economics;
  EvolutionParams evolution;
  FermiSign fermi_sign = FermiSign::Standard;
  FocalConditioning focal_conditioning = FocalConditioning::Exact;
  bool operator==(const ModelConfig&) const = default;
};

inline std::size_t lattice_size(const ProviderPopulation& pop) {
  return static_cast<std::size_t>(pop.z_m + 1) * static_cast<std::size_t>(pop.z_d + 1);
}

inline bool in_bounds(const State& s, const ProviderPopulation& pop) {
  return s.h_m >= 0 && s.h_m <= pop.z_m && s.h_d >= 0 && s.h_d <= pop.z_d;
}

// Lexicographic order over (h_M, h_D).
inline std::size_t state_index(const State& s, const ProviderPopulation& pop) {
  if (!in_bounds(s, pop)) {
    throw DomainError("state (" + std::to_string(s.h_m) + ", " + std::to_string(s.h_d) +
                      ") outside the lattice");
  }
  return static_cast<std::size_t>(s.h_m) * static_cast<std::size_t>(pop.z_d + 1) +
         static_cast<std::size_t>(s.h_d);
}

inline State state_at(std::size_t index, const ProviderPopulation& pop) {
  if (index >= lattice_size(pop)) {
    throw DomainError("lattice index " + std::to_string(index) + " out of range");
  }
  const auto stride = static_cast<std::size_t>(pop.z_d + 1);
  return State{static_cast<int>(index / stride), static_cast<int>(index % stride)};
}

struct ConfigIssue {
  std::string invariant;
  std::string message;
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : std::invalid_argument(summarize(issues)), issues_(std::move(issues)) {}
  ConfigError(std::string invariant, std::string message)
      : ConfigError(std::vector<ConfigIssue>{{std::move(invariant), std::move(message)}}) {}

  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static std::string summarize(const std::vector<ConfigIssue>& issues) {
    std::string out = "invalid configuration:";
    for (const auto& issue : issues) {
      out += "\n  [" + issue.invariant + "] " + issue.message;
    }
    return out;
  }
  std::vector<ConfigIssue> issues_;
};

// Every violated invariant, in a fixed order. Empty means valid.
inline std::vector<ConfigIssue> violations(const ModelConfig& cfg) {
  std::vector<ConfigIssue> out;
  auto fail = [&out](std::string_view name, std::string msg) {
    out.push_back(ConfigIssue{std::string(name), std::move(msg)});
  };
  const auto& pop = cfg.population;
  const auto& users = cfg.users;
  if (pop.z_d < 2) fail("z_d>=2", "dominant group needs at least 2 providers");
  if (pop.z_m < 2) fail("z_m>=2", "marginalised group needs at least 2 providers");
  if (!(users.epsilon >= 0.0 && users.epsilon <= 1.0)) fail("epsilon_range", "epsilon must lie in [0, 1]");
  if (!(users.gamma >= 0.0 && users.gamma <= 1.0)) fail("gamma_range", "gamma must lie in [0, 1]");
  if (users.k < 1) fail("k>=1", "k must be at least 1");
  if (users.k > pop.total()) fail("k<=z", "k exceeds the number of providers");
  if (cfg.policy.k_m < 0) fail("k_m>=0", "k_M must be nonnegative");
  if (cfg.policy.k_m > cfg.policy.k_g) fail("k_m<=k_g", "k_M exceeds k_G");
  if (cfg.policy.k_g > users.k) fail("k_g<=k", "k_G exceeds k");
  if (!(cfg.economics.c > 0.0)) fail("c>0", "c must be positive");
  if (!(cfg.economics.b > cfg.economics.c)) fail("b>c", "b must exceed c");
  if (!(cfg.evolution.beta >= 0.0) || !std::isfinite(cfg.evolution.beta)) {
    fail("beta>=0", "beta must be finite and nonnegative");
  }
  if (!(cfg.evolution.mu >= 0.0 && cfg.evolution.mu <= 1.0)) fail("mu_range", "mu must lie in [0, 1]");
  return out;
}

inline const ModelConfig& validate(const ModelConfig& cfg) {
  auto issues = violations(cfg);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

}  // namespace platform_egt

#endif  // PLATFORM_EGT_DOMAIN_HPP
