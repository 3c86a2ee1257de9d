#ifndef PLATFORM_EGT_CONFIG_IO_HPP
#define PLATFORM_EGT_CONFIG_IO_HPP

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "platform_egt/domain.hpp"

namespace platform_egt {

inline constexpr const char* kConfigKeys[] = {"z_d", "z_m", "epsilon", "gamma", "k",    "k_g",       "k_m",
                                              "b",   "c",   "beta",    "mu",    "fermi_sign", "focal_conditioning"};

inline std::string to_string(FermiSign s) { return s == FermiSign::Standard ? "standard" : "literal"; }
inline std::string to_string(FocalConditioning f) { return f == FocalConditioning::Exact ? "exact" : "naive"; }

namespace detail {

inline int json_int(const nlohmann::json& v, const std::string& key, std::vector<ConfigIssue>& issues) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 1e9) return static_cast<int>(d);
  }
  issues.push_back({key, "key '" + key + "' must be an integer"});
  return 0;
}

inline double json_real(const nlohmann::json& v, const std::string& key, std::vector<ConfigIssue>& issues) {
  if (v.is_number()) return v.get<double>();
  issues.push_back({key, "key '" + key + "' must be a number"});
  return 0.0;
}

}  // namespace detail

// Missing keys keep their defaults. Unknown keys, wrong types and violated
// invariants are all reported together.
inline ModelConfig config_from_json(const nlohmann::json& doc) {
  std::vector<ConfigIssue> issues;
  ModelConfig cfg;
  if (!doc.is_object()) throw ConfigError("document", "configuration must be a JSON object");
  for (const auto& [key, v] : doc.items()) {
    if (key == "z_d") cfg.population.z_d = detail::json_int(v, key, issues);
    else if (key == "z_m") cfg.population.z_m = detail::json_int(v, key, issues);
    else if (key == "epsilon") cfg.users.epsilon = detail::json_real(v, key, issues);
    else if (key == "gamma") cfg.users.gamma = detail::json_real(v, key, issues);
    else if (key == "k") cfg.users.k = detail::json_int(v, key, issues);
    else if (key == "k_g") cfg.policy.k_g = detail::json_int(v, key, issues);
    else if (key == "k_m") cfg.policy.k_m = detail::json_int(v, key, issues);
    else if (key == "b") cfg.economics.b = detail::json_real(v, key, issues);
    else if (key == "c") cfg.economics.c = detail::json_real(v, key, issues);
    else if (key == "beta") cfg.evolution.beta = detail::json_real(v, key, issues);
    else if (key == "mu") cfg.evolution.mu = detail::json_real(v, key, issues);
    else if (key == "fermi_sign") {
      if (v == "standard") cfg.fermi_sign = FermiSign::Standard;
      else if (v == "literal") cfg.fermi_sign = FermiSign::Literal;
      else issues.push_back({key, "key 'fermi_sign' must be \"standard\" or \"literal\""});
    } else if (key == "focal_conditioning") {
      if (v == "exact") cfg.focal_conditioning = FocalConditioning::Exact;
      else if (v == "naive") cfg.focal_conditioning = FocalConditioning::Naive;
      else issues.push_back({key, "key 'focal_conditioning' must be \"exact\" or \"naive\""});
    } else {
      issues.push_back({key, "unknown key '" + key + "'"});
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  validate(cfg);
  return cfg;
}

inline ModelConfig parse_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("json", std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(doc);
}

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline nlohmann::ordered_json config_to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["z_d"] = cfg.population.z_d;
  j["z_m"] = cfg.population.z_m;
  j["epsilon"] = cfg.users.epsilon;
  j["gamma"] = cfg.users.gamma;
  j["k"] = cfg.users.k;
  j["k_g"] = cfg.policy.k_g;
  j["k_m"] = cfg.policy.k_m;
  j["b"] = cfg.economics.b;
  j["c"] = cfg.economics.c;
  j["beta"] = cfg.evolution.beta;
  j["mu"] = cfg.evolution.mu;
  j["fermi_sign"] = to_string(cfg.fermi_sign);
  j["focal_conditioning"] = to_string(cfg.focal_conditioning);
  return j;
}

}  // namespace platform_egt

#endif  // PLATFORM_EGT_CONFIG_IO_HPP
