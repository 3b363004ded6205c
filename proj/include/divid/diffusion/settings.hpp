#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "divid/core/error.hpp"
#include "divid/core/hash.hpp"
#include "divid/diffusion/sampler.hpp"
#include "divid/diffusion/schedule.hpp"

namespace divid::diffusion {

// Serializable schedule + sampler settings. File format: one `key = value` per line, `#` starts a
// comment. Recognised keys: total_steps, beta_start, beta_end, ddim_steps, eta, seed, and the
// optional depth (top inversion timestep, 0 = total_steps). Unset betas select default_schedule.
struct DiffusionSettings {
  int total_steps = 1000;
  std::optional<double> beta_start;
  std::optional<double> beta_end;
  int ddim_steps = 20;
  double eta = 0.0;
  std::uint64_t seed = 0;
  int depth = 0;

  NoiseSchedule schedule() const {
    if (beta_start.has_value() != beta_end.has_value()) {
      throw UsageError("beta_start and beta_end must be given together");
    }
    if (beta_start) return build_schedule(total_steps, *beta_start, *beta_end);
    return default_schedule(total_steps);
  }

  SamplerConfig sampler() const {
    SamplerConfig c;
    c.ddim_steps = ddim_steps;
    c.eta = eta;
    c.seed = seed;
    c.depth = depth;
    return c;
  }

  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "total_steps = " << total_steps << '\n';
    if (beta_start) os << "beta_start = " << *beta_start << '\n';
    if (beta_end) os << "beta_end = " << *beta_end << '\n';
    os << "ddim_steps = " << ddim_steps << '\n';
    os << "eta = " << eta << '\n';
    os << "seed = " << seed << '\n';
    if (depth > 0) os << "depth = " << depth << '\n';
    return os.str();
  }

  std::string digest() const { return digest_of(canonical()); }
};

inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected `key = value`");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

// Applies recognised keys onto `settings`; unknown keys are left in the returned map.
inline std::map<std::string, std::string> apply_settings(std::map<std::string, std::string> kv,
                                                         DiffusionSettings& settings) {
  auto take = [&kv](const char* key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  try {
    if (auto v = take("total_steps")) settings.total_steps = std::stoi(*v);
    if (auto v = take("beta_start")) settings.beta_start = std::stod(*v);
    if (auto v = take("beta_end")) settings.beta_end = std::stod(*v);
    if (auto v = take("ddim_steps")) settings.ddim_steps = std::stoi(*v);
    if (auto v = take("eta")) settings.eta = std::stod(*v);
    if (auto v = take("seed")) settings.seed = std::stoull(*v);
    if (auto v = take("depth")) settings.depth = std::stoi(*v);
  } catch (const std::logic_error& e) {
    throw UsageError(std::string("malformed numeric value in config: ") + e.what());
  }
  return kv;
}

inline DiffusionSettings read_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  DiffusionSettings s;
  apply_settings(parse_key_values(in, path), s);
  return s;
}

inline void write_settings(const DiffusionSettings& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config file " + path);
  out << s.canonical();
}

}  // namespace divid::diffusion
