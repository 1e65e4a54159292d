#pragma once

// JSON loaders for fleet, program and synthesis configs.

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minerflex/error.hpp"
#include "minerflex/fleet.hpp"
#include "minerflex/programs.hpp"
#include "minerflex/regulation.hpp"
#include "minerflex/traces.hpp"

namespace minerflex {

using json = nlohmann::json;

struct FleetConfig {
  std::vector<MachineConfig> machines;
  // Used when no traces are given; otherwise rewards follow each record.
  std::optional<double> coin_price;
  std::optional<double> electricity_price;

  double total_capacity_mw() const {
    double c = 0.0;
    for (const auto& m : machines) c += m.capacity_mw;
    return c;
  }
};

namespace detail {

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

inline double number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw InvalidInput(where + ": '" + key + "' must be a number");
  }
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) throw InvalidInput(where + ": '" + key + "' is not finite");
  return v;
}

inline std::optional<double> optional_number(const json& j, const char* key,
                                             const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return number(j, key, where);
}

inline std::string string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw InvalidInput(where + ": '" + key + "' must be a string");
  }
  return j[key].get<std::string>();
}

inline std::array<double, 24> hourly(const json& v, const std::string& where) {
  std::array<double, 24> out{};
  if (v.is_number()) {
    out.fill(v.get<double>());
  } else if (v.is_array() && v.size() == 24) {
    for (std::size_t h = 0; h < 24; ++h) {
      if (!v[h].is_number()) throw InvalidInput(where + ": hourly values must be numbers");
      out[h] = v[h].get<double>();
    }
  } else {
    throw InvalidInput(where + ": expected a number or an array of 24 numbers");
  }
  for (double x : out) {
    if (!std::isfinite(x)) throw InvalidInput(where + ": hourly value is not finite");
  }
  return out;
}

// {"mean": x | [24], "sd": x | [24]} or a bare number (sd 0).
inline HourlyDistribution hourly_distribution(const json& v, const std::string& where) {
  if (v.is_number()) return HourlyDistribution::constant(v.get<double>());
  if (!v.is_object() || !v.contains("mean")) {
    throw InvalidInput(where + ": expected a number or {mean, sd}");
  }
  HourlyDistribution h;
  h.mean = hourly(v["mean"], where + ".mean");
  h.sd = v.contains("sd") ? hourly(v["sd"], where + ".sd") : std::array<double, 24>{};
  for (double s : h.sd) {
    if (s < 0.0) throw InvalidInput(where + ": negative standard deviation");
  }
  return h;
}

inline Direction direction(const std::string& s, const std::string& where) {
  if (s == "up") return Direction::up;
  if (s == "down") return Direction::down;
  throw InvalidInput(where + ": direction must be 'up' or 'down'");
}

inline TruncatedExponential truncexp_from(const json& j, const std::string& where) {
  if (j.contains("lambda")) {
    TruncatedExponential t{number(j, "lambda", where)};
    detail::check_lambda(t.lambda);
    return t;
  }
  if (j.contains("mean")) return fit_lambda(number(j, "mean", where));
  throw InvalidInput(where + ": truncexp needs 'lambda' or 'mean'");
}

inline DeploymentModel deployment_model(const json& j, const std::string& where) {
  const std::string model = string(j, "model", where);
  auto unit = [&](const char* key) {
    const double v = number(j, key, where);
    if (v < 0.0 || v > 1.0) throw InvalidInput(where + ": '" + key + "' must lie in [0, 1]");
    return v;
  };
  if (model == "constant") return ConstantRate{unit("value")};
  if (model == "truncexp") return truncexp_from(j, where);
  if (model == "bernoulli") return BernoulliRate{unit("probability")};
  if (model == "uniform") {
    const UniformRate u{unit("lo"), unit("hi")};
    if (u.lo > u.hi) throw InvalidInput(where + ": uniform needs lo <= hi");
    return u;
  }
  throw InvalidInput(where + ": unknown deployment model '" + model + "'");
}

inline std::size_t program_index(const std::vector<ProgramSpec>& programs, const std::string& id,
                                  const std::string& where) {
  for (std::size_t i = 0; i < programs.size(); ++i) {
    if (programs[i].id == id) return i;
  }
  throw InvalidInput(where + ": unknown program '" + id + "'");
}

}  // namespace detail

inline FleetConfig parse_fleet_config(const json& j, const std::string& where = "fleet") {
  if (!j.is_object() || !j.contains("machines") || !j["machines"].is_array()) {
    throw InvalidInput(where + ": expected an object with a 'machines' array");
  }
  FleetConfig cfg;
  for (const auto& m : j["machines"]) {
    MachineConfig mc;
    mc.id = detail::string(m, "id", where);
    mc.capacity_mw = detail::number(m, "capacity_mw", where + "." + mc.id);
    mc.energy_intensity = detail::number(m, "energy_intensity_mwh_per_coin", where + "." + mc.id);
    if (!(mc.capacity_mw > 0.0)) throw InvalidInput(where + "." + mc.id + ": capacity must be positive");
    if (!(mc.energy_intensity > 0.0)) {
      throw InvalidInput(where + "." + mc.id + ": energy intensity must be positive");
    }
    cfg.machines.push_back(std::move(mc));
  }
  if (cfg.machines.empty()) throw InvalidInput(where + ": no machines");
  cfg.coin_price = detail::optional_number(j, "coin_price", where);
  cfg.electricity_price = detail::optional_number(j, "electricity_price", where);
  return cfg;
}

inline FleetConfig load_fleet_config(const std::string& path) {
  return parse_fleet_config(detail::read_json(path), path);
}

inline ProgramSet parse_program_set(const json& j, const std::string& where = "programs") {
  if (!j.is_object() || !j.contains("programs") || !j["programs"].is_array()) {
    throw InvalidInput(where + ": expected an object with a 'programs' array");
  }
  ProgramSet set;
  for (const auto& p : j["programs"]) {
    ProgramSpec spec;
    spec.id = detail::string(p, "id", where);
    const std::string at = where + "." + spec.id;
    spec.price = detail::number(p, "price", at);
    spec.direction = p.contains("direction") ? detail::direction(detail::string(p, "direction", at), at)
                                             : Direction::up;
    if (!p.contains("deployment") || !p["deployment"].is_object()) {
      throw InvalidInput(at + ": missing 'deployment' object");
    }
    spec.model = detail::deployment_model(p["deployment"], at + ".deployment");
    set.programs.push_back(std::move(spec));
  }
  if (j.contains("regulation") && !j["regulation"].is_null()) {
    const json& r = j["regulation"];
    const std::string at = where + ".regulation";
    RegulationPairing pair;
    pair.theta = detail::number(r, "theta", at);
    pair.up = detail::program_index(set.programs, detail::string(r, "up", at), at);
    pair.down = detail::program_index(set.programs, detail::string(r, "down", at), at);
    set.regulation = pair;
  }
  validate(set);
  return set;
}

inline ProgramSet load_program_set(const std::string& path) {
  return parse_program_set(detail::read_json(path), path);
}

inline SynthesisSpec parse_synthesis_spec(const json& j, const std::string& where = "synthesis") {
  if (!j.is_object()) throw InvalidInput(where + ": expected an object");
  SynthesisSpec spec;
  if (j.contains("start")) spec.start = detail::string(j, "start", where);
  if (j.contains("hours")) {
    if (!j["hours"].is_number_unsigned()) throw InvalidInput(where + ": 'hours' must be a positive integer");
    spec.hours = j["hours"].get<std::size_t>();
  }
  if (j.contains("coin_price")) spec.coin_price = detail::hourly_distribution(j["coin_price"], where + ".coin_price");
  if (j.contains("rt_price")) spec.rt_price = detail::hourly_distribution(j["rt_price"], where + ".rt_price");
  if (j.contains("regulation")) {
    const json& r = j["regulation"];
    const std::string at = where + ".regulation";
    spec.regulation.theta = detail::number(r, "theta", at);
    spec.regulation.up = r.contains("up") ? detail::truncexp_from(r["up"], at + ".up") : spec.regulation.up;
    spec.regulation.down =
        r.contains("down") ? detail::truncexp_from(r["down"], at + ".down") : spec.regulation.down;
  }
  if (!j.contains("programs") || !j["programs"].is_array()) {
    throw InvalidInput(where + ": expected a 'programs' array");
  }
  for (const auto& p : j["programs"]) {
    SynthProgram sp;
    sp.id = detail::string(p, "id", where);
    const std::string at = where + "." + sp.id;
    const std::string kind = detail::string(p, "kind", at);
    if (kind == "price_responsive") {
      sp.kind = SynthKind::price_responsive;
      if (p.contains("threshold")) sp.threshold = detail::number(p, "threshold", at);
    } else if (kind == "reg_up") {
      sp.kind = SynthKind::reg_up;
    } else if (kind == "reg_down") {
      sp.kind = SynthKind::reg_down;
    } else if (kind == "truncexp") {
      sp.kind = SynthKind::truncexp;
      sp.mean_eps = detail::number(p, "mean_eps", at);
    } else if (kind == "constant") {
      sp.kind = SynthKind::constant;
      sp.epsilon = detail::number(p, "epsilon", at);
      if (sp.epsilon < 0.0 || sp.epsilon > 1.0) throw InvalidInput(at + ": epsilon must lie in [0, 1]");
    } else {
      throw InvalidInput(at + ": unknown kind '" + kind + "'");
    }
    if (!p.contains("price")) throw InvalidInput(at + ": missing 'price'");
    sp.price = detail::hourly_distribution(p["price"], at + ".price");
    spec.programs.push_back(std::move(sp));
  }
  if (spec.programs.empty()) throw InvalidInput(where + ": no programs");
  return spec;
}

inline SynthesisSpec load_synthesis_spec(const std::string& path) {
  return parse_synthesis_spec(detail::read_json(path), path);
}

// Direction of each synthesized program as seen by the solvers.
inline std::vector<Direction> synthesis_directions(const SynthesisSpec& spec) {
  std::vector<Direction> out;
  for (const auto& p : spec.programs) {
    out.push_back(p.kind == SynthKind::reg_down ? Direction::down : Direction::up);
  }
  return out;
}

}  // namespace minerflex
