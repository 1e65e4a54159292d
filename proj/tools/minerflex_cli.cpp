#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11/CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "minerflex/minerflex.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace minerflex;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kNumerical = 3 };

// Thrown for missing or conflicting options discovered after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string num(double v) { return std::isfinite(v) ? format_number(v) : ""; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
  return line + "\n";
}

// Options shared by every command, plus the bookkeeping for the manifest.
struct Run {
  std::string command;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::string config;
  std::map<std::string, std::string> inputs;  // role -> path
  std::vector<std::string> outputs;
  std::vector<std::string> argv;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::string started_at = utc_now();

  void prepare() {
    fs::create_directories(out_dir);
    for (const auto& entry : fs::directory_iterator(out_dir)) {
      if (entry.path().filename() == "manifest.json") fs::remove(entry.path());
    }
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + (fs::path(out_dir) / name).string());
    out << content;
    if (!out) throw InvalidInput("failed writing " + name);
    outputs.push_back(name);
  }

  void manifest(const std::string& status, const std::string& error = {}) const {
    json m;
    m["command"] = command;
    m["arguments"] = argv;
    m["version"] = MINERFLEX_VERSION;
    m["seed"] = seed;
    m["config_file"] = config.empty() ? json(nullptr) : json(config);
    json in = json::object();
    for (const auto& [role, path] : inputs) {
      in[role] = {{"path", path}, {"sha256", fs::is_regular_file(path) ? json(sha256_file(path)) : json(nullptr)}};
    }
    m["inputs"] = in;
    json outs = json::object();
    for (const auto& name : outputs) outs[name] = sha256_file(fs::path(out_dir) / name);
    m["outputs"] = outs;
    m["status"] = status;
    if (!error.empty()) m["error"] = error;
    m["started_at"] = started_at;
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    out << m.dump(2) << "\n";
  }

  // Error path: a manifest that cannot be written must not mask the error.
  void failure_manifest(const std::string& error) const noexcept {
    try {
      manifest("failed", error);
    } catch (...) {
      std::cerr << "warning: could not write manifest.json\n";
    }
  }
};

std::string config_dir() {
  const char* env = std::getenv("MINERFLEX_CONFIG_DIR");
  return env ? env : "";
}

// Falls back to <MINERFLEX_CONFIG_DIR>/<file> when the option was not set.
std::string resolve(const std::string& value, const char* file) {
  if (!value.empty()) return value;
  const std::string dir = config_dir();
  if (!dir.empty() && fs::exists(fs::path(dir) / file)) return (fs::path(dir) / file).string();
  return {};
}

std::string require(const std::string& value, const char* file, const char* flag) {
  std::string p = resolve(value, file);
  if (p.empty()) throw UsageError(std::string(flag) + " is required (or set MINERFLEX_CONFIG_DIR)");
  return p;
}

// Fills options not given on the command line from a JSON object whose keys
// are long option names. Relative paths resolve against the file's folder.
void apply_config(CLI::App* app, const std::string& path, const std::vector<std::string>& path_keys) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
  if (!j.is_object()) throw InvalidInput(path + ": expected a JSON object");
  const fs::path base = fs::path(path).parent_path();
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = nullptr;
    try {
      opt = app->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw InvalidInput(path + ": unknown option '" + key + "' for " + app->get_name());
    }
    if (opt->count() > 0) continue;
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
      const bool is_path = std::find(path_keys.begin(), path_keys.end(), key) != path_keys.end();
      if (is_path && fs::path(text).is_relative()) text = (base / text).string();
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "true" : "false";
    } else if (value.is_number()) {
      text = value.dump();
    } else {
      throw InvalidInput(path + ": option '" + key + "' must be a string, number or boolean");
    }
    opt->clear();
    opt->add_result(text);
    opt->run_callback();
  }
}

// --- trace input ----------------------------------------------------------------

struct TraceInput {
  std::string market;
  std::string as;
  std::string synth;
  std::size_t hours = 0;
};

struct LoadedTraces {
  TraceSet set;
  std::vector<Direction> directions;
  std::vector<std::string> notes;
};

std::vector<Direction> directions_for(const std::vector<std::string>& ids, const std::string& programs_path,
                                      const std::vector<Direction>& fallback, std::vector<std::string>& notes) {
  if (!programs_path.empty()) {
    const ProgramSet ps = load_program_set(programs_path);
    std::vector<Direction> out;
    for (const auto& id : ids) {
      auto it = std::find_if(ps.programs.begin(), ps.programs.end(), [&](const ProgramSpec& p) { return p.id == id; });
      if (it == ps.programs.end()) throw InvalidInput("trace program '" + id + "' is not in " + programs_path);
      out.push_back(it->direction);
    }
    return out;
  }
  if (!fallback.empty()) return fallback;
  notes.push_back("no program config given; every program treated as reg-up direction");
  return std::vector<Direction>(ids.size(), Direction::up);
}

LoadedTraces load_input(const TraceInput& in, Run& run, const std::string& programs_path) {
  LoadedTraces out;
  std::vector<Direction> fallback;
  if (!in.synth.empty()) {
    if (!in.market.empty()) throw UsageError("--synth and --market are mutually exclusive");
    SynthesisSpec spec = load_synthesis_spec(in.synth);
    if (in.hours > 0) spec.hours = in.hours;
    out.set = synthesize_traces(spec, run.seed);
    fallback = synthesis_directions(spec);
    run.inputs["synth"] = in.synth;
  } else {
    if (in.market.empty()) throw UsageError("traces required: give --market [--as] or --synth");
    out.set = load_traces(in.market, in.as);
    run.inputs["market"] = in.market;
    if (!in.as.empty()) run.inputs["as"] = in.as;
  }
  if (out.set.records.empty()) throw InvalidInput("traces contain no records");
  if (out.set.program_ids.empty()) throw InvalidInput("traces contain no ancillary-service programs");
  if (!programs_path.empty()) run.inputs["programs"] = programs_path;
  out.directions = directions_for(out.set.program_ids, programs_path, fallback, out.notes);
  out.notes.insert(out.notes.end(), out.set.warnings.begin(), out.set.warnings.end());
  return out;
}

void add_trace_options(CLI::App* sub, TraceInput& in) {
  sub->add_option("--market", in.market, "Market CSV (timestamp,rt_price,coin_price)");
  sub->add_option("--as", in.as, "Ancillary-service CSV (timestamp,program_id,price,epsilon)");
  sub->add_option("--synth", in.synth, "Synthesis spec JSON; generates traces in memory from --seed");
  sub->add_option("--hours", in.hours, "Override the synthesis length in hours")->default_val(0);
}

std::vector<std::string> profile_header(const std::string& first, const std::vector<std::string>& ids) {
  std::vector<std::string> h{first};
  for (const auto& id : ids) h.push_back(csv_field("c_" + id));
  return h;
}

FleetSpec static_fleet(const FleetConfig& fc, bool clamp) {
  if (!fc.coin_price || !fc.electricity_price) {
    throw InvalidInput("fleet config needs coin_price and electricity_price when no traces are given");
  }
  return make_fleet(fc.machines, *fc.coin_price, *fc.electricity_price, clamp);
}

std::vector<std::string> ids_of(const ProgramSet& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps.programs) out.push_back(p.id);
  return out;
}

json profile_json(const std::vector<std::string>& ids, const Profile& c) {
  json j = json::object();
  for (std::size_t i = 0; i < ids.size(); ++i) j[ids[i]] = c[i];
  return j;
}

// --- commands -------------------------------------------------------------------

struct OfflineOpts {
  std::string fleet, programs;
  TraceInput traces;
  std::size_t iterations = 1000, batch = 10, mc_samples = 10000;
  bool clamp = false, trajectory = false;
};

json solve_offline(const OfflineOpts& o, Run& run) {
  const std::string fleet_path = require(o.fleet, "fleet.json", "--fleet");
  run.inputs["fleet"] = fleet_path;
  const FleetConfig fc = load_fleet_config(fleet_path);
  SgdConfig cfg;
  cfg.iterations = o.iterations;
  cfg.batch = o.batch;
  json summary{{"iterations", o.iterations}, {"batch", o.batch}, {"seed", run.seed}};

  const bool from_traces = !o.traces.market.empty() || !o.traces.synth.empty();
  if (!from_traces) {
    const std::string prog_path = require(o.programs, "programs.json", "--programs");
    run.inputs["programs"] = prog_path;
    const ProgramSet ps = load_program_set(prog_path);
    const FleetSpec fleet = static_fleet(fc, o.clamp);
    const ProgramSampler sampler(ps);
    const auto prices = ps.prices();
    cfg.seed = run.seed;
    cfg.record_trajectory = o.trajectory;
    const SgdResult res = solve(fleet, prices, sampler, cfg);
    const auto samples = draw_samples(sampler, prices.size(), o.mc_samples, derive_seed(run.seed, 0xe7a1));
    const MonteCarloEstimate est = mc_expected_cost(fleet, prices, res.profile, samples);
    const auto ids = ids_of(ps);
    auto header = profile_header("hour", ids);
    header.insert(header.end(), {"expected_cost", "expected_cost_se", "bound"});
    std::string csv = join(header);
    std::vector<std::string> row{"all"};
    for (double v : res.profile.c) row.push_back(num(v));
    row.insert(row.end(), {num(est.mean), num(est.std_error), num(res.bound)});
    csv += join(row);
    run.write("profile.csv", csv);
    if (o.trajectory) {
      std::string t = join(profile_header("iteration", ids));
      for (std::size_t j = 0; j < res.trajectory.size(); ++j) {
        std::vector<std::string> r{std::to_string(j + 1)};
        for (double v : res.trajectory[j].c) r.push_back(num(v));
        t += join(r);
      }
      run.write("trajectory.csv", t);
    }
    summary["mode"] = "model";
    summary["profile"] = profile_json(ids, res.profile);
    summary["expected_cost"] = est.mean;
    summary["expected_cost_se"] = est.std_error;
    summary["expected_profit"] = -est.mean;
    summary["bound"] = res.bound;
    summary["capacity_mw"] = fleet.total_capacity_mw();
    summary["mc_samples"] = o.mc_samples;
    return summary;
  }

  const LoadedTraces lt = load_input(o.traces, run, resolve(o.programs, "programs.json"));
  const auto slots = to_slots(lt.set.records, fc.machines, lt.directions, o.clamp);
  auto header = profile_header("hour", lt.set.program_ids);
  header.insert(header.end(), {"slots", "expected_cost", "bound"});
  std::string csv = join(header);
  double total_cost = 0.0;
  json hours = json::array();
  for (int h = 0; h < 24; ++h) {
    std::vector<SlotInstance> hs;
    for (const auto& s : slots) {
      if (s.hour == h) hs.push_back(s);
    }
    if (hs.empty()) continue;
    SgdConfig hc = cfg;
    hc.seed = derive_seed(run.seed, static_cast<std::uint64_t>(h));
    const SgdResult res = solve_empirical(hs, hc);
    double cost = 0.0;
    for (const auto& s : hs) cost += slot_cost(s, res.profile);
    total_cost += cost;
    cost /= static_cast<double>(hs.size());
    std::vector<std::string> row{std::to_string(h)};
    for (double v : res.profile.c) row.push_back(num(v));
    row.insert(row.end(), {std::to_string(hs.size()), num(cost), num(res.bound)});
    csv += join(row);
    hours.push_back(h);
  }
  run.write("profile.csv", csv);
  summary["mode"] = "traces";
  summary["records"] = lt.set.records.size();
  summary["hours_solved"] = hours;
  summary["mean_cost_per_slot"] = total_cost / static_cast<double>(slots.size());
  summary["mean_profit_per_slot"] = -total_cost / static_cast<double>(slots.size());
  summary["notes"] = lt.notes;
  return summary;
}

struct RegOpts {
  std::string fleet, programs;
  std::optional<double> theta;
  std::size_t surface = 0;
  bool clamp = false;
};

json solve_reg(const RegOpts& o, Run& run) {
  const std::string fleet_path = require(o.fleet, "fleet.json", "--fleet");
  const std::string prog_path = require(o.programs, "programs.json", "--programs");
  run.inputs["fleet"] = fleet_path;
  run.inputs["programs"] = prog_path;
  const FleetConfig fc = load_fleet_config(fleet_path);
  const ProgramSet ps = load_program_set(prog_path);
  if (!ps.regulation) throw InvalidInput(prog_path + ": no regulation pairing configured");
  const auto& pair = *ps.regulation;
  RegInstance inst;
  inst.fleet = static_fleet(fc, o.clamp);
  inst.p_up = ps.programs[pair.up].price;
  inst.p_dn = ps.programs[pair.down].price;
  inst.model = {o.theta.value_or(pair.theta), std::get<TruncatedExponential>(ps.programs[pair.up].model),
                std::get<TruncatedExponential>(ps.programs[pair.down].model)};
  const Profile c = solve_reg_profile(inst);
  const RegCost cost = expected_reg_cost_detail(reg_params(inst), c[0], c[1]);
  const std::string up_id = ps.programs[pair.up].id;
  const std::string dn_id = ps.programs[pair.down].id;
  std::string csv = join({csv_field("c_" + up_id), csv_field("c_" + dn_id), "expected_cost", "down_case", "up_case"});
  csv += join({num(c[0]), num(c[1]), num(cost.expected), std::to_string(cost.down_case), std::to_string(cost.up_case)});
  run.write("profile.csv", csv);
  if (o.surface > 0) {
    if (o.surface < 2) throw InvalidInput("--surface needs at least 2 points per axis");
    const double cap = inst.fleet.total_capacity_mw();
    const double h = cap / static_cast<double>(o.surface - 1);
    std::string s = join({"c_up", "c_dn", "expected_cost", "down_case", "up_case"});
    const RegParams q = reg_params(inst);
    for (std::size_t i = 0; i < o.surface; ++i) {
      for (std::size_t j = 0; i + j < o.surface; ++j) {
        const double cu = h * static_cast<double>(i);
        const double cd = std::min(cap - cu, h * static_cast<double>(j));
        const RegCost rc = expected_reg_cost_detail(q, cu, cd);
        s += join({num(cu), num(cd), num(rc.expected), std::to_string(rc.down_case), std::to_string(rc.up_case)});
      }
    }
    run.write("surface.csv", s);
  }
  return {{"theta", inst.model.theta},
          {"lambda_up", inst.model.up.lambda},
          {"lambda_down", inst.model.down.lambda},
          {"profile", {{up_id, c[0]}, {dn_id, c[1]}}},
          {"expected_cost", cost.expected},
          {"expected_profit", -cost.expected},
          {"capacity_mw", inst.fleet.total_capacity_mw()}};
}

struct RiskOpts {
  std::string fleet, programs, machine, lambda_grid;
  double lambda = 0.0;
  bool clamp = false;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InvalidInput("cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw InvalidInput("empty number list");
  return out;
}

json solve_risk(const RiskOpts& o, Run& run) {
  const std::string fleet_path = require(o.fleet, "fleet.json", "--fleet");
  const std::string prog_path = require(o.programs, "programs.json", "--programs");
  run.inputs["fleet"] = fleet_path;
  run.inputs["programs"] = prog_path;
  const FleetConfig fc = load_fleet_config(fleet_path);
  const ProgramSet ps = load_program_set(prog_path);
  if (!fc.coin_price || !fc.electricity_price) {
    throw InvalidInput("fleet config needs coin_price and electricity_price");
  }
  const MachineConfig* m = nullptr;
  if (o.machine.empty()) {
    if (fc.machines.size() != 1) throw UsageError("fleet has several machine types; choose one with --machine");
    m = &fc.machines.front();
  } else {
    for (const auto& mc : fc.machines) {
      if (mc.id == o.machine) m = &mc;
    }
    if (!m) throw InvalidInput("machine '" + o.machine + "' is not in " + fleet_path);
  }
  double r = net_reward(mining_revenue_rate(*fc.coin_price, m->energy_intensity), *fc.electricity_price);
  if (r < 0.0) {
    if (!o.clamp) throw ModelViolation("machine '" + m->id + "' has negative net reward " + num(r));
    r = 0.0;
  }
  const auto stats = ps.effective_stats();
  const std::vector<double> lambdas = o.lambda_grid.empty() ? std::vector<double>{o.lambda} : parse_list(o.lambda_grid);
  const auto ids = ids_of(ps);
  auto header = profile_header("lambda", ids);
  header.insert(header.end(), {"expected_cost", "variance", "expected_profit"});
  std::string csv = join(header);
  json rows = json::array();
  for (double l : lambdas) {
    const Profile c = risk_aware_solve(stats, r, m->capacity_mw, {l});
    const ProfileRisk pr = profile_risk(stats, r, c);
    std::vector<std::string> row{num(l)};
    for (double v : c.c) row.push_back(num(v));
    row.insert(row.end(), {num(pr.expected_cost), num(pr.variance), num(-pr.expected_cost)});
    csv += join(row);
    rows.push_back({{"lambda", l}, {"profile", profile_json(ids, c)}, {"expected_cost", pr.expected_cost},
                    {"variance", pr.variance}});
  }
  run.write("profile.csv", csv);
  return {{"machine", m->id}, {"reward", r}, {"capacity_mw", m->capacity_mw}, {"solutions", rows}};
}

struct OnlineOpts {
  std::string fleet, programs;
  TraceInput traces;
  std::size_t learners = 24, horizon = 0, stride = 1;
  std::optional<double> r_max, p_max;
  bool clamp = false;
};

json simulate_online(const OnlineOpts& o, Run& run) {
  const std::string fleet_path = require(o.fleet, "fleet.json", "--fleet");
  run.inputs["fleet"] = fleet_path;
  const FleetConfig fc = load_fleet_config(fleet_path);
  const LoadedTraces lt = load_input(o.traces, run, resolve(o.programs, "programs.json"));
  const auto slots = to_slots(lt.set.records, fc.machines, lt.directions, o.clamp);
  OgdConfig cfg;
  cfg.learners = o.learners;
  cfg.horizon = o.horizon;
  cfg.r_max = o.r_max;
  cfg.p_max = o.p_max;
  const OnlineRun res = run_online(slots, cfg);
  const auto curve = regret_curve(slots, res, o.stride);
  auto header = profile_header("round", lt.set.program_ids);
  header.insert(header.begin() + 1, "hour");
  header.insert(header.end(), {"cost", "cumulative_regret", "average_regret", "bound"});
  std::string csv = join(header);
  for (std::size_t t = 0; t < res.rounds.size(); ++t) {
    const auto& rd = res.rounds[t];
    std::vector<std::string> row{std::to_string(t + 1), std::to_string(slots[t].hour)};
    for (double v : rd.profile_played.c) row.push_back(num(v));
    row.insert(row.end(), {num(rd.cost_incurred), num(curve[t]), num(curve[t] / static_cast<double>(t + 1)),
                           num(res.report.bound)});
    csv += join(row);
  }
  run.write("rounds.csv", csv);
  const auto& rep = res.report;
  return {{"rounds", res.rounds.size()},
          {"learners", o.learners},
          {"static_regret", rep.static_regret},
          {"average_regret", rep.average_regret},
          {"bound", rep.bound},
          {"played_cost", rep.played_cost},
          {"hindsight_cost", rep.hindsight_cost},
          {"hindsight_profile", profile_json(lt.set.program_ids, rep.hindsight_profile)},
          {"r_max", rep.r_max},
          {"p_max", rep.p_max},
          {"notes", lt.notes}};
}

struct CompareOpts {
  std::string fleet, programs;
  TraceInput traces;
  std::size_t iterations = 1000, batch = 10;
  std::size_t train_begin = 0, train_end = 0, eval_begin = 0, eval_end = 0;
  bool clamp = false;
};

json compare(const CompareOpts& o, Run& run) {
  const std::string fleet_path = require(o.fleet, "fleet.json", "--fleet");
  run.inputs["fleet"] = fleet_path;
  const FleetConfig fc = load_fleet_config(fleet_path);
  const LoadedTraces lt = load_input(o.traces, run, resolve(o.programs, "programs.json"));
  const auto slots = to_slots(lt.set.records, fc.machines, lt.directions, o.clamp);
  StrategyWindow w{o.train_begin, o.train_end, o.eval_begin, o.eval_end == 0 ? slots.size() : o.eval_end};
  SgdConfig cfg;
  cfg.iterations = o.iterations;
  cfg.batch = o.batch;
  cfg.seed = run.seed;
  const StrategyReport rep = compare_strategies(slots, w, cfg);
  std::string csv = join({"hour", "slots", "optimized", "fixed_profile", "even_split", "none"});
  for (int h = 0; h < 24; ++h) {
    csv += join({std::to_string(h), std::to_string(rep.slots[h]), num(rep.optimized[h]), num(rep.fixed_profile[h]),
                 num(rep.even_split[h]), num(rep.none[h])});
  }
  run.write("strategies.csv", csv);
  std::string prof = join(profile_header("profile", lt.set.program_ids));
  for (int h = 0; h < 24; ++h) {
    std::vector<std::string> row{"hour_" + std::string(h < 10 ? "0" : "") + std::to_string(h)};
    for (double v : rep.hourly_profiles[h].c) row.push_back(num(v));
    prof += join(row);
  }
  std::vector<std::string> fixed{"fixed"};
  for (double v : rep.fixed.c) fixed.push_back(num(v));
  prof += join(fixed);
  run.write("profiles.csv", prof);
  const double margin =
      rep.mean_even != 0.0 ? 100.0 * (rep.mean_optimized - rep.mean_even) / std::abs(rep.mean_even) : 0.0;
  return {{"mean_profit",
           {{"optimized", rep.mean_optimized},
            {"fixed_profile", rep.mean_fixed},
            {"even_split", rep.mean_even},
            {"none", rep.mean_none}}},
          {"margin_over_even_split_pct", margin},
          {"train", {w.train_begin, w.train_end}},
          {"eval", {w.eval_begin, w.eval_end}},
          {"iterations", o.iterations},
          {"batch", o.batch},
          {"notes", lt.notes}};
}

struct VerifyOpts {
  bool quick = false;
  std::string fleet, synth;
};

json verify(const VerifyOpts& o, Run& run, bool& all_passed) {
  const double f = o.quick ? 0.1 : 1.0;
  auto n = [&](std::size_t full) { return std::max<std::size_t>(2, static_cast<std::size_t>(full * f)); };
  const std::uint64_t s = run.seed;
  std::vector<SuiteResult> results;
  results.push_back(verify_greedy_deployment(n(1000), derive_seed(s, 1)));
  results.push_back(verify_cost_structure(n(10000), n(10000), derive_seed(s, 2)));
  results.push_back(verify_sgd_convergence(
      {n(10000), 10, o.quick ? std::size_t{50} : 200, o.quick ? std::size_t{20000} : 100000, derive_seed(s, 3)}));
  RegulationOptions reg;
  reg.samples = o.quick ? 100000 : 1000000;
  reg.seed = derive_seed(s, 4);
  results.push_back(verify_regulation(reg));
  results.push_back(verify_best_program(n(500), o.quick ? 200 : 1000, derive_seed(s, 5)));
  results.push_back(verify_risk_qp(n(500), derive_seed(s, 6)));
  OnlineOptions online;
  online.adversarial_runs = n(200);
  online.stationary_runs = n(20);
  online.seed = derive_seed(s, 7);
  results.push_back(verify_online(online));
  const std::string fleet = resolve(o.fleet, "fleet.json");
  const std::string synth = resolve(o.synth, "week.json");
  if (!fleet.empty() && !synth.empty()) {
    run.inputs["fleet"] = fleet;
    run.inputs["synth"] = synth;
    SgdConfig cfg;
    cfg.iterations = o.quick ? 1000 : 5000;
    cfg.seed = derive_seed(s, 8);
    results.push_back(verify_strategies(load_synthesis_spec(synth), load_fleet_config(fleet).machines, 0, cfg,
                                        derive_seed(s, 8)));
  }
  DistributionOptions dist;
  dist.samples = o.quick ? 100000 : 1000000;
  dist.seed = derive_seed(s, 9);
  results.push_back(verify_distributions(dist));

  std::string csv = join({"suite", "cases", "max_error", "tolerance", "status", "detail"});
  json table = json::array();
  all_passed = true;
  std::printf("%-24s %8s %14s %12s %8s %9s\n", "suite", "cases", "max_error", "tolerance", "status", "seconds");
  for (const auto& r : results) {
    all_passed = all_passed && r.passed;
    const char* status = r.passed ? "pass" : "fail";
    csv += join({r.name, std::to_string(r.cases), num(r.max_error), num(r.tolerance), status, csv_field(r.detail)});
    table.push_back({{"suite", r.name}, {"cases", r.cases}, {"max_error", r.max_error}, {"tolerance", r.tolerance},
                     {"passed", r.passed}, {"detail", r.detail}});
    std::printf("%-24s %8zu %14.6g %12.6g %8s %9.2f\n", r.name.c_str(), r.cases, r.max_error, r.tolerance, status,
                r.seconds);
  }
  run.write("verify.csv", csv);
  return {{"quick", o.quick}, {"all_passed", all_passed}, {"suites", table}};
}

struct SynthOpts {
  TraceInput traces;
};

json synthesize(const SynthOpts& o, Run& run) {
  if (o.traces.synth.empty()) {
    const std::string p = resolve("", "week.json");
    if (p.empty()) throw UsageError("--synth is required (or set MINERFLEX_CONFIG_DIR)");
  }
  TraceInput in = o.traces;
  if (in.synth.empty()) in.synth = resolve("", "week.json");
  SynthesisSpec spec = load_synthesis_spec(in.synth);
  if (in.hours > 0) spec.hours = in.hours;
  run.inputs["synth"] = in.synth;
  const TraceSet set = synthesize_traces(spec, run.seed);
  std::ostringstream market, as;
  write_traces(set, market, as);
  run.write("market.csv", market.str());
  run.write("as.csv", as.str());
  return {{"records", set.records.size()},
          {"programs", set.program_ids},
          {"start", set.records.empty() ? "" : set.records.front().timestamp},
          {"end", set.records.empty() ? "" : set.records.back().timestamp}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ancillary-service capacity profiles for heterogeneous mining fleets"};
  app.set_version_flag("--version", std::string(MINERFLEX_VERSION));
  app.require_subcommand(1);
  app.footer(
      "Config precedence: flags > --config JSON (keys are long option names) > defaults.\n"
      "MINERFLEX_CONFIG_DIR supplies fleet.json, programs.json and week.json when the\n"
      "corresponding flag is absent.\n"
      "Exit codes: 0 success, 1 usage, 2 validation, 3 numerical failure.");

  Run run;
  run.argv.assign(argv, argv + argc);
  const std::vector<std::string> path_keys{"fleet", "programs", "market", "as", "synth", "out"};
  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", run.out_dir, "Output directory")->default_val("out");
    sub->add_option("--seed", run.seed, "Master seed")->default_val(0);
    sub->add_option("--config", run.config, "JSON file of option defaults");
  };

  OfflineOpts off;
  auto* s_off = app.add_subcommand("solve-offline", "Projected stochastic subgradient profile per hour");
  s_off->add_option("--fleet", off.fleet, "Fleet config JSON");
  s_off->add_option("--programs", off.programs, "Program config JSON (model mode; directions in trace mode)");
  add_trace_options(s_off, off.traces);
  s_off->add_option("--iterations", off.iterations, "Iterations J")->default_val(1000);
  s_off->add_option("--batch", off.batch, "Samples per iteration M")->default_val(10);
  s_off->add_option("--mc-samples", off.mc_samples, "Monte Carlo samples for the expected cost")->default_val(10000);
  s_off->add_flag("--clamp-negative", off.clamp, "Clamp negative mining rewards to zero");
  s_off->add_flag("--trajectory", off.trajectory, "Also write trajectory.csv (model mode)");
  common(s_off);

  RegOpts reg;
  auto* s_reg = app.add_subcommand("solve-reg", "Closed-form reg-up/reg-down co-optimization (two machine types)");
  s_reg->add_option("--fleet", reg.fleet, "Fleet config JSON");
  s_reg->add_option("--programs", reg.programs, "Program config JSON with a regulation pairing");
  s_reg->add_option("--theta", reg.theta, "Override the reg-down probability");
  s_reg->add_option("--surface", reg.surface, "Also write surface.csv on an N-point-per-axis grid")->default_val(0);
  s_reg->add_flag("--clamp-negative", reg.clamp, "Clamp negative mining rewards to zero");
  common(s_reg);

  RiskOpts risk;
  auto* s_risk = app.add_subcommand("solve-risk", "Mean-variance profile for one machine type");
  s_risk->add_option("--fleet", risk.fleet, "Fleet config JSON");
  s_risk->add_option("--programs", risk.programs, "Program config JSON");
  s_risk->add_option("--machine", risk.machine, "Machine type id (required when the fleet has several)");
  s_risk->add_option("--lambda", risk.lambda, "Risk weight")->default_val(0.0);
  s_risk->add_option("--lambda-grid", risk.lambda_grid, "Comma-separated risk weights; overrides --lambda");
  s_risk->add_flag("--clamp-negative", risk.clamp, "Clamp a negative mining reward to zero");
  common(s_risk);

  OnlineOpts onl;
  auto* s_onl = app.add_subcommand("simulate-online", "Online gradient descent over traces with regret tracking");
  s_onl->add_option("--fleet", onl.fleet, "Fleet config JSON");
  s_onl->add_option("--programs", onl.programs, "Program config JSON (directions)");
  add_trace_options(s_onl, onl.traces);
  s_onl->add_option("--learners", onl.learners, "Independent learners keyed by hour of day")->default_val(24);
  s_onl->add_option("--horizon", onl.horizon, "Rounds to play; 0 plays every record")->default_val(0);
  s_onl->add_option("--regret-stride", onl.stride, "Recompute prefix regret every N rounds")->default_val(1);
  s_onl->add_option("--r-max", onl.r_max, "Reward bound for the step size (default: observed)");
  s_onl->add_option("--p-max", onl.p_max, "Price bound for the step size (default: observed)");
  s_onl->add_flag("--clamp-negative", onl.clamp, "Clamp negative mining rewards to zero");
  common(s_onl);

  CompareOpts cmp;
  auto* s_cmp = app.add_subcommand("compare-strategies", "Per-hour, fixed, even-split and no participation");
  s_cmp->add_option("--fleet", cmp.fleet, "Fleet config JSON");
  s_cmp->add_option("--programs", cmp.programs, "Program config JSON (directions)");
  add_trace_options(s_cmp, cmp.traces);
  s_cmp->add_option("--iterations", cmp.iterations, "SGD iterations per profile")->default_val(1000);
  s_cmp->add_option("--batch", cmp.batch, "SGD batch size")->default_val(10);
  s_cmp->add_option("--train-begin", cmp.train_begin, "First training record")->default_val(0);
  s_cmp->add_option("--train-end", cmp.train_end, "One past the last training record; 0 trains on the evaluation window")
      ->default_val(0);
  s_cmp->add_option("--eval-begin", cmp.eval_begin, "First evaluation record")->default_val(0);
  s_cmp->add_option("--eval-end", cmp.eval_end, "One past the last evaluation record; 0 means all")->default_val(0);
  s_cmp->add_flag("--clamp-negative", cmp.clamp, "Clamp negative mining rewards to zero");
  common(s_cmp);

  VerifyOpts ver;
  auto* s_ver = app.add_subcommand("verify", "Run the oracle agreement suites");
  s_ver->add_flag("--quick", ver.quick, "Reduced instance counts");
  s_ver->add_option("--fleet", ver.fleet, "Fleet config for the strategy suite");
  s_ver->add_option("--synth", ver.synth, "Synthesis spec for the strategy suite");
  common(s_ver);

  SynthOpts syn;
  auto* s_syn = app.add_subcommand("synthesize", "Write synthetic market and ancillary-service traces");
  s_syn->add_option("--synth", syn.traces.synth, "Synthesis spec JSON");
  s_syn->add_option("--hours", syn.traces.hours, "Override the number of hours")->default_val(0);
  common(s_syn);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  run.command = sub->get_name();
  bool prepared = false;
  try {
    if (!run.config.empty()) apply_config(sub, run.config, path_keys);
    run.prepare();
    prepared = true;
    json summary;
    int code = kOk;
    if (sub == s_off) {
      summary = solve_offline(off, run);
    } else if (sub == s_reg) {
      summary = solve_reg(reg, run);
    } else if (sub == s_risk) {
      summary = solve_risk(risk, run);
    } else if (sub == s_onl) {
      summary = simulate_online(onl, run);
    } else if (sub == s_cmp) {
      summary = compare(cmp, run);
    } else if (sub == s_ver) {
      bool ok = false;
      summary = verify(ver, run, ok);
      if (!ok) code = kNumerical;
    } else {
      summary = synthesize(syn, run);
    }
    summary["command"] = run.command;
    run.write("summary.json", summary.dump(2) + "\n");
    run.manifest(code == kOk ? "ok" : "failed");
    if (code != kOk) std::cerr << "error[numerical]: one or more verification suites failed\n";
    return code;
  } catch (const UsageError& e) {
    std::cerr << "error[usage]: " << e.what() << "\n" << sub->help();
    if (prepared) run.failure_manifest(e.what());
    return kUsage;
  } catch (const NumericalFailure& e) {
    std::cerr << "error[numerical]: " << e.what() << "\n";
    if (prepared) run.failure_manifest(e.what());
    return kNumerical;
  } catch (const minerflex::ParseError& e) {
    std::cerr << "error[validation]: " << e.what() << "\n";
    if (prepared) run.failure_manifest(e.what());
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error[validation]: " << e.what() << "\n";
    if (prepared) run.failure_manifest(e.what());
    return kValidation;
  }
}
