#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "minerflex/deployment.hpp"
#include "minerflex/error.hpp"
#include "minerflex/fleet.hpp"
#include "minerflex/random.hpp"
#include "minerflex/regulation.hpp"
#include "minerflex/single_machine.hpp"

namespace minerflex {

// One hourly market observation. deployment[i] is the raw rate reported for
// program i (not direction-transformed) or empty when the operator published
// none for that slot.
struct TraceRecord {
  std::string timestamp;  // canonical YYYY-MM-DDTHH:MM:SSZ
  std::int64_t epoch_seconds = 0;
  double rt_price = 0.0;
  double coin_price = 0.0;
  std::vector<double> as_prices;
  std::vector<std::optional<double>> deployment;

  int hour_of_day() const {
    const std::int64_t day = 86400;
    return static_cast<int>(((epoch_seconds % day) + day) % day / 3600);
  }
};

struct TraceSet {
  std::vector<std::string> program_ids;
  std::vector<TraceRecord> records;
  std::vector<std::string> warnings;
};

struct PriceResponsiveModel {
  double threshold = 60.0;
};

// Full deployment if and only if the real-time price exceeds the threshold.
inline double price_responsive_eps(const PriceResponsiveModel& model, double rt_price) {
  return rt_price > model.threshold ? 1.0 : 0.0;
}

// --- timestamps --------------------------------------------------------------

namespace detail {

inline bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace detail

// Accepts YYYY-MM-DDTHH:MM:SS with an optional trailing Z (UTC).
inline std::optional<std::int64_t> parse_timestamp(std::string_view s) {
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    return std::nullopt;
  }
  int y, mo, d, h, mi, se;
  if (!detail::parse_int(s.substr(0, 4), y) || !detail::parse_int(s.substr(5, 2), mo) ||
      !detail::parse_int(s.substr(8, 2), d) || !detail::parse_int(s.substr(11, 2), h) ||
      !detail::parse_int(s.substr(14, 2), mi) || !detail::parse_int(s.substr(17, 2), se)) {
    return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 59 || h < 0 || mi < 0 || se < 0) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + se;
}

inline std::string format_timestamp(std::int64_t epoch_seconds) {
  using namespace std::chrono;
  const std::int64_t day = 86400;
  std::int64_t days = epoch_seconds / day;
  std::int64_t rem = epoch_seconds % day;
  if (rem < 0) {
    rem += day;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>(rem % 3600 / 60),
                static_cast<int>(rem % 60));
  return buf;
}

// --- CSV ---------------------------------------------------------------------

inline constexpr std::string_view kMarketHeader = "timestamp,rt_price,coin_price";
inline constexpr std::string_view kAsHeader = "timestamp,program_id,price,epsilon";

// Shortest representation that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw NumericalFailure("cannot format number");
  return std::string(buf, p);
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

inline double parse_field(std::string_view text, const std::string& file, std::size_t line,
                          std::string_view field) {
  double v = 0.0;
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw ParseError(file, line, "field '" + std::string(field) + "' is not a number: '" +
                                     std::string(text) + "'");
  }
  if (!std::isfinite(v)) {
    throw ParseError(file, line, "field '" + std::string(field) + "' must be finite");
  }
  return v;
}

inline std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace detail

// Market file: timestamp,rt_price,coin_price. AS file (optional):
// timestamp,program_id,price,epsilon in long format, epsilon may be blank.
// Records are joined on timestamp and returned in time order.
inline TraceSet parse_traces(std::istream& market, std::istream* as,
                             const std::string& market_name = "market",
                             const std::string& as_name = "as") {
  TraceSet set;
  const auto mlines = detail::read_lines(market);
  if (mlines.empty() || detail::trim(mlines[0]) != kMarketHeader) {
    throw ParseError(market_name, 1, "expected header '" + std::string(kMarketHeader) + "'");
  }
  std::map<std::int64_t, std::size_t> index;
  std::vector<std::size_t> source_line;
  for (std::size_t ln = 1; ln < mlines.size(); ++ln) {
    const std::string_view line = detail::trim(mlines[ln]);
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 3) throw ParseError(market_name, ln + 1, "expected 3 fields");
    TraceRecord r;
    const auto ts = parse_timestamp(detail::trim(f[0]));
    if (!ts) throw ParseError(market_name, ln + 1, "field 'timestamp' is not ISO-8601 UTC");
    r.epoch_seconds = *ts;
    r.timestamp = format_timestamp(*ts);
    r.rt_price = detail::parse_field(f[1], market_name, ln + 1, "rt_price");
    r.coin_price = detail::parse_field(f[2], market_name, ln + 1, "coin_price");
    if (r.coin_price < 0.0) throw ParseError(market_name, ln + 1, "field 'coin_price' is negative");
    if (!index.emplace(r.epoch_seconds, set.records.size()).second) {
      throw ParseError(market_name, ln + 1, "duplicate timestamp " + r.timestamp);
    }
    set.records.push_back(std::move(r));
    source_line.push_back(ln + 1);
  }

  if (as) {
    const auto alines = detail::read_lines(*as);
    if (alines.empty() || detail::trim(alines[0]) != kAsHeader) {
      throw ParseError(as_name, 1, "expected header '" + std::string(kAsHeader) + "'");
    }
    struct Entry {
      double price;
      std::optional<double> eps;
    };
    std::map<std::pair<std::size_t, std::size_t>, Entry> entries;  // (record, program)
    for (std::size_t ln = 1; ln < alines.size(); ++ln) {
      const std::string_view line = detail::trim(alines[ln]);
      if (line.empty()) continue;
      const auto f = detail::split_csv(line);
      if (f.size() != 4 && f.size() != 3) throw ParseError(as_name, ln + 1, "expected 4 fields");
      const auto ts = parse_timestamp(detail::trim(f[0]));
      if (!ts) throw ParseError(as_name, ln + 1, "field 'timestamp' is not ISO-8601 UTC");
      const auto rec = index.find(*ts);
      if (rec == index.end()) {
        throw ParseError(as_name, ln + 1, "timestamp " + format_timestamp(*ts) + " not in market file");
      }
      const std::string id(detail::trim(f[1]));
      if (id.empty()) throw ParseError(as_name, ln + 1, "field 'program_id' is empty");
      auto pos = std::find(set.program_ids.begin(), set.program_ids.end(), id);
      if (pos == set.program_ids.end()) {
        set.program_ids.push_back(id);
        pos = set.program_ids.end() - 1;
      }
      const auto prog = static_cast<std::size_t>(pos - set.program_ids.begin());
      Entry e{detail::parse_field(f[2], as_name, ln + 1, "price"), std::nullopt};
      if (f.size() == 4 && !detail::trim(f[3]).empty()) {
        const double eps = detail::parse_field(f[3], as_name, ln + 1, "epsilon");
        if (eps < 0.0 || eps > 1.0) {
          throw ParseError(as_name, ln + 1, "field 'epsilon' = " + format_number(eps) + " outside [0, 1]");
        }
        e.eps = eps;
      }
      if (!entries.emplace(std::make_pair(rec->second, prog), e).second) {
        throw ParseError(as_name, ln + 1, "duplicate row for program '" + id + "'");
      }
    }
    const std::size_t n = set.program_ids.size();
    for (std::size_t r = 0; r < set.records.size(); ++r) {
      auto& rec = set.records[r];
      rec.as_prices.assign(n, 0.0);
      rec.deployment.assign(n, std::nullopt);
      for (std::size_t i = 0; i < n; ++i) {
        const auto it = entries.find({r, i});
        if (it == entries.end()) {
          throw ParseError(market_name, source_line[r],
                           "no price for program '" + set.program_ids[i] + "' at " + rec.timestamp);
        }
        rec.as_prices[i] = it->second.price;
        rec.deployment[i] = it->second.eps;
      }
    }
  }

  if (!std::is_sorted(set.records.begin(), set.records.end(),
                      [](const TraceRecord& a, const TraceRecord& b) {
                        return a.epoch_seconds < b.epoch_seconds;
                      })) {
    set.warnings.push_back("market timestamps are not in increasing order; records were sorted");
    std::stable_sort(set.records.begin(), set.records.end(),
                     [](const TraceRecord& a, const TraceRecord& b) {
                       return a.epoch_seconds < b.epoch_seconds;
                     });
  }
  return set;
}

inline TraceSet load_traces(const std::string& market_path, const std::string& as_path = {}) {
  std::ifstream market(market_path);
  if (!market) throw InvalidInput("cannot open " + market_path);
  if (as_path.empty()) return parse_traces(market, nullptr, market_path);
  std::ifstream as(as_path);
  if (!as) throw InvalidInput("cannot open " + as_path);
  return parse_traces(market, &as, market_path, as_path);
}

inline void write_traces(const TraceSet& set, std::ostream& market, std::ostream& as) {
  market << kMarketHeader << '\n';
  as << kAsHeader << '\n';
  for (const auto& r : set.records) {
    market << r.timestamp << ',' << format_number(r.rt_price) << ',' << format_number(r.coin_price)
           << '\n';
    for (std::size_t i = 0; i < set.program_ids.size(); ++i) {
      as << r.timestamp << ',' << set.program_ids[i] << ',' << format_number(r.as_prices[i]) << ',';
      if (r.deployment[i]) as << format_number(*r.deployment[i]);
      as << '\n';
    }
  }
}

inline void write_traces(const TraceSet& set, const std::string& market_path,
                         const std::string& as_path) {
  std::ofstream market(market_path);
  std::ofstream as(as_path);
  if (!market || !as) throw InvalidInput("cannot write trace files");
  write_traces(set, market, as);
}

// --- synthesis ---------------------------------------------------------------

// A per-hour-of-day quantity: mean and standard deviation for each hour.
struct HourlyDistribution {
  std::array<double, 24> mean{};
  std::array<double, 24> sd{};

  static HourlyDistribution constant(double mean, double sd = 0.0) {
    HourlyDistribution h;
    h.mean.fill(mean);
    h.sd.fill(sd);
    return h;
  }
};

enum class SynthKind { price_responsive, reg_up, reg_down, truncexp, constant };

struct SynthProgram {
  std::string id;
  SynthKind kind = SynthKind::constant;
  HourlyDistribution price;   // lognormal with these moments (sd 0: constant)
  double threshold = 60.0;    // price_responsive
  double mean_eps = 0.2;      // truncexp
  double epsilon = 0.0;       // constant
};

struct SynthesisSpec {
  std::string start = "2020-04-01T00:00:00Z";
  std::size_t hours = 168;
  HourlyDistribution coin_price = HourlyDistribution::constant(20000.0);  // lognormal
  HourlyDistribution rt_price = HourlyDistribution::constant(30.0);       // normal
  std::vector<SynthProgram> programs;
  RegJointModel regulation;  // shared by reg_up / reg_down programs
};

namespace detail {

inline double draw_lognormal(double mean, double sd, std::normal_distribution<double>& z, Rng& rng) {
  if (sd <= 0.0) return mean;
  if (!(mean > 0.0)) throw InvalidInput("lognormal quantities need a positive mean");
  const double s2 = std::log1p((sd * sd) / (mean * mean));
  return std::exp(std::log(mean) - 0.5 * s2 + std::sqrt(s2) * z(rng));
}

}  // namespace detail

// Deterministic in (spec, seed). Real-time prices are normal per hour of day;
// AS and coin prices are lognormal with the given moments. Price-responsive
// programs deploy when the drawn real-time price exceeds their threshold and
// reg-up/reg-down pairs are drawn jointly.
inline TraceSet synthesize_traces(const SynthesisSpec& spec, std::uint64_t seed) {
  const auto start = parse_timestamp(spec.start);
  if (!start) throw InvalidInput("synthesis start is not an ISO-8601 timestamp");
  validate(spec.regulation);
  TraceSet set;
  for (const auto& p : spec.programs) set.program_ids.push_back(p.id);
  const std::size_t n = spec.programs.size();
  std::vector<TruncatedExponential> rates(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (spec.programs[i].kind == SynthKind::truncexp) rates[i] = fit_lambda(spec.programs[i].mean_eps);
  }

  Rng rng = make_rng(seed, 0x7ace);
  std::normal_distribution<double> z(0.0, 1.0);
  set.records.reserve(spec.hours);
  for (std::size_t t = 0; t < spec.hours; ++t) {
    TraceRecord r;
    r.epoch_seconds = *start + static_cast<std::int64_t>(t) * 3600;
    r.timestamp = format_timestamp(r.epoch_seconds);
    const auto h = static_cast<std::size_t>(r.hour_of_day());
    r.coin_price = detail::draw_lognormal(spec.coin_price.mean[h], spec.coin_price.sd[h], z, rng);
    r.rt_price = spec.rt_price.mean[h] + spec.rt_price.sd[h] * z(rng);
    const auto [eps_up, eps_dn] = sample_joint(spec.regulation, rng);
    r.as_prices.resize(n);
    r.deployment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const SynthProgram& p = spec.programs[i];
      r.as_prices[i] = detail::draw_lognormal(p.price.mean[h], p.price.sd[h], z, rng);
      switch (p.kind) {
        case SynthKind::price_responsive:
          r.deployment[i] = price_responsive_eps({p.threshold}, r.rt_price);
          break;
        case SynthKind::reg_up:
          r.deployment[i] = eps_up;
          break;
        case SynthKind::reg_down:
          r.deployment[i] = eps_dn;
          break;
        case SynthKind::truncexp:
          r.deployment[i] = sample_truncexp(rates[i], rng);
          break;
        case SynthKind::constant:
          r.deployment[i] = p.epsilon;
          break;
      }
    }
    set.records.push_back(std::move(r));
  }
  return set;
}

// --- statistics and slot construction ---------------------------------------

// Sample mean and unbiased variance of program i's deployment rate, with the
// mean price over all records.
inline ProgramStats estimate_stats(std::span<const TraceRecord> records, std::size_t program) {
  double sum = 0.0;
  double price_sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : records) {
    if (program >= r.as_prices.size()) throw InvalidInput("program index out of range");
    price_sum += r.as_prices[program];
    if (r.deployment[program]) {
      sum += *r.deployment[program];
      ++count;
    }
  }
  if (count < 2) throw InvalidInput("need at least two records with deployment data");
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const auto& r : records) {
    if (r.deployment[program]) ss += (*r.deployment[program] - mean) * (*r.deployment[program] - mean);
  }
  return {price_sum / static_cast<double>(records.size()), mean,
          ss / static_cast<double>(count - 1)};
}

inline FleetSpec per_slot_rewards(const TraceRecord& record, std::span<const MachineConfig> fleet,
                                  bool clamp_negative = false) {
  return make_fleet(fleet, record.coin_price, record.rt_price, clamp_negative);
}

inline SlotInstance to_slot(const TraceRecord& record, std::span<const MachineConfig> fleet,
                            std::span<const Direction> directions, bool clamp_negative = false) {
  if (directions.size() != record.as_prices.size()) {
    throw InvalidInput("program directions do not match the trace programs");
  }
  SlotInstance s;
  s.fleet = per_slot_rewards(record, fleet, clamp_negative);
  s.prices = record.as_prices;
  s.epsilon.epsilon.assign(record.as_prices.size(), 0.0);
  s.observed.assign(record.as_prices.size(), true);
  for (std::size_t i = 0; i < record.as_prices.size(); ++i) {
    if (record.deployment[i]) {
      s.epsilon.epsilon[i] = *record.deployment[i];
    } else {
      s.observed[i] = false;
    }
  }
  s.epsilon = effective_epsilon(s.epsilon, directions);
  for (std::size_t i = 0; i < s.epsilon.size(); ++i) {
    if (!s.observed[i]) s.epsilon.epsilon[i] = 0.0;
  }
  s.hour = record.hour_of_day();
  return s;
}

inline std::vector<SlotInstance> to_slots(std::span<const TraceRecord> records,
                                          std::span<const MachineConfig> fleet,
                                          std::span<const Direction> directions,
                                          bool clamp_negative = false) {
  std::vector<SlotInstance> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(to_slot(r, fleet, directions, clamp_negative));
  return out;
}

}  // namespace minerflex
