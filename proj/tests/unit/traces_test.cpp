#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "minerflex/config.hpp"
#include "minerflex/traces.hpp"
#include "oracles.hpp"

using namespace minerflex;

namespace {

TraceSet parse(const std::string& market, const std::string& as = "") {
  std::istringstream m(market);
  if (as.empty()) return parse_traces(m, nullptr);
  std::istringstream a(as);
  return parse_traces(m, &a);
}

const char* kMarket = "timestamp,rt_price,coin_price\n";
const char* kAs = "timestamp,program_id,price,epsilon\n";

}  // namespace

TEST(PriceResponsive, StrictThreshold) {
  const PriceResponsiveModel m{60};
  EXPECT_EQ(price_responsive_eps(m, 59.99), 0.0);
  EXPECT_EQ(price_responsive_eps(m, 60.0), 0.0);
  EXPECT_EQ(price_responsive_eps(m, 500.0), 1.0);
}

TEST(Timestamps, ParseAndFormat) {
  EXPECT_EQ(parse_timestamp("1970-01-01T00:00:00Z"), 0);
  EXPECT_EQ(parse_timestamp("2020-04-01 01:00:00"), 1585702800);
  EXPECT_EQ(format_timestamp(1585702800), "2020-04-01T01:00:00Z");
  EXPECT_FALSE(parse_timestamp("2020-02-30T00:00:00Z"));
  EXPECT_FALSE(parse_timestamp("2020-04-01T24:00:00Z"));
  EXPECT_FALSE(parse_timestamp("yesterday"));
  EXPECT_EQ(format_timestamp(*parse_timestamp("1969-12-31T23:00:00Z")), "1969-12-31T23:00:00Z");
}

TEST(LoadTraces, EmptyAndSingle) {
  EXPECT_TRUE(parse(kMarket).records.empty());
  const TraceSet one = parse(std::string(kMarket) + "2020-04-01T00:00:00Z,25.5,6800\n",
                             std::string(kAs) + "2020-04-01T00:00:00Z,regup,12,0.2\n");
  ASSERT_EQ(one.records.size(), 1u);
  EXPECT_EQ(one.program_ids, std::vector<std::string>{"regup"});
  EXPECT_DOUBLE_EQ(one.records[0].rt_price, 25.5);
  EXPECT_DOUBLE_EQ(one.records[0].as_prices[0], 12);
  EXPECT_DOUBLE_EQ(*one.records[0].deployment[0], 0.2);
  EXPECT_EQ(one.records[0].hour_of_day(), 0);
}

TEST(LoadTraces, ValidationErrorsCarryLine) {
  const std::string m = std::string(kMarket) + "2020-04-01T00:00:00Z,25,6800\n2020-04-01T01:00:00Z,26,6800\n";
  try {
    parse(m, std::string(kAs) + "2020-04-01T00:00:00Z,a,1,0.1\n2020-04-01T01:00:00Z,a,1,1.2\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("epsilon"), std::string::npos);
  }
  EXPECT_THROW(parse("time,price\n"), ParseError);
  EXPECT_THROW(parse(std::string(kMarket) + "2020-04-01T00:00:00Z,nan,1\n"), ParseError);
  EXPECT_THROW(parse(std::string(kMarket) + "2020-04-01T00:00:00Z,abc,1\n"), ParseError);
  EXPECT_THROW(parse(m + "2020-04-01T01:00:00Z,1,1\n"), ParseError);
  EXPECT_THROW(parse(m, std::string(kAs) + "2020-04-01T00:00:00Z,a,1,-0.1\n"), ParseError);
  EXPECT_THROW(parse(m, std::string(kAs) + "2020-04-01T05:00:00Z,a,1,0.1\n"), ParseError);
  // Program priced in one hour but not the other.
  EXPECT_THROW(parse(m, std::string(kAs) + "2020-04-01T00:00:00Z,a,1,0.1\n"), ParseError);
}

TEST(LoadTraces, SortsWithWarningAndKeepsAbsentEpsilon) {
  const std::string m = std::string(kMarket) + "2020-04-01T01:00:00Z,26,6800\n2020-04-01T00:00:00Z,25,6800\n";
  const std::string a = std::string(kAs) + "2020-04-01T00:00:00Z,a,1,\n2020-04-01T01:00:00Z,a,2,0.5\n";
  const TraceSet s = parse(m, a);
  ASSERT_EQ(s.records.size(), 2u);
  EXPECT_LT(s.records[0].epoch_seconds, s.records[1].epoch_seconds);
  EXPECT_EQ(s.warnings.size(), 1u);
  EXPECT_FALSE(s.records[0].deployment[0].has_value());
  EXPECT_DOUBLE_EQ(s.records[1].as_prices[0], 2);
}

TEST(LoadTraces, RoundTrip) {
  SynthesisSpec spec;
  spec.hours = 200;
  spec.rt_price = HourlyDistribution::constant(30, 15);
  spec.coin_price = HourlyDistribution::constant(7000, 300);
  spec.regulation = {0.5, fit_lambda(0.18), fit_lambda(0.27)};
  spec.programs = {{"ecrs", SynthKind::price_responsive, HourlyDistribution::constant(8, 2), 40},
                   {"regup", SynthKind::reg_up, HourlyDistribution::constant(10, 3)},
                   {"regdn", SynthKind::reg_down, HourlyDistribution::constant(6, 2)}};
  TraceSet set = synthesize_traces(spec, 17);
  set.records[3].deployment[1].reset();
  std::ostringstream m, a;
  write_traces(set, m, a);
  const TraceSet back = parse(m.str(), a.str());
  ASSERT_EQ(back.records.size(), set.records.size());
  EXPECT_EQ(back.program_ids, set.program_ids);
  for (std::size_t r = 0; r < set.records.size(); ++r) {
    EXPECT_EQ(back.records[r].timestamp, set.records[r].timestamp);
    EXPECT_EQ(back.records[r].rt_price, set.records[r].rt_price);
    EXPECT_EQ(back.records[r].coin_price, set.records[r].coin_price);
    EXPECT_EQ(back.records[r].as_prices, set.records[r].as_prices);
    EXPECT_EQ(back.records[r].deployment, set.records[r].deployment);
  }
  std::ostringstream m2, a2;
  write_traces(back, m2, a2);
  EXPECT_EQ(m.str(), m2.str());
  EXPECT_EQ(a.str(), a2.str());
}

TEST(Synthesis, ConstantAndDeterministic) {
  SynthesisSpec spec;
  spec.hours = 48;
  spec.programs = {{"c", SynthKind::constant, HourlyDistribution::constant(9), 60, 0.2, 0.4}};
  const TraceSet s = synthesize_traces(spec, 1);
  for (const auto& r : s.records) {
    EXPECT_EQ(r.coin_price, 20000);
    EXPECT_EQ(r.rt_price, 30);
    EXPECT_EQ(r.as_prices[0], 9);
    EXPECT_EQ(*r.deployment[0], 0.4);
  }
  EXPECT_EQ(s.records[25].timestamp, "2020-04-02T01:00:00Z");
  spec.rt_price = HourlyDistribution::constant(30, 20);
  spec.programs[0].kind = SynthKind::truncexp;
  std::ostringstream a1, b1, a2, b2;
  write_traces(synthesize_traces(spec, 5), a1, b1);
  write_traces(synthesize_traces(spec, 5), a2, b2);
  EXPECT_EQ(a1.str(), a2.str());
  EXPECT_EQ(b1.str(), b2.str());
  std::ostringstream a3, b3;
  write_traces(synthesize_traces(spec, 6), a3, b3);
  EXPECT_NE(a1.str(), a3.str());
}

TEST(Synthesis, MarginalsMatchSpec) {
  SynthesisSpec spec;
  spec.hours = 100000;
  for (int h = 0; h < 24; ++h) {
    spec.rt_price.mean[h] = 25 + h;
    spec.rt_price.sd[h] = 10;
  }
  spec.coin_price = HourlyDistribution::constant(7000, 700);
  spec.regulation = {0.4, fit_lambda(0.18), fit_lambda(0.27)};
  spec.programs = {{"pr", SynthKind::price_responsive, HourlyDistribution::constant(8, 2), 45},
                   {"up", SynthKind::reg_up, HourlyDistribution::constant(10, 3)},
                   {"dn", SynthKind::reg_down, HourlyDistribution::constant(6, 0)},
                   {"tx", SynthKind::truncexp, HourlyDistribution::constant(5, 1), 60, 0.3}};
  const TraceSet s = synthesize_traces(spec, 123);
  oracle_test::RunningStats coin, price, up, dn, tx, rt0;
  double expected_pr = 0.0;
  oracle_test::RunningStats pr;
  for (const auto& r : s.records) {
    coin.add(r.coin_price);
    price.add(r.as_prices[1]);
    up.add(*r.deployment[1]);
    dn.add(*r.deployment[2]);
    tx.add(*r.deployment[3]);
    pr.add(*r.deployment[0]);
    const int h = r.hour_of_day();
    if (h == 0) rt0.add(r.rt_price);
    expected_pr += 0.5 * std::erfc((45.0 - (25 + h)) / (10 * std::sqrt(2.0)));
    EXPECT_EQ(r.as_prices[2], 6);
    EXPECT_TRUE(*r.deployment[1] == 0.0 || *r.deployment[2] == 0.0);
  }
  expected_pr /= static_cast<double>(s.records.size());
  EXPECT_NEAR(coin.mean, 7000, 3 * coin.std_error());
  EXPECT_NEAR(std::sqrt(coin.variance()), 700, 10);
  EXPECT_NEAR(price.mean, 10, 3 * price.std_error());
  EXPECT_NEAR(up.mean, 0.6 * 0.18, 3 * up.std_error());
  EXPECT_NEAR(dn.mean, 0.4 * 0.27, 3 * dn.std_error());
  EXPECT_NEAR(tx.mean, 0.3, 3 * tx.std_error());
  EXPECT_NEAR(pr.mean, expected_pr, 3 * pr.std_error());
  EXPECT_NEAR(rt0.mean, 25, 3 * rt0.std_error());
}

TEST(EstimateStats, Examples) {
  std::vector<TraceRecord> recs(1000);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].as_prices = {4, static_cast<double>(i % 3)};
    recs[i].deployment = {0.0, static_cast<double>(i % 2)};
  }
  const ProgramStats zero = estimate_stats(recs, 0);
  EXPECT_EQ(zero.mean_eps, 0.0);
  EXPECT_EQ(zero.var_eps, 0.0);
  EXPECT_EQ(zero.price, 4.0);
  const ProgramStats alt = estimate_stats(recs, 1);
  EXPECT_DOUBLE_EQ(alt.mean_eps, 0.5);
  EXPECT_NEAR(alt.var_eps, 0.25 * 1000 / 999, 1e-12);
  EXPECT_NEAR(alt.var_eps, 0.25025, 1e-5);
  EXPECT_THROW(estimate_stats(std::span<const TraceRecord>(recs).first(1), 0), InvalidInput);
  EXPECT_THROW(estimate_stats(recs, 2), InvalidInput);
}

TEST(EstimateStats, TruncexpColumnAndVarianceBound) {
  SynthesisSpec spec;
  spec.hours = 20000;
  spec.programs = {{"tx", SynthKind::truncexp, HourlyDistribution::constant(5), 60, 0.22}};
  const TraceSet s = synthesize_traces(spec, 9);
  const ProgramStats st = estimate_stats(s.records, 0);
  oracle_test::RunningStats rs;
  for (const auto& r : s.records) rs.add(*r.deployment[0]);
  EXPECT_NEAR(st.mean_eps, 0.22, 3 * rs.std_error());
  EXPECT_LE(st.var_eps, st.mean_eps * (1 - st.mean_eps) + 1e-3);
}

TEST(Slots, PerSlotRewards) {
  const std::vector<MachineConfig> fleet{{"s19", 100, 110}, {"s9", 150, 130}};
  TraceRecord r;
  r.coin_price = 20000;
  r.rt_price = 50;
  const FleetSpec f = per_slot_rewards(r, fleet);
  EXPECT_EQ(f[0].id, "s9");
  EXPECT_NEAR(f.reward(0), 20000.0 / 130 - 50, 1e-12);
  EXPECT_NEAR(f.reward(0), 103.846, 1e-3);
  EXPECT_NEAR(f.reward(1), 131.818, 1e-3);
  EXPECT_EQ(f.capacity(0), 150);
  r.coin_price = 0;
  const FleetSpec z = per_slot_rewards(r, fleet, true);
  EXPECT_EQ(z.size(), 1u);
  EXPECT_EQ(z.reward(0), 0.0);
  EXPECT_EQ(z.total_capacity_mw(), 250);
  EXPECT_THROW(per_slot_rewards(r, fleet), ModelViolation);
}

TEST(Slots, DirectionsAndMask) {
  TraceRecord r;
  r.epoch_seconds = 3600 * 5;
  r.coin_price = 20000;
  r.rt_price = 50;
  r.as_prices = {10, 20};
  r.deployment = {std::nullopt, 0.25};
  const std::vector<MachineConfig> fleet{{"s19", 100, 110}};
  const std::vector<Direction> dirs{Direction::up, Direction::down};
  const SlotInstance s = to_slot(r, fleet, dirs);
  EXPECT_EQ(s.hour, 5);
  EXPECT_FALSE(s.is_observed(0));
  EXPECT_DOUBLE_EQ(s.epsilon[1], 0.75);
  EXPECT_THROW(to_slot(r, fleet, std::vector<Direction>{Direction::up}), InvalidInput);
}

TEST(Config, ParsesFilesAndRejectsBadInput) {
  const json fleet = json::parse(R"({"machines":[{"id":"s19","capacity_mw":100,"energy_intensity_mwh_per_coin":110}],
                                    "coin_price":7000})");
  const FleetConfig fc = parse_fleet_config(fleet);
  EXPECT_EQ(fc.machines.size(), 1u);
  EXPECT_EQ(*fc.coin_price, 7000);
  EXPECT_FALSE(fc.electricity_price);
  EXPECT_THROW(parse_fleet_config(json::parse(R"({"machines":[{"id":"x","capacity_mw":-1,"energy_intensity_mwh_per_coin":1}]})")),
               InvalidInput);

  const json progs = json::parse(R"({"programs":[
      {"id":"ecrs","price":8,"deployment":{"model":"bernoulli","probability":0.1}},
      {"id":"regup","price":10,"direction":"up","deployment":{"model":"truncexp","mean":0.18}},
      {"id":"regdn","price":6,"direction":"down","deployment":{"model":"truncexp","lambda":2.0}}],
      "regulation":{"theta":0.4,"up":"regup","down":"regdn"}})");
  const ProgramSet ps = parse_program_set(progs);
  EXPECT_EQ(ps.size(), 3u);
  EXPECT_EQ(ps.regulation->down, 2u);
  EXPECT_NEAR(model_mean(ps.programs[1].model), 0.18, 1e-10);
  EXPECT_EQ(ps.directions()[2], Direction::down);
  EXPECT_THROW(parse_program_set(json::parse(R"({"programs":[{"id":"a","price":1,"deployment":{"model":"weird"}}]})")),
               InvalidInput);
  EXPECT_THROW(parse_program_set(json::parse(R"({"programs":[{"id":"a","price":1,"deployment":{"model":"truncexp","mean":0.2}}],
                                               "regulation":{"theta":0.4,"up":"a","down":"b"}})")),
               InvalidInput);

  const json synth = json::parse(R"({"hours":24,"rt_price":{"mean":30,"sd":5},
      "regulation":{"theta":0.5,"up":{"mean":0.18},"down":{"mean":0.27}},
      "programs":[{"id":"ecrs","kind":"price_responsive","threshold":60,"price":{"mean":8,"sd":[1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1]}}]})");
  const SynthesisSpec sp = parse_synthesis_spec(synth);
  EXPECT_EQ(sp.hours, 24u);
  EXPECT_EQ(sp.programs[0].threshold, 60);
  EXPECT_NEAR(truncexp_mean(sp.regulation.down), 0.27, 1e-10);
  EXPECT_THROW(parse_synthesis_spec(json::parse(R"({"programs":[{"id":"a","kind":"constant","epsilon":2,"price":1}]})")),
               InvalidInput);
}

TEST(ProgramSet, StatsAndSampler) {
  ProgramSet set;
  set.programs = {{"up", 10, Direction::up, fit_lambda(0.18)}, {"dn", 6, Direction::down, fit_lambda(0.27)},
                  {"b", 3, Direction::up, BernoulliRate{0.2}}};
  set.regulation = RegulationPairing{0, 1, 0.4};
  const auto stats = set.stats();
  Rng rng = make_rng(4);
  std::vector<oracle_test::RunningStats> rs(3);
  const ProgramSampler sampler(set);
  oracle_test::RunningStats eff_dn;
  for (int i = 0; i < 200000; ++i) {
    const auto raw = draw_raw(set, rng);
    for (std::size_t k = 0; k < 3; ++k) rs[k].add(raw[k]);
    eff_dn.add(sampler(rng)[1]);
  }
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(rs[k].mean, stats[k].mean_eps, 3 * rs[k].std_error()) << k;
    EXPECT_NEAR(rs[k].variance(), stats[k].var_eps, 0.03 * stats[k].var_eps) << k;
  }
  EXPECT_NEAR(eff_dn.mean, 1 - 0.4 * 0.27, 3 * eff_dn.std_error());
  const auto eff = set.effective_stats();
  EXPECT_DOUBLE_EQ(eff[0].mean_eps, stats[0].mean_eps);
  EXPECT_NEAR(eff[1].mean_eps, eff_dn.mean, 3 * eff_dn.std_error());
  EXPECT_DOUBLE_EQ(eff[1].var_eps, stats[1].var_eps);
  ProgramSet bad = set;
  bad.programs[1].model = ConstantRate{0.1};
  EXPECT_THROW(validate(bad), InvalidInput);
}
