// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "test_support.hpp"
#include "v2b/harness.hpp"

using namespace v2b;
using v2b::testing::Rng;
using v2b::testing::uniform;
using v2b::testing::uniform_int;

namespace {

// Bill rebuilt from nothing but the trajectory CSV and the episode's session table.
BillBreakdown bill_from_csv(const Episode& ep, const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, kTrajectoryCsvHeader);
    std::vector<double> schedule(static_cast<std::size_t>(ep.time_grid.horizon_slots), 0.0);
    std::map<int, double> final_soc;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> f;
        while (std::getline(row, cell, ',')) f.push_back(cell);
        EXPECT_EQ(f.size(), 7u);
        const int slot = std::stoi(f[0]);
        const int charger = std::stoi(f[1]);
        if (charger < 0) continue;
        schedule[static_cast<std::size_t>(slot)] += std::stod(f[3]);
        final_soc[std::stoi(f[2])] = std::stod(f[4]);
    }
    std::vector<SessionOutcome> out;
    for (const EvSession& s : ep.sessions) {
        const auto it = final_soc.find(s.id);
        out.push_back({s.id, it == final_soc.end() ? s.arrival_soc_kwh : it->second, s.required_soc_kwh, s.battery_max_kwh, true});
    }
    return total_bill(ep, schedule, out);
}

}  // namespace

// Random tiny episodes under every heuristic: the dumped trajectory alone
// reproduces the reported bill, and peak shaving is the drop in demand charge
// relative to the building alone.
TEST(HarnessProperties, MetricsFromTrajectory) {
    Rng rng(31337);
    const PolicyKind kinds[] = {PolicyKind::llf, PolicyKind::edf, PolicyKind::req_charge, PolicyKind::max_charge};
    for (int trial = 0; trial < 10000; ++trial) {
        Episode ep = v2b::testing::tiny_episode(rng);
        for (auto& s : ep.sessions) s.arrival_soc_kwh = std::min(s.battery_max_kwh, s.arrival_soc_kwh + uniform(rng, 0.0, 1.0));
        SimContext ctx(ep);
        auto policy = make_policy(kinds[trial % 4], ctx, {}, {}, 0);
        SimOptions so;
        so.record = true;
        so.peak_estimate_kw = uniform(rng, 0.0, 10.0);
        const EpisodeResult r = simulate(ep, ctx, *policy, so);
        const BillBreakdown b = bill_from_csv(ep, trajectory_csv(r));
        ASSERT_NEAR(b.total, r.bill.total, 1e-6) << trial;
        ASSERT_NEAR(b.demand_cost, r.bill.demand_cost, 1e-6);
        ASSERT_EQ(schedule_from_rows(r.rows, ep.time_grid.horizon_slots).size(), r.schedule.size());
        ASSERT_NEAR(r.peak_shaving, building_only_bill(ep).demand_cost - r.bill.demand_cost, 1e-9);
        ASSERT_EQ(r.outcomes.size(), ep.sessions.size());
        double missing = 0.0;
        for (const auto& o : r.outcomes) missing += o.shortfall();
        ASSERT_NEAR(r.missing_soc_kwh, missing, 1e-9);
    }
}

namespace {

// Same episode with each session's true departure redrawn inside its window.
Episode redraw_departures(const Episode& ep, Rng& rng) {
    Episode out = ep;
    for (EvSession& s : out.sessions) s.true_departure_slot = uniform_int(rng, s.window_lo, s.window_hi);
    return out;
}

int first_difference(const Episode& a, const Episode& b) {
    int first = a.time_grid.horizon_slots;
    for (std::size_t i = 0; i < a.sessions.size(); ++i)
        if (a.sessions[i].true_departure_slot != b.sessions[i].true_departure_slot)
            first = std::min(first, std::min(a.sessions[i].true_departure_slot, b.sessions[i].true_departure_slot));
    return first;
}

std::vector<Action> decisions(const Episode& ep, Policy& p, double peak) {
    SimContext ctx(ep);
    const Trace tr = make_trace(ep, 77);
    NullSink sink;
    SystemState s = initial_state(ctx, tr, 0, peak);
    std::vector<Action> out;
    while (s.slot < tr.end_slot) {
        out.push_back(p.decide(s));
        step(ctx, tr, s, out.back().rates, sink);
    }
    return out;
}

}  // namespace

TEST(Harness, NoPeekingAtTrueDepartures) {
    Rng rng(808);
    GeneratorConfig gen;
    gen.grid.horizon_slots = 96;
    gen.fleet.bidirectional = 2;
    gen.fleet.unidirectional = 2;
    gen.arrivals.departure_window_hours = 3.0;
    for (double& l : gen.arrivals.hourly_rate) l *= 0.4;
    SearchConfig sc;
    sc.iterations = 15;
    sc.max_depth = 10;
    sc.exploration_samples = 2;
    const std::vector<Episode> samples = generate_samples(gen, 1, 1000, 2);
    for (int trial = 0; trial < 12; ++trial) {
        const Episode a = generate_episode(gen, static_cast<std::uint64_t>(trial));
        const Episode b = redraw_departures(a, rng);
        const int cut = first_difference(a, b);
        for (PolicyKind k : all_policies()) {
            if (trial >= 3 && (k == PolicyKind::dgmcts || k == PolicyKind::dmcts)) continue;
            SimContext ca(a), cb(b);
            auto pa = make_policy(k, ca, samples, sc, 9);
            auto pb = make_policy(k, cb, samples, sc, 9);
            const auto da = decisions(a, *pa, 50.0);
            const auto db = decisions(b, *pb, 50.0);
            for (int t = 0; t < cut; ++t) ASSERT_EQ(da[static_cast<std::size_t>(t)], db[static_cast<std::size_t>(t)]) << policy_name(k) << " slot " << t;
        }
    }
}

TEST(Harness, SeedsAreSeparateStreams) {
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j) ASSERT_NE(episode_seed(1, i), sample_seed(1, j));
    EXPECT_EQ(episode_seed(3, 4), episode_seed(3, 4));
    EXPECT_NE(episode_seed(3, 4), episode_seed(4, 4));
}

TEST(Harness, RunVariantsTables) {
    ExperimentConfig cfg;
    cfg.generator.grid.horizon_slots = 96;
    cfg.generator.fleet.bidirectional = 1;
    cfg.generator.fleet.unidirectional = 2;
    cfg.episodes = 2;
    cfg.peak_samples = 2;
    cfg.search.iterations = 5;
    cfg.search.max_depth = 5;
    cfg.search.exploration_samples = 2;
    std::vector<std::string> log;
    const auto rs = run_variants(cfg, policy_variants({PolicyKind::llf, PolicyKind::max_charge, PolicyKind::dmcts}),
                                 [&](const std::string& s) { log.push_back(s); });
    ASSERT_EQ(rs.size(), 3u);
    EXPECT_EQ(rs[0].peak_estimate_kw, rs[1].peak_estimate_kw);
    EXPECT_EQ(log.front().rfind("peak estimate", 0), 0u);
    const std::string csv = summary_csv(rs);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "policy,total_cost_mean,total_cost_std,missing_soc_kwh_mean,missing_soc_kwh_std,cars_under_required_mean,"
              "cars_under_required_std,peak_shaving_mean,peak_shaving_std,decision_s_mean,decision_s_std");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    const std::string eps = episodes_csv(rs);
    EXPECT_EQ(std::count(eps.begin(), eps.end(), '\n'), 7);
    EXPECT_NE(summary_text(rs).find("MaxCharge"), std::string::npos);
    // Same seeds, same bills.
    const auto again = run_variants(cfg, policy_variants({PolicyKind::llf}));
    EXPECT_EQ(again[0].episodes[1].bill.total, rs[0].episodes[1].bill.total);
}

TEST(Harness, VariantBuilders) {
    EXPECT_EQ(ablation_variants(AblationKind::P, {})[1].peak_prediction, false);
    EXPECT_TRUE(ablation_variants(AblationKind::H, {})[1].search->pruning.full_space);
    EXPECT_EQ(ablation_variants(AblationKind::C, {})[1].battery.kind, BatteryModel::Kind::piecewise);
    EXPECT_THROW(parse_ablation("Q"), ConfigError);
    ExperimentConfig cfg;
    EXPECT_EQ(sensitivity_variants(SensitivityKind::sample_sweep, cfg).size(), 4u);
    const auto w = sensitivity_variants(SensitivityKind::window3h, cfg);
    EXPECT_EQ(w.size(), all_policies().size());
    EXPECT_DOUBLE_EQ(w[0].generator->arrivals.departure_window_hours, 3.0);
    const auto a = sensitivity_variants(SensitivityKind::arrivals25, cfg);
    EXPECT_NEAR(a[0].generator->arrivals.daily_mean(), 25.0, 1e-9);
    EXPECT_EQ(sensitivity_variants(SensitivityKind::ME, cfg)[1].sample_perturbation, Perturbation::more_evs);
    EXPECT_THROW(parse_sensitivity("XX"), ConfigError);
    EXPECT_EQ(parse_policy("Req"), PolicyKind::req_charge);
    EXPECT_THROW(parse_policy("rl"), ConfigError);
}
