// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "test_support.hpp"
#include "v2b/billing.hpp"

using namespace v2b;
using v2b::testing::Rng;
using v2b::testing::uniform;
using v2b::testing::uniform_int;

namespace {

// Monday at 0.8 h slots with a single two-slot metered window starting 08:00.
Episode micro_day() {
    Episode ep;
    ep.time_grid.slot_hours = 0.8;
    ep.time_grid.horizon_slots = 30;
    ep.time_grid.slots_per_aggregate = 2;
    ep.time_grid.peak_start_hour = 8.0;
    ep.time_grid.peak_end_hour = 9.6;
    ep.chargers.push_back(make_unidirectional_charger(0, 25.0, 25.0));
    ep.building_load_kwh.assign(30, 0.0);
    ep.building_load_kwh[10] = 100.0;
    ep.sessions.push_back(EvSession{0, 9, 11, 11, 11, 30.0, 60.0, 0.0, 80.0});
    return ep;
}

}  // namespace

TEST(EnergyCost, Examples) {
    TimeGrid g;
    Tariff t;
    EXPECT_NEAR(energy_cost_slot(t, g, 40, 100.0, 20.0), 17.64, 1e-12);
    EXPECT_EQ(energy_cost_slot(t, g, 40, 0.0, 0.0), 0.0);
    EXPECT_EQ(energy_cost_slot(t, g, 2, 50.0, -50.0), 0.0);
    EXPECT_THROW(energy_cost_slot(t, g, 2, 50.0, -51.0), InfeasibleError);
}

TEST(AggregatePower, Examples) {
    Episode ep;
    ep.time_grid.horizon_slots = 96;
    ep.building_load_kwh.assign(96, 0.0);
    ep.building_load_kwh[30] = 25.0;
    std::vector<double> zero(96, 0.0);
    auto pis = aggregate_peak_powers(ep, zero);
    EXPECT_NEAR(pis[30 - 24], 100.0, 1e-12);
    ep.building_load_kwh.assign(96, 0.0);
    for (double p : aggregate_peak_powers(ep, zero)) EXPECT_EQ(p, 0.0);

    Episode five;
    five.time_grid.slot_hours = 1.0 / 12.0;
    five.time_grid.horizon_slots = 288;
    five.time_grid.slots_per_aggregate = 3;
    five.building_load_kwh.assign(288, 5.0);
    std::vector<double> z5(288, 0.0);
    for (double p : aggregate_peak_powers(five, z5)) EXPECT_NEAR(p, 60.0, 1e-9);
}

TEST(DemandCost, Examples) {
    const std::vector<double> a{60, 75, 60};
    auto d = demand_cost(a, 9.62);
    EXPECT_DOUBLE_EQ(d.peak_kw, 75.0);
    EXPECT_NEAR(d.cost, 721.50, 1e-9);
    const std::vector<double> z{0};
    EXPECT_EQ(demand_cost(z, 9.62).cost, 0.0);
    const std::vector<double> t{50, 50};
    EXPECT_NEAR(demand_cost(t, 9.62).cost, 481.0, 1e-9);
}

TEST(MissingSoc, Examples) {
    std::vector<SessionOutcome> one{{0, 50.0, 60.0, 80.0, true}};
    EXPECT_NEAR(missing_soc_cost(one, 0.20), 2.00, 1e-12);
    std::vector<SessionOutcome> met{{0, 60.0, 60.0, 80.0, true}, {1, 30.0, 30.0, 80.0, true}};
    EXPECT_EQ(missing_soc_cost(met, 0.20), 0.0);
    std::vector<SessionOutcome> two{{0, 50.0, 60.0, 80.0, true}, {1, 25.0, 30.0, 80.0, true}};
    EXPECT_NEAR(missing_soc_cost(two, 0.20), 3.00, 1e-12);
}

TEST(TotalBill, MicroDay) {
    const Episode ep = micro_day();
    ASSERT_TRUE(validate_episode(ep).empty());
    std::vector<double> schedule(30, 0.0);
    schedule[10] = 20.0;
    std::vector<SessionOutcome> out{{0, 50.0, 60.0, 80.0, true}};
    const BillBreakdown b = total_bill(ep, schedule, out);
    EXPECT_NEAR(b.energy_cost, 17.64, 1e-9);
    EXPECT_NEAR(b.demand_cost, 721.50, 1e-9);
    EXPECT_NEAR(b.missing_soc_cost, 2.00, 1e-9);
    EXPECT_NEAR(b.total, 741.14, 1e-9);
}

TEST(TotalBill, EmptyAndNoop) {
    Episode ep;
    ep.building_load_kwh.assign(96, 0.0);
    std::vector<double> zero(96, 0.0);
    const BillBreakdown b = total_bill(ep, zero, {});
    EXPECT_EQ(b.total, 0.0);
    EXPECT_EQ(b.peak_kw, 0.0);
}

TEST(Reward, Intermediate) {
    std::vector<SessionOutcome> none;
    EXPECT_DOUBLE_EQ(intermediate_reward(3.5, none, 0.2), 3.5);
    std::vector<SessionOutcome> at{{0, 60.0, 60.0, 80.0, true}};
    EXPECT_DOUBLE_EQ(intermediate_reward(3.5, at, 0.2), 3.5);
    std::vector<SessionOutcome> short10{{0, 50.0, 60.0, 80.0, true}};
    EXPECT_NEAR(intermediate_reward(3.5, short10, 0.2), 5.5, 1e-12);
}

TEST(Reward, Episodic) {
    TrajectoryTally t;
    t.energy_cost = 10.0;
    t.add_window(80.0, 100.0);
    EXPECT_NEAR(episodic_cost(t, 100.0, 9.62), 10.0 + 962.0, 1e-9);
    EXPECT_EQ(episodic_cost(TrajectoryTally{}, 0.0, 9.62), 0.0);

    TrajectoryTally over = t;
    over.add_window(110.0, 100.0);
    RewardShaping sh;
    EXPECT_NEAR(shaped_cost(over, 100.0, 9.62, sh) - shaped_cost(t, 100.0, 9.62, sh), 96.2 + 5.0, 1e-9);
    EXPECT_DOUBLE_EQ(rollout_score(over, 100.0, 9.62, sh), -shaped_cost(over, 100.0, 9.62, sh));
}

// Random schedules on random days: the bill decomposes, the demand charge is
// monotone in added charging, and aggregating over tau slots averages the
// tau = 1 powers.
TEST(BillProperties, Randomized) {
    Rng rng(2024);
    for (int trial = 0; trial < 10000; ++trial) {
        Episode ep;
        ep.time_grid.slot_hours = 1.0;
        ep.time_grid.horizon_slots = 24 * uniform_int(rng, 1, 2);
        ep.time_grid.peak_start_hour = 6.0;
        ep.time_grid.peak_end_hour = 22.0;
        ep.time_grid.slots_per_aggregate = std::array<int, 4>{1, 2, 4, 8}[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
        const int n = ep.time_grid.horizon_slots;
        std::vector<double> sched(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) {
            ep.building_load_kwh.push_back(uniform(rng, 0.0, 50.0));
            sched[static_cast<std::size_t>(t)] = uniform(rng, -ep.building_load_kwh.back(), 40.0);
        }
        std::vector<SessionOutcome> out;
        for (int i = uniform_int(rng, 0, 4); i > 0; --i) out.push_back({i, uniform(rng, 0, 80), uniform(rng, 0, 80), 80.0, true});

        const BillBreakdown b = total_bill(ep, sched, out);
        ASSERT_NEAR(b.total, b.energy_cost + b.demand_cost + b.missing_soc_cost, 1e-9);
        ASSERT_GE(b.energy_cost, 0.0);

        std::vector<double> more = sched;
        more[static_cast<std::size_t>(uniform_int(rng, 0, n - 1))] += uniform(rng, 0.0, 20.0);
        ASSERT_GE(total_bill(ep, more, out).demand_cost, b.demand_cost - 1e-9);

        Episode sc = ep;
        for (double& x : sc.building_load_kwh) x *= 2.0;
        std::vector<double> sched2 = sched;
        for (double& x : sched2) x *= 2.0;
        const BillBreakdown b2 = total_bill(sc, sched2, {});
        ASSERT_NEAR(b2.energy_cost, 2.0 * b.energy_cost, 1e-8);
        ASSERT_NEAR(b2.demand_cost, 2.0 * b.demand_cost, 1e-8);

        Episode fine = ep;
        fine.time_grid.slots_per_aggregate = 1;
        const auto p1 = aggregate_peak_powers(fine, sched);
        const auto pt = aggregate_peak_powers(ep, sched);
        const std::size_t tau = static_cast<std::size_t>(ep.time_grid.slots_per_aggregate);
        ASSERT_EQ(p1.size(), pt.size() * tau);
        for (std::size_t j = 0; j < pt.size(); ++j) {
            double m = 0.0;
            for (std::size_t i = 0; i < tau; ++i) m += p1[j * tau + i];
            ASSERT_NEAR(pt[j], m / static_cast<double>(tau), 1e-9);
        }
    }
}
