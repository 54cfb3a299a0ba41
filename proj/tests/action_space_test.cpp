// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "v2b/action_space.hpp"

using namespace v2b;
using v2b::testing::Rng;
using v2b::testing::uniform;
using v2b::testing::uniform_int;

namespace {

struct OneCharger {
    Episode ep;
    SimContext ctx;
    SystemState s;
    OneCharger(double soc, double building_kwh, double threshold_kw) {
        ep.chargers.push_back(make_bidirectional_charger(0));
        ep.building_load_kwh.assign(96, building_kwh);
        ctx = SimContext(ep);
        s.building_kwh = building_kwh;
        s.peak_estimate_kw = threshold_kw;
        s.chargers.assign(1, ConnectedEv{0, soc, 0, 40, 40, 40, 60.0, 8.0, 80.0, 0});
    }
};

std::vector<double> rates_of(const OneCharger& f, const std::vector<int>& idx) {
    std::vector<double> out;
    for (int i : idx) out.push_back(f.ctx.level_kwh[0][static_cast<std::size_t>(i)]);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(ActionSpace, DegenerateNeighborhood) {
    OneCharger f(40.0, 10.0, 100.0);
    PruningConfig cfg{0, 0, false};
    Rng rng(1);
    const Action anchor{{2.5}};
    const auto space = generate_action_space(f.ctx, f.s, anchor, cfg, rng);
    ASSERT_EQ(space.size(), 1u);
    EXPECT_EQ(space[0], anchor);
}

TEST(ActionSpace, ChargingWindow) {
    OneCharger f(40.0, 10.0, 100.0);
    const int anchor = level_index(f.ctx, 0, 2.5);
    PruningConfig cfg;
    cfg.include_boundary = false;
    EXPECT_EQ(rates_of(f, charger_candidates(f.ctx, f.s, 0, anchor, cfg)), (std::vector<double>{1.25, 2.5, 3.75, 5.0}));
    cfg.include_boundary = true;
    EXPECT_EQ(rates_of(f, charger_candidates(f.ctx, f.s, 0, anchor, cfg)), (std::vector<double>{-5.0, 1.25, 2.5, 3.75, 5.0}));
    // Discharging branch shifts the window down.
    f.s.building_kwh = 40.0;
    cfg.include_boundary = false;
    EXPECT_EQ(rates_of(f, charger_candidates(f.ctx, f.s, 0, anchor, cfg)), (std::vector<double>{0.0, 1.25, 2.5, 3.75}));
}

TEST(ActionSpace, ClipAtMaximum) {
    OneCharger f(40.0, 10.0, 100.0);
    PruningConfig cfg;
    for (int i : charger_candidates(f.ctx, f.s, 0, level_index(f.ctx, 0, 5.0), cfg))
        EXPECT_LE(f.ctx.level_kwh[0][static_cast<std::size_t>(i)], 5.0);
    // Near-full battery: the band stops one level past the headroom.
    OneCharger full(79.0, 10.0, 100.0);
    for (int i : charger_candidates(full.ctx, full.s, 0, level_index(full.ctx, 0, 0.0), cfg))
        EXPECT_LE(full.ctx.level_kwh[0][static_cast<std::size_t>(i)], 1.25);
}

TEST(Noise, Examples) {
    Rng rng(5);
    EXPECT_EQ(add_noise(3, 0.0, 0, 8, rng), 3);
    double sum = 0.0, sq = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double d = add_noise(100, 1.0, 0, 200, rng) - 100;
        sum += d;
        sq += d * d;
    }
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    EXPECT_GE(sd, 0.9);
    EXPECT_LE(sd, 1.1);
    for (int i = 0; i < 1000; ++i) EXPECT_GE(add_noise(0, 1.0, 0, 8, rng), 0);
}

// Random states with the LLF action as anchor.
TEST(ActionSpaceProperties, Randomized) {
    Rng rng(77);
    long actions = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        Episode ep = v2b::testing::random_day(rng, uniform_int(rng, 0, 3), uniform_int(rng, 0, 3), uniform_int(rng, 0, 1),
                                              uniform_int(rng, 0, 8), uniform(rng, 0.0, 60.0));
        if (ep.chargers.empty()) ep.chargers.push_back(make_bidirectional_charger(0));
        SimContext ctx(ep);
        const Trace tr = make_trace(ep, static_cast<std::uint64_t>(trial));
        const SystemState s = v2b::testing::random_state(ctx, tr, rng, uniform(rng, 0.0, 150.0));
        PruningConfig cfg;
        cfg.beta = uniform_int(rng, 0, 2);
        cfg.offset_steps = uniform_int(rng, 0, 2);
        cfg.include_boundary = uniform_int(rng, 0, 1) == 1;
        cfg.joint_cap = static_cast<std::size_t>(uniform_int(rng, 4, 600));
        Action anchor{std::vector<double>(ctx.num_chargers(), 0.0)};
        llf_policy(ctx, s, anchor.rates);

        const bool charging = s.building_kwh / ctx.slot_hours() < effective_threshold(s);
        const std::size_t bound = static_cast<std::size_t>(2 * cfg.beta + cfg.offset_steps + 3);
        double product = 1.0;
        for (std::size_t k = 0; k < ctx.num_chargers(); ++k) {
            if (!s.chargers[k] || !ctx.chargers[k].controlled) continue;
            const int a = level_index(ctx, static_cast<int>(k), anchor.rates[k]);
            const auto cand = charger_candidates(ctx, s, static_cast<int>(k), a, cfg);
            ASSERT_EQ(cand.front(), a);
            ASSERT_LE(cand.size(), bound);
            product *= static_cast<double>(cand.size());
            const LevelBand band = soc_feasible_band(ctx, static_cast<int>(k), *s.chargers[k]);
            const int hi = *std::max_element(cand.begin(), cand.end());
            const int lo = *std::min_element(cand.begin(), cand.end());
            if (charging) ASSERT_GE(hi, std::min(a + cfg.beta, std::max(band.hi, a)));
            else ASSERT_LE(lo, std::max(a - cfg.beta, std::min(band.lo, a)));
        }
        const auto space = generate_action_space(ctx, s, anchor, cfg, rng);
        ASSERT_EQ(space.front(), anchor);
        ASSERT_LE(static_cast<double>(space.size()), std::max(product, 1.0));
        ASSERT_LE(space.size(), std::max<std::size_t>(cfg.joint_cap, 1));
        for (const Action& act : space) {
            ASSERT_NO_THROW(check_action(ctx, s, act));
            ++actions;
        }
    }
    EXPECT_GT(actions, 10000);
}
