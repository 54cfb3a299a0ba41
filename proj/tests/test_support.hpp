// SPDX-License-Identifier: Apache-2.0
#pragma once

// Random instances shared by the test binaries.

#include <random>
#include <vector>

#include "v2b/core.hpp"
#include "v2b/env.hpp"
#include "v2b/generator.hpp"

namespace v2b::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// One Monday at 15-minute resolution with the given fleet and random sessions.
inline Episode random_day(Rng& rng, int n_bi, int n_uni, int n_unc, int n_sessions, double load_kw = 60.0) {
    Episode ep;
    ep.time_grid.horizon_slots = 96;
    ChargerFleet fleet;
    fleet.bidirectional = n_bi;
    fleet.unidirectional = n_uni;
    fleet.uncontrolled = n_unc;
    ep.chargers = fleet.build();
    for (int t = 0; t < 96; ++t) ep.building_load_kwh.push_back(uniform(rng, 0.3, 1.0) * load_kw * 0.25);
    for (int i = 0; i < n_sessions; ++i) {
        EvSession s;
        s.id = i;
        s.arrival_slot = uniform_int(rng, 0, 80);
        const int dep = uniform_int(rng, s.arrival_slot + 1, 95);
        s.window_lo = std::max(s.arrival_slot + 1, dep - uniform_int(rng, 0, 3));
        s.window_hi = std::min(95, dep + uniform_int(rng, 0, 3));
        s.true_departure_slot = dep;
        s.battery_max_kwh = uniform(rng, 40.0, 90.0);
        s.battery_min_kwh = 0.1 * s.battery_max_kwh;
        s.arrival_soc_kwh = uniform(rng, s.battery_min_kwh, s.battery_max_kwh);
        s.required_soc_kwh = uniform(rng, s.battery_min_kwh, s.battery_max_kwh);
        ep.sessions.push_back(s);
    }
    detail::renumber(ep.sessions);
    return ep;
}

/**
 * Tiny instance on an 8-slot day (3 h slots, peak 06-21): at most two
 * chargers with three levels each and three sessions of at most four slots
 * whose SoC values sit on the level lattice.
 */
inline Episode tiny_episode(Rng& rng) {
    Episode ep;
    TimeGrid& g = ep.time_grid;
    g.slot_hours = 3.0;
    g.horizon_slots = 8;
    g.peak_start_hour = 6.0;
    g.peak_end_hour = 21.0;
    g.slots_per_aggregate = uniform_int(rng, 0, 1) ? 1 : 5;
    const int n_chargers = uniform_int(rng, 1, 2);
    for (int k = 0; k < n_chargers; ++k) {
        const double step = 1.0;  // 3 kWh per slot
        ChargerSpec c = uniform_int(rng, 0, 1) ? make_bidirectional_charger(k, step, step)
                                               : ChargerSpec{k, 0.0, 2 * step, true, 1.0, {0.0, step, 2 * step}};
        ep.chargers.push_back(c);
    }
    const double u = 3.0;
    for (int t = 0; t < 8; ++t) ep.building_load_kwh.push_back(uniform_int(rng, 0, 3) * u + uniform(rng, 0.0, 2.0));
    const int n = uniform_int(rng, 0, 3);
    for (int i = 0; i < n; ++i) {
        EvSession s;
        s.id = i;
        s.arrival_slot = uniform_int(rng, 0, 6);
        s.true_departure_slot = uniform_int(rng, s.arrival_slot + 1, std::min(8, s.arrival_slot + 4));
        s.window_lo = s.true_departure_slot;
        s.window_hi = s.true_departure_slot;
        s.battery_min_kwh = 0.0;
        s.battery_max_kwh = u * uniform_int(rng, 3, 6);
        s.arrival_soc_kwh = u * uniform_int(rng, 0, static_cast<int>(s.battery_max_kwh / u));
        s.required_soc_kwh = uniform(rng, 0.0, s.battery_max_kwh);
        ep.sessions.push_back(s);
    }
    detail::renumber(ep.sessions);
    return ep;
}

/// Pre-decision state drawn by simulating `ep` under random admissible rates for a random number of slots.
inline SystemState random_state(const SimContext& ctx, const Trace& trace, Rng& rng, double peak_kw) {
    SystemState s = initial_state(ctx, trace, 0, peak_kw);
    const int stop = uniform_int(rng, 0, trace.end_slot - 1);
    NullSink sink;
    while (s.slot < stop) {
        Action a = forced_rates(ctx, s);
        double net = s.building_kwh;
        for (std::size_t k = 0; k < ctx.num_chargers(); ++k) {
            if (!s.chargers[k]) continue;
            if (ctx.chargers[k].controlled) {
                const auto& lv = ctx.level_kwh[k];
                a.rates[k] = lv[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(lv.size()) - 1))];
                if (net + grid_energy(ctx.chargers[k], a.rates[k]) < 0.0) a.rates[k] = 0.0;
            }
            net += grid_energy(ctx.chargers[k], a.rates[k]);
        }
        step(ctx, trace, s, a.rates, sink);
    }
    return s;
}

}  // namespace v2b::testing
