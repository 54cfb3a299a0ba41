// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file env.hpp
 * @brief The charging MDP: FCFS assignment, battery dynamics, uncontrolled
 *        charger forcing and the slot-to-slot transition.
 *
 * Intra-slot order: the action for slot t applies, then the clock advances,
 * vehicles whose departure equals t+1 leave, and arrivals at t+1 are assigned.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "v2b/billing.hpp"
#include "v2b/core.hpp"

namespace v2b {

/// Static per-episode data shared by the simulator and the planners.
struct SimContext {
    TimeGrid grid;
    Tariff tariff;
    std::vector<ChargerSpec> chargers;
    BatteryModel battery;
    SlotCalendar calendar;
    std::vector<int> assignment_order;  ///< charger indices by FCFS priority
    std::vector<std::vector<double>> level_kwh;  ///< rate levels times slot length
    std::vector<int> zero_level;                 ///< index of the 0 level, -1 if none

    SimContext() = default;
    SimContext(const Episode& ep, BatteryModel model = {})
        : grid(ep.time_grid), tariff(ep.tariff), chargers(ep.chargers), battery(std::move(model)),
          calendar(ep.time_grid, ep.tariff) {
        for (const ChargerSpec& c : chargers) {
            std::vector<double> lv;
            int zero = -1;
            for (double l : c.rate_levels_kw) {
                if (std::abs(l) < 1e-12) zero = static_cast<int>(lv.size());
                lv.push_back(l * grid.slot_hours);
            }
            level_kwh.push_back(std::move(lv));
            zero_level.push_back(zero);
        }
        assignment_order.resize(chargers.size());
        std::iota(assignment_order.begin(), assignment_order.end(), 0);
        // bidirectional-controlled, unidirectional-controlled, uncontrolled; faster first.
        auto rank = [&](int k) {
            const ChargerSpec& c = chargers[static_cast<std::size_t>(k)];
            return !c.controlled ? 2 : (c.bidirectional() ? 0 : 1);
        };
        std::stable_sort(assignment_order.begin(), assignment_order.end(), [&](int a, int b) {
            if (rank(a) != rank(b)) return rank(a) < rank(b);
            return chargers[static_cast<std::size_t>(a)].rate_max_kw > chargers[static_cast<std::size_t>(b)].rate_max_kw;
        });
    }

    std::size_t num_chargers() const { return chargers.size(); }
    double slot_hours() const { return grid.slot_hours; }
};

/// Exogenous inputs a state evolves under: arrivals, true departures, load.
struct Trace {
    std::vector<EvSession> sessions;  ///< sorted by (arrival_slot, id)
    std::vector<int> est_departure;   ///< planner-visible departure estimate per session
    std::vector<double> load;         ///< building load from `first_slot`
    int first_slot = 0;
    int end_slot = 0;  ///< exclusive

    double load_at(int slot) const {
        const int i = slot - first_slot;
        return (i >= 0 && i < static_cast<int>(load.size())) ? load[static_cast<std::size_t>(i)] : 0.0;
    }
};

/// splitmix64: stateless hash used to draw per-session estimates reproducibly.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform slot in [lo, hi] determined by (seed, key).
inline int hashed_uniform(std::uint64_t seed, std::uint64_t key, int lo, int hi) {
    const std::uint64_t h = mix_seed(seed ^ mix_seed(key));
    return lo + static_cast<int>(h % static_cast<std::uint64_t>(hi - lo + 1));
}

/// Full-information trace of an episode; departure estimates are uniform draws keyed by `estimate_seed`.
inline Trace make_trace(const Episode& ep, std::uint64_t estimate_seed) {
    Trace tr;
    tr.sessions = ep.sessions;
    tr.load = ep.building_load_kwh;
    tr.first_slot = 0;
    tr.end_slot = ep.time_grid.horizon_slots;
    tr.est_departure.reserve(ep.sessions.size());
    for (const EvSession& s : ep.sessions)
        tr.est_departure.push_back(hashed_uniform(estimate_seed, static_cast<std::uint64_t>(s.id), s.window_lo, s.window_hi));
    return tr;
}

// -----------------------------------------------------------------------------
// Rates
// -----------------------------------------------------------------------------

/// Rate an uncontrolled charger must deliver this slot.
inline double forced_rate(const SimContext& ctx, int charger, const ConnectedEv& ev) {
    const ChargerSpec& c = ctx.chargers[static_cast<std::size_t>(charger)];
    return ev.soc_kwh < ev.battery_max_kwh - 1e-9 ? c.rate_max_kw * ctx.slot_hours() : 0.0;
}

/// Partial action over uncontrolled chargers (zero elsewhere).
inline Action forced_rates(const SimContext& ctx, const SystemState& state) {
    Action a{std::vector<double>(ctx.num_chargers(), 0.0)};
    for (std::size_t k = 0; k < ctx.num_chargers(); ++k)
        if (!ctx.chargers[k].controlled && state.chargers[k]) a.rates[k] = forced_rate(ctx, static_cast<int>(k), *state.chargers[k]);
    return a;
}

/// Grid-side energy of a requested rate (discharge reaches the building at efficiency eta).
inline double grid_energy(const ChargerSpec& c, double rate_kwh) {
    return rate_kwh >= 0.0 ? rate_kwh : c.efficiency * rate_kwh;
}

/// Throws InfeasibleError unless `action` is admissible at `state`.
inline void check_action(const SimContext& ctx, const SystemState& state, const Action& action) {
    if (action.rates.size() != ctx.num_chargers()) throw InfeasibleError("action size does not match charger count");
    double net = state.building_kwh;
    for (std::size_t k = 0; k < ctx.num_chargers(); ++k) {
        const ChargerSpec& c = ctx.chargers[k];
        const double r = action.rates[k];
        const auto& ev = state.chargers[k];
        if (!ev) {
            if (std::abs(r) > 1e-9) throw InfeasibleError("nonzero rate on vacant charger " + std::to_string(k));
            continue;
        }
        if (!c.controlled) {
            if (std::abs(r - forced_rate(ctx, static_cast<int>(k), *ev)) > 1e-9)
                throw InfeasibleError("uncontrolled charger " + std::to_string(k) + " must run at its forced rate");
        } else {
            const bool on_level = std::any_of(c.rate_levels_kw.begin(), c.rate_levels_kw.end(),
                                              [&](double l) { return std::abs(l * ctx.slot_hours() - r) < 1e-9; });
            if (!on_level) throw InfeasibleError("rate outside charger levels on charger " + std::to_string(k));
        }
        net += grid_energy(c, r);
    }
    if (net < -1e-9) throw InfeasibleError("discharge exceeds building load at slot " + std::to_string(state.slot));
}

// -----------------------------------------------------------------------------
// Transition
// -----------------------------------------------------------------------------

struct NullSink {
    void on_departure(const SessionOutcome&) {}
    void on_window(double) {}
};

struct StepInfo {
    int slot = 0;
    double building_kwh = 0.0;
    double grid_kwh = 0.0;  ///< building + net charging actually drawn
    double energy_cost = 0.0;
    double window_pi_kw = -1.0;  ///< completed aggregate power, or -1
};

inline ConnectedEv connect(const Trace& trace, int index) {
    const EvSession& s = trace.sessions[static_cast<std::size_t>(index)];
    ConnectedEv ev;
    ev.session_id = s.id;
    ev.soc_kwh = s.arrival_soc_kwh;
    ev.arrival_slot = s.arrival_slot;
    ev.window_lo = s.window_lo;
    ev.window_hi = s.window_hi;
    ev.est_departure = trace.est_departure.empty() ? s.window_lo : trace.est_departure[static_cast<std::size_t>(index)];
    ev.required_kwh = s.required_soc_kwh;
    ev.battery_min_kwh = s.battery_min_kwh;
    ev.battery_max_kwh = s.battery_max_kwh;
    ev.trace_index = index;
    return ev;
}

/**
 * Assign every trace arrival with arrival_slot <= state.slot that the cursor
 * has not consumed. Same-slot arrivals go in descending required SoC; each
 * takes the highest-priority vacant charger. Vehicles finding no charger are
 * reported through `sink` as unserved, leaving at their arrival SoC.
 */
template <class Sink>
void assign_chargers(const SimContext& ctx, const Trace& trace, SystemState& state, Sink& sink) {
    const int n = static_cast<int>(trace.sessions.size());
    while (state.next_arrival < n && trace.sessions[static_cast<std::size_t>(state.next_arrival)].arrival_slot <= state.slot) {
        const int slot = trace.sessions[static_cast<std::size_t>(state.next_arrival)].arrival_slot;
        int end = state.next_arrival;
        while (end < n && trace.sessions[static_cast<std::size_t>(end)].arrival_slot == slot) ++end;
        int batch[64];
        std::vector<int> big;
        int* order = batch;
        const int count = end - state.next_arrival;
        if (count > 64) {
            big.resize(static_cast<std::size_t>(count));
            order = big.data();
        }
        for (int i = 0; i < count; ++i) order[i] = state.next_arrival + i;
        std::stable_sort(order, order + count, [&](int a, int b) {
            return trace.sessions[static_cast<std::size_t>(a)].required_soc_kwh >
                   trace.sessions[static_cast<std::size_t>(b)].required_soc_kwh;
        });
        for (int i = 0; i < count; ++i) {
            const EvSession& s = trace.sessions[static_cast<std::size_t>(order[i])];
            bool placed = false;
            if (s.true_departure_slot > state.slot) {
                for (int k : ctx.assignment_order) {
                    auto& slot_k = state.chargers[static_cast<std::size_t>(k)];
                    if (!slot_k) {
                        slot_k = connect(trace, order[i]);
                        placed = true;
                        break;
                    }
                }
            }
            if (!placed) sink.on_departure(SessionOutcome{s.id, s.arrival_soc_kwh, s.required_soc_kwh, s.battery_max_kwh, false});
        }
        state.next_arrival = end;
    }
}

/// State at `slot` with no vehicle connected yet; arrivals at `slot` are assigned.
template <class Sink = NullSink>
SystemState initial_state(const SimContext& ctx, const Trace& trace, int slot, double peak_estimate_kw, Sink&& sink = {}) {
    SystemState s;
    s.slot = slot;
    s.chargers.assign(ctx.num_chargers(), std::nullopt);
    s.peak_estimate_kw = peak_estimate_kw;
    s.building_kwh = trace.load_at(slot);
    s.next_arrival = 0;
    while (s.next_arrival < static_cast<int>(trace.sessions.size()) &&
           trace.sessions[static_cast<std::size_t>(s.next_arrival)].arrival_slot < slot)
        ++s.next_arrival;
    assign_chargers(ctx, trace, s, sink);
    return s;
}

/**
 * Apply `rates` for the current slot and advance to the next pre-decision
 * state. Charging is scaled by the battery multiplier and truncated at the
 * SoC bounds; if truncation would make the site export, discharges are
 * curtailed in charger order. `realized`, when non-empty, receives the
 * grid-side energy per charger.
 */
template <class Sink>
StepInfo step(const SimContext& ctx, const Trace& trace, SystemState& state, std::span<const double> rates, Sink& sink,
              std::span<double> realized = {}) {
    const std::size_t n = ctx.num_chargers();
    const int t = state.slot;
    double local[64];
    std::vector<double> big;
    double* grid = local;
    if (n > 64) {
        big.resize(n);
        grid = big.data();
    }
    double net = state.building_kwh;
    for (std::size_t k = 0; k < n; ++k) {
        grid[k] = 0.0;
        auto& ev = state.chargers[k];
        if (!ev) continue;
        const ChargerSpec& c = ctx.chargers[k];
        const double r = rates[k];
        if (r > 0.0) {
            double e = r * ctx.battery.multiplier(ev->soc_kwh / ev->battery_max_kwh);
            e = std::min(e, std::max(0.0, (ev->battery_max_kwh - ev->soc_kwh) / c.efficiency));
            ev->soc_kwh = std::min(ev->battery_max_kwh, ev->soc_kwh + c.efficiency * e);
            grid[k] = e;
        } else if (r < 0.0) {
            const double d = std::min(-r, std::max(0.0, ev->soc_kwh - ev->battery_min_kwh));
            ev->soc_kwh -= d;
            grid[k] = -c.efficiency * d;
        }
        net += grid[k];
    }
    if (net < 0.0) {
        for (std::size_t k = 0; k < n && net < 0.0; ++k) {
            if (grid[k] >= 0.0) continue;
            const double give_back = std::min(-grid[k], -net);
            grid[k] += give_back;
            net += give_back;
            state.chargers[k]->soc_kwh += give_back / ctx.chargers[k].efficiency;
        }
    }
    if (!realized.empty())
        for (std::size_t k = 0; k < n; ++k) realized[k] = grid[k];

    StepInfo info;
    info.slot = t;
    info.building_kwh = state.building_kwh;
    info.grid_kwh = std::max(0.0, net);
    info.energy_cost = ctx.calendar.price[static_cast<std::size_t>(t)] * info.grid_kwh;
    state.accrued_energy_cost += info.energy_cost;

    if (ctx.calendar.window_of[static_cast<std::size_t>(t)] >= 0) {
        state.window_energy_kwh += info.grid_kwh;
        if (ctx.calendar.closes_window(t)) {
            info.window_pi_kw = state.window_energy_kwh / ctx.grid.aggregate_hours();
            state.running_peak_kw = std::max(state.running_peak_kw, info.window_pi_kw);
            state.window_energy_kwh = 0.0;
            sink.on_window(info.window_pi_kw);
        }
    }

    state.slot = t + 1;
    for (std::size_t k = 0; k < n; ++k) {
        auto& ev = state.chargers[k];
        if (!ev) continue;
        if (trace.sessions[static_cast<std::size_t>(ev->trace_index)].true_departure_slot <= state.slot) {
            sink.on_departure(SessionOutcome{ev->session_id, ev->soc_kwh, ev->required_kwh, ev->battery_max_kwh, true});
            ev.reset();
        }
    }
    assign_chargers(ctx, trace, state, sink);
    state.building_kwh = trace.load_at(state.slot);
    return info;
}

/// Step with an admissibility check first.
template <class Sink>
StepInfo checked_step(const SimContext& ctx, const Trace& trace, SystemState& state, const Action& action, Sink& sink,
                      std::span<double> realized = {}) {
    check_action(ctx, state, action);
    return step(ctx, trace, state, action.rates, sink, realized);
}

/// Collects the tallies needed for episodic scoring of a simulated trajectory.
struct TallySink {
    TrajectoryTally* tally;
    double threshold_kw;
    double missing_soc_rate;
    void on_departure(const SessionOutcome& o) { tally->add_departure(o, missing_soc_rate); }
    void on_window(double pi) { tally->add_window(pi, threshold_kw); }
};

struct RolloutResult {
    TrajectoryTally tally;
    double score = 0.0;  ///< negated shaped episodic cost
    int steps = 0;
};

/**
 * Simulate `policy` from `state` for at most `horizon` slots (stopping at the
 * trace end) and score the trajectory. `policy(state, rates)` fills `rates`.
 * Vehicles still plugged in at the end add their SoC fraction to the tally.
 */
template <class Policy>
RolloutResult rollout(const SimContext& ctx, const Trace& trace, SystemState state, Policy&& policy, int horizon,
                      double threshold_kw, const RewardShaping& shaping) {
    RolloutResult res;
    TallySink sink{&res.tally, threshold_kw, ctx.tariff.missing_soc_rate};
    std::vector<double> rates(ctx.num_chargers(), 0.0);
    while (res.steps < horizon && state.slot < trace.end_slot) {
        policy(state, rates);
        res.tally.energy_cost += step(ctx, trace, state, rates, sink).energy_cost;
        ++res.steps;
    }
    for (const auto& ev : state.chargers)
        if (ev) res.tally.soc_fraction_sum += ev->soc_kwh / ev->battery_max_kwh;
    res.score = rollout_score(res.tally, threshold_kw, ctx.tariff.demand_rate, shaping);
    return res;
}

}  // namespace v2b
