// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file billing.hpp
 * @brief Time-of-use energy cost, demand charge, missing-SoC penalty and the
 *        reward signals derived from them.
 */

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "v2b/core.hpp"

namespace v2b {

/// Per-slot tariff lookups precomputed for a grid.
struct SlotCalendar {
    std::vector<double> price;        ///< $/kWh per slot
    std::vector<char> peak;           ///< demand-metered slot
    std::vector<int> window_of;       ///< aggregate window index or -1
    std::vector<AggregateWindow> windows;

    SlotCalendar() = default;
    SlotCalendar(const TimeGrid& grid, const Tariff& tariff) {
        const int n = grid.horizon_slots;
        price.resize(n);
        peak.resize(n);
        window_of.assign(n, -1);
        for (int t = 0; t < n; ++t) {
            peak[t] = is_peak_slot(grid, t);
            price[t] = peak[t] ? tariff.peak_energy_rate : tariff.offpeak_energy_rate;
        }
        windows = aggregate_windows(grid);
        for (std::size_t j = 0; j < windows.size(); ++j)
            for (int i = 0; i < windows[j].num_slots; ++i) window_of[windows[j].first_slot + i] = static_cast<int>(j);
    }
    /// True when `slot` is the last slot of its aggregate window.
    bool closes_window(int slot) const {
        const int j = window_of[slot];
        return j >= 0 && slot == windows[j].first_slot + windows[j].num_slots - 1;
    }
};

/// Reward-shaping constants; applied inside planner rollouts only.
struct RewardShaping {
    double penalty_missing_soc = 0.5;       ///< per missing kWh at departure
    double penalty_exceed_power_gap = 5.0;  ///< per aggregate window above threshold
    double reward_meet_required_soc = 0.1;  ///< per departing vehicle at/above e_req
    double reward_maximize_soc = 0.01;      ///< per unit of final SoC fraction
};

/// Energy charge for one slot; `total_charging_kwh` is grid-side and may be negative.
inline double energy_cost_slot(const Tariff& tariff, const TimeGrid& grid, int slot, double building_kwh,
                               double total_charging_kwh) {
    if (building_kwh < 0.0) throw std::invalid_argument("negative building load");
    if (building_kwh + total_charging_kwh < -kEnergyEps)
        throw InfeasibleError("net export at slot " + std::to_string(slot));
    return tariff.energy_rate(grid, slot) * std::max(0.0, building_kwh + total_charging_kwh);
}

/// Average power of each aggregate peak window; `schedule` is per-slot total charging kWh.
inline std::vector<double> aggregate_peak_powers(const Episode& episode, std::span<const double> schedule) {
    const TimeGrid& g = episode.time_grid;
    if (static_cast<int>(schedule.size()) != g.horizon_slots)
        throw std::invalid_argument("schedule length does not match horizon");
    std::vector<double> pis;
    for (const AggregateWindow& w : aggregate_windows(g)) {
        double energy = 0.0;
        for (int i = 0; i < w.num_slots; ++i)
            energy += episode.building_load_kwh[w.first_slot + i] + schedule[w.first_slot + i];
        pis.push_back(energy / (g.slot_hours * w.num_slots));
    }
    return pis;
}

struct DemandCharge {
    double cost = 0.0;
    double peak_kw = 0.0;
};

inline DemandCharge demand_cost(std::span<const double> pis, double demand_rate) {
    if (pis.empty()) throw std::invalid_argument("no aggregate windows to meter");
    const double peak = *std::max_element(pis.begin(), pis.end());
    return {demand_rate * peak, peak};
}

/// Final state of a departed (or unserved) vehicle.
struct SessionOutcome {
    int session_id = -1;
    double final_soc_kwh = 0.0;
    double required_kwh = 0.0;
    double battery_max_kwh = 0.0;
    bool served = true;

    double deviation() const { return std::abs(final_soc_kwh - required_kwh); }
    double shortfall() const { return std::max(0.0, required_kwh - final_soc_kwh); }
};

inline double missing_soc_cost(std::span<const SessionOutcome> outcomes, double missing_soc_rate) {
    double sum = 0.0;
    for (const SessionOutcome& o : outcomes) sum += missing_soc_rate * o.deviation();
    return sum;
}

/// Bill of a per-slot charging schedule: energy + demand + missing-SoC.
inline BillBreakdown total_bill(const Episode& episode, std::span<const double> schedule,
                                std::span<const SessionOutcome> outcomes) {
    const TimeGrid& g = episode.time_grid;
    if (static_cast<int>(schedule.size()) != g.horizon_slots)
        throw std::invalid_argument("schedule length does not match horizon");
    BillBreakdown bill;
    for (int t = 0; t < g.horizon_slots; ++t)
        bill.energy_cost += energy_cost_slot(episode.tariff, g, t, episode.building_load_kwh[t], schedule[t]);
    const std::vector<double> pis = aggregate_peak_powers(episode, schedule);
    if (!pis.empty()) {
        const DemandCharge d = demand_cost(pis, episode.tariff.demand_rate);
        bill.demand_cost = d.cost;
        bill.peak_kw = d.peak_kw;
    }
    bill.missing_soc_cost = missing_soc_cost(outcomes, episode.tariff.missing_soc_rate);
    bill.total = bill.energy_cost + bill.demand_cost + bill.missing_soc_cost;
    return bill;
}

/// Building-only bill (no charging at all, every vehicle leaves at arrival SoC).
inline BillBreakdown building_only_bill(const Episode& episode) {
    std::vector<double> zero(static_cast<std::size_t>(episode.time_grid.horizon_slots), 0.0);
    return total_bill(episode, zero, {});
}

/// Cost-signed intermediate reward r^i_t.
inline double intermediate_reward(double slot_energy_cost, std::span<const SessionOutcome> departures,
                                  double missing_soc_rate) {
    return slot_energy_cost + missing_soc_cost(departures, missing_soc_rate);
}

/// Running tallies of a simulated trajectory, enough to score the episodic cost and the shaping terms.
struct TrajectoryTally {
    double energy_cost = 0.0;
    double peak_kw = 0.0;  ///< max completed aggregate power within the trajectory
    int exceed_windows = 0;
    double missing_cost = 0.0;
    double missing_kwh = 0.0;
    int met_required = 0;
    double soc_fraction_sum = 0.0;

    void add_window(double pi_kw, double threshold_kw) {
        peak_kw = std::max(peak_kw, pi_kw);
        if (pi_kw > threshold_kw + 1e-9) ++exceed_windows;
    }
    void add_departure(const SessionOutcome& o, double missing_soc_rate) {
        missing_cost += missing_soc_rate * o.deviation();
        missing_kwh += o.shortfall();
        if (o.final_soc_kwh >= o.required_kwh - 1e-6) ++met_required;
        if (o.battery_max_kwh > 0.0) soc_fraction_sum += o.final_soc_kwh / o.battery_max_kwh;
    }
};

/// Episodic cost: the demand term uses max(threshold, observed peak).
inline double episodic_cost(const TrajectoryTally& tally, double threshold_kw, double demand_rate) {
    return tally.energy_cost + demand_rate * std::max(threshold_kw, tally.peak_kw) + tally.missing_cost;
}

/// Episodic cost plus shaping terms; the planner maximises the negation.
inline double shaped_cost(const TrajectoryTally& tally, double threshold_kw, double demand_rate,
                          const RewardShaping& shaping) {
    return episodic_cost(tally, threshold_kw, demand_rate) +
           shaping.penalty_exceed_power_gap * tally.exceed_windows +
           shaping.penalty_missing_soc * tally.missing_kwh -
           shaping.reward_meet_required_soc * tally.met_required -
           shaping.reward_maximize_soc * tally.soc_fraction_sum;
}

inline double rollout_score(const TrajectoryTally& tally, double threshold_kw, double demand_rate,
                            const RewardShaping& shaping) {
    return -shaped_cost(tally, threshold_kw, demand_rate, shaping);
}

}  // namespace v2b
