// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file core.hpp
 * @brief Shared domain types for the vehicle-to-building charging stack.
 *
 * Units throughout: energy in kWh, power in kW, money in USD, time in slots
 * (zero-based) unless a field name says otherwise.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace v2b {

// -----------------------------------------------------------------------------
// Errors
// -----------------------------------------------------------------------------

/// Malformed configuration or input data (CLI exit code 3).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A schedule, action or instance that violates a hard constraint (CLI exit code 2).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kEnergyEps = 1e-9;

// -----------------------------------------------------------------------------
// Time grid
// -----------------------------------------------------------------------------

/// Discretisation of one billing period into decision slots.
struct TimeGrid {
    double slot_hours = 0.25;
    int slots_per_aggregate = 1;
    int horizon_slots = 96;
    double peak_start_hour = 6.0;
    double peak_end_hour = 22.0;
    /// Days (Mon..Sun) on which peak pricing and demand metering apply.
    std::array<bool, 7> demand_days{true, true, true, true, true, true, false};
    /// Weekday of slot 0, 0 = Monday.
    int start_weekday = 0;

    int slots_per_day() const { return static_cast<int>(std::lround(24.0 / slot_hours)); }
    int num_days() const { return horizon_slots / slots_per_day(); }
    int day_of(int slot) const { return slot / slots_per_day(); }
    int weekday_of(int slot) const { return (start_weekday + day_of(slot)) % 7; }
    int slot_of_day(int slot) const { return slot % slots_per_day(); }
    double hour_of(int slot) const { return slot_of_day(slot) * slot_hours; }
    int day_start(int day) const { return day * slots_per_day(); }
    /// One past the last slot of the day containing `slot`.
    int day_end(int slot) const { return (day_of(slot) + 1) * slots_per_day(); }

    int peak_first_slot_of_day() const {
        return static_cast<int>(std::lround(peak_start_hour / slot_hours));
    }
    int peak_slots_per_day() const {
        return static_cast<int>(std::lround((peak_end_hour - peak_start_hour) / slot_hours));
    }
    double aggregate_hours() const { return slot_hours * slots_per_aggregate; }

    bool operator==(const TimeGrid&) const = default;
};

/// True iff `slot` falls in the daily peak window on a demand day.
inline bool is_peak_slot(const TimeGrid& grid, int slot) {
    if (slot < 0 || slot >= grid.horizon_slots) {
        throw std::out_of_range("slot " + std::to_string(slot) + " outside horizon");
    }
    if (!grid.demand_days[static_cast<std::size_t>(grid.weekday_of(slot))]) return false;
    const double h = grid.hour_of(slot);
    return h >= grid.peak_start_hour - 1e-9 && h < grid.peak_end_hour - 1e-9;
}

/// One aggregate metering window: `slots_per_aggregate` consecutive peak slots.
struct AggregateWindow {
    int first_slot;
    int num_slots;
};

/// All aggregate windows of the horizon in chronological order.
inline std::vector<AggregateWindow> aggregate_windows(const TimeGrid& grid) {
    std::vector<AggregateWindow> out;
    const int spd = grid.slots_per_day();
    const int first = grid.peak_first_slot_of_day();
    const int count = grid.peak_slots_per_day();
    const int tau = grid.slots_per_aggregate;
    for (int d = 0; d < grid.num_days(); ++d) {
        const int start = d * spd + first;
        if (!is_peak_slot(grid, start)) continue;
        for (int s = 0; s + tau <= count; s += tau) out.push_back({start + s, tau});
    }
    return out;
}

// -----------------------------------------------------------------------------
// Tariff
// -----------------------------------------------------------------------------

struct Tariff {
    double peak_energy_rate = 0.147;
    double offpeak_energy_rate = 0.113;
    double demand_rate = 9.62;
    double missing_soc_rate = 0.20;

    double energy_rate(const TimeGrid& grid, int slot) const {
        return is_peak_slot(grid, slot) ? peak_energy_rate : offpeak_energy_rate;
    }
    bool operator==(const Tariff&) const = default;
};

// -----------------------------------------------------------------------------
// Chargers
// -----------------------------------------------------------------------------

struct ChargerSpec {
    int id = 0;
    double rate_min_kw = 0.0;  ///< negative iff bidirectional
    double rate_max_kw = 20.0;
    bool controlled = true;
    double efficiency = 1.0;
    std::vector<double> rate_levels_kw;  ///< sorted, includes 0 for controlled chargers

    bool bidirectional() const { return rate_min_kw < 0.0; }
    bool operator==(const ChargerSpec&) const = default;
};

/// Evenly spaced levels from `min_kw` to `max_kw` inclusive.
inline std::vector<double> even_levels(double min_kw, double max_kw, double step_kw) {
    std::vector<double> out;
    const int n = static_cast<int>(std::lround((max_kw - min_kw) / step_kw));
    for (int i = 0; i <= n; ++i) out.push_back(min_kw + step_kw * i);
    return out;
}

inline ChargerSpec make_bidirectional_charger(int id, double max_kw = 20.0, double step_kw = 5.0) {
    return ChargerSpec{id, -max_kw, max_kw, true, 1.0, even_levels(-max_kw, max_kw, step_kw)};
}

inline ChargerSpec make_unidirectional_charger(int id, double max_kw = 20.0, double step_kw = 5.0) {
    return ChargerSpec{id, 0.0, max_kw, true, 1.0, even_levels(0.0, max_kw, step_kw)};
}

/// Uncontrolled chargers run at full rate until the vehicle is full.
inline ChargerSpec make_uncontrolled_charger(int id, double max_kw = 20.0) {
    return ChargerSpec{id, 0.0, max_kw, false, 1.0, {0.0, max_kw}};
}

// -----------------------------------------------------------------------------
// Vehicles and episodes
// -----------------------------------------------------------------------------

struct EvSession {
    int id = 0;
    int arrival_slot = 0;
    int window_lo = 0;  ///< departure window, inclusive
    int window_hi = 0;
    int true_departure_slot = 0;  ///< hidden from planners
    double arrival_soc_kwh = 0.0;
    double required_soc_kwh = 0.0;
    double battery_min_kwh = 0.0;
    double battery_max_kwh = 0.0;

    bool operator==(const EvSession&) const = default;
};

/// One billing period's exogenous data.
struct Episode {
    TimeGrid time_grid;
    Tariff tariff;
    std::vector<ChargerSpec> chargers;
    std::vector<EvSession> sessions;  ///< sorted by (arrival_slot, id)
    std::vector<double> building_load_kwh;

    bool operator==(const Episode&) const = default;
};

inline void sort_sessions(std::vector<EvSession>& sessions) {
    std::stable_sort(sessions.begin(), sessions.end(), [](const EvSession& a, const EvSession& b) {
        return a.arrival_slot != b.arrival_slot ? a.arrival_slot < b.arrival_slot : a.id < b.id;
    });
}

/// Violated invariants of `episode`; empty when valid.
inline std::vector<std::string> validate_episode(const Episode& episode) {
    std::vector<std::string> report;
    const TimeGrid& g = episode.time_grid;
    auto add = [&](std::string msg) { report.push_back(std::move(msg)); };

    if (!(g.slot_hours > 0.0)) add("slot duration must be positive");
    if (g.slots_per_aggregate < 1) add("slots per aggregate must be at least 1");
    if (!(g.peak_start_hour < g.peak_end_hour)) add("peak window start must precede end");
    if (g.slot_hours > 0.0) {
        const double per_day = 24.0 / g.slot_hours;
        if (std::abs(per_day - std::round(per_day)) > 1e-9) add("slot duration must divide a day");
        else if (g.horizon_slots <= 0 || g.horizon_slots % g.slots_per_day() != 0)
            add("horizon not divisible by slots per day");
        if (g.slots_per_aggregate >= 1 && g.peak_slots_per_day() % g.slots_per_aggregate != 0)
            add("peak window not divisible into aggregates");
    }
    if (g.start_weekday < 0 || g.start_weekday > 6) add("start weekday out of range");

    const Tariff& t = episode.tariff;
    if (t.peak_energy_rate < 0 || t.offpeak_energy_rate < 0 || t.demand_rate < 0 || t.missing_soc_rate < 0)
        add("negative tariff rate");
    if (!(t.missing_soc_rate > t.peak_energy_rate)) add("missing-SoC rate must exceed peak energy rate");

    for (std::size_t k = 0; k < episode.chargers.size(); ++k) {
        const ChargerSpec& c = episode.chargers[k];
        const std::string tag = "charger " + std::to_string(c.id) + ": ";
        if (c.id != static_cast<int>(k)) add(tag + "ids must be 0..N-1 in order");
        if (c.rate_min_kw > 0.0 || c.rate_max_kw < 0.0) add(tag + "rate bounds must bracket zero");
        if (!c.controlled && c.rate_min_kw != 0.0) add(tag + "uncontrolled charger cannot discharge");
        if (!(c.efficiency > 0.0 && c.efficiency <= 1.0)) add(tag + "efficiency outside (0,1]");
        if (c.rate_levels_kw.empty()) add(tag + "no rate levels");
        if (!std::is_sorted(c.rate_levels_kw.begin(), c.rate_levels_kw.end())) add(tag + "rate levels unsorted");
        for (double l : c.rate_levels_kw)
            if (l < c.rate_min_kw - 1e-9 || l > c.rate_max_kw + 1e-9) add(tag + "rate level outside bounds");
        if (c.controlled && std::none_of(c.rate_levels_kw.begin(), c.rate_levels_kw.end(),
                                         [](double l) { return std::abs(l) < 1e-12; }))
            add(tag + "controlled charger lacks a zero level");
    }

    if (static_cast<int>(episode.building_load_kwh.size()) != g.horizon_slots) add("load length mismatch");
    for (double b : episode.building_load_kwh)
        if (!(b >= 0.0)) {
            add("negative building load");
            break;
        }

    for (std::size_t i = 0; i < episode.sessions.size(); ++i) {
        const EvSession& s = episode.sessions[i];
        const std::string tag = "session " + std::to_string(s.id) + ": ";
        if (s.arrival_slot >= s.window_lo) add(tag + "arrival after departure window");
        if (s.window_lo > s.window_hi) add(tag + "empty departure window");
        if (s.true_departure_slot < s.window_lo || s.true_departure_slot > s.window_hi)
            add(tag + "true departure outside window");
        if (s.arrival_slot < 0 || s.true_departure_slot > g.horizon_slots) add(tag + "outside horizon");
        if (s.battery_min_kwh > s.arrival_soc_kwh || s.arrival_soc_kwh > s.battery_max_kwh)
            add(tag + "arrival SoC outside battery bounds");
        if (s.battery_min_kwh > s.required_soc_kwh || s.required_soc_kwh > s.battery_max_kwh)
            add(tag + "required SoC outside battery bounds");
        if (i > 0) {
            const EvSession& p = episode.sessions[i - 1];
            if (p.arrival_slot > s.arrival_slot || (p.arrival_slot == s.arrival_slot && p.id >= s.id))
                add(tag + "sessions not sorted by arrival");
        }
    }
    return report;
}

inline void require_valid(const Episode& episode) {
    const auto report = validate_episode(episode);
    if (!report.empty()) throw ConfigError("invalid episode: " + report.front());
}

// -----------------------------------------------------------------------------
// Battery model
// -----------------------------------------------------------------------------

/// Charging-rate multiplier as a function of SoC fraction.
struct BatteryModel {
    enum class Kind { linear, piecewise };
    Kind kind = Kind::linear;
    /// (soc_fraction, multiplier); repeated fractions encode a step.
    std::vector<std::pair<double, double>> breakpoints{{0.0, 1.0}, {0.8, 1.0}, {0.8, 0.5}, {1.0, 0.5}};

    static BatteryModel piecewise() { return BatteryModel{Kind::piecewise, {{0.0, 1.0}, {0.8, 1.0}, {0.8, 0.5}, {1.0, 0.5}}}; }

    double multiplier(double soc_fraction) const {
        if (kind == Kind::linear) return 1.0;
        const double x = std::clamp(soc_fraction, 0.0, 1.0);
        // Right-continuous at steps: take the last breakpoint segment containing x.
        double m = breakpoints.back().second;
        for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
            const auto [x0, m0] = breakpoints[i];
            const auto [x1, m1] = breakpoints[i + 1];
            if (x >= x0 && x < x1) {
                m = x1 > x0 ? m0 + (m1 - m0) * (x - x0) / (x1 - x0) : m1;
            }
        }
        return m;
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> out;
        if (kind == Kind::linear) return out;
        if (breakpoints.size() < 2) out.push_back("piecewise model needs at least two breakpoints");
        for (std::size_t i = 0; i < breakpoints.size(); ++i) {
            if (!(breakpoints[i].second > 0.0 && breakpoints[i].second <= 1.0)) out.push_back("multiplier outside (0,1]");
            if (i > 0 && breakpoints[i].first < breakpoints[i - 1].first) out.push_back("breakpoints unsorted");
        }
        if (!breakpoints.empty() && (breakpoints.front().first != 0.0 || breakpoints.back().first != 1.0))
            out.push_back("breakpoints must cover [0,1]");
        return out;
    }
};

// -----------------------------------------------------------------------------
// MDP state and action
// -----------------------------------------------------------------------------

/// Planner-visible view of a vehicle plugged into a charger.
struct ConnectedEv {
    int session_id = -1;
    double soc_kwh = 0.0;
    int arrival_slot = 0;
    int window_lo = 0;
    int window_hi = 0;
    int est_departure = 0;
    double required_kwh = 0.0;
    double battery_min_kwh = 0.0;
    double battery_max_kwh = 0.0;
    /// Cursor into the exogenous trace driving this state (simulator bookkeeping).
    int trace_index = -1;
};

/// Pre-decision state at `slot`.
struct SystemState {
    int slot = 0;
    double building_kwh = 0.0;  ///< realized load of the current slot
    std::vector<std::optional<ConnectedEv>> chargers;  ///< occupancy by charger index
    double peak_estimate_kw = 0.0;
    double running_peak_kw = 0.0;  ///< max aggregate power seen this billing period
    double accrued_energy_cost = 0.0;
    double window_energy_kwh = 0.0;  ///< partial sum of the open aggregate window
    int next_arrival = 0;  ///< cursor into the trace's arrival list

    int occupied_count() const {
        int n = 0;
        for (const auto& c : chargers) n += c.has_value();
        return n;
    }
    const ConnectedEv* find_session(int session_id) const {
        for (const auto& c : chargers)
            if (c && c->session_id == session_id) return &*c;
        return nullptr;
    }
};

/// Per-charger energy for one slot (kWh, negative = discharge).
struct Action {
    std::vector<double> rates;

    bool operator==(const Action&) const = default;
};

/// Bill decomposition.
struct BillBreakdown {
    double energy_cost = 0.0;
    double demand_cost = 0.0;
    double missing_soc_cost = 0.0;
    double total = 0.0;
    double peak_kw = 0.0;
};

}  // namespace v2b
