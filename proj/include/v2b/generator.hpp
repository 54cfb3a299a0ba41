// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file generator.hpp
 * @brief Synthetic billing-period episodes: Poisson arrivals, departure
 *        windows, SoC demands and noisy building load.
 *
 * Defaults approximate the shapes of a workplace charging site (arrivals
 * 7-10 am, departures 3-6 pm, 80 kWh packs arriving near 40% and asking for
 * 70%). They are illustrative, not fitted to any dataset.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "v2b/core.hpp"

namespace v2b {

struct ArrivalModel {
    /// Expected arrivals per hour of day on arrival days.
    std::array<double, 24> hourly_rate{0, 0, 0, 0, 0, 0, 0.5, 2.5, 4.0, 3.5, 2.0, 1.0,
                                       0.8, 0.7, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    /// Mean arrival SoC (fraction of capacity) by arrival hour.
    std::array<double, 24> arrival_soc_mean{0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4,
                                            0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4};
    double arrival_soc_std = 0.12;
    double required_soc_mean = 0.7;
    double required_soc_std = 0.08;
    double stay_mean_hours = 8.0;
    double stay_std_hours = 1.5;
    double min_stay_hours = 1.0;
    double departure_window_hours = 1.0;
    double battery_capacity_kwh = 80.0;
    double battery_min_fraction = 0.1;
    /// Days (Mon..Sun) on which vehicles arrive.
    std::array<bool, 7> arrival_days{true, true, true, true, true, false, false};

    double daily_mean() const {
        double s = 0.0;
        for (double l : hourly_rate) s += l;
        return s;
    }
};

struct LoadModel {
    /// Mean building power by hour of day (kW) on weekdays.
    std::array<double, 24> hourly_kw{28, 28, 28, 28, 28, 28, 35, 45, 55, 62, 66, 68,
                                     70, 72, 74, 72, 68, 60, 50, 42, 36, 32, 30, 28};
    double noise_std = 0.05;  ///< relative, per slot
    std::array<bool, 7> weekday_mask{true, true, true, true, true, false, false};
    double weekend_scale = 0.6;
};

struct ChargerFleet {
    int bidirectional = 5;
    int unidirectional = 10;
    int uncontrolled = 0;
    double max_kw = 20.0;
    double step_kw = 5.0;
    double efficiency = 1.0;

    std::vector<ChargerSpec> build() const {
        std::vector<ChargerSpec> out;
        int id = 0;
        for (int i = 0; i < bidirectional; ++i) out.push_back(make_bidirectional_charger(id++, max_kw, step_kw));
        for (int i = 0; i < unidirectional; ++i) out.push_back(make_unidirectional_charger(id++, max_kw, step_kw));
        for (int i = 0; i < uncontrolled; ++i) out.push_back(make_uncontrolled_charger(id++, max_kw));
        for (auto& c : out) c.efficiency = efficiency;
        return out;
    }
};

struct GeneratorConfig {
    TimeGrid grid{0.25, 1, 30 * 96, 6.0, 22.0, {true, true, true, true, true, true, false}, 0};
    Tariff tariff;
    ChargerFleet fleet;
    ArrivalModel arrivals;
    LoadModel load;

    /// Problems that would make generated sessions infeasible.
    std::vector<std::string> validate() const {
        std::vector<std::string> out;
        Episode probe;
        probe.time_grid = grid;
        probe.tariff = tariff;
        probe.chargers = fleet.build();
        probe.building_load_kwh.assign(static_cast<std::size_t>(std::max(grid.horizon_slots, 0)), 0.0);
        out = validate_episode(probe);
        for (double l : arrivals.hourly_rate)
            if (l < 0.0) out.push_back("negative arrival rate");
        const double lo = arrivals.battery_min_fraction;
        if (!(lo >= 0.0 && lo < 1.0)) out.push_back("battery minimum fraction outside [0,1)");
        if (arrivals.required_soc_mean > 1.0 || arrivals.required_soc_mean < lo)
            out.push_back("required SoC mean outside battery bounds");
        for (double m : arrivals.arrival_soc_mean)
            if (m > 1.0 || m < lo) {
                out.push_back("arrival SoC mean outside battery bounds");
                break;
            }
        if (arrivals.battery_capacity_kwh <= 0.0) out.push_back("battery capacity must be positive");
        if (arrivals.departure_window_hours < grid.slot_hours - 1e-9) out.push_back("departure window shorter than a slot");
        if (arrivals.stay_mean_hours <= 0.0 || arrivals.min_stay_hours < grid.slot_hours - 1e-9)
            out.push_back("stay duration must cover at least one slot");
        if (arrivals.arrival_soc_std < 0 || arrivals.required_soc_std < 0 || arrivals.stay_std_hours < 0 ||
            load.noise_std < 0)
            out.push_back("negative standard deviation");
        for (double kw : load.hourly_kw)
            if (kw < 0.0) {
                out.push_back("negative base load");
                break;
            }
        return out;
    }
};

/// Uniform draw over the inclusive slot interval [lo, hi].
template <class Rng>
int sample_departure(int lo, int hi, Rng& rng) {
    if (hi < lo) throw std::invalid_argument("empty departure window");
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

namespace detail {

inline double truncated_normal(std::mt19937_64& rng, double mean, double sd, double lo, double hi) {
    if (sd <= 0.0) return std::clamp(mean, lo, hi);
    std::normal_distribution<double> n(mean, sd);
    for (int i = 0; i < 64; ++i) {
        const double x = n(rng);
        if (x >= lo && x <= hi) return x;
    }
    return std::clamp(mean, lo, hi);
}

/// Window of `width` slots around `departure`, truncated to [arrival+1, last].
inline std::pair<int, int> departure_window(int departure, int width, int arrival, int last) {
    int lo = departure - width / 2;
    int hi = lo + width - 1;
    lo = std::max(lo, arrival + 1);
    hi = std::min(hi, last);
    return {std::min(lo, departure), std::max(hi, departure)};
}

inline void renumber(std::vector<EvSession>& sessions) {
    sort_sessions(sessions);
    for (std::size_t i = 0; i < sessions.size(); ++i) sessions[i].id = static_cast<int>(i);
}

}  // namespace detail

/// Deterministic in (config, seed).
inline Episode generate_episode(const GeneratorConfig& config, std::uint64_t seed) {
    if (auto problems = config.validate(); !problems.empty())
        throw ConfigError("invalid generator config: " + problems.front());

    std::mt19937_64 rng(seed);
    const TimeGrid& g = config.grid;
    const ArrivalModel& am = config.arrivals;
    const int spd = g.slots_per_day();
    const int per_hour = static_cast<int>(std::lround(1.0 / g.slot_hours));
    const int window_slots = std::max(1, static_cast<int>(std::lround(am.departure_window_hours / g.slot_hours)));
    const double cap = am.battery_capacity_kwh;
    const double lo_frac = am.battery_min_fraction;

    Episode ep;
    ep.time_grid = g;
    ep.tariff = config.tariff;
    ep.chargers = config.fleet.build();

    for (int d = 0; d < g.num_days(); ++d) {
        const int weekday = (g.start_weekday + d) % 7;
        const int day0 = d * spd;
        const int last = day0 + spd - 1;
        if (!am.arrival_days[static_cast<std::size_t>(weekday)]) continue;
        for (int h = 0; h < 24; ++h) {
            const double lambda = am.hourly_rate[static_cast<std::size_t>(h)];
            if (lambda <= 0.0) continue;
            const int count = std::poisson_distribution<int>(lambda)(rng);
            for (int i = 0; i < count; ++i) {
                EvSession s;
                s.arrival_slot = day0 + h * per_hour + std::uniform_int_distribution<int>(0, std::max(per_hour - 1, 0))(rng);
                const double stay = detail::truncated_normal(rng, am.stay_mean_hours, am.stay_std_hours,
                                                             am.min_stay_hours, 24.0);
                const double arr_frac = detail::truncated_normal(rng, am.arrival_soc_mean[static_cast<std::size_t>(h)],
                                                                 am.arrival_soc_std, lo_frac, 1.0);
                const double req_frac =
                    detail::truncated_normal(rng, am.required_soc_mean, am.required_soc_std, lo_frac, 1.0);
                if (s.arrival_slot >= last) continue;
                s.true_departure_slot =
                    std::clamp(s.arrival_slot + static_cast<int>(std::lround(stay / g.slot_hours)), s.arrival_slot + 1, last);
                std::tie(s.window_lo, s.window_hi) =
                    detail::departure_window(s.true_departure_slot, window_slots, s.arrival_slot, last);
                s.battery_max_kwh = cap;
                s.battery_min_kwh = lo_frac * cap;
                s.arrival_soc_kwh = std::clamp(arr_frac * cap, s.battery_min_kwh, s.battery_max_kwh);
                s.required_soc_kwh = std::clamp(req_frac * cap, s.battery_min_kwh, s.battery_max_kwh);
                ep.sessions.push_back(s);
            }
        }
    }
    detail::renumber(ep.sessions);

    const LoadModel& lm = config.load;
    std::normal_distribution<double> noise(0.0, 1.0);
    ep.building_load_kwh.resize(static_cast<std::size_t>(g.horizon_slots));
    for (int t = 0; t < g.horizon_slots; ++t) {
        const bool weekday = lm.weekday_mask[static_cast<std::size_t>(g.weekday_of(t))];
        const int hour = static_cast<int>(g.hour_of(t));
        const double base = lm.hourly_kw[static_cast<std::size_t>(hour)] * g.slot_hours * (weekday ? 1.0 : lm.weekend_scale);
        ep.building_load_kwh[static_cast<std::size_t>(t)] = std::max(0.0, base * (1.0 + lm.noise_std * noise(rng)));
    }
    return ep;
}

/// Exploration-sample perturbations used in sensitivity analysis.
enum class Perturbation { more_evs, fewer_evs, building_load_factor };

inline Episode perturb_episode(const Episode& episode, Perturbation mode, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Episode out = episode;
    std::bernoulli_distribution coin(0.25);
    switch (mode) {
    case Perturbation::more_evs: {
        // Each session gains a twin with probability 1/4: +25% in expectation.
        std::vector<EvSession> extra;
        for (const EvSession& s : episode.sessions)
            if (coin(rng)) extra.push_back(s);
        out.sessions.insert(out.sessions.end(), extra.begin(), extra.end());
        // Twins keep their arrival slot; renumbering keeps ids unique.
        detail::renumber(out.sessions);
        break;
    }
    case Perturbation::fewer_evs: {
        out.sessions.clear();
        for (const EvSession& s : episode.sessions)
            if (!coin(rng)) out.sessions.push_back(s);
        detail::renumber(out.sessions);
        break;
    }
    case Perturbation::building_load_factor: {
        const double factor = std::bernoulli_distribution(0.5)(rng) ? 1.1 : 0.9;
        for (double& b : out.building_load_kwh) b *= factor;
        break;
    }
    }
    return out;
}

}  // namespace v2b
