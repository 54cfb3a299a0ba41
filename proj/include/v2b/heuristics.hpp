// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file heuristics.hpp
 * @brief Trickle rate, laxity-based and deadline-based allocation, the two
 *        greedy baselines and criticality ordering.
 *
 * Policies write grid-side kWh per charger into a caller-owned buffer so
 * they can run inside rollouts without allocating.
 */

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "v2b/env.hpp"

namespace v2b {

/// Largest per-slot energy the charger can deliver (kWh).
inline double max_slot_kwh(const SimContext& ctx, int k) { return ctx.level_kwh[static_cast<std::size_t>(k)].back(); }

/// (req - soc)/(t_hat - t), floored at 0 and capped at the charger maximum;
/// once t >= t_hat the vehicle gets the maximum until it reaches e_req.
inline double trickle_rate(const SimContext& ctx, int k, const ConnectedEv& ev, int t) {
    const double need = ev.required_kwh - ev.soc_kwh;
    if (need <= 1e-9) return 0.0;
    const double cap = max_slot_kwh(ctx, k);
    const double eta = ctx.chargers[static_cast<std::size_t>(k)].efficiency;
    if (t >= ev.est_departure) return cap;
    return std::min(cap, need / eta / static_cast<double>(ev.est_departure - t));
}

/// Largest level index whose energy is <= x (first index when none is).
inline int level_floor(const std::vector<double>& lv, double x) {
    int i = static_cast<int>(std::upper_bound(lv.begin(), lv.end(), x + 1e-9) - lv.begin()) - 1;
    return std::max(i, 0);
}

/// Smallest level index whose energy is >= x (last index when none is).
inline int level_ceil(const std::vector<double>& lv, double x) {
    int i = static_cast<int>(std::lower_bound(lv.begin(), lv.end(), x - 1e-9) - lv.begin());
    return std::min(i, static_cast<int>(lv.size()) - 1);
}

/// Level index closest to `x`, ties toward zero energy.
inline int level_nearest(const std::vector<double>& lv, double x) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(lv.size()); ++i) {
        const double d = std::abs(lv[static_cast<std::size_t>(i)] - x);
        const double b = std::abs(lv[static_cast<std::size_t>(best)] - x);
        if (d < b - 1e-12 || (std::abs(d - b) <= 1e-12 && std::abs(lv[static_cast<std::size_t>(i)]) < std::abs(lv[static_cast<std::size_t>(best)])))
            best = i;
    }
    return best;
}

/// Level lying in the SoC-feasible band [lo_idx, hi_idx] of charger k for `ev`.
struct LevelBand {
    int lo = 0;
    int hi = 0;
};

/// Levels whose outcome keeps SoC inside [battery_min, battery_max] (at least the 0 level).
inline LevelBand soc_feasible_band(const SimContext& ctx, int k, const ConnectedEv& ev) {
    const auto& lv = ctx.level_kwh[static_cast<std::size_t>(k)];
    const double eta = ctx.chargers[static_cast<std::size_t>(k)].efficiency;
    const int z = std::max(ctx.zero_level[static_cast<std::size_t>(k)], 0);
    LevelBand b{z, z};
    while (b.lo > 0 && ev.soc_kwh + lv[static_cast<std::size_t>(b.lo - 1)] >= ev.battery_min_kwh - 1e-9) --b.lo;
    // One level above the headroom is still useful: the last partial top-up is truncated.
    while (b.hi + 1 < static_cast<int>(lv.size()) && ev.soc_kwh + eta * lv[static_cast<std::size_t>(b.hi)] < ev.battery_max_kwh - 1e-9)
        ++b.hi;
    return b;
}

/// Snap a non-negative target to the nearest level (ties toward zero), or up
/// when that would leave e_req out of reach even at full rate in the slots
/// left before the estimated departure. Since the target is recomputed from
/// the remaining need every slot, the snapped rates dither around it.
inline int snap_charge_level(const SimContext& ctx, int k, const ConnectedEv& ev, int t, double target) {
    const auto& lv = ctx.level_kwh[static_cast<std::size_t>(k)];
    const int z = std::max(ctx.zero_level[static_cast<std::size_t>(k)], 0);
    if (target <= 1e-12) return z;
    int i = std::max(level_nearest(lv, target), z);
    const double eta = ctx.chargers[static_cast<std::size_t>(k)].efficiency;
    const int after = std::max(0, ev.est_departure - t - 1);
    if (ev.soc_kwh + eta * (lv[static_cast<std::size_t>(i)] + lv.back() * after) < ev.required_kwh - 1e-9)
        i = level_ceil(lv, target);
    return i;
}

/// Trickle policy over the whole fleet; uncontrolled chargers get their forced rate.
inline void trickle_policy(const SimContext& ctx, const SystemState& s, std::span<double> rates) {
    for (std::size_t k = 0; k < ctx.num_chargers(); ++k) {
        rates[k] = 0.0;
        const auto& ev = s.chargers[k];
        if (!ev) continue;
        if (!ctx.chargers[k].controlled) {
            rates[k] = forced_rate(ctx, static_cast<int>(k), *ev);
            continue;
        }
        const int ki = static_cast<int>(k);
        rates[k] = ctx.level_kwh[k][static_cast<std::size_t>(snap_charge_level(ctx, ki, *ev, s.slot, trickle_rate(ctx, ki, *ev, s.slot)))];
    }
}

/// (t_hat - t)*delta - (req - soc)/q_max, in hours.
inline double criticality_score(const SimContext& ctx, int k, const ConnectedEv& ev, int t) {
    const double q = ctx.chargers[static_cast<std::size_t>(k)].rate_max_kw;
    const double need = ev.required_kwh - ev.soc_kwh;
    return (ev.est_departure - t) * ctx.slot_hours() - (q > 0.0 ? need / q : 0.0);
}

/// Occupied chargers by ascending criticality (least laxity first); ties by arrival.
inline std::vector<int> sort_by_criticality(const SimContext& ctx, const SystemState& s) {
    std::vector<int> order;
    for (std::size_t k = 0; k < ctx.num_chargers(); ++k)
        if (s.chargers[k]) order.push_back(static_cast<int>(k));
    std::vector<double> score(ctx.num_chargers(), 0.0);
    for (int k : order) score[static_cast<std::size_t>(k)] = criticality_score(ctx, k, *s.chargers[static_cast<std::size_t>(k)], s.slot);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double sa = score[static_cast<std::size_t>(a)], sb = score[static_cast<std::size_t>(b)];
        if (std::abs(sa - sb) > 1e-12) return sa < sb;
        const auto& ea = *s.chargers[static_cast<std::size_t>(a)];
        const auto& eb = *s.chargers[static_cast<std::size_t>(b)];
        if (ea.arrival_slot != eb.arrival_slot) return ea.arrival_slot < eb.arrival_slot;
        return ea.session_id < eb.session_id;
    });
    return order;
}

/// Threshold a day's plan must respect: max(estimate, peak already incurred).
inline double effective_threshold(const SystemState& s) { return std::max(s.peak_estimate_kw, s.running_peak_kw); }

enum class Priority { laxity, deadline };

struct GapPolicyOptions {
    Priority priority = Priority::laxity;
    /// Extra charge stops once SoC reaches e_req + this many kWh (capped at battery_max).
    double extra_headroom_kwh = 0.0;
};

/**
 * Power-gap allocation shared by the laxity and deadline policies. With
 * gap = threshold*delta - b_t - forced, vehicles get their trickle rate; any
 * leftover gap is handed to bidirectional vehicles in priority order, one
 * level at a time. When trickle demand exceeds the gap, bidirectional
 * vehicles are turned down (into discharge if needed) while each can still
 * reach e_req at full rate before its estimated departure.
 *
 * `fixed`, when non-empty, marks chargers whose rate in `rates` is held.
 */
inline void gap_policy(const SimContext& ctx, const SystemState& s, std::span<double> rates, const GapPolicyOptions& opt = {},
                       std::span<const char> fixed = {}) {
    const std::size_t n = ctx.num_chargers();
    const int t = s.slot;
    const double delta = ctx.slot_hours();
    double drawn = s.building_kwh;
    int idx_local[64];
    std::vector<int> idx_big;
    int* idx = idx_local;
    if (n > 64) {
        idx_big.resize(n);
        idx = idx_big.data();
    }
    std::vector<int> level(n, 0);
    std::vector<int> flexible;
    flexible.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const bool held = !fixed.empty() && fixed[k];
        const auto& ev = s.chargers[k];
        if (held) {
            drawn += ev ? grid_energy(ctx.chargers[k], rates[k]) : 0.0;
            continue;
        }
        rates[k] = 0.0;
        if (!ev) continue;
        const int ki = static_cast<int>(k);
        if (!ctx.chargers[k].controlled) {
            rates[k] = forced_rate(ctx, ki, *ev);
            drawn += rates[k];
            continue;
        }
        level[k] = snap_charge_level(ctx, ki, *ev, t, trickle_rate(ctx, ki, *ev, t));
        rates[k] = ctx.level_kwh[k][static_cast<std::size_t>(level[k])];
        drawn += rates[k];
        if (ctx.chargers[k].bidirectional()) flexible.push_back(ki);
    }
    const double limit = effective_threshold(s) * delta;
    const int m = static_cast<int>(flexible.size());
    for (int i = 0; i < m; ++i) idx[i] = flexible[static_cast<std::size_t>(i)];
    auto key = [&](int k) {
        const ConnectedEv& ev = *s.chargers[static_cast<std::size_t>(k)];
        return opt.priority == Priority::laxity ? criticality_score(ctx, k, ev, t) : static_cast<double>(ev.est_departure);
    };

    if (drawn <= limit + 1e-9) {
        // Spare capacity: most urgent first.
        std::stable_sort(idx, idx + m, [&](int a, int b) {
            const double ka = key(a), kb = key(b);
            if (std::abs(ka - kb) > 1e-12) return ka < kb;
            return s.chargers[static_cast<std::size_t>(a)]->arrival_slot < s.chargers[static_cast<std::size_t>(b)]->arrival_slot;
        });
        double spare = limit - drawn;
        for (int i = 0; i < m && spare > 1e-9; ++i) {
            const std::size_t k = static_cast<std::size_t>(idx[i]);
            const ConnectedEv& ev = *s.chargers[k];
            const auto& lv = ctx.level_kwh[k];
            const double eta = ctx.chargers[k].efficiency;
            const double ceiling = std::min(ev.battery_max_kwh, ev.required_kwh + opt.extra_headroom_kwh);
            while (level[k] + 1 < static_cast<int>(lv.size())) {
                const double next = lv[static_cast<std::size_t>(level[k] + 1)];
                const double inc = next - rates[k];
                if (inc > spare + 1e-9 || ev.soc_kwh + eta * next > ceiling + 1e-9) break;
                spare -= inc;
                ++level[k];
                rates[k] = next;
            }
        }
        return;
    }

    // Over the threshold: the laxity policy turns down the vehicles with the
    // most time left, the deadline policy those departing soonest.
    std::stable_sort(idx, idx + m, [&](int a, int b) {
        const int da = s.chargers[static_cast<std::size_t>(a)]->est_departure;
        const int db = s.chargers[static_cast<std::size_t>(b)]->est_departure;
        return opt.priority == Priority::laxity ? da > db : da < db;
    });
    double excess = drawn - limit;
    for (int i = 0; i < m && excess > 1e-9; ++i) {
        const std::size_t k = static_cast<std::size_t>(idx[i]);
        const ConnectedEv& ev = *s.chargers[k];
        const auto& lv = ctx.level_kwh[k];
        const ChargerSpec& c = ctx.chargers[k];
        const double recover = c.efficiency * lv.back() * std::max(0, ev.est_departure - t - 1);
        while (level[k] > 0 && excess > 1e-9) {
            const double next = lv[static_cast<std::size_t>(level[k] - 1)];
            const double after = next >= 0.0 ? ev.soc_kwh + c.efficiency * next : ev.soc_kwh + next;
            if (after < ev.battery_min_kwh - 1e-9) break;
            if (after + recover < ev.required_kwh - 1e-9) break;
            const double dec = grid_energy(c, rates[k]) - grid_energy(c, next);
            if (drawn - dec < -1e-9) break;  // never export
            drawn -= dec;
            excess -= dec;
            --level[k];
            rates[k] = next;
        }
    }
}

inline void llf_policy(const SimContext& ctx, const SystemState& s, std::span<double> rates, double extra_headroom_kwh = 0.0) {
    gap_policy(ctx, s, rates, {Priority::laxity, extra_headroom_kwh});
}

inline void edf_policy(const SimContext& ctx, const SystemState& s, std::span<double> rates, double extra_headroom_kwh = 0.0) {
    gap_policy(ctx, s, rates, {Priority::deadline, extra_headroom_kwh});
}

/// Smallest level covering the remaining need, capped at the maximum.
inline void req_charge_policy(const SimContext& ctx, const SystemState& s, std::span<double> rates) {
    for (std::size_t k = 0; k < ctx.num_chargers(); ++k) {
        rates[k] = 0.0;
        const auto& ev = s.chargers[k];
        if (!ev) continue;
        if (!ctx.chargers[k].controlled) {
            rates[k] = forced_rate(ctx, static_cast<int>(k), *ev);
            continue;
        }
        const double need = (ev->required_kwh - ev->soc_kwh) / ctx.chargers[k].efficiency;
        if (need > 1e-9) rates[k] = ctx.level_kwh[k][static_cast<std::size_t>(level_ceil(ctx.level_kwh[k], need))];
    }
}

/// Full rate toward battery_max on every occupied charger.
inline void max_charge_policy(const SimContext& ctx, const SystemState& s, std::span<double> rates) {
    for (std::size_t k = 0; k < ctx.num_chargers(); ++k) {
        rates[k] = 0.0;
        const auto& ev = s.chargers[k];
        if (ev && ev->soc_kwh < ev->battery_max_kwh - 1e-9) rates[k] = ctx.level_kwh[k].back();
    }
}

}  // namespace v2b
