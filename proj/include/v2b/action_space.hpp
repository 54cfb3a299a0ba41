// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file action_space.hpp
 * @brief Pruned joint-action candidates around an anchor action.
 *
 * Per charger the window is [a - beta, a + beta + offset] in level steps
 * when the building sits below the threshold and [a - beta - offset, a + beta]
 * otherwise, plus the two SoC-feasible extremes. The joint set is the
 * product of per-charger sets minus anything that would export power.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "v2b/heuristics.hpp"

namespace v2b {

struct PruningConfig {
    int beta = 1;
    int offset_steps = 1;
    bool include_boundary = true;
    double noise_std = 1.0;  ///< level steps; decentralized search only
    std::size_t joint_cap = 512;
    bool full_space = false;  ///< every SoC-feasible level (no pruning)
};

/// Level index of `rate` on charger k (nearest level).
inline int level_index(const SimContext& ctx, int k, double rate) {
    return level_nearest(ctx.level_kwh[static_cast<std::size_t>(k)], rate);
}

/// Candidate level indices for one charger, anchor first, ascending after that.
inline std::vector<int> charger_candidates(const SimContext& ctx, const SystemState& s, int k, int anchor_level,
                                           const PruningConfig& cfg) {
    const auto& ev = *s.chargers[static_cast<std::size_t>(k)];
    const LevelBand band = soc_feasible_band(ctx, k, ev);
    std::vector<int> out{anchor_level};
    auto add = [&](int i) {
        if (i < band.lo || i > band.hi) return;
        if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
    };
    if (cfg.full_space) {
        for (int i = band.lo; i <= band.hi; ++i) add(i);
    } else {
        const bool charging_branch = s.building_kwh / ctx.slot_hours() < effective_threshold(s);
        const int lo = anchor_level - cfg.beta - (charging_branch ? 0 : cfg.offset_steps);
        const int hi = anchor_level + cfg.beta + (charging_branch ? cfg.offset_steps : 0);
        for (int i = lo; i <= hi; ++i) add(i);
        if (cfg.include_boundary) {
            add(band.lo);
            add(band.hi);
        }
    }
    std::sort(out.begin() + 1, out.end());
    return out;
}

/// Grid-side net draw of a joint action at `s` (negative means export).
inline double net_draw(const SimContext& ctx, const SystemState& s, const std::vector<double>& rates) {
    double net = s.building_kwh;
    for (std::size_t k = 0; k < ctx.num_chargers(); ++k)
        if (s.chargers[k]) net += grid_energy(ctx.chargers[k], rates[k]);
    return net;
}

/**
 * Joint candidates, anchor first. When the product exceeds `joint_cap`,
 * a uniform sample without replacement of non-anchor combinations fills the
 * remaining slots.
 */
template <class Rng>
std::vector<Action> generate_action_space(const SimContext& ctx, const SystemState& s, const Action& anchor,
                                          const PruningConfig& cfg, Rng& rng) {
    const std::size_t n = ctx.num_chargers();
    std::vector<std::vector<int>> per(n);
    std::vector<std::size_t> dims;
    std::vector<std::size_t> free_k;
    for (std::size_t k = 0; k < n; ++k) {
        if (!s.chargers[k] || !ctx.chargers[k].controlled) continue;
        per[k] = charger_candidates(ctx, s, static_cast<int>(k), level_index(ctx, static_cast<int>(k), anchor.rates[k]), cfg);
        if (per[k].size() > 1) {
            free_k.push_back(k);
            dims.push_back(per[k].size());
        }
    }
    std::vector<Action> out{anchor};
    auto build = [&](const std::vector<std::size_t>& digits) {
        Action a = anchor;
        for (std::size_t i = 0; i < free_k.size(); ++i) {
            const std::size_t k = free_k[i];
            a.rates[k] = ctx.level_kwh[k][static_cast<std::size_t>(per[k][digits[i]])];
        }
        return a;
    };
    auto admissible = [&](const Action& a) { return net_draw(ctx, s, a.rates) >= -1e-9; };

    // Product size, saturating.
    double total = 1.0;
    for (std::size_t d : dims) total *= static_cast<double>(d);
    std::vector<std::size_t> digits(free_k.size(), 0);
    if (total <= static_cast<double>(cfg.joint_cap)) {
        // Odometer over all combinations; the all-zero digit vector is the anchor.
        while (true) {
            std::size_t i = 0;
            while (i < digits.size() && ++digits[i] == dims[i]) digits[i++] = 0;
            if (i == digits.size()) break;
            Action a = build(digits);
            if (admissible(a)) out.push_back(std::move(a));
        }
        return out;
    }
    std::set<std::vector<std::size_t>> seen;
    seen.insert(digits);
    const std::size_t attempts = cfg.joint_cap * 8;
    for (std::size_t tries = 0; tries < attempts && out.size() < cfg.joint_cap; ++tries) {
        for (std::size_t i = 0; i < digits.size(); ++i) digits[i] = std::uniform_int_distribution<std::size_t>(0, dims[i] - 1)(rng);
        if (!seen.insert(digits).second) continue;
        Action a = build(digits);
        if (admissible(a)) out.push_back(std::move(a));
    }
    return out;
}

/// Shift a level index by round(N(0, sd)) steps, clipped to [lo, hi].
template <class Rng>
int add_noise(int level, double sd, int lo, int hi, Rng& rng) {
    if (sd <= 0.0) return std::clamp(level, lo, hi);
    const int step = static_cast<int>(std::lround(std::normal_distribution<double>(0.0, sd)(rng)));
    return std::clamp(level + step, lo, hi);
}

/// Noisy copy of an anchor action: each controlled occupied charger moves independently.
template <class Rng>
Action add_noise(const SimContext& ctx, const SystemState& s, const Action& anchor, double sd, Rng& rng) {
    Action out = anchor;
    for (std::size_t k = 0; k < ctx.num_chargers(); ++k) {
        if (!s.chargers[k] || !ctx.chargers[k].controlled) continue;
        const int last = static_cast<int>(ctx.level_kwh[k].size()) - 1;
        const int i = add_noise(level_index(ctx, static_cast<int>(k), anchor.rates[k]), sd, 0, last, rng);
        out.rates[k] = ctx.level_kwh[k][static_cast<std::size_t>(i)];
    }
    return out;
}

}  // namespace v2b
