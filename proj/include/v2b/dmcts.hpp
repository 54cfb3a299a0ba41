// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file dmcts.hpp
 * @brief Decentralized MCTS: one single-charger search per occupied
 *        controlled charger, most critical first, each conditioned on the
 *        rates already committed.
 *
 * In the searched charger's trees, committed chargers hold their rates for
 * the current slot and every other charger follows the trickle policy. The
 * iteration budget is split evenly over the chargers searched this slot
 * (each still tries every root candidate at least once).
 */

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "v2b/dgmcts.hpp"

namespace v2b {

class SingleChargerModel {
public:
    struct State {
        SystemState sys;
        TrajectoryTally tally;
        int depth = 0;
        double weight = 1.0;
    };
    using Action = double;  ///< rate for the searched charger

    SingleChargerModel(const SimContext& ctx, const Trace& trace, const SearchConfig& cfg, double threshold_kw, int charger,
                       const std::vector<double>& committed, const std::vector<char>& fixed)
        : ctx_(&ctx), trace_(&trace), cfg_(&cfg), threshold_(threshold_kw), k_(charger), committed_(&committed), fixed_(&fixed) {}

    bool terminal(const State& s) const {
        return s.sys.slot >= trace_->end_slot || s.depth >= std::max(cfg_->max_depth, 1) || !s.sys.chargers[static_cast<std::size_t>(k_)];
    }

    /// Beta-window around the charger's laxity-policy rate below the root.
    template <class Rng>
    std::vector<Action> actions(const State& s, Rng& rng) const {
        std::vector<double> rates(ctx_->num_chargers(), 0.0);
        llf_policy(*ctx_, s.sys, rates);
        const std::size_t k = static_cast<std::size_t>(k_);
        const int a = level_index(*ctx_, k_, rates[k]);
        const LevelBand band = soc_feasible_band(*ctx_, k_, *s.sys.chargers[k]);
        trickle_policy(*ctx_, s.sys, rates);
        rates[k] = 0.0;
        const double base = net_draw(*ctx_, s.sys, rates);
        std::vector<Action> out;
        for (int i : window(a, 0, band)) {
            const double r = ctx_->level_kwh[k][static_cast<std::size_t>(i)];
            if (base + grid_energy(ctx_->chargers[k], r) >= -1e-9) out.push_back(r);
        }
        if (out.size() > 1) std::shuffle(out.begin() + 1, out.end(), rng);
        return out;
    }

    /// Candidate level indices: [a - beta + shift, a + beta + shift] within the band, `a` first if inside.
    std::vector<int> window(int a, int shift, LevelBand band) const {
        std::vector<int> out;
        const int c = std::clamp(a + shift, band.lo, band.hi);
        out.push_back(c);
        for (int i = c - cfg_->pruning.beta; i <= c + cfg_->pruning.beta; ++i)
            if (i != c && i >= band.lo && i <= band.hi) out.push_back(i);
        return out;
    }

    void apply(State& s, const Action& r) const {
        std::vector<double> rates(ctx_->num_chargers(), 0.0);
        trickle_policy(*ctx_, s.sys, rates);
        if (s.depth == 0)
            for (std::size_t j = 0; j < rates.size(); ++j)
                if ((*fixed_)[j]) rates[j] = (*committed_)[j];
        rates[static_cast<std::size_t>(k_)] = r;
        advance(s, rates);
    }

    template <class Rng>
    double rollout(State s, Rng&) const {
        std::vector<double> rates(ctx_->num_chargers(), 0.0);
        while (s.sys.slot < trace_->end_slot && s.depth < cfg_->max_depth) {
            trickle_policy(*ctx_, s.sys, rates);
            advance(s, rates);
        }
        TrajectoryTally t = s.tally;
        for (const auto& ev : s.sys.chargers)
            if (ev) t.soc_fraction_sum += ev->soc_kwh / ev->battery_max_kwh;
        return rollout_score(t, threshold_, ctx_->tariff.demand_rate, cfg_->shaping);
    }

private:
    void advance(State& s, std::span<const double> rates) const {
        DiscountedSink sink{&s.tally, threshold_, ctx_->tariff.missing_soc_rate, s.weight};
        s.tally.energy_cost += s.weight * step(*ctx_, *trace_, s.sys, rates, sink).energy_cost;
        s.weight *= cfg_->gamma;
        ++s.depth;
    }

    const SimContext* ctx_;
    const Trace* trace_;
    const SearchConfig* cfg_;
    double threshold_;
    int k_;
    const std::vector<double>* committed_;
    const std::vector<char>* fixed_;
};

class DmctsPlanner {
public:
    DmctsPlanner(const SimContext& ctx, std::vector<Episode> samples, SearchConfig cfg, std::uint64_t seed)
        : ctx_(&ctx), samples_(std::move(samples)), cfg_(cfg), seed_(seed) {
        cfg_.validate();
        if (samples_.empty()) throw ConfigError("no exploration samples");
    }

    Action decide(const SystemState& s) {
        ++stats_.decisions;
        const std::size_t n = ctx_->num_chargers();
        std::vector<double> committed(n, 0.0);
        std::vector<char> fixed(n, 0);
        // Uncontrolled and vacant chargers are decided up front.
        for (std::size_t k = 0; k < n; ++k) {
            if (!s.chargers[k]) {
                fixed[k] = 1;
            } else if (!ctx_->chargers[k].controlled) {
                committed[k] = forced_rate(*ctx_, static_cast<int>(k), *s.chargers[k]);
                fixed[k] = 1;
            }
        }
        std::vector<int> order;
        for (int k : sort_by_criticality(*ctx_, s))
            if (ctx_->chargers[static_cast<std::size_t>(k)].controlled) order.push_back(k);
        if (order.empty()) return Action{committed};
        ++stats_.searches;

        const double threshold = effective_threshold(s);
        const int trees = cfg_.exploration_samples;
        std::mt19937_64 shared(mix_seed(seed_ ^ mix_seed(static_cast<std::uint64_t>(s.slot) * 2654435761ULL + 7)));
        const long budget = std::max<long>(1, cfg_.iterations / static_cast<long>(order.size()));

        for (int k : order) {
            const std::size_t ku = static_cast<std::size_t>(k);
            // Anchor: laxity policy given what is already committed.
            std::vector<double> anchor = committed;
            gap_policy(*ctx_, s, anchor, {Priority::laxity, 0.0}, fixed);
            const int a = level_index(*ctx_, k, anchor[ku]);
            const LevelBand band = soc_feasible_band(*ctx_, k, *s.chargers[ku]);
            double base = s.building_kwh;
            for (std::size_t j = 0; j < n; ++j)
                if (fixed[j] && s.chargers[j]) base += grid_energy(ctx_->chargers[j], committed[j]);

            std::vector<std::map<int, std::pair<long, double>>> per_tree(static_cast<std::size_t>(trees));
            std::vector<UctStats> tree_stats(static_cast<std::size_t>(trees));
            const std::uint64_t round_seed = shared();
            parallel_for(trees, cfg_.threads, [&](int i) {
                std::mt19937_64 rng(mix_seed(round_seed + static_cast<std::uint64_t>(i)));
                RootSample rs = make_root_sample(*ctx_, s, samples_[static_cast<std::size_t>(i) % samples_.size()], rng);
                SingleChargerModel model(*ctx_, rs.trace, cfg_, threshold, k, committed, fixed);
                const int shift = add_noise(0, cfg_.pruning.noise_std, -1 << 20, 1 << 20, rng);
                std::vector<int> levels;
                std::vector<double> cands;
                for (int l : model.window(a, shift, band)) {
                    const double r = ctx_->level_kwh[ku][static_cast<std::size_t>(l)];
                    if (base + grid_energy(ctx_->chargers[ku], r) < -1e-9) continue;
                    levels.push_back(l);
                    cands.push_back(r);
                }
                if (cands.empty()) {
                    // The anchor is always admissible against the commitments.
                    levels.push_back(a);
                    cands.push_back(ctx_->level_kwh[ku][static_cast<std::size_t>(a)]);
                }
                UctTree<SingleChargerModel> tree(model, {rs.state, {}, 0, 1.0}, cfg_.c, rng());
                tree.set_root_actions(cands);
                tree.run(std::max<long>(budget, static_cast<long>(cands.size())));
                auto& out = per_tree[static_cast<std::size_t>(i)];
                for (std::size_t c = 0; c < cands.size(); ++c) out[levels[c]] = tree.root_child(c);
                tree_stats[static_cast<std::size_t>(i)] = tree.stats();
            });
            // Pool by level; ties go to the lowest level index.
            std::map<int, std::pair<long, double>> pooled;
            for (const auto& t : per_tree)
                for (const auto& [l, vt] : t) {
                    pooled[l].first += vt.first;
                    pooled[l].second += vt.second;
                }
            int best = a;
            double best_v = -std::numeric_limits<double>::infinity();
            for (const auto& [l, vt] : pooled) {
                if (vt.first == 0) continue;
                const double m = vt.second / static_cast<double>(vt.first);
                if (m > best_v + 1e-12) {
                    best_v = m;
                    best = l;
                }
            }
            committed[ku] = ctx_->level_kwh[ku][static_cast<std::size_t>(best)];
            fixed[ku] = 1;
            for (const UctStats& st : tree_stats) {
                stats_.expansions += st.expansions;
                stats_.rollouts += st.rollouts;
            }
        }
        return Action{committed};
    }

    const PlannerStats& stats() const { return stats_; }

private:
    const SimContext* ctx_;
    std::vector<Episode> samples_;
    SearchConfig cfg_;
    std::uint64_t seed_;
    PlannerStats stats_;
};

}  // namespace v2b
