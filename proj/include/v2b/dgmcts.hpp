// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file dgmcts.hpp
 * @brief Domain-guided MCTS: one UCT tree per exploration sample over
 *        actions pruned around the laxity anchor, trickle rollouts, and
 *        visit-weighted pooling of the shared root actions.
 */

#include <algorithm>
#include <cstdint>
#include <exception>
#include <random>
#include <thread>
#include <vector>

#include "v2b/action_space.hpp"
#include "v2b/env.hpp"
#include "v2b/heuristics.hpp"
#include "v2b/mcts.hpp"

namespace v2b {

struct SearchConfig {
    int iterations = 200;
    int max_depth = 70;
    double c = 1.414;
    double gamma = 1.0;
    int exploration_samples = 10;
    PruningConfig pruning;
    RewardShaping shaping;
    int threads = 1;  ///< 0 = hardware concurrency

    void validate() const {
        if (iterations < 1) throw ConfigError("iterations must be >= 1");
        if (max_depth < 0) throw ConfigError("depth must be >= 0");
        if (c < 0.0) throw ConfigError("exploration coefficient must be >= 0");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
        if (exploration_samples < 1) throw ConfigError("need at least one exploration sample");
        if (pruning.beta < 0 || pruning.offset_steps < 0) throw ConfigError("beta and offset must be >= 0");
        if (pruning.joint_cap < 1) throw ConfigError("joint cap must be >= 1");
    }
};

/// Run fn(i) for i in [0, n) on up to `threads` workers; results must not depend on scheduling.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += threads) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// A sampled future rooted at the current state.
struct RootSample {
    Trace trace;
    SystemState state;
};

/**
 * Exogenous future for one search tree: connected vehicles keep their SoC
 * and estimate but get a departure drawn uniformly from the part of their
 * window still ahead; later arrivals and loads of the same day come from
 * `sample`; the current slot keeps its observed load.
 */
template <class Rng>
RootSample make_root_sample(const SimContext& ctx, const SystemState& s, const Episode& sample, Rng& rng) {
    RootSample out;
    const int t = s.slot;
    const int end = std::min(ctx.grid.day_end(t), ctx.grid.horizon_slots);
    Trace& tr = out.trace;
    tr.first_slot = t;
    tr.end_slot = end;
    tr.load.push_back(s.building_kwh);
    for (int u = t + 1; u < end; ++u)
        tr.load.push_back(u < static_cast<int>(sample.building_load_kwh.size()) ? sample.building_load_kwh[static_cast<std::size_t>(u)] : 0.0);
    out.state = s;
    for (std::size_t k = 0; k < s.chargers.size(); ++k) {
        const auto& ev = s.chargers[k];
        if (!ev) continue;
        EvSession e;
        e.id = ev->session_id;
        e.arrival_slot = ev->arrival_slot;
        e.window_lo = ev->window_lo;
        e.window_hi = ev->window_hi;
        e.true_departure_slot = sample_departure(std::max(ev->window_lo, t + 1), std::max(ev->window_hi, t + 1), rng);
        e.arrival_soc_kwh = ev->soc_kwh;
        e.required_soc_kwh = ev->required_kwh;
        e.battery_min_kwh = ev->battery_min_kwh;
        e.battery_max_kwh = ev->battery_max_kwh;
        out.state.chargers[k]->trace_index = static_cast<int>(tr.sessions.size());
        tr.sessions.push_back(e);
        tr.est_departure.push_back(ev->est_departure);
    }
    out.state.next_arrival = static_cast<int>(tr.sessions.size());
    int next_id = 1 << 24;
    for (const EvSession& e : sample.sessions) {
        if (e.arrival_slot <= t || e.arrival_slot >= end) continue;
        EvSession f = e;
        f.id = next_id++;
        tr.sessions.push_back(f);
        tr.est_departure.push_back(sample_departure(f.window_lo, f.window_hi, rng));
    }
    return out;
}

/// Tally sink with a per-step discount applied to slot and departure costs.
struct DiscountedSink {
    TrajectoryTally* tally;
    double threshold_kw;
    double missing_soc_rate;
    double weight;
    void on_departure(const SessionOutcome& o) {
        TrajectoryTally one;
        one.add_departure(o, missing_soc_rate);
        tally->missing_cost += weight * one.missing_cost;
        tally->missing_kwh += weight * one.missing_kwh;
        tally->met_required += one.met_required;
        tally->soc_fraction_sum += one.soc_fraction_sum;
    }
    void on_window(double pi) { tally->add_window(pi, threshold_kw); }
};

/// The charging problem seen from one exploration sample.
class ChargingModel {
public:
    struct State {
        SystemState sys;
        TrajectoryTally tally;
        int depth = 0;
        double weight = 1.0;
    };
    using Action = v2b::Action;

    ChargingModel(const SimContext& ctx, const Trace& trace, const SearchConfig& cfg, double threshold_kw)
        : ctx_(&ctx), trace_(&trace), cfg_(&cfg), threshold_(threshold_kw) {}

    bool terminal(const State& s) const {
        return s.sys.slot >= trace_->end_slot || s.depth >= std::max(cfg_->max_depth, 1);
    }

    template <class Rng>
    std::vector<Action> actions(const State& s, Rng& rng) const {
        Action anchor{std::vector<double>(ctx_->num_chargers(), 0.0)};
        llf_policy(*ctx_, s.sys, anchor.rates);
        std::vector<Action> out = generate_action_space(*ctx_, s.sys, anchor, cfg_->pruning, rng);
        std::shuffle(out.begin() + 1, out.end(), rng);
        return out;
    }

    void apply(State& s, const Action& a) const { advance(s, a.rates); }

    template <class Rng>
    double rollout(State s, Rng&) const {
        std::vector<double> rates(ctx_->num_chargers(), 0.0);
        while (s.sys.slot < trace_->end_slot && s.depth < cfg_->max_depth) {
            trickle_policy(*ctx_, s.sys, rates);
            advance(s, rates);
        }
        return score(s);
    }

    double score(const State& s) const {
        TrajectoryTally t = s.tally;
        for (const auto& ev : s.sys.chargers)
            if (ev) t.soc_fraction_sum += ev->soc_kwh / ev->battery_max_kwh;
        return rollout_score(t, threshold_, ctx_->tariff.demand_rate, cfg_->shaping);
    }

    State root(const SystemState& sys) const { return State{sys, {}, 0, 1.0}; }

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
};

struct PlannerStats {
    long decisions = 0;
    long searches = 0;  ///< decisions that actually ran trees
    long expansions = 0;
    long rollouts = 0;
};

/// True when some controlled charger is occupied.
inline bool has_choice(const SimContext& ctx, const SystemState& s) {
    for (std::size_t k = 0; k < ctx.num_chargers(); ++k)
        if (s.chargers[k] && ctx.chargers[k].controlled) return true;
    return false;
}

class DgMctsPlanner {
public:
    /// `samples` are exploration episodes drawn independently of the evaluated one.
    DgMctsPlanner(const SimContext& ctx, std::vector<Episode> samples, SearchConfig cfg, std::uint64_t seed)
        : ctx_(&ctx), samples_(std::move(samples)), cfg_(cfg), seed_(seed) {
        cfg_.validate();
        if (samples_.empty()) throw ConfigError("no exploration samples");
    }

    Action decide(const SystemState& s) {
        ++stats_.decisions;
        Action anchor{std::vector<double>(ctx_->num_chargers(), 0.0)};
        llf_policy(*ctx_, s, anchor.rates);
        if (!has_choice(*ctx_, s)) return anchor;
        std::mt19937_64 shared(mix_seed(seed_ ^ mix_seed(static_cast<std::uint64_t>(s.slot) * 2654435761ULL)));
        std::vector<Action> root_actions = generate_action_space(*ctx_, s, anchor, cfg_.pruning, shared);
        std::shuffle(root_actions.begin() + 1, root_actions.end(), shared);
        if (root_actions.size() == 1) return anchor;
        ++stats_.searches;

        const int trees = cfg_.exploration_samples;
        const double threshold = effective_threshold(s);
        std::vector<std::vector<std::pair<long, double>>> pooled(static_cast<std::size_t>(trees));
        std::vector<UctStats> tree_stats(static_cast<std::size_t>(trees));
        const std::uint64_t base = shared();
        parallel_for(trees, cfg_.threads, [&](int i) {
            std::mt19937_64 rng(mix_seed(base + static_cast<std::uint64_t>(i)));
            const Episode& sample = samples_[static_cast<std::size_t>(i) % samples_.size()];
            RootSample rs = make_root_sample(*ctx_, s, sample, rng);
            ChargingModel model(*ctx_, rs.trace, cfg_, threshold);
            UctTree<ChargingModel> tree(model, model.root(rs.state), cfg_.c, rng());
            tree.set_root_actions(root_actions);
            tree.run(cfg_.iterations);
            auto& out = pooled[static_cast<std::size_t>(i)];
            for (std::size_t a = 0; a < root_actions.size(); ++a) out.push_back(tree.root_child(a));
            tree_stats[static_cast<std::size_t>(i)] = tree.stats();
        });
        for (const UctStats& st : tree_stats) {
            stats_.expansions += st.expansions;
            stats_.rollouts += st.rollouts;
        }
        return root_actions[best_pooled_action(pooled)];
    }

    const PlannerStats& stats() const { return stats_; }
    const SearchConfig& config() const { return cfg_; }

private:
    const SimContext* ctx_;
    std::vector<Episode> samples_;
    SearchConfig cfg_;
    std::uint64_t seed_;
    PlannerStats stats_;
};

}  // namespace v2b
