// SPDX-License-Identifier: Apache-2.0
#pragma once

// Enumerable MDP for checking the UCT tree against exhaustive search.

#include <array>
#include <random>
#include <vector>

#include "v2b/mcts.hpp"

namespace v2b::testing {

/// `slots` decisions, 3 actions each, deterministic rewards keyed by the action prefix.
struct ToyMdp {
    struct State {
        std::vector<int> history;
    };
    using Action = int;

    int slots = 3;
    std::vector<double> reward;  // indexed by prefix code
    mutable std::vector<std::pair<std::vector<int>, double>> log;
    bool record = false;

    static int code(const std::vector<int>& h) {
        int c = 1;
        for (int a : h) c = c * 3 + a;
        return c;
    }

    bool terminal(const State& s) const { return static_cast<int>(s.history.size()) >= slots; }
    template <class Rng>
    std::vector<int> actions(const State&, Rng&) const {
        return {0, 1, 2};
    }
    void apply(State& s, int a) const { s.history.push_back(a); }

    double value_of(const std::vector<int>& h) const {
        double v = 0.0;
        std::vector<int> p;
        for (int a : h) {
            p.push_back(a);
            v += reward[static_cast<std::size_t>(code(p))];
        }
        return v;
    }

    template <class Rng>
    double rollout(const State& s, Rng& rng) const {
        std::vector<int> h = s.history;
        while (static_cast<int>(h.size()) < slots) h.push_back(std::uniform_int_distribution<int>(0, 2)(rng));
        const double v = value_of(h);
        if (record) log.emplace_back(s.history, v);
        return v;
    }

    double best_from(std::vector<int>& h) const {
        if (static_cast<int>(h.size()) == slots) return value_of(h);
        double best = -1e300;
        for (int a = 0; a < 3; ++a) {
            h.push_back(a);
            best = std::max(best, best_from(h));
            h.pop_back();
        }
        return best;
    }

    /// Exhaustive optimal first action and the gap to the runner-up.
    std::pair<int, double> optimal_root() const {
        std::array<double, 3> v{};
        for (int a = 0; a < 3; ++a) {
            std::vector<int> h{a};
            v[static_cast<std::size_t>(a)] = best_from(h);
        }
        int best = 0;
        for (int a = 1; a < 3; ++a)
            if (v[static_cast<std::size_t>(a)] > v[static_cast<std::size_t>(best)]) best = a;
        double gap = 1e300;
        for (int a = 0; a < 3; ++a)
            if (a != best) gap = std::min(gap, v[static_cast<std::size_t>(best)] - v[static_cast<std::size_t>(a)]);
        return {best, gap};
    }

    /// Random instance whose optimal first action beats the others by at least `min_gap`.
    static ToyMdp random(std::mt19937_64& rng, double min_gap = 0.1, int slots = 3) {
        ToyMdp m;
        m.slots = slots;
        int size = 1;
        for (int i = 0; i <= slots; ++i) size *= 3;
        while (true) {
            m.reward.assign(static_cast<std::size_t>(size * 3), 0.0);
            for (double& r : m.reward) r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            if (m.optimal_root().second >= min_gap) return m;
        }
    }
};

/// Root action chosen by one UCT tree after `iterations`.
inline int toy_search(const ToyMdp& mdp, long iterations, double c, std::uint64_t seed) {
    UctTree<ToyMdp> tree(mdp, {}, c, seed);
    tree.run(iterations);
    std::vector<std::vector<std::pair<long, double>>> pooled(1);
    for (std::size_t i = 0; i < tree.root().children.size(); ++i) pooled[0].push_back(tree.root_child(i));
    return tree.root().actions[best_pooled_action(pooled)];
}

}  // namespace v2b::testing
