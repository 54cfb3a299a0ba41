// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "test_support.hpp"
#include "toy_mdp.hpp"
#include "v2b/dgmcts.hpp"

using namespace v2b;
using v2b::testing::Rng;
using v2b::testing::ToyMdp;

namespace {

struct Child {
    long visits;
    double total;
};

GeneratorConfig small_daily() {
    GeneratorConfig cfg;
    cfg.grid.horizon_slots = 96;
    cfg.fleet.bidirectional = 2;
    cfg.fleet.unidirectional = 3;
    for (double& l : cfg.arrivals.hourly_rate) l *= 0.5;
    return cfg;
}

std::vector<Episode> samples_for(const GeneratorConfig& cfg, int n) {
    std::vector<Episode> out;
    for (int i = 0; i < n; ++i) out.push_back(generate_episode(cfg, 1000 + static_cast<std::uint64_t>(i)));
    return out;
}

// Actions of one simulated day; `decide` sees only pre-decision states.
template <class Planner>
std::vector<Action> run_day(const Episode& ep, Planner& planner, double threshold) {
    SimContext ctx(ep);
    const Trace tr = make_trace(ep, 3);
    NullSink sink;
    SystemState s = initial_state(ctx, tr, 0, threshold);
    std::vector<Action> out;
    while (s.slot < tr.end_slot) {
        Action a = planner.decide(s);
        check_action(ctx, s, a);
        out.push_back(a);
        step(ctx, tr, s, a.rates, sink);
    }
    return out;
}

}  // namespace

TEST(Uct, Examples) {
    const std::vector<Child> a{{10, 5.0}, {10, 8.0}, {10, 1.0}};
    EXPECT_EQ(uct_select(a, 30, 0.0), 1u);
    const std::vector<Child> b{{1, 0.5}, {100, 50.0}};
    EXPECT_EQ(uct_select(b, 101, 0.1), 0u);
    EXPECT_EQ(uct_select(b, 101, 5.0), 0u);
    const std::vector<Child> one{{3, -2.0}};
    EXPECT_EQ(uct_select(one, 3, 1.4), 0u);
    const std::vector<Child> tie{{4, 2.0}, {4, 2.0}};
    EXPECT_EQ(uct_select(tie, 8, 1.0), 0u);
}

TEST(Uct, PooledRootAction) {
    const std::vector<std::vector<std::pair<long, double>>> trees{{{2, 2.0}, {8, 12.0}}, {{6, 12.0}, {2, 1.0}}};
    // Visit-weighted means: (14/8, 13/10).
    EXPECT_EQ(best_pooled_action(trees), 0u);
}

TEST(Uct, ToyMdpOptimality) {
    Rng rng(123);
    int hits = 0;
    for (int run = 0; run < 100; ++run) {
        const ToyMdp mdp = ToyMdp::random(rng);
        if (v2b::testing::toy_search(mdp, 2000, 1.414, static_cast<std::uint64_t>(run)) == mdp.optimal_root().first) ++hits;
    }
    EXPECT_GE(hits, 95);
}

// After n iterations the root has n visits; every node's visit count and
// total value equal the count and score sum of the rollouts passing through it.
TEST(Uct, VisitAndValueConservation) {
    Rng rng(5);
    for (int trial = 0; trial < 10000; ++trial) {
        ToyMdp mdp = ToyMdp::random(rng, 0.0, v2b::testing::uniform_int(rng, 1, 3));
        mdp.record = true;
        const long n = v2b::testing::uniform_int(rng, 1, 60);
        UctTree<ToyMdp> tree(mdp, {}, v2b::testing::uniform(rng, 0.0, 2.0), static_cast<std::uint64_t>(trial));
        tree.run(n);
        ASSERT_EQ(tree.root().visits, n);
        ASSERT_EQ(static_cast<long>(mdp.log.size()), n);
        ASSERT_EQ(tree.stats().rollouts, n);
        for (std::size_t id = 0; id < tree.size(); ++id) {
            const auto& node = tree.node(static_cast<int>(id));
            long visits = 0;
            double total = 0.0;
            for (const auto& [start, score] : mdp.log) {
                if (start.size() < node.state.history.size()) continue;
                if (!std::equal(node.state.history.begin(), node.state.history.end(), start.begin())) continue;
                ++visits;
                total += score;
            }
            ASSERT_EQ(node.visits, visits);
            ASSERT_NEAR(node.total, total, 1e-9);
            long child_visits = 0;
            for (int ch : node.children) child_visits += tree.node(ch).visits;
            ASSERT_GE(node.visits, child_visits);
        }
    }
}

TEST(DgMcts, DeterministicAcrossWorkerCounts) {
    const GeneratorConfig cfg = small_daily();
    const Episode ep = generate_episode(cfg, 7);
    const auto samples = samples_for(cfg, 4);
    SimContext ctx(ep);
    SearchConfig sc;
    sc.iterations = 30;
    sc.max_depth = 12;
    sc.exploration_samples = 4;
    sc.threads = 1;
    DgMctsPlanner single(ctx, samples, sc, 11);
    sc.threads = 3;
    DgMctsPlanner multi(ctx, samples, sc, 11);
    DgMctsPlanner again(ctx, samples, sc, 11);
    const auto a = run_day(ep, single, 60.0);
    EXPECT_EQ(a, run_day(ep, multi, 60.0));
    EXPECT_EQ(a, run_day(ep, again, 60.0));
    EXPECT_GT(single.stats().searches, 0);
}

TEST(DgMcts, AnytimeSingleIteration) {
    const GeneratorConfig cfg = small_daily();
    const Episode ep = generate_episode(cfg, 8);
    SimContext ctx(ep);
    SearchConfig sc;
    sc.iterations = 1;
    sc.max_depth = 1;
    sc.exploration_samples = 1;
    DgMctsPlanner p(ctx, samples_for(cfg, 1), sc, 1);
    EXPECT_NO_THROW(run_day(ep, p, 40.0));
}

TEST(DgMcts, RejectsBadConfig) {
    const GeneratorConfig cfg = small_daily();
    const Episode ep = generate_episode(cfg, 8);
    SimContext ctx(ep);
    SearchConfig sc;
    sc.gamma = 0.0;
    EXPECT_THROW(DgMctsPlanner(ctx, samples_for(cfg, 1), sc, 1), ConfigError);
    EXPECT_THROW(DgMctsPlanner(ctx, {}, SearchConfig{}, 1), ConfigError);
}

// The chosen action always comes from the pruned root set around the LLF anchor.
TEST(DgMcts, ChoiceInsideRootSet) {
    const GeneratorConfig cfg = small_daily();
    const auto samples = samples_for(cfg, 2);
    SearchConfig sc;
    sc.iterations = 20;
    sc.max_depth = 8;
    sc.exploration_samples = 2;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Episode ep = generate_episode(cfg, 50 + seed);
        SimContext ctx(ep);
        const Trace tr = make_trace(ep, seed);
        DgMctsPlanner p(ctx, samples, sc, seed);
        NullSink sink;
        SystemState s = initial_state(ctx, tr, 0, 50.0);
        while (s.slot < tr.end_slot) {
            const Action a = p.decide(s);
            Action anchor{std::vector<double>(ctx.num_chargers(), 0.0)};
            llf_policy(ctx, s, anchor.rates);
            for (std::size_t k = 0; k < ctx.num_chargers(); ++k) {
                if (!s.chargers[k]) continue;
                const auto cand = charger_candidates(ctx, s, static_cast<int>(k), level_index(ctx, static_cast<int>(k), anchor.rates[k]), sc.pruning);
                const int chosen = level_index(ctx, static_cast<int>(k), a.rates[k]);
                ASSERT_NE(std::find(cand.begin(), cand.end(), chosen), cand.end());
            }
            step(ctx, tr, s, a.rates, sink);
        }
    }
}
