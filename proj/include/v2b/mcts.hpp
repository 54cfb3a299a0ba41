// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file mcts.hpp
 * @brief Generic UCT over a user-supplied model.
 *
 * A model provides
 *   using State, Action;
 *   bool terminal(const State&) const;
 *   std::vector<Action> actions(const State&, Rng&) const;   // expansion order
 *   void apply(State&, const Action&) const;
 *   double rollout(State, Rng&) const;                       // higher is better
 *
 * Each iteration descends by UCT through fully expanded nodes, expands one
 * untried action, rolls out from the new leaf and adds the rollout score to
 * every node on the path.
 */

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace v2b {

struct UctStats {
    long expansions = 0;
    long rollouts = 0;
};

template <class Child>
concept UctChild = requires(const Child& c) {
    { c.visits } -> std::convertible_to<long>;
    { c.total } -> std::convertible_to<double>;
};

/// argmax mean + C*sqrt(ln N / n); ties to the lowest index. Every child must have visits > 0.
template <UctChild Child>
std::size_t uct_select(const std::vector<Child>& children, long parent_visits, double c) {
    if (children.empty()) throw std::logic_error("uct_select on a leaf");
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    const double log_n = std::log(static_cast<double>(std::max<long>(parent_visits, 1)));
    for (std::size_t i = 0; i < children.size(); ++i) {
        const Child& ch = children[i];
        if (ch.visits <= 0) throw std::logic_error("uct_select with an unvisited child");
        const double n = static_cast<double>(ch.visits);
        const double v = ch.total / n + c * std::sqrt(log_n / n);
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    return best;
}

template <class Model, class Rng = std::mt19937_64>
class UctTree {
public:
    using State = typename Model::State;
    using Action = typename Model::Action;

    struct Node {
        State state;
        int parent = -1;
        int action = -1;  ///< index into the parent's action list
        long visits = 0;
        double total = 0.0;
        bool ready = false;  ///< actions generated
        std::vector<Action> actions{};
        std::vector<int> children{};  ///< node index per expanded action, in expansion order
    };

    struct ChildView {
        long visits;
        double total;
    };

    UctTree(const Model& model, State root, double c, std::uint64_t seed) : model_(&model), c_(c), rng_(seed) {
        nodes_.push_back(Node{std::move(root)});
    }

    /// Fix the root's candidate list (expansion order is list order).
    void set_root_actions(std::vector<Action> actions) {
        nodes_[0].actions = std::move(actions);
        nodes_[0].ready = true;
    }

    void iterate() {
        int cur = 0;
        path_.clear();
        path_.push_back(0);
        while (true) {
            Node& node = nodes_[static_cast<std::size_t>(cur)];
            if (model_->terminal(node.state)) break;
            if (!node.ready) {
                node.actions = model_->actions(node.state, rng_);
                node.ready = true;
            }
            if (node.actions.empty()) break;
            if (node.children.size() < node.actions.size()) {
                const int a = static_cast<int>(node.children.size());
                Node child{node.state, cur, a};
                model_->apply(child.state, node.actions[static_cast<std::size_t>(a)]);
                nodes_.push_back(std::move(child));
                const int id = static_cast<int>(nodes_.size()) - 1;
                nodes_[static_cast<std::size_t>(cur)].children.push_back(id);
                path_.push_back(id);
                cur = id;
                ++stats_.expansions;
                break;
            }
            views_.clear();
            for (int ch : node.children) views_.push_back({nodes_[static_cast<std::size_t>(ch)].visits, nodes_[static_cast<std::size_t>(ch)].total});
            cur = node.children[uct_select(views_, node.visits, c_)];
            path_.push_back(cur);
        }
        const double score = model_->rollout(nodes_[static_cast<std::size_t>(cur)].state, rng_);
        ++stats_.rollouts;
        for (int id : path_) {
            nodes_[static_cast<std::size_t>(id)].visits += 1;
            nodes_[static_cast<std::size_t>(id)].total += score;
        }
    }

    void run(long iterations) {
        for (long i = 0; i < iterations; ++i) iterate();
    }

    const Node& root() const { return nodes_[0]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return nodes_.size(); }
    const UctStats& stats() const { return stats_; }

    /// (visits, total) of root action i, zero when unexpanded.
    std::pair<long, double> root_child(std::size_t i) const {
        const Node& r = nodes_[0];
        if (i >= r.children.size()) return {0, 0.0};
        const Node& ch = nodes_[static_cast<std::size_t>(r.children[i])];
        return {ch.visits, ch.total};
    }

private:
    const Model* model_;
    double c_;
    Rng rng_;
    std::vector<Node> nodes_;
    std::vector<int> path_;
    std::vector<ChildView> views_;
    UctStats stats_;
};

/**
 * Pool root statistics of several trees sharing one root action list and
 * return the index with the best visit-weighted mean; ties to the lowest
 * index. Returns 0 when nothing was visited.
 */
inline std::size_t best_pooled_action(const std::vector<std::vector<std::pair<long, double>>>& per_tree) {
    std::size_t n = 0;
    for (const auto& t : per_tree) n = std::max(n, t.size());
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        long v = 0;
        double tot = 0.0;
        for (const auto& t : per_tree)
            if (i < t.size()) {
                v += t[i].first;
                tot += t[i].second;
            }
        if (v == 0) continue;
        const double mean = tot / static_cast<double>(v);
        if (mean > best_v + 1e-12) {
            best_v = mean;
            best = i;
        }
    }
    return best;
}

}  // namespace v2b
