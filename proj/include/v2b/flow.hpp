// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file flow.hpp
 * @brief Integer min-cost flow with node supplies and real arc costs.
 *
 * Negative-cost arcs are saturated up front, which leaves every residual
 * arc with a non-negative cost; successive shortest paths (Dijkstra with
 * potentials) then repair the node imbalances. Caps are integers, so the
 * optimal flow is integral.
 */

#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

namespace v2b {

class MinCostFlow {
public:
    static constexpr std::int64_t kInf = std::int64_t{1} << 50;

    struct ArcRef {
        int node;
        int index;
    };

    explicit MinCostFlow(int nodes = 0) : g_(static_cast<std::size_t>(nodes)) {}

    int add_node() {
        g_.emplace_back();
        return static_cast<int>(g_.size()) - 1;
    }
    int num_nodes() const { return static_cast<int>(g_.size()); }

    ArcRef add_arc(int from, int to, std::int64_t cap, double cost) {
        if (cap < 0) throw std::invalid_argument("negative arc capacity");
        auto& a = g_[static_cast<std::size_t>(from)];
        auto& b = g_[static_cast<std::size_t>(to)];
        a.push_back({to, cap, cost, static_cast<int>(b.size()) + (from == to ? 1 : 0), cap});
        b.push_back({from, 0, -cost, static_cast<int>(a.size()) - 1, 0});
        return {from, static_cast<int>(a.size()) - 1};
    }

    /// Flow on an arc returned by add_arc.
    std::int64_t flow(ArcRef r) const {
        const Arc& a = g_[static_cast<std::size_t>(r.node)][static_cast<std::size_t>(r.index)];
        return a.orig - a.cap;
    }

    /**
     * Minimise total cost subject to supply[v] = out(v) - in(v). Returns
     * false when the supplies cannot be routed. `cost()` is valid after a
     * feasible solve.
     */
    bool solve(const std::vector<std::int64_t>& supply) {
        const std::size_t n = g_.size();
        if (supply.size() != n) throw std::invalid_argument("supply size mismatch");
        excess_ = supply;
        cost_ = 0.0;
        std::int64_t total = 0;
        for (std::int64_t s : supply) total += s;
        if (total != 0) return false;
        for (std::size_t u = 0; u < n; ++u)
            for (Arc& a : g_[u])
                if (a.cost < 0.0 && a.cap > 0) {
                    const std::int64_t c = a.cap;
                    push(static_cast<int>(u), a, c);
                    excess_[u] -= c;
                    excess_[static_cast<std::size_t>(a.to)] += c;
                }
        potential_.assign(n, 0.0);
        dist_.assign(n, 0.0);
        prev_.assign(n, {-1, -1});
        using Item = std::pair<double, int>;
        while (true) {
            bool any = false;
            for (std::size_t u = 0; u < n; ++u)
                if (excess_[u] > 0) any = true;
            if (!any) return true;
            // Multi-source Dijkstra from every node with positive excess.
            std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
            std::fill(dist_.begin(), dist_.end(), std::numeric_limits<double>::infinity());
            std::fill(prev_.begin(), prev_.end(), std::pair<int, int>{-1, -1});
            for (std::size_t u = 0; u < n; ++u)
                if (excess_[u] > 0) {
                    dist_[u] = 0.0;
                    pq.push({0.0, static_cast<int>(u)});
                }
            int target = -1;
            while (!pq.empty()) {
                auto [d, u] = pq.top();
                pq.pop();
                const std::size_t uu = static_cast<std::size_t>(u);
                if (d > dist_[uu]) continue;
                if (excess_[uu] < 0) {
                    target = u;
                    break;
                }
                for (int i = 0; i < static_cast<int>(g_[uu].size()); ++i) {
                    const Arc& a = g_[uu][static_cast<std::size_t>(i)];
                    if (a.cap <= 0) continue;
                    const std::size_t v = static_cast<std::size_t>(a.to);
                    double rc = a.cost + potential_[uu] - potential_[v];
                    if (rc < 0.0) rc = 0.0;  // rounding noise only
                    const double nd = d + rc;
                    if (nd < dist_[v] - 1e-15) {
                        dist_[v] = nd;
                        prev_[v] = {u, i};
                        pq.push({nd, a.to});
                    }
                }
            }
            if (target < 0) return false;
            const double dt = dist_[static_cast<std::size_t>(target)];
            for (std::size_t u = 0; u < n; ++u) potential_[u] += std::min(dist_[u], dt);
            // Bottleneck along the path back to a source.
            std::int64_t amt = -excess_[static_cast<std::size_t>(target)];
            int v = target;
            while (prev_[static_cast<std::size_t>(v)].first >= 0) {
                auto [u, i] = prev_[static_cast<std::size_t>(v)];
                amt = std::min(amt, g_[static_cast<std::size_t>(u)][static_cast<std::size_t>(i)].cap);
                v = u;
            }
            amt = std::min(amt, excess_[static_cast<std::size_t>(v)]);
            const int source = v;
            v = target;
            while (prev_[static_cast<std::size_t>(v)].first >= 0) {
                auto [u, i] = prev_[static_cast<std::size_t>(v)];
                push(u, g_[static_cast<std::size_t>(u)][static_cast<std::size_t>(i)], amt);
                v = u;
            }
            excess_[static_cast<std::size_t>(source)] -= amt;
            excess_[static_cast<std::size_t>(target)] += amt;
        }
    }

    double cost() const { return cost_; }

private:
    struct Arc {
        int to;
        std::int64_t cap;
        double cost;
        int rev;
        std::int64_t orig;
    };

    void push(int from, Arc& a, std::int64_t amt) {
        a.cap -= amt;
        g_[static_cast<std::size_t>(a.to)][static_cast<std::size_t>(a.rev)].cap += amt;
        cost_ += static_cast<double>(amt) * a.cost;
        (void)from;
    }

    std::vector<std::vector<Arc>> g_;
    std::vector<std::int64_t> excess_;
    std::vector<double> potential_;
    std::vector<double> dist_;
    std::vector<std::pair<int, int>> prev_;
    double cost_ = 0.0;
};

}  // namespace v2b
