// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file exact.hpp
 * @brief Offline optimum over the discrete rate lattice, plus an exhaustive
 *        oracle for tiny instances.
 *
 * With full knowledge of departures and a fixed peak cap P, the remaining
 * problem (per-slot energy prices, SoC chains, convex |.| missing-SoC cost,
 * non-export, per-window energy caps) is an integer min-cost flow. The
 * outer search runs branch-and-bound over the finitely many values P can
 * take, bounding an interval [P_a, P_b] below by w_d*P_a + G(P_b) since the
 * capped cost G is non-increasing in P.
 *
 * Requires unit efficiency and controlled chargers whose levels are
 * contiguous multiples of one common step.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "v2b/billing.hpp"
#include "v2b/env.hpp"
#include "v2b/flow.hpp"

namespace v2b {

/// Charger assignment and everything that does not depend on controlled rates.
struct FcfsPlan {
    std::vector<int> charger_of;                 ///< per session index; -1 when unserved
    std::vector<double> forced_kwh;              ///< per slot, realized uncontrolled charging
    std::vector<SessionOutcome> fixed_outcomes;  ///< unserved and uncontrolled sessions
};

inline FcfsPlan plan_assignment(const Episode& ep) {
    const SimContext ctx(ep);
    const Trace trace = make_trace(ep, 0);
    const int horizon = ep.time_grid.horizon_slots;
    FcfsPlan plan;
    plan.charger_of.assign(ep.sessions.size(), -1);
    plan.forced_kwh.assign(static_cast<std::size_t>(horizon), 0.0);
    std::unordered_map<int, std::size_t> index_of;
    for (std::size_t i = 0; i < ep.sessions.size(); ++i) index_of[ep.sessions[i].id] = i;
    std::vector<SessionOutcome> all;
    struct Sink {
        std::vector<SessionOutcome>* out;
        void on_departure(const SessionOutcome& o) { out->push_back(o); }
        void on_window(double) {}
    } sink{&all};
    SystemState s = initial_state(ctx, trace, 0, 0.0, sink);
    std::vector<double> realized(ctx.num_chargers(), 0.0);
    for (int t = 0; t < horizon; ++t) {
        for (std::size_t k = 0; k < ctx.num_chargers(); ++k)
            if (s.chargers[k]) plan.charger_of[static_cast<std::size_t>(s.chargers[k]->trace_index)] = static_cast<int>(k);
        const Action forced = forced_rates(ctx, s);
        step(ctx, trace, s, forced.rates, sink, realized);
        for (std::size_t k = 0; k < ctx.num_chargers(); ++k)
            if (!ctx.chargers[k].controlled) plan.forced_kwh[static_cast<std::size_t>(t)] += realized[k];
    }
    for (const auto& ev : s.chargers)
        if (ev) all.push_back({ev->session_id, ev->soc_kwh, ev->required_kwh, ev->battery_max_kwh, true});
    for (const SessionOutcome& o : all) {
        const int k = plan.charger_of[index_of.at(o.session_id)];
        if (k < 0 || !ep.chargers[static_cast<std::size_t>(k)].controlled) plan.fixed_outcomes.push_back(o);
    }
    return plan;
}

struct ExactOptions {
    double time_limit_s = 300.0;
    double gap_tolerance = 1e-6;
};

struct ExactResult {
    std::vector<std::vector<double>> rates;  ///< [slot][charger] kWh, grid side
    std::vector<double> schedule;            ///< per-slot total charging incl. uncontrolled
    std::vector<SessionOutcome> outcomes;
    BillBreakdown bill;
    double lower_bound = 0.0;
    double gap = 0.0;
    bool optimal = true;
    long flow_solves = 0;
};

namespace detail {

struct LatticeSession {
    std::size_t index;  ///< into episode.sessions
    int charger;
    int first;  ///< first charging slot
    int last;   ///< last charging slot (inclusive)
    double soc0;
    double req;
    double bmax;
    std::int64_t lo;  ///< SoC box in units relative to arrival
    std::int64_t hi;
    std::int64_t rate_lo;
    std::int64_t rate_hi;
};

struct LatticeWindow {
    int first;
    int count;
    double sum_d;       ///< building + forced energy
    std::int64_t sum_b; ///< units that may be discharged into the building
    std::int64_t m_hi;  ///< caps at or above this never bind
};

struct Block {
    int first;
    int end;
    std::vector<int> sessions;  ///< into Lattice::sessions
    std::vector<int> windows;   ///< into Lattice::windows
};

struct BlockSolution {
    bool feasible = false;
    double cost = 0.0;  ///< variable cost: price*u*X + missing cost of its sessions
};

class Lattice {
public:
    Lattice(const Episode& ep) : ep_(&ep), cal_(ep.time_grid, ep.tariff), plan_(plan_assignment(ep)) {
        const TimeGrid& g = ep.time_grid;
        const int horizon = g.horizon_slots;
        double step_kw = 0.0;
        for (const ChargerSpec& c : ep.chargers) {
            if (std::abs(c.efficiency - 1.0) > 1e-12) throw ConfigError("exact solver requires unit charger efficiency");
            if (!c.controlled) continue;
            for (std::size_t i = 1; i < c.rate_levels_kw.size(); ++i) {
                const double d = c.rate_levels_kw[i] - c.rate_levels_kw[i - 1];
                step_kw = step_kw == 0.0 ? d : std::min(step_kw, d);
            }
        }
        if (step_kw <= 0.0) step_kw = 1.0;
        u_ = step_kw * g.slot_hours;
        for (const ChargerSpec& c : ep.chargers) {
            std::int64_t lo = 0, hi = 0;
            if (c.controlled) {
                for (std::size_t i = 0; i < c.rate_levels_kw.size(); ++i) {
                    const double m = c.rate_levels_kw[i] / step_kw;
                    if (std::abs(m - std::round(m)) > 1e-9) throw ConfigError("charger levels are not multiples of a common step");
                    if (i > 0 && std::lround(m) != std::lround(c.rate_levels_kw[i - 1] / step_kw) + 1)
                        throw ConfigError("charger levels are not contiguous on the common step");
                }
                lo = std::lround(c.rate_levels_kw.front() / step_kw);
                hi = std::lround(c.rate_levels_kw.back() / step_kw);
            }
            rate_lo_.push_back(lo);
            rate_hi_.push_back(hi);
        }
        d_.resize(static_cast<std::size_t>(horizon));
        b_.resize(static_cast<std::size_t>(horizon));
        for (int t = 0; t < horizon; ++t) {
            d_[static_cast<std::size_t>(t)] = ep.building_load_kwh[static_cast<std::size_t>(t)] + plan_.forced_kwh[static_cast<std::size_t>(t)];
            b_[static_cast<std::size_t>(t)] = static_cast<std::int64_t>(std::floor(d_[static_cast<std::size_t>(t)] / u_ + 1e-9));
        }
        std::vector<std::int64_t> slot_hi(static_cast<std::size_t>(horizon), 0);
        for (std::size_t i = 0; i < ep.sessions.size(); ++i) {
            const int k = plan_.charger_of[i];
            if (k < 0 || !ep.chargers[static_cast<std::size_t>(k)].controlled) continue;
            const EvSession& s = ep.sessions[i];
            LatticeSession ls;
            ls.index = i;
            ls.charger = k;
            ls.first = s.arrival_slot;
            ls.last = std::min(s.true_departure_slot, horizon) - 1;
            ls.soc0 = s.arrival_soc_kwh;
            ls.req = s.required_soc_kwh;
            ls.bmax = s.battery_max_kwh;
            ls.lo = static_cast<std::int64_t>(std::ceil((s.battery_min_kwh - s.arrival_soc_kwh) / u_ - 1e-9));
            ls.hi = static_cast<std::int64_t>(std::floor((s.battery_max_kwh - s.arrival_soc_kwh) / u_ + 1e-9));
            ls.lo = std::min<std::int64_t>(ls.lo, 0);
            ls.hi = std::max<std::int64_t>(ls.hi, 0);
            ls.rate_lo = rate_lo_[static_cast<std::size_t>(k)];
            ls.rate_hi = rate_hi_[static_cast<std::size_t>(k)];
            if (ls.last < ls.first) continue;
            for (int t = ls.first; t <= ls.last; ++t) slot_hi[static_cast<std::size_t>(t)] += ls.rate_hi;
            sessions_.push_back(ls);
        }
        for (const AggregateWindow& w : cal_.windows) {
            LatticeWindow lw{w.first_slot, w.num_slots, 0.0, 0, 0};
            for (int i = 0; i < w.num_slots; ++i) {
                const std::size_t t = static_cast<std::size_t>(w.first_slot + i);
                lw.sum_d += d_[t];
                lw.sum_b += b_[t];
                lw.m_hi += slot_hi[t];
            }
            windows_.push_back(lw);
        }
        build_blocks(horizon);
        for (const SessionOutcome& o : plan_.fixed_outcomes) fixed_missing_ += ep.tariff.missing_soc_rate * o.deviation();
        for (int t = 0; t < horizon; ++t) base_energy_ += cal_.price[static_cast<std::size_t>(t)] * d_[static_cast<std::size_t>(t)];
    }

    double unit() const { return u_; }
    double window_hours(int j) const { return windows_[static_cast<std::size_t>(j)].count * ep_->time_grid.slot_hours; }
    const std::vector<LatticeWindow>& windows() const { return windows_; }
    const std::vector<Block>& blocks() const { return blocks_; }

    /// Window cap in units for peak P; below -sum_b is infeasible, at/above m_hi is slack.
    std::int64_t cap_for(int j, double p) const {
        const LatticeWindow& w = windows_[static_cast<std::size_t>(j)];
        const double raw = (p * window_hours(j) - w.sum_d) / u_;
        if (raw >= static_cast<double>(w.m_hi)) return w.m_hi;
        if (raw < -static_cast<double>(w.sum_b) - 1.0) return -w.sum_b - 1;
        return static_cast<std::int64_t>(std::floor(raw + 1e-9));
    }

    double peak_of(int j, std::int64_t m) const {
        const LatticeWindow& w = windows_[static_cast<std::size_t>(j)];
        return (w.sum_d + u_ * static_cast<double>(m)) / window_hours(j);
    }

    /// Distinct peak values an optimal schedule can have, ascending.
    std::vector<double> candidate_peaks() const {
        std::vector<double> out;
        for (int j = 0; j < static_cast<int>(windows_.size()); ++j) {
            const LatticeWindow& w = windows_[static_cast<std::size_t>(j)];
            for (std::int64_t m = -w.sum_b; m <= w.m_hi; ++m) {
                const double p = peak_of(j, m);
                if (p >= -1e-12) out.push_back(std::max(p, 0.0));
            }
        }
        std::sort(out.begin(), out.end());
        std::vector<double> uniq;
        for (double p : out)
            if (uniq.empty() || p > uniq.back() + 1e-9) uniq.push_back(p);
        return uniq;
    }

    /// Cost of the whole horizon with every window capped at peak P (w_d*P excluded).
    /// Returns +inf when infeasible.
    double capped_cost(double p, long* solves) {
        double total = base_energy_ + fixed_missing_;
        for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
            const Block& b = blocks_[bi];
            std::vector<std::int64_t> caps;
            caps.reserve(b.windows.size());
            for (int j : b.windows) caps.push_back(cap_for(j, p));
            auto& memo = memo_[bi];
            auto it = memo.find(caps);
            if (it == memo.end()) {
                BlockSolution sol = solve_block(b, caps, nullptr);
                if (solves) ++*solves;
                it = memo.emplace(caps, sol).first;
            }
            if (!it->second.feasible) return std::numeric_limits<double>::infinity();
            total += it->second.cost;
        }
        return total;
    }

    /// Per-slot per-charger rates (kWh) of an optimal schedule under peak cap P.
    std::vector<std::vector<double>> schedule_at(double p) {
        const int horizon = ep_->time_grid.horizon_slots;
        std::vector<std::vector<double>> rates(static_cast<std::size_t>(horizon), std::vector<double>(ep_->chargers.size(), 0.0));
        for (const Block& b : blocks_) {
            std::vector<std::int64_t> caps;
            for (int j : b.windows) caps.push_back(cap_for(j, p));
            solve_block(b, caps, &rates);
        }
        return rates;
    }

    const FcfsPlan& plan() const { return plan_; }
    const std::vector<LatticeSession>& sessions() const { return sessions_; }

private:
    void build_blocks(int horizon) {
        // Cut between slots t-1 and t unless a session or a window spans the cut.
        std::vector<char> joined(static_cast<std::size_t>(horizon) + 1, 0);
        for (const LatticeSession& s : sessions_)
            for (int t = s.first + 1; t <= s.last; ++t) joined[static_cast<std::size_t>(t)] = 1;
        for (const LatticeWindow& w : windows_)
            for (int t = w.first + 1; t < w.first + w.count; ++t) joined[static_cast<std::size_t>(t)] = 1;
        int start = 0;
        for (int t = 1; t <= horizon; ++t) {
            if (t < horizon && joined[static_cast<std::size_t>(t)]) continue;
            blocks_.push_back({start, t, {}, {}});
            start = t;
        }
        std::size_t bi = 0;
        for (int i = 0; i < static_cast<int>(sessions_.size()); ++i) {
            const int f = sessions_[static_cast<std::size_t>(i)].first;
            bi = 0;
            while (blocks_[bi].end <= f) ++bi;
            blocks_[bi].sessions.push_back(i);
        }
        for (int j = 0; j < static_cast<int>(windows_.size()); ++j) {
            const int f = windows_[static_cast<std::size_t>(j)].first;
            bi = 0;
            while (blocks_[bi].end <= f) ++bi;
            blocks_[bi].windows.push_back(j);
        }
        // Merge runs of empty blocks so the memo has fewer entries.
        std::vector<Block> merged;
        for (Block& b : blocks_) {
            if (!merged.empty() && merged.back().sessions.empty() && b.sessions.empty()) {
                merged.back().end = b.end;
                merged.back().windows.insert(merged.back().windows.end(), b.windows.begin(), b.windows.end());
            } else {
                merged.push_back(std::move(b));
            }
        }
        blocks_ = std::move(merged);
        memo_.resize(blocks_.size());
    }

    double missing_cost_units(const LatticeSession& s, std::int64_t y) const {
        return ep_->tariff.missing_soc_rate * std::abs(s.soc0 + u_ * static_cast<double>(y) - s.req);
    }

    BlockSolution solve_block(const Block& b, const std::vector<std::int64_t>& caps,
                              std::vector<std::vector<double>>* rates_out) const {
        BlockSolution out;
        for (std::size_t i = 0; i < b.windows.size(); ++i)
            if (caps[i] < -windows_[static_cast<std::size_t>(b.windows[i])].sum_b) return out;
        if (b.sessions.empty()) {
            // Nothing to schedule: the building alone must respect the caps.
            for (std::int64_t c : caps)
                if (c < 0) return out;
            out.feasible = true;
            return out;
        }
        MinCostFlow mcf;
        const int src = mcf.add_node();
        const int sink = mcf.add_node();
        const int n_slots = b.end - b.first;
        std::vector<int> slot_node(static_cast<std::size_t>(n_slots));
        for (int i = 0; i < n_slots; ++i) slot_node[static_cast<std::size_t>(i)] = mcf.add_node();
        std::vector<std::int64_t> supply(2 + static_cast<std::size_t>(n_slots), 0);
        std::vector<char> in_window(static_cast<std::size_t>(n_slots), 0);
        for (std::size_t wi = 0; wi < b.windows.size(); ++wi) {
            const LatticeWindow& w = windows_[static_cast<std::size_t>(b.windows[wi])];
            const int wn = mcf.add_node();
            supply.push_back(0);
            std::int64_t cap = caps[wi] + w.sum_b;
            if (caps[wi] >= w.m_hi) cap = MinCostFlow::kInf;
            mcf.add_arc(src, wn, cap, 0.0);
            for (int i = 0; i < w.count; ++i) {
                const int t = w.first + i;
                in_window[static_cast<std::size_t>(t - b.first)] = 1;
                mcf.add_arc(wn, slot_node[static_cast<std::size_t>(t - b.first)], MinCostFlow::kInf, cal_.price[static_cast<std::size_t>(t)] * u_);
            }
        }
        double constant = 0.0;
        for (int i = 0; i < n_slots; ++i) {
            const int t = b.first + i;
            const std::int64_t bt = b_[static_cast<std::size_t>(t)];
            if (!in_window[static_cast<std::size_t>(i)])
                mcf.add_arc(src, slot_node[static_cast<std::size_t>(i)], MinCostFlow::kInf, cal_.price[static_cast<std::size_t>(t)] * u_);
            supply[static_cast<std::size_t>(slot_node[static_cast<std::size_t>(i)])] -= bt;
            supply[static_cast<std::size_t>(src)] += bt;
            constant -= cal_.price[static_cast<std::size_t>(t)] * u_ * static_cast<double>(bt);
        }
        struct SessionArcs {
            std::vector<MinCostFlow::ArcRef> charge, discharge;
            std::vector<int> slot;
        };
        std::vector<SessionArcs> arcs(b.sessions.size());
        for (std::size_t si = 0; si < b.sessions.size(); ++si) {
            const LatticeSession& s = sessions_[static_cast<std::size_t>(b.sessions[si])];
            const int len = s.last - s.first + 1;
            const std::int64_t span = s.hi - s.lo;
            int prev = -1;
            for (int i = 0; i < len; ++i) {
                const int node = mcf.add_node();
                supply.push_back(0);
                if (i == 0) {
                    supply[static_cast<std::size_t>(node)] += -s.lo;
                    supply[static_cast<std::size_t>(src)] += s.lo;
                } else {
                    mcf.add_arc(prev, node, span, 0.0);
                }
                const int t = s.first + i;
                const int tn = slot_node[static_cast<std::size_t>(t - b.first)];
                arcs[si].slot.push_back(t);
                arcs[si].charge.push_back(s.rate_hi > 0 ? mcf.add_arc(tn, node, s.rate_hi, 0.0) : MinCostFlow::ArcRef{-1, -1});
                arcs[si].discharge.push_back(s.rate_lo < 0 ? mcf.add_arc(node, tn, -s.rate_lo, 0.0) : MinCostFlow::ArcRef{-1, -1});
                prev = node;
            }
            // Convex missing-SoC cost of the final SoC, as arcs of equal marginal cost.
            constant += missing_cost_units(s, s.lo);
            std::int64_t y = s.lo;
            while (y < s.hi) {
                const double slope = missing_cost_units(s, y + 1) - missing_cost_units(s, y);
                std::int64_t z = y + 1;
                while (z < s.hi && std::abs((missing_cost_units(s, z + 1) - missing_cost_units(s, z)) - slope) < 1e-12) ++z;
                mcf.add_arc(prev, sink, z - y, slope);
                y = z;
            }
            // Flow beyond the box is impossible; the SoC box is the chain cap plus the arcs above.
        }
        mcf.add_arc(sink, src, MinCostFlow::kInf, 0.0);
        supply.resize(static_cast<std::size_t>(mcf.num_nodes()), 0);
        if (!mcf.solve(supply)) return out;
        out.feasible = true;
        out.cost = mcf.cost() + constant;
        if (rates_out) {
            for (std::size_t si = 0; si < b.sessions.size(); ++si) {
                const LatticeSession& s = sessions_[static_cast<std::size_t>(b.sessions[si])];
                for (std::size_t i = 0; i < arcs[si].slot.size(); ++i) {
                    std::int64_t x = 0;
                    if (arcs[si].charge[i].node >= 0) x += mcf.flow(arcs[si].charge[i]);
                    if (arcs[si].discharge[i].node >= 0) x -= mcf.flow(arcs[si].discharge[i]);
                    (*rates_out)[static_cast<std::size_t>(arcs[si].slot[i])][static_cast<std::size_t>(s.charger)] = u_ * static_cast<double>(x);
                }
            }
        }
        return out;
    }

    const Episode* ep_;
    SlotCalendar cal_;
    FcfsPlan plan_;
    double u_ = 1.0;
    std::vector<std::int64_t> rate_lo_, rate_hi_;
    std::vector<double> d_;
    std::vector<std::int64_t> b_;
    std::vector<LatticeSession> sessions_;
    std::vector<LatticeWindow> windows_;
    std::vector<Block> blocks_;
    std::vector<std::map<std::vector<std::int64_t>, BlockSolution>> memo_;
    double fixed_missing_ = 0.0;
    double base_energy_ = 0.0;
};

}  // namespace detail

/// Rebuild the bill, outcomes and per-slot totals of a lattice schedule.
inline void finish_exact(const Episode& ep, const detail::Lattice& lat, ExactResult& r) {
    const int horizon = ep.time_grid.horizon_slots;
    r.schedule.assign(static_cast<std::size_t>(horizon), 0.0);
    for (int t = 0; t < horizon; ++t) {
        r.schedule[static_cast<std::size_t>(t)] = lat.plan().forced_kwh[static_cast<std::size_t>(t)];
        for (double x : r.rates[static_cast<std::size_t>(t)]) r.schedule[static_cast<std::size_t>(t)] += x;
    }
    // Uncontrolled chargers' realized energy goes into their columns.
    r.outcomes = lat.plan().fixed_outcomes;
    for (const detail::LatticeSession& s : lat.sessions()) {
        double soc = s.soc0;
        for (int t = s.first; t <= s.last; ++t) soc += r.rates[static_cast<std::size_t>(t)][static_cast<std::size_t>(s.charger)];
        r.outcomes.push_back({ep.sessions[s.index].id, soc, s.req, s.bmax, true});
    }
    r.bill = total_bill(ep, r.schedule, r.outcomes);
}

/**
 * Minimum bill over all lattice schedules given true departures. Stops at
 * `time_limit_s` with the incumbent; `gap` is then incumbent minus the best
 * remaining lower bound.
 */
inline ExactResult solve_exact(const Episode& ep, const ExactOptions& opt = {}) {
    require_valid(ep);
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    detail::Lattice lat(ep);
    const double wd = ep.tariff.demand_rate;
    ExactResult r;

    if (lat.windows().empty()) {
        r.rates = lat.schedule_at(std::numeric_limits<double>::infinity());
        r.flow_solves = static_cast<long>(lat.blocks().size());
        finish_exact(ep, lat, r);
        r.lower_bound = r.bill.total;
        return r;
    }

    const std::vector<double> cand = lat.candidate_peaks();
    const int n = static_cast<int>(cand.size());
    std::vector<double> g(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
    auto G = [&](int i) {
        double& v = g[static_cast<std::size_t>(i)];
        if (std::isnan(v)) v = lat.capped_cost(cand[static_cast<std::size_t>(i)], &r.flow_solves);
        return v;
    };
    if (!std::isfinite(G(n - 1))) throw InfeasibleError("no feasible schedule (forced charging exceeds every cap)");

    double best = std::numeric_limits<double>::infinity();
    int best_i = n - 1;
    auto offer = [&](int i) {
        const double v = G(i);
        if (std::isfinite(v) && wd * cand[static_cast<std::size_t>(i)] + v < best - 1e-12) {
            best = wd * cand[static_cast<std::size_t>(i)] + v;
            best_i = i;
        }
    };
    offer(n - 1);
    struct Interval {
        int a, b;
    };
    std::vector<Interval> stack{{0, n - 1}};
    double open_bound = std::numeric_limits<double>::infinity();
    bool timed_out = false;
    while (!stack.empty()) {
        const Interval iv = stack.back();
        stack.pop_back();
        const double gb = G(iv.b);
        if (!std::isfinite(gb)) continue;
        const double lb = wd * cand[static_cast<std::size_t>(iv.a)] + gb;
        if (lb >= best - opt.gap_tolerance) continue;
        if (elapsed() > opt.time_limit_s) {
            timed_out = true;
            open_bound = std::min(open_bound, lb);
            for (const Interval& rest : stack)
                if (std::isfinite(G(rest.b))) open_bound = std::min(open_bound, wd * cand[static_cast<std::size_t>(rest.a)] + g[static_cast<std::size_t>(rest.b)]);
            break;
        }
        const double ga = G(iv.a);
        offer(iv.a);
        offer(iv.b);
        if (std::isfinite(ga) && std::abs(ga - gb) <= 1e-9) continue;  // flat: best at iv.a
        if (iv.b - iv.a <= 1) continue;
        const int m = iv.a + (iv.b - iv.a) / 2;
        stack.push_back({m, iv.b});
        stack.push_back({iv.a, m});
    }

    r.rates = lat.schedule_at(cand[static_cast<std::size_t>(best_i)]);
    finish_exact(ep, lat, r);
    r.optimal = !timed_out;
    r.lower_bound = timed_out ? std::min(open_bound, best) : best;
    r.gap = std::max(0.0, r.bill.total - r.lower_bound);
    return r;
}

// -----------------------------------------------------------------------------
// Exhaustive oracle
// -----------------------------------------------------------------------------

struct BruteForceLimits {
    int max_chargers = 2;
    int max_sessions = 3;
    int max_slots = 8;
    int max_levels = 3;
};

/// Minimum bill by enumerating every lattice schedule (SoC box, non-export).
inline double brute_force_oracle(const Episode& ep, const BruteForceLimits& lim = {}) {
    require_valid(ep);
    const TimeGrid& g = ep.time_grid;
    if (static_cast<int>(ep.chargers.size()) > lim.max_chargers || static_cast<int>(ep.sessions.size()) > lim.max_sessions ||
        g.horizon_slots > lim.max_slots)
        throw ConfigError("instance exceeds brute-force limits");
    for (const ChargerSpec& c : ep.chargers)
        if (static_cast<int>(c.rate_levels_kw.size()) > lim.max_levels) throw ConfigError("instance exceeds brute-force level limit");

    const FcfsPlan plan = plan_assignment(ep);
    const int horizon = g.horizon_slots;
    const double delta = g.slot_hours;
    std::vector<double> price(static_cast<std::size_t>(horizon));
    std::vector<int> window_of(static_cast<std::size_t>(horizon), -1);
    for (int t = 0; t < horizon; ++t) price[static_cast<std::size_t>(t)] = ep.tariff.energy_rate(g, t);
    const std::vector<AggregateWindow> windows = aggregate_windows(g);
    for (std::size_t j = 0; j < windows.size(); ++j)
        for (int i = 0; i < windows[j].num_slots; ++i) window_of[static_cast<std::size_t>(windows[j].first_slot + i)] = static_cast<int>(j);

    // Controlled sessions and who is on which charger at each slot.
    struct Live {
        std::size_t index;
        int charger;
        int first, last;
    };
    std::vector<Live> live;
    for (std::size_t i = 0; i < ep.sessions.size(); ++i) {
        const int k = plan.charger_of[i];
        if (k < 0 || !ep.chargers[static_cast<std::size_t>(k)].controlled) continue;
        const EvSession& s = ep.sessions[i];
        live.push_back({i, k, s.arrival_slot, std::min(s.true_departure_slot, horizon) - 1});
    }
    double fixed_missing = 0.0;
    for (const SessionOutcome& o : plan.fixed_outcomes) fixed_missing += ep.tariff.missing_soc_rate * o.deviation();

    std::vector<double> soc(live.size());
    for (std::size_t v = 0; v < live.size(); ++v) soc[v] = ep.sessions[live[v].index].arrival_soc_kwh;
    std::vector<double> window_energy(windows.size(), 0.0);
    double best = std::numeric_limits<double>::infinity();

    // Depth-first over (slot, live vehicle) pairs.
    std::vector<std::pair<int, int>> decisions;  // (slot, live index)
    for (int t = 0; t < horizon; ++t)
        for (std::size_t v = 0; v < live.size(); ++v)
            if (t >= live[v].first && t <= live[v].last) decisions.push_back({t, static_cast<int>(v)});

    double slot_charge = 0.0;
    auto finish_slot = [&](int t, double energy_so_far, double& out_energy) -> bool {
        const double net = ep.building_load_kwh[static_cast<std::size_t>(t)] + plan.forced_kwh[static_cast<std::size_t>(t)] + slot_charge;
        if (net < -1e-9) return false;
        out_energy = energy_so_far + price[static_cast<std::size_t>(t)] * std::max(0.0, net);
        const int j = window_of[static_cast<std::size_t>(t)];
        if (j >= 0) window_energy[static_cast<std::size_t>(j)] += std::max(0.0, net);
        return true;
    };

    // Recursive lambda over decision index; slots without decisions are closed in between.
    auto rec = [&](auto&& self, std::size_t di, int open_slot, double energy) -> void {
        const int next_slot = di < decisions.size() ? decisions[di].first : horizon;
        // Close every slot before next_slot.
        std::vector<std::pair<int, double>> undo;
        double e = energy;
        int t = open_slot;
        bool ok = true;
        const double saved_charge = slot_charge;
        while (t < next_slot) {
            double e2 = 0.0;
            const int j = window_of[static_cast<std::size_t>(t)];
            const double before = j >= 0 ? window_energy[static_cast<std::size_t>(j)] : 0.0;
            if (!finish_slot(t, e, e2)) {
                ok = false;
                break;
            }
            if (j >= 0) undo.push_back({j, before});
            e = e2;
            slot_charge = 0.0;
            ++t;
        }
        if (ok) {
            if (di == decisions.size()) {
                double peak = 0.0;
                for (std::size_t j = 0; j < windows.size(); ++j)
                    peak = std::max(peak, window_energy[j] / (delta * windows[j].num_slots));
                double missing = fixed_missing;
                for (std::size_t v = 0; v < live.size(); ++v)
                    missing += ep.tariff.missing_soc_rate * std::abs(soc[v] - ep.sessions[live[v].index].required_soc_kwh);
                best = std::min(best, e + (windows.empty() ? 0.0 : ep.tariff.demand_rate * peak) + missing);
            } else {
                const auto [slot, v] = decisions[di];
                const Live& L = live[static_cast<std::size_t>(v)];
                const EvSession& s = ep.sessions[L.index];
                const ChargerSpec& c = ep.chargers[static_cast<std::size_t>(L.charger)];
                for (double kw : c.rate_levels_kw) {
                    const double r = kw * delta;
                    const double next = soc[static_cast<std::size_t>(v)] + r;
                    if (next < s.battery_min_kwh - 1e-9 || next > s.battery_max_kwh + 1e-9) continue;
                    soc[static_cast<std::size_t>(v)] = next;
                    slot_charge += r;
                    self(self, di + 1, slot, e);
                    slot_charge -= r;
                    soc[static_cast<std::size_t>(v)] = next - r;
                }
            }
        }
        for (auto it = undo.rbegin(); it != undo.rend(); ++it) window_energy[static_cast<std::size_t>(it->first)] = it->second;
        slot_charge = saved_charge;
    };
    rec(rec, 0, 0, 0.0);
    if (!std::isfinite(best)) throw InfeasibleError("no feasible schedule");
    return best;
}

}  // namespace v2b
