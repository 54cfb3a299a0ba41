// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file policy.hpp
 * @brief Uniform decision interface over the heuristic and search policies.
 *
 * Policies see the SimContext and pre-decision states only; the evaluated
 * episode's true departures never reach them.
 */

#include <memory>
#include <string>
#include <vector>

#include "v2b/dgmcts.hpp"
#include "v2b/dmcts.hpp"
#include "v2b/heuristics.hpp"

namespace v2b {

enum class PolicyKind { llf, edf, req_charge, max_charge, dgmcts, dmcts };

inline std::string policy_name(PolicyKind k) {
    switch (k) {
    case PolicyKind::llf: return "LLF";
    case PolicyKind::edf: return "EDF";
    case PolicyKind::req_charge: return "ReqCharge";
    case PolicyKind::max_charge: return "MaxCharge";
    case PolicyKind::dgmcts: return "DG-MCTS";
    case PolicyKind::dmcts: return "dMCTS";
    }
    return "?";
}

/// Accepts CLI spellings: llf, edf, req, reqcharge, max, maxcharge, dgmcts, dmcts.
inline PolicyKind parse_policy(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "llf") return PolicyKind::llf;
    if (s == "edf") return PolicyKind::edf;
    if (s == "req" || s == "reqcharge" || s == "req_charge") return PolicyKind::req_charge;
    if (s == "max" || s == "maxcharge" || s == "max_charge") return PolicyKind::max_charge;
    if (s == "dgmcts" || s == "dg-mcts" || s == "mcts") return PolicyKind::dgmcts;
    if (s == "dmcts") return PolicyKind::dmcts;
    throw ConfigError("unknown policy '" + s + "'");
}

class Policy {
public:
    virtual ~Policy() = default;
    virtual Action decide(const SystemState& s) = 0;
    virtual std::string name() const = 0;
    virtual const PlannerStats* planner_stats() const { return nullptr; }
};

class HeuristicPolicy final : public Policy {
public:
    HeuristicPolicy(const SimContext& ctx, PolicyKind kind) : ctx_(&ctx), kind_(kind) {
        if (kind == PolicyKind::dgmcts || kind == PolicyKind::dmcts) throw ConfigError("not a heuristic policy");
    }
    Action decide(const SystemState& s) override {
        Action a{std::vector<double>(ctx_->num_chargers(), 0.0)};
        switch (kind_) {
        case PolicyKind::llf: llf_policy(*ctx_, s, a.rates); break;
        case PolicyKind::edf: edf_policy(*ctx_, s, a.rates); break;
        case PolicyKind::req_charge: req_charge_policy(*ctx_, s, a.rates); break;
        case PolicyKind::max_charge: max_charge_policy(*ctx_, s, a.rates); break;
        default: break;
        }
        return a;
    }
    std::string name() const override { return policy_name(kind_); }

private:
    const SimContext* ctx_;
    PolicyKind kind_;
};

template <class Planner>
class SearchPolicy final : public Policy {
public:
    SearchPolicy(std::string name, Planner planner) : name_(std::move(name)), planner_(std::move(planner)) {}
    Action decide(const SystemState& s) override { return planner_.decide(s); }
    std::string name() const override { return name_; }
    const PlannerStats* planner_stats() const override { return &planner_.stats(); }

private:
    std::string name_;
    Planner planner_;
};

/// `samples` and `cfg` are ignored by the heuristics.
inline std::unique_ptr<Policy> make_policy(PolicyKind kind, const SimContext& ctx, const std::vector<Episode>& samples,
                                           const SearchConfig& cfg, std::uint64_t seed) {
    switch (kind) {
    case PolicyKind::dgmcts:
        return std::make_unique<SearchPolicy<DgMctsPlanner>>(policy_name(kind), DgMctsPlanner(ctx, samples, cfg, seed));
    case PolicyKind::dmcts:
        return std::make_unique<SearchPolicy<DmctsPlanner>>(policy_name(kind), DmctsPlanner(ctx, samples, cfg, seed));
    default:
        return std::make_unique<HeuristicPolicy>(ctx, kind);
    }
}

}  // namespace v2b
