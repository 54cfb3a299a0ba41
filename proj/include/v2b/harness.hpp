// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file harness.hpp
 * @brief Closed-loop evaluation of policies on episodes, the four reported
 *        metrics, ablation and sensitivity variants, and table output.
 */

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "v2b/generator.hpp"
#include "v2b/io.hpp"
#include "v2b/peak_estimator.hpp"
#include "v2b/policy.hpp"

namespace v2b {

/// One (slot, charger) line of a trajectory dump; charger_id -1 marks a slot with no vehicle.
struct TrajectoryRow {
    int slot = 0;
    int charger_id = -1;
    int session_id = -1;
    double rate_kwh = 0.0;  ///< realized, grid side
    double soc_kwh = 0.0;   ///< after the slot
    double building_kwh = 0.0;
    double pi_kw = 0.0;  ///< site power over the slot
};

struct SimOptions {
    double peak_estimate_kw = 0.0;
    std::uint64_t estimate_seed = 0;
    bool record = false;
};

struct EpisodeResult {
    std::string policy;
    BillBreakdown bill;
    double missing_soc_kwh = 0.0;
    int cars_under_required = 0;
    double peak_shaving = 0.0;  ///< building-only demand charge minus the policy's
    double mean_decision_s = 0.0;
    double max_decision_s = 0.0;
    std::vector<double> schedule;
    std::vector<SessionOutcome> outcomes;
    std::vector<TrajectoryRow> rows;
    PlannerStats stats;
};

/// Metrics derived from a schedule and the departing vehicles.
inline void fill_metrics(const Episode& ep, EpisodeResult& r) {
    r.bill = total_bill(ep, r.schedule, r.outcomes);
    r.missing_soc_kwh = 0.0;
    r.cars_under_required = 0;
    for (const SessionOutcome& o : r.outcomes) {
        r.missing_soc_kwh += o.shortfall();
        if (o.shortfall() > 1e-6) ++r.cars_under_required;
    }
    r.peak_shaving = building_only_bill(ep).demand_cost - r.bill.demand_cost;
}

/**
 * Run `policy` through the whole episode. Every action is checked for
 * admissibility before it is applied; vehicles still plugged in when the
 * horizon ends are booked at their final SoC.
 */
inline EpisodeResult simulate(const Episode& ep, const SimContext& ctx, Policy& policy, const SimOptions& opt = {}) {
    const Trace trace = make_trace(ep, opt.estimate_seed);
    EpisodeResult r;
    r.policy = policy.name();
    struct Sink {
        std::vector<SessionOutcome>* out;
        void on_departure(const SessionOutcome& o) { out->push_back(o); }
        void on_window(double) {}
    } sink{&r.outcomes};
    SystemState s = initial_state(ctx, trace, 0, opt.peak_estimate_kw, sink);
    const int horizon = ep.time_grid.horizon_slots;
    r.schedule.assign(static_cast<std::size_t>(horizon), 0.0);
    std::vector<double> realized(ctx.num_chargers(), 0.0);
    double total_s = 0.0;
    for (int t = 0; t < horizon; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        const Action a = policy.decide(s);
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        total_s += dt;
        r.max_decision_s = std::max(r.max_decision_s, dt);
        const double building = s.building_kwh;
        const std::vector<std::optional<ConnectedEv>> before = opt.record ? s.chargers : std::vector<std::optional<ConnectedEv>>{};
        checked_step(ctx, trace, s, a, sink, realized);
        double net = 0.0;
        for (double x : realized) net += x;
        r.schedule[static_cast<std::size_t>(t)] = net;
        if (opt.record) {
            const double pi = (building + net) / ctx.slot_hours();
            bool any = false;
            for (std::size_t k = 0; k < before.size(); ++k) {
                if (!before[k]) continue;
                const double eta = ctx.chargers[k].efficiency;
                const double x = realized[k];
                const double soc = before[k]->soc_kwh + (x >= 0.0 ? eta * x : x / eta);
                r.rows.push_back({t, static_cast<int>(k), before[k]->session_id, x, soc, building, pi});
                any = true;
            }
            if (!any) r.rows.push_back({t, -1, -1, 0.0, 0.0, building, pi});
        }
    }
    for (const auto& ev : s.chargers)
        if (ev) r.outcomes.push_back({ev->session_id, ev->soc_kwh, ev->required_kwh, ev->battery_max_kwh, true});
    r.mean_decision_s = horizon > 0 ? total_s / horizon : 0.0;
    if (const PlannerStats* st = policy.planner_stats()) r.stats = *st;
    fill_metrics(ep, r);
    return r;
}

inline constexpr const char* kTrajectoryCsvHeader = "slot,charger_id,session_id,rate_kwh,soc_kwh,building_kwh,pi_kw";

inline std::string trajectory_csv(const EpisodeResult& r) {
    std::ostringstream os;
    os << kTrajectoryCsvHeader << '\n';
    for (const TrajectoryRow& row : r.rows)
        os << row.slot << ',' << row.charger_id << ',' << row.session_id << ',' << fixed(row.rate_kwh, 9) << ','
           << fixed(row.soc_kwh, 9) << ',' << fixed(row.building_kwh, 9) << ',' << fixed(row.pi_kw, 9) << '\n';
    return os.str();
}

/// Per-slot total charging rebuilt from a trajectory dump.
inline std::vector<double> schedule_from_rows(const std::vector<TrajectoryRow>& rows, int horizon) {
    std::vector<double> out(static_cast<std::size_t>(horizon), 0.0);
    for (const TrajectoryRow& row : rows)
        if (row.charger_id >= 0) out[static_cast<std::size_t>(row.slot)] += row.rate_kwh;
    return out;
}

// -----------------------------------------------------------------------------
// Experiments
// -----------------------------------------------------------------------------

/// Seeds of evaluation episodes and of exploration/peak samples come from separate hash streams.
inline std::uint64_t episode_seed(std::uint64_t seed, int i) {
    return mix_seed(mix_seed(seed) ^ (0x45504953ULL + static_cast<std::uint64_t>(i)));
}
inline std::uint64_t sample_seed(std::uint64_t seed, int i) {
    return mix_seed(mix_seed(seed + 0x5a5a5a5aULL) ^ (0x53414d50ULL << 20) ^ static_cast<std::uint64_t>(i));
}

struct ExperimentConfig {
    GeneratorConfig generator;
    int episodes = 10;
    std::uint64_t seed = 1;
    SearchConfig search;
    int peak_samples = 10;
    double epsilon_kw = 0.0;
    std::optional<double> peak_kw;  ///< skips estimation when set
    int threads = 1;
    ExactOptions solver;
};

/// One column of a comparison table.
struct Variant {
    std::string label;
    PolicyKind kind = PolicyKind::dgmcts;
    std::optional<SearchConfig> search;  ///< defaults to the experiment's
    bool peak_prediction = true;         ///< false: threshold is the running peak only
    BatteryModel battery;
    std::optional<Perturbation> sample_perturbation;
    std::optional<GeneratorConfig> generator;  ///< defaults to the experiment's
};

struct VariantResult {
    std::string label;
    double peak_estimate_kw = 0.0;
    std::vector<EpisodeResult> episodes;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd m;
    if (xs.empty()) return m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        for (double x : xs) m.std += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(m.std / static_cast<double>(xs.size() - 1));
    }
    return m;
}

inline MeanStd summarize(const VariantResult& v, const std::function<double(const EpisodeResult&)>& metric) {
    std::vector<double> xs;
    for (const EpisodeResult& e : v.episodes) xs.push_back(metric(e));
    return mean_std(xs);
}

inline std::vector<Episode> generate_samples(const GeneratorConfig& gen, std::uint64_t seed, int first, int count) {
    std::vector<Episode> out;
    for (int i = 0; i < count; ++i) out.push_back(generate_episode(gen, sample_seed(seed, first + i)));
    return out;
}

/// Exact-solver peak threshold for a generator, from samples disjoint from evaluation episodes.
inline PeakEstimate estimate_for_generator(const GeneratorConfig& gen, const ExperimentConfig& cfg) {
    PeakEstimateOptions opt;
    opt.epsilon_kw = cfg.epsilon_kw;
    opt.solver = cfg.solver;
    opt.threads = cfg.threads;
    return estimate_peak_threshold(generate_samples(gen, cfg.seed, 0, cfg.peak_samples), opt);
}

/**
 * Evaluate each variant on the same seeded episodes. Peak estimates are
 * computed once per distinct generator and reused; `log`, when set,
 * receives one line per finished episode.
 */
inline std::vector<VariantResult> run_variants(const ExperimentConfig& cfg, const std::vector<Variant>& variants,
                                               const std::function<void(const std::string&)>& log = {}) {
    std::vector<std::pair<json, double>> estimates;
    auto peak_for = [&](const GeneratorConfig& gen) {
        if (cfg.peak_kw) return *cfg.peak_kw;
        const json key = gen;
        for (const auto& [k, v] : estimates)
            if (k == key) return v;
        const double p = estimate_for_generator(gen, cfg).threshold_kw;
        estimates.push_back({key, p});
        if (log) log("peak estimate " + fixed(p, 3) + " kW");
        return p;
    };
    std::vector<VariantResult> out;
    for (const Variant& v : variants) {
        const GeneratorConfig& gen = v.generator ? *v.generator : cfg.generator;
        SearchConfig search = v.search ? *v.search : cfg.search;
        search.threads = cfg.threads;
        VariantResult vr;
        vr.label = v.label;
        vr.peak_estimate_kw = peak_for(gen);
        std::vector<Episode> samples;
        if (v.kind == PolicyKind::dgmcts || v.kind == PolicyKind::dmcts) {
            samples = generate_samples(gen, cfg.seed, 1000, search.exploration_samples);
            if (v.sample_perturbation)
                for (std::size_t i = 0; i < samples.size(); ++i)
                    samples[i] = perturb_episode(samples[i], *v.sample_perturbation, sample_seed(cfg.seed, 5000 + static_cast<int>(i)));
        }
        for (int e = 0; e < cfg.episodes; ++e) {
            const std::uint64_t es = episode_seed(cfg.seed, e);
            const Episode ep = generate_episode(gen, es);
            const SimContext ctx(ep, v.battery);
            auto policy = make_policy(v.kind, ctx, samples, search, mix_seed(es ^ 0x706c616eULL));
            SimOptions so;
            so.peak_estimate_kw = v.peak_prediction ? vr.peak_estimate_kw : 0.0;
            so.estimate_seed = es;
            EpisodeResult r = simulate(ep, ctx, *policy, so);
            r.policy = v.label;
            if (log) log(v.label + " episode " + std::to_string(e) + " total " + fixed(r.bill.total, 2));
            vr.episodes.push_back(std::move(r));
        }
        out.push_back(std::move(vr));
    }
    return out;
}

inline std::vector<Variant> policy_variants(const std::vector<PolicyKind>& kinds) {
    std::vector<Variant> out;
    for (PolicyKind k : kinds) {
        Variant v;
        v.label = policy_name(k);
        v.kind = k;
        out.push_back(v);
    }
    return out;
}

inline const std::vector<PolicyKind>& all_policies() {
    static const std::vector<PolicyKind> k{PolicyKind::dgmcts, PolicyKind::dmcts, PolicyKind::llf,
                                           PolicyKind::edf, PolicyKind::req_charge, PolicyKind::max_charge};
    return k;
}

enum class AblationKind { P, H, C };

inline AblationKind parse_ablation(const std::string& s) {
    if (s == "P" || s == "p") return AblationKind::P;
    if (s == "H" || s == "h") return AblationKind::H;
    if (s == "C" || s == "c") return AblationKind::C;
    throw ConfigError("unknown ablation '" + s + "' (expected P, H or C)");
}

/// DG-MCTS next to one ablated copy.
inline std::vector<Variant> ablation_variants(AblationKind kind, const SearchConfig& base) {
    Variant dg;
    dg.label = "DG-MCTS";
    Variant ab = dg;
    switch (kind) {
    case AblationKind::P:
        ab.label = "MCTS/P";
        ab.peak_prediction = false;
        break;
    case AblationKind::H: {
        ab.label = "MCTS/H";
        SearchConfig s = base;
        s.pruning.full_space = true;
        ab.search = s;
        break;
    }
    case AblationKind::C:
        ab.label = "MCTS/C";
        ab.battery = BatteryModel::piecewise();
        break;
    }
    return {dg, ab};
}

enum class SensitivityKind { ME, FE, BLF, window3h, arrivals25, sample_sweep };

inline SensitivityKind parse_sensitivity(const std::string& s) {
    if (s == "ME") return SensitivityKind::ME;
    if (s == "FE") return SensitivityKind::FE;
    if (s == "BLF") return SensitivityKind::BLF;
    if (s == "window3h") return SensitivityKind::window3h;
    if (s == "arrivals25") return SensitivityKind::arrivals25;
    if (s == "sample_sweep") return SensitivityKind::sample_sweep;
    throw ConfigError("unknown sensitivity '" + s + "'");
}

/// Arrival rates rescaled so the expected daily count is `per_day`.
inline GeneratorConfig scale_arrivals(GeneratorConfig g, double per_day) {
    const double m = g.arrivals.daily_mean();
    if (m <= 0.0) throw ConfigError("generator has no arrivals to scale");
    for (double& l : g.arrivals.hourly_rate) l *= per_day / m;
    return g;
}

inline std::vector<Variant> sensitivity_variants(SensitivityKind kind, const ExperimentConfig& cfg) {
    std::vector<Variant> out;
    auto perturbed = [&](const char* label, Perturbation p) {
        Variant base;
        base.label = "DG-MCTS";
        Variant v = base;
        v.label = label;
        v.sample_perturbation = p;
        return std::vector<Variant>{base, v};
    };
    switch (kind) {
    case SensitivityKind::ME: return perturbed("DG-MCTS/ME", Perturbation::more_evs);
    case SensitivityKind::FE: return perturbed("DG-MCTS/FE", Perturbation::fewer_evs);
    case SensitivityKind::BLF: return perturbed("DG-MCTS/BLF", Perturbation::building_load_factor);
    case SensitivityKind::window3h:
    case SensitivityKind::arrivals25: {
        GeneratorConfig g = cfg.generator;
        if (kind == SensitivityKind::window3h) g.arrivals.departure_window_hours = 3.0;
        else g = scale_arrivals(g, 25.0);
        out = policy_variants(all_policies());
        for (Variant& v : out) v.generator = g;
        return out;
    }
    case SensitivityKind::sample_sweep:
        for (int n : {5, 10, 15, 20}) {
            Variant v;
            v.label = "DG-MCTS/" + std::to_string(n);
            SearchConfig s = cfg.search;
            s.exploration_samples = n;
            v.search = s;
            out.push_back(v);
        }
        return out;
    }
    return out;
}

// -----------------------------------------------------------------------------
// Tables
// -----------------------------------------------------------------------------

struct MetricColumn {
    const char* name;
    double (*get)(const EpisodeResult&);
};

inline const std::vector<MetricColumn>& metric_columns() {
    static const std::vector<MetricColumn> cols{
        {"total_cost", [](const EpisodeResult& e) { return e.bill.total; }},
        {"missing_soc_kwh", [](const EpisodeResult& e) { return e.missing_soc_kwh; }},
        {"cars_under_required", [](const EpisodeResult& e) { return static_cast<double>(e.cars_under_required); }},
        {"peak_shaving", [](const EpisodeResult& e) { return e.peak_shaving; }},
        {"decision_s", [](const EpisodeResult& e) { return e.mean_decision_s; }},
    };
    return cols;
}

/// label, then mean and std per metric.
inline std::string summary_csv(const std::vector<VariantResult>& rs) {
    std::ostringstream os;
    os << "policy";
    for (const MetricColumn& c : metric_columns()) os << ',' << c.name << "_mean," << c.name << "_std";
    os << '\n';
    for (const VariantResult& v : rs) {
        os << v.label;
        for (const MetricColumn& c : metric_columns()) {
            const MeanStd m = summarize(v, c.get);
            os << ',' << fixed(m.mean) << ',' << fixed(m.std);
        }
        os << '\n';
    }
    return os.str();
}

inline std::string summary_text(const std::vector<VariantResult>& rs) {
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> head{"policy"};
    for (const MetricColumn& c : metric_columns()) head.push_back(c.name);
    cells.push_back(head);
    for (const VariantResult& v : rs) {
        std::vector<std::string> row{v.label};
        for (const MetricColumn& c : metric_columns()) {
            const MeanStd m = summarize(v, c.get);
            const int digits = std::string(c.name) == "decision_s" ? 4 : 2;
            row.push_back(fixed(m.mean, digits) + " ± " + fixed(m.std, digits));
        }
        cells.push_back(row);
    }
    // "±" is two bytes in UTF-8 but one column wide.
    auto width = [](const std::string& s) {
        std::size_t w = 0;
        for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
        return w;
    };
    std::vector<std::size_t> w(head.size(), 0);
    for (const auto& row : cells)
        for (std::size_t i = 0; i < row.size(); ++i) w[i] = std::max(w[i], width(row[i]));
    std::ostringstream os;
    for (const auto& row : cells) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            os << row[i] << std::string(w[i] - width(row[i]), ' ');
            if (i + 1 < row.size()) os << "  ";
        }
        os << '\n';
    }
    return os.str();
}

/// Per-episode bills, one row per (variant, episode).
inline std::string episodes_csv(const std::vector<VariantResult>& rs) {
    std::ostringstream os;
    os << kBillCsvHeader << ",missing_soc_kwh,cars_under_required,peak_shaving,mean_decision_s\n";
    for (const VariantResult& v : rs)
        for (std::size_t i = 0; i < v.episodes.size(); ++i) {
            const EpisodeResult& e = v.episodes[i];
            os << bill_csv_row(std::to_string(i), v.label, e.bill) << ',' << fixed(e.missing_soc_kwh) << ','
               << e.cars_under_required << ',' << fixed(e.peak_shaving) << ',' << fixed(e.mean_decision_s) << '\n';
        }
    return os.str();
}

}  // namespace v2b
