// SPDX-License-Identifier: Apache-2.0
// Command-line driver: episode generation, peak estimation, single-episode
// planning, exact solves, and the comparison experiments.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "v2b/harness.hpp"

namespace fs = std::filesystem;
using namespace v2b;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    int threads = 1;
};

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << s;
}

fs::path out_path(const Globals& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    const fs::path p(name);
    return p.is_absolute() || p.has_parent_path() ? p : fs::path(g.out_dir) / p;
}

GeneratorConfig generator_or_default(const std::string& path) {
    return path.empty() ? GeneratorConfig{} : load_generator_config(path);
}

/// Search flags shared by plan, evaluate, ablate and sensitivity.
struct SearchFlags {
    int iterations = 200;
    int depth = 70;
    double c = 1.414;
    double gamma = 1.0;
    int samples = 10;
    double noise_std = 1.0;
    int beta = 1;
    int offset = 1;
    bool no_boundary = false;
    std::size_t joint_cap = 512;

    void add(CLI::App* app) {
        app->add_option("--beta", beta, "pruning half-width in level steps")->capture_default_str();
        app->add_option("--offset", offset, "directional offset in level steps")->capture_default_str();
        app->add_flag("--no-boundary", no_boundary, "drop the SoC-band extremes from the candidates");
        app->add_option("--joint-cap", joint_cap, "maximum joint root actions")->capture_default_str();
        app->add_option("--iterations", iterations, "MCTS iterations per tree")->capture_default_str();
        app->add_option("--depth", depth, "maximum tree depth")->capture_default_str();
        app->add_option("--c", c, "UCT exploration coefficient")->capture_default_str();
        app->add_option("--gamma", gamma, "discount")->capture_default_str();
        app->add_option("--samples", samples, "exploration samples (trees)")->capture_default_str();
        app->add_option("--noise-std", noise_std, "anchor noise in level steps (dMCTS)")->capture_default_str();
    }
    SearchConfig config(int threads) const {
        SearchConfig s;
        s.iterations = iterations;
        s.max_depth = depth;
        s.c = c;
        s.gamma = gamma;
        s.exploration_samples = samples;
        s.pruning.noise_std = noise_std;
        s.pruning.beta = beta;
        s.pruning.offset_steps = offset;
        s.pruning.include_boundary = !no_boundary;
        s.pruning.joint_cap = joint_cap;
        s.threads = threads;
        s.validate();
        return s;
    }
};

struct ExperimentFlags {
    std::string config;
    int episodes = 10;
    int peak_samples = 10;
    double epsilon = 0.0;
    std::optional<double> peak_kw;
    SearchFlags search;

    void add(CLI::App* app) {
        app->add_option("--config", config, "generator config JSON (defaults built in)");
        app->add_option("--episodes", episodes, "evaluation episodes")->capture_default_str();
        app->add_option("--peak-samples", peak_samples, "samples for the peak estimate")->capture_default_str();
        app->add_option("--epsilon", epsilon, "peak estimate adjustment (kW)")->capture_default_str();
        app->add_option("--peak-kw", peak_kw, "use this threshold instead of estimating");
        search.add(app);
    }
    ExperimentConfig config_for(const Globals& g) const {
        ExperimentConfig e;
        e.generator = generator_or_default(config);
        e.episodes = episodes;
        e.seed = g.seed;
        e.search = search.config(g.threads);
        e.peak_samples = peak_samples;
        e.epsilon_kw = epsilon;
        e.peak_kw = peak_kw;
        e.threads = g.threads;
        return e;
    }
};

void emit_tables(const Globals& g, const std::string& stem, const std::vector<VariantResult>& rs) {
    write_text(out_path(g, stem + "_summary.csv"), summary_csv(rs));
    write_text(out_path(g, stem + "_summary.txt"), summary_text(rs));
    write_text(out_path(g, stem + "_episodes.csv"), episodes_csv(rs));
    std::cout << summary_text(rs);
}

auto progress() {
    return [](const std::string& line) { std::cerr << line << '\n'; };
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"V2B charging optimization: policies, planners and the offline optimum"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads, 0 = auto")->capture_default_str();

    // generate
    auto* gen = app.add_subcommand("generate", "sample episodes from a generator config");
    std::string gen_config, gen_out;
    int gen_count = 1;
    gen->add_option("--config", gen_config, "generator config JSON");
    gen->add_option("--episodes", gen_count, "number of episodes")->capture_default_str();
    gen->add_option("--out", gen_out, "output file (single episode)");

    // estimate-peak
    auto* est = app.add_subcommand("estimate-peak", "peak threshold from exactly solved samples");
    std::string est_config, est_out = "threshold.json";
    int est_samples = 10;
    double est_eps = 0.0, est_conf = 0.99;
    bool est_pct = false;
    est->add_option("--config", est_config, "generator config JSON");
    est->add_option("--samples", est_samples, "number of samples")->capture_default_str();
    est->add_option("--epsilon", est_eps, "additive adjustment (kW)")->capture_default_str();
    est->add_option("--confidence", est_conf, "confidence level")->capture_default_str();
    est->add_flag("--percentile", est_pct, "empirical lower percentile instead of the CI bound");
    est->add_option("--out", est_out, "output JSON")->capture_default_str();

    // plan
    auto* plan = app.add_subcommand("plan", "run one policy through one episode");
    std::string plan_episode, plan_threshold, plan_policy = "dgmcts", plan_config, plan_out = "trajectory.csv";
    SearchFlags plan_search;
    plan->add_option("--episode", plan_episode, "episode JSON")->required();
    plan->add_option("--threshold", plan_threshold, "threshold JSON from estimate-peak");
    plan->add_option("--policy", plan_policy, "llf|edf|req|max|dgmcts|dmcts")->capture_default_str();
    plan->add_option("--config", plan_config, "generator config for exploration samples");
    plan->add_option("--out", plan_out, "trajectory CSV")->capture_default_str();
    plan_search.add(plan);

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "compare policies on seeded episodes");
    ExperimentFlags eval_flags;
    std::string eval_policies = "dgmcts,dmcts,llf,edf,req,max";
    eval_flags.add(eval);
    eval->add_option("--policies", eval_policies, "comma-separated policies")->capture_default_str();

    // solve-exact
    auto* exact = app.add_subcommand("solve-exact", "offline optimum with true departures");
    std::string exact_episode, exact_out = "schedule.csv";
    double exact_limit = 300.0;
    exact->add_option("--episode", exact_episode, "episode JSON")->required();
    exact->add_option("--time-limit", exact_limit, "seconds")->capture_default_str();
    exact->add_option("--out", exact_out, "schedule CSV")->capture_default_str();

    // ablate
    auto* abl = app.add_subcommand("ablate", "DG-MCTS against an ablated copy");
    ExperimentFlags abl_flags;
    std::string abl_kind = "P";
    abl_flags.add(abl);
    abl->add_option("--kind", abl_kind, "P, H or C")->capture_default_str();

    // sensitivity
    auto* sens = app.add_subcommand("sensitivity", "perturbed samples and scenario changes");
    ExperimentFlags sens_flags;
    std::string sens_kind = "sample_sweep";
    sens_flags.add(sens);
    sens->add_option("--kind", sens_kind, "ME, FE, BLF, window3h, arrivals25 or sample_sweep")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    }

    try {
        if (*gen) {
            const GeneratorConfig cfg = generator_or_default(gen_config);
            for (int i = 0; i < gen_count; ++i) {
                const Episode ep = generate_episode(cfg, episode_seed(g.seed, i));
                const fs::path p = out_path(g, !gen_out.empty() && gen_count == 1 ? gen_out : "episode_" + std::to_string(i) + ".json");
                write_json_file(p.string(), ep);
                std::cout << p.string() << ": " << ep.sessions.size() << " sessions\n";
            }
        } else if (*est) {
            ExperimentConfig e;
            e.generator = generator_or_default(est_config);
            e.seed = g.seed;
            e.peak_samples = est_samples;
            e.threads = g.threads;
            PeakEstimateOptions opt;
            opt.confidence = est_conf;
            opt.epsilon_kw = est_eps;
            opt.percentile = est_pct;
            opt.threads = g.threads;
            const PeakEstimate pe = estimate_peak_threshold(generate_samples(e.generator, g.seed, 0, est_samples), opt);
            json j{{"threshold_kw", pe.threshold_kw}, {"mean_kw", pe.mean_kw}, {"std_kw", pe.std_kw},
                   {"peaks_kw", pe.peaks_kw}, {"epsilon_kw", est_eps}, {"confidence", est_conf}};
            write_json_file(out_path(g, est_out).string(), j);
            std::cout << "threshold " << fixed(pe.threshold_kw, 3) << " kW\n";
        } else if (*plan) {
            const Episode ep = load_episode(plan_episode);
            double peak = 0.0;
            if (!plan_threshold.empty()) {
                const json j = read_json_file(plan_threshold);
                if (!j.contains("threshold_kw")) throw ConfigError(plan_threshold + ": missing threshold_kw");
                peak = j.at("threshold_kw").get<double>();
            }
            const PolicyKind kind = parse_policy(plan_policy);
            const SearchConfig search = plan_search.config(g.threads);
            std::vector<Episode> samples;
            if (kind == PolicyKind::dgmcts || kind == PolicyKind::dmcts) {
                GeneratorConfig gc = generator_or_default(plan_config);
                gc.grid = ep.time_grid;
                gc.tariff = ep.tariff;
                samples = generate_samples(gc, g.seed, 1000, search.exploration_samples);
            }
            const SimContext ctx(ep);
            auto policy = make_policy(kind, ctx, samples, search, mix_seed(g.seed ^ 0x706c616eULL));
            SimOptions so;
            so.peak_estimate_kw = peak;
            so.estimate_seed = g.seed;
            so.record = true;
            const EpisodeResult r = simulate(ep, ctx, *policy, so);
            write_text(out_path(g, plan_out), trajectory_csv(r));
            std::cout << kBillCsvHeader << '\n' << bill_csv_row("0", r.policy, r.bill) << '\n';
            std::cout << "missing_soc_kwh " << fixed(r.missing_soc_kwh, 3) << ", cars_under_required " << r.cars_under_required
                      << ", mean_decision_s " << fixed(r.mean_decision_s, 4) << '\n';
        } else if (*eval) {
            const ExperimentConfig e = eval_flags.config_for(g);
            std::vector<PolicyKind> kinds;
            std::stringstream ss(eval_policies);
            for (std::string tok; std::getline(ss, tok, ',');)
                if (!tok.empty()) kinds.push_back(parse_policy(tok));
            emit_tables(g, "evaluate", run_variants(e, policy_variants(kinds), progress()));
        } else if (*exact) {
            const Episode ep = load_episode(exact_episode);
            ExactOptions opt;
            opt.time_limit_s = exact_limit;
            const ExactResult r = solve_exact(ep, opt);
            std::ostringstream os;
            os << "slot,building_kwh,charging_kwh";
            for (std::size_t k = 0; k < ep.chargers.size(); ++k) os << ",charger_" << k;
            os << '\n';
            for (std::size_t t = 0; t < r.schedule.size(); ++t) {
                os << t << ',' << fixed(ep.building_load_kwh[t]) << ',' << fixed(r.schedule[t]);
                for (double x : r.rates[t]) os << ',' << fixed(x);
                os << '\n';
            }
            write_text(out_path(g, exact_out), os.str());
            std::cout << kBillCsvHeader << '\n' << bill_csv_row("0", "exact", r.bill) << '\n';
            std::cout << (r.optimal ? "optimal" : "time limit reached") << ", gap " << fixed(r.gap, 6) << '\n';
        } else if (*abl) {
            const ExperimentConfig e = abl_flags.config_for(g);
            emit_tables(g, "ablate_" + abl_kind, run_variants(e, ablation_variants(parse_ablation(abl_kind), e.search), progress()));
        } else if (*sens) {
            const ExperimentConfig e = sens_flags.config_for(g);
            emit_tables(g, "sensitivity_" + sens_kind, run_variants(e, sensitivity_variants(parse_sensitivity(sens_kind), e), progress()));
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
