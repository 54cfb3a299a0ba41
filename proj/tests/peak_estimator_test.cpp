// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "test_support.hpp"
#include "v2b/peak_estimator.hpp"
#include "v2b/policy.hpp"

using namespace v2b;
using v2b::testing::Rng;
using v2b::testing::uniform;
using v2b::testing::uniform_int;

TEST(PeakThreshold, Examples) {
    const std::vector<double> same{80.0, 80.0, 80.0};
    PeakEstimateOptions opt;
    opt.epsilon_kw = 3.0;
    EXPECT_NEAR(peak_threshold_from_peaks(same, opt).threshold_kw, 83.0, 1e-12);

    const std::vector<double> four{100, 102, 98, 100};
    const PeakEstimate e = peak_threshold_from_peaks(four);
    EXPECT_NEAR(normal_quantile(0.99), 2.326, 1e-3);
    EXPECT_NEAR(e.std_kw, 1.633, 1e-3);
    EXPECT_NEAR(e.threshold_kw, 98.10, 0.01);

    opt.epsilon_kw = -10.0;
    EXPECT_NEAR(peak_threshold_from_peaks(four, opt).threshold_kw, e.threshold_kw - 10.0, 1e-12);

    const std::vector<double> one{5.0};
    EXPECT_THROW(peak_threshold_from_peaks(one), ConfigError);
    opt.epsilon_kw = -1000.0;
    EXPECT_EQ(peak_threshold_from_peaks(four, opt).threshold_kw, 0.0);
}

TEST(PeakThreshold, Percentile) {
    std::vector<double> peaks;
    for (int i = 0; i <= 100; ++i) peaks.push_back(100.0 - i);  // 0..100
    PeakEstimateOptions opt;
    opt.percentile = true;
    EXPECT_NEAR(peak_threshold_from_peaks(peaks, opt).threshold_kw, 1.0, 1e-9);
    opt.confidence = 0.95;
    EXPECT_NEAR(peak_threshold_from_peaks(peaks, opt).threshold_kw, 5.0, 1e-9);
}

TEST(PeakThreshold, ConvergesToMean) {
    Rng rng(12);
    std::normal_distribution<double> n(120.0, 15.0);
    std::vector<double> peaks;
    for (int i = 0; i < 1000; ++i) peaks.push_back(n(rng));
    PeakEstimateOptions opt;
    opt.epsilon_kw = 4.0;
    const PeakEstimate e = peak_threshold_from_peaks(peaks, opt);
    EXPECT_NEAR(e.threshold_kw, e.mean_kw + 4.0, 0.01 * (e.mean_kw + 4.0));
    EXPECT_NEAR(e.threshold_kw, 124.0, 0.01 * 124.0);
}

TEST(PeakThreshold, MonotoneInEpsilon) {
    Rng rng(13);
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<double> peaks(static_cast<std::size_t>(uniform_int(rng, 2, 30)));
        for (double& p : peaks) p = uniform(rng, 0.0, 300.0);
        PeakEstimateOptions a, b;
        a.epsilon_kw = uniform(rng, -50.0, 50.0);
        b.epsilon_kw = a.epsilon_kw + uniform(rng, 0.0, 20.0);
        a.percentile = b.percentile = trial % 2 == 0;
        ASSERT_LE(peak_threshold_from_peaks(peaks, a).threshold_kw, peak_threshold_from_peaks(peaks, b).threshold_kw);
    }
}

TEST(PeakThreshold, SolvesSamplesExactly) {
    Rng rng(14);
    std::vector<Episode> samples;
    std::vector<double> peaks;
    for (int i = 0; i < 4; ++i) {
        samples.push_back(v2b::testing::random_day(rng, 1, 2, 0, 5));
        peaks.push_back(solve_exact(samples.back()).bill.peak_kw);
    }
    PeakEstimateOptions opt;
    opt.threads = 2;
    const PeakEstimate e = estimate_peak_threshold(samples, opt);
    EXPECT_EQ(e.peaks_kw, peaks);
    EXPECT_DOUBLE_EQ(e.threshold_kw, peak_threshold_from_peaks(peaks).threshold_kw);
    EXPECT_THROW(estimate_peak_threshold({samples[0]}), ConfigError);
}

TEST(DemandContext, Examples) {
    SystemState s;
    s.running_peak_kw = 40.0;
    EXPECT_EQ(estimate_daily_demand_context(s, 90.0), 90.0);
    s.running_peak_kw = 120.0;
    EXPECT_EQ(estimate_daily_demand_context(s, 90.0), 120.0);
    s.running_peak_kw = 0.0;
    EXPECT_EQ(estimate_daily_demand_context(s, 90.0), 90.0);
}

// Along any closed-loop run the effective threshold never drops.
TEST(DemandContext, NonDecreasingOverPeriod) {
    Rng rng(15);
    const PolicyKind kinds[] = {PolicyKind::llf, PolicyKind::max_charge, PolicyKind::req_charge};
    for (int trial = 0; trial < 10000; ++trial) {
        const Episode ep = v2b::testing::tiny_episode(rng);
        SimContext ctx(ep);
        const Trace tr = make_trace(ep, 0);
        auto policy = make_policy(kinds[trial % 3], ctx, {}, {}, 0);
        NullSink sink;
        SystemState s = initial_state(ctx, tr, 0, uniform(rng, 0.0, 5.0));
        double last = estimate_daily_demand_context(s, s.peak_estimate_kw);
        while (s.slot < tr.end_slot) {
            step(ctx, tr, s, policy->decide(s).rates, sink);
            const double now = estimate_daily_demand_context(s, s.peak_estimate_kw);
            ASSERT_GE(now, last);
            last = now;
        }
    }
}
