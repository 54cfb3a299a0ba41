// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file peak_estimator.hpp
 * @brief Monthly peak threshold from exactly solved sample episodes.
 */

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "v2b/dgmcts.hpp"
#include "v2b/exact.hpp"

namespace v2b {

struct PeakEstimateOptions {
    double confidence = 0.99;
    double epsilon_kw = 0.0;
    bool percentile = false;  ///< empirical (1 - confidence) quantile instead of the CI bound
    ExactOptions solver;
    int threads = 1;
};

struct PeakEstimate {
    double threshold_kw = 0.0;
    double mean_kw = 0.0;
    double std_kw = 0.0;
    std::vector<double> peaks_kw;
};

/// One-sided standard normal quantile, e.g. 2.326 at 0.99.
inline double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// mean - z*s/sqrt(n) + epsilon (or the lower percentile + epsilon), floored at 0.
inline PeakEstimate peak_threshold_from_peaks(std::span<const double> peaks, const PeakEstimateOptions& opt = {}) {
    if (peaks.size() < 2) throw ConfigError("peak estimate needs at least two samples");
    if (!(opt.confidence > 0.0 && opt.confidence < 1.0)) throw ConfigError("confidence must lie in (0, 1)");
    PeakEstimate e;
    e.peaks_kw.assign(peaks.begin(), peaks.end());
    const double n = static_cast<double>(peaks.size());
    e.mean_kw = std::accumulate(peaks.begin(), peaks.end(), 0.0) / n;
    double ss = 0.0;
    for (double p : peaks) ss += (p - e.mean_kw) * (p - e.mean_kw);
    e.std_kw = std::sqrt(ss / (n - 1.0));
    double base;
    if (opt.percentile) {
        std::vector<double> s(peaks.begin(), peaks.end());
        std::sort(s.begin(), s.end());
        const double pos = (1.0 - opt.confidence) * (n - 1.0);
        const std::size_t i = static_cast<std::size_t>(std::floor(pos));
        const double f = pos - static_cast<double>(i);
        base = i + 1 < s.size() ? s[i] + f * (s[i + 1] - s[i]) : s[i];
    } else {
        base = e.mean_kw - normal_quantile(opt.confidence) * e.std_kw / std::sqrt(n);
    }
    e.threshold_kw = std::max(0.0, base + opt.epsilon_kw);
    return e;
}

/// Solve every sample exactly and estimate from the optimal peaks.
inline PeakEstimate estimate_peak_threshold(const std::vector<Episode>& samples, const PeakEstimateOptions& opt = {}) {
    if (samples.size() < 2) throw ConfigError("peak estimate needs at least two samples");
    std::vector<double> peaks(samples.size(), 0.0);
    parallel_for(static_cast<int>(samples.size()), opt.threads,
                 [&](int i) { peaks[static_cast<std::size_t>(i)] = solve_exact(samples[static_cast<std::size_t>(i)], opt.solver).bill.peak_kw; });
    return peak_threshold_from_peaks(peaks, opt);
}

/// Threshold a day's search must respect.
inline double estimate_daily_demand_context(const SystemState& s, double p_hat_kw) { return std::max(p_hat_kw, s.running_peak_kw); }

}  // namespace v2b
