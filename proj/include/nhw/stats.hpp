#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>
#include <utility>
#include <vector>

#include "nhw/rng.hpp"

namespace nhw {

/// Runs fn(i) for i in [0, n) across workers; fn must write only to slot i.
template <class Fn>
inline void parallel_for(long n, int workers, Fn&& fn) {
    workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<long>(1, n))));
    if (workers == 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (long i = w; i < n; i += workers) fn(i);
        });
    for (auto& th : pool) th.join();
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline MeanStderr mean_stderr(const std::vector<double>& x) {
    MeanStderr r;
    if (x.empty()) return r;
    double s = 0.0;
    for (double v : x) s += v;
    r.mean = s / x.size();
    if (x.size() < 2) return r;
    double ss = 0.0;
    for (double v : x) ss += (v - r.mean) * (v - r.mean);
    r.stderr_ = std::sqrt(ss / (x.size() - 1.0) / x.size());
    return r;
}

/// Wilson score interval for k successes in n trials (z = 1.96 by default).
inline std::pair<double, double> wilson_interval(long k, long n, double z = 1.959963984540054) {
    if (n <= 0) return {0.0, 1.0};
    const double p = static_cast<double>(k) / n;
    const double z2 = z * z;
    const double den = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / den;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / den;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Least-squares slope and intercept of y against x.
inline std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {slope, (sy - slope * sx) / n};
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    return linear_fit(lx, ly).first;
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    const double na = a.size(), nb = b.size();
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

/// KS distance of a sample against a sorted reference sample's ECDF.
inline double ks_against_sorted(std::vector<double> a, const std::vector<double>& ref_sorted) {
    std::sort(a.begin(), a.end());
    const double na = a.size(), nr = ref_sorted.size();
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double fr = std::upper_bound(ref_sorted.begin(), ref_sorted.end(), a[i]) - ref_sorted.begin();
        const double fl = std::lower_bound(ref_sorted.begin(), ref_sorted.end(), a[i]) - ref_sorted.begin();
        d = std::max(d, std::abs((i + 1) / na - fr / nr));
        d = std::max(d, std::abs(i / na - fl / nr));
    }
    return d;
}

/// KS distance against a continuous CDF.
template <class Cdf>
inline double ks_against_cdf(std::vector<double> a, Cdf&& cdf) {
    std::sort(a.begin(), a.end());
    const double n = a.size();
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double f = cdf(a[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

/// Two-sample Cramer-von Mises criterion T = nm/(n+m) int (F_n - G_m)^2 dH_{n+m}.
inline double cvm_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double n = a.size(), m = b.size();
    std::size_t i = 0, j = 0;
    double acc = 0.0;
    while (i < a.size() || j < b.size()) {
        if (j >= b.size() || (i < a.size() && a[i] <= b[j])) ++i; else ++j;
        const double diff = i / n - j / m;
        acc += diff * diff;
    }
    return n * m / ((n + m) * (n + m)) * acc;
}

struct DistributionTest {
    double ks = 0.0;
    double cvm = 0.0;
    double p_value = 1.0;
    long resamples = 0;
};

/// KS and CvM of the sample against a reference pool; the p-value resamples
/// size-n draws from the pool and recomputes KS against the pool ECDF.
inline DistributionTest distribution_test(const std::vector<double>& sample, std::vector<double> reference,
                                          std::uint64_t seed, long resamples = 2000) {
    DistributionTest out;
    out.ks = ks_statistic(sample, reference);
    out.cvm = cvm_statistic(sample, reference);
    std::sort(reference.begin(), reference.end());
    const double observed = ks_against_sorted(sample, reference);
    CounterRng rng(seed, 0x5eed);
    long exceed = 0;
    std::vector<double> draw(sample.size());
    for (long b = 0; b < resamples; ++b) {
        for (auto& x : draw) x = reference[static_cast<std::size_t>(rng.uniform() * reference.size())];
        if (ks_against_sorted(draw, reference) >= observed) ++exceed;
    }
    out.resamples = resamples;
    out.p_value = (1.0 + exceed) / (1.0 + resamples);
    return out;
}

}  // namespace nhw
