#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nhw/ensembles.hpp"
#include "nhw/saddle_quantities.hpp"
#include "nhw/stats.hpp"

namespace nhw {

/// Glaisher-Kinkelin constant.
inline constexpr double kGlaisher = 1.282427129100622636875342568869791727767688927325;

/// log G at half-integers k/2, 1 <= k <= 64, from G(1) = 1, the Glaisher closed form
/// log G(1/2) = log2/24 + 1/8 - log(pi)/4 - (3/2) log A, and G(z+1) = Gamma(z) G(z).
class BarnesG {
public:
    static constexpr int kMax = 64;

    explicit BarnesG(double glaisher = kGlaisher) : glaisher_(glaisher) {
        table_[2] = 0.0;  // G(1)
        table_[1] = std::log(2.0) / 24.0 + 0.125 - 0.25 * std::log(kPi) - 1.5 * std::log(glaisher);
        for (int k = 3; k <= kMax; ++k) table_[k] = table_[k - 2] + std::lgamma((k - 2) / 2.0);
    }

    /// log G(k/2).
    double log_half(int k) const {
        if (k < 1 || k > kMax) throw ConfigError("barnes_g_log: argument outside [1/2, 32]");
        return table_[k];
    }

    /// log G(x) for x a positive half-integer.
    double log(double x) const {
        const double k = 2.0 * x;
        if (std::abs(k - std::round(k)) > 1e-12) throw ConfigError("barnes_g_log: not a half-integer");
        return log_half(static_cast<int>(std::lround(k)));
    }

    double glaisher() const { return glaisher_; }

private:
    double glaisher_;
    std::array<double, kMax + 1> table_{};
};

inline const BarnesG& barnes_g() {
    static const BarnesG g;
    return g;
}

inline double barnes_g_log(double x) { return barnes_g().log(x); }

/// log prod_{j=1}^{m-1} (2j)!
inline double log_even_factorial_product(int m) {
    double acc = 0.0;
    for (int j = 1; j < m; ++j) acc += std::lgamma(2.0 * j + 1.0);
    return acc;
}

/// Relative error of the product identity prod (2j)! = 2^{m(m-1)} pi^{-m/2} G(m+1/2) G(m+1) / G(1/2).
inline double product_identity_error(const BarnesG& g, int m) {
    const double rhs = m * (m - 1) * std::log(2.0) - 0.5 * m * std::log(kPi) + g.log(m + 0.5) + g.log(m + 1.0) -
                       g.log(0.5);
    return std::abs(std::expm1(rhs - log_even_factorial_product(m)));
}

/// Large-argument expansion of log G(z+1); independent of the recursion anchor.
inline double barnes_g_log_asymptotic(double z, double glaisher = kGlaisher) {
    const double zeta_prime_m1 = 1.0 / 12.0 - std::log(glaisher);
    const double lz = std::log(z);
    double v = 0.5 * z * z * lz - 0.75 * z * z + 0.5 * z * std::log(2.0 * kPi) - lz / 12.0 + zeta_prime_m1;
    // sum_k B_{2k+2} / (4k(k+1) z^{2k})
    const std::array<double, 5> B = {-1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0};
    for (int k = 1; k <= 5; ++k) v += B[k - 1] / (4.0 * k * (k + 1) * std::pow(z, 2 * k));
    return v;
}

struct BarnesValidation {
    double max_product_error = 0.0;
    double max_asymptotic_error = 0.0;
    bool ok = false;
};

/// Startup validation: product identity for m = 2..8 and table-vs-asymptotic agreement at large arguments.
inline BarnesValidation validate_barnes(const BarnesG& g) {
    BarnesValidation v;
    for (int m = 2; m <= 8; ++m) v.max_product_error = std::max(v.max_product_error, product_identity_error(g, m));
    for (int k = 50; k <= BarnesG::kMax; ++k) {
        const double x = k / 2.0;
        const double diff = std::abs(g.log(x) - barnes_g_log_asymptotic(x - 1.0));
        v.max_asymptotic_error = std::max(v.max_asymptotic_error, diff);
    }
    v.ok = v.max_product_error < 1e-10 && v.max_asymptotic_error < 1e-10;
    return v;
}

/// log of d_{N,m}(u) e^{-N m phi_u / 2} for real u (large-N asymptotic).
inline double moment_asymptotic_log(int N, int m, const SaddleData& sd, const BarnesG& g = barnes_g()) {
    if (m < 1) throw ConfigError("m must be >= 1");
    const double pref = 0.5 * m * std::log(2.0 * kPi) + g.log(0.5) - g.log((m + 1) / 2.0) - g.log(m / 2.0 + 1.0);
    const double expo = m * (m - 1) / 4.0 * std::log(N / (2.0 * sd.t * sd.t * sd.tr_H2));
    return pref + expo - 0.5 * N * m * sd.phi_z;
}

/// Error scale log^3 N / sqrt(N t) quoted with the formula.
inline double moment_error_scale(int N, double t) { return std::pow(std::log(N), 3) / std::sqrt(N * t); }

/// Even-moment prefactor (2 pi)^{m/2} / prod (2j)! (N/(t^2 Tr H^2))^{m(m-1/2)} for moment 2m.
inline double even_moment_log_prefactor(int N, int m, double t, double tr_H2) {
    return 0.5 * m * std::log(2.0 * kPi) - log_even_factorial_product(m) +
           m * (m - 0.5) * std::log(N / (t * t * tr_H2));
}

/// GinOE specialization (t = 1, X = 0): eta_u^2 = 1 - u^2, t^2 Tr H_u^2 = 1.
inline double ginoe_closed_form(int N, int m, double u, const BarnesG& g = barnes_g()) {
    if (!(std::abs(u) < 1.0)) throw ConfigError("ginoe_closed_form requires |u| < 1");
    const double pref = 0.5 * m * std::log(2.0 * kPi) + g.log(0.5) - g.log((m + 1) / 2.0) - g.log(m / 2.0 + 1.0);
    return pref + m * (m - 1) / 4.0 * std::log(N / 2.0) - 0.5 * N * m * (1.0 - u * u);
}

/// Exact E|det Y|^m for Y ~ GinOE(N) (variance 1/N), via the Bartlett decomposition.
inline double ginoe_exact_log_moment(int N, double m) {
    double acc = -0.5 * m * N * std::log(static_cast<double>(N));
    for (int k = 1; k <= N; ++k) acc += 0.5 * m * std::log(2.0) + std::lgamma((k + m) / 2.0) - std::lgamma(k / 2.0);
    return acc;
}

struct MomentResult {
    int N = 0;
    int m = 0;
    double u = 0.0;
    double t = 0.0;
    double log_formula_value = 0.0;
    double log_mc_estimate = 0.0;
    double mc_stderr_log = 0.0;
    double jackknife_stderr_log = 0.0;
    long sample_count = 0;
    std::uint64_t seed = 0;
    std::vector<double> log_abs_det;  // per-sample log|det|
};

inline double log_abs_det(const CMatrix& A) {
    Eigen::PartialPivLU<CMatrix> lu(A);
    const auto& d = lu.matrixLU().diagonal();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) acc += std::log(std::abs(d[i]));
    return acc;
}

inline double log_abs_det(const RMatrix& A) {
    Eigen::PartialPivLU<RMatrix> lu(A);
    const auto& d = lu.matrixLU().diagonal();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) acc += std::log(std::abs(d[i]));
    return acc;
}

/// Deterministic log-mean-exp: values sorted before accumulation.
inline double log_mean_exp(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double mx = v.back();
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - mx);
    return mx + std::log(acc / v.size());
}

/// Monte Carlo estimate of E_Y |det(X_u + sqrt(t) Y)|^m with Y ~ GinOE(N).
inline MomentResult mc_moment_oracle(const RMatrix& X, double u, double t, int m, long M, std::uint64_t seed,
                                     int workers = 1) {
    if (M < 100) throw ConfigError("mc_moment_oracle requires M >= 100");
    const int N = static_cast<int>(X.rows());
    EnsembleSpec gin;
    gin.field = Field::real;
    gin.N = N;
    MomentResult res;
    res.N = N;
    res.m = m;
    res.u = u;
    res.t = t;
    res.sample_count = M;
    res.seed = seed;
    res.log_abs_det.assign(M, 0.0);
    const double st = std::sqrt(t);
    parallel_for(M, workers, [&](long i) {
        RMatrix B = X + st * sample_real_matrix(gin, substream(seed, static_cast<std::uint64_t>(i)));
        B.diagonal().array() -= u;
        res.log_abs_det[i] = log_abs_det(B);
    });
    std::vector<double> ell(M);
    bool any_finite = false;
    for (long i = 0; i < M; ++i) {
        ell[i] = m * res.log_abs_det[i];
        any_finite = any_finite || std::isfinite(ell[i]);
    }
    if (!any_finite) throw DegenerateError("all determinants vanish to machine precision");
    res.log_mc_estimate = log_mean_exp(ell);
    // Delta method: se(log mean w) = sd(w) / (sqrt(M) mean(w)), w = exp(ell - max).
    std::vector<double> sorted = ell;
    std::sort(sorted.begin(), sorted.end());
    const double mx = sorted.back();
    double s1 = 0.0, s2 = 0.0;
    for (double x : sorted) {
        const double w = std::exp(x - mx);
        s1 += w;
        s2 += w * w;
    }
    const double mean = s1 / M;
    const double var = std::max(0.0, (s2 / M - mean * mean) * M / (M - 1.0));
    res.mc_stderr_log = std::sqrt(var / M) / mean;
    // Jackknife on log mean (leave-one-out closed form).
    double jm = 0.0, jm2 = 0.0;
    for (long i = 0; i < M; ++i) {
        const double w = std::exp(ell[i] - mx);
        const double li = std::log((s1 - w) / (M - 1.0));
        jm += li;
        jm2 += li * li;
    }
    jm /= M;
    res.jackknife_stderr_log = std::sqrt(std::max(0.0, (M - 1.0) * (jm2 / M - jm * jm)));
    return res;
}

}  // namespace nhw
