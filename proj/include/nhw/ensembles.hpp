#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nhw/rng.hpp"
#include "nhw/types.hpp"

namespace nhw {

enum class LawKind { gaussian, rademacher, uniform, two_point_matched };

inline const char* to_string(LawKind k) {
    switch (k) {
        case LawKind::gaussian: return "gaussian";
        case LawKind::rademacher: return "rademacher";
        case LawKind::uniform: return "uniform";
        case LawKind::two_point_matched: return "two-point-matched";
    }
    return "?";
}

inline LawKind parse_law_kind(const std::string& s) {
    if (s == "gaussian") return LawKind::gaussian;
    if (s == "rademacher") return LawKind::rademacher;
    if (s == "uniform") return LawKind::uniform;
    if (s == "two-point-matched") return LawKind::two_point_matched;
    throw ConfigError("unknown entry law '" + s + "'");
}

/// Finite-support law of a standardized (mean 0, variance 1) real variable.
struct DiscreteLaw {
    std::vector<double> points;
    std::vector<double> probs;

    double moment(int k) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) acc += probs[i] * std::pow(points[i], k);
        return acc;
    }

    void validate() const {
        if (points.empty() || points.size() != probs.size())
            throw ConfigError("discrete law: points/probs size mismatch");
        double total = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0)) throw ConfigError("discrete law: negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ConfigError("discrete law: probabilities do not sum to 1");
        if (std::abs(moment(1)) > 1e-10) throw ConfigError("discrete law: nonzero mean");
        if (std::abs(moment(2) - 1.0) > 1e-10) throw ConfigError("discrete law: variance is not 1");
    }

    /// Inverse-CDF draw.
    double sample(double u) const {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < points.size(); ++i) {
            acc += probs[i];
            if (u < acc) return points[i];
        }
        return points.back();
    }
};

/// Law of sqrt(N) a_jk. Real and imaginary parts are independent; for the
/// complex field each part has variance 1/2, for the real field the real part
/// has variance 1. two_point_matched carries explicit standardized component laws.
struct EntryLaw {
    LawKind kind = LawKind::gaussian;
    DiscreteLaw re;
    DiscreteLaw im;
};

struct EnsembleSpec {
    Field field = Field::complex;
    int N = 1;
    EntryLaw law;
    double t = 0.0;
    /// Divide X + sqrt(t) Y by sqrt(1+t) so the entry variance stays 1/N.
    bool normalized = false;
};

struct MatchedPair {
    EnsembleSpec spec_a;
    EnsembleSpec spec_b;
    double t = 0.0;
};

namespace detail {

inline double double_factorial(int k) {
    double r = 1.0;
    for (int j = k; j > 1; j -= 2) r *= j;
    return r;
}

inline double gaussian_std_moment(int k) { return (k % 2) ? 0.0 : double_factorial(k - 1); }

inline double binom(int n, int k) {
    double r = 1.0;
    for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
    return r;
}

/// Standardized component moment E[xi^k] of the non-Gaussian part.
inline double std_moment(const EntryLaw& law, bool imag, int k) {
    if (k == 0) return 1.0;
    switch (law.kind) {
        case LawKind::gaussian: return gaussian_std_moment(k);
        case LawKind::rademacher: return (k % 2) ? 0.0 : 1.0;
        case LawKind::uniform: return (k % 2) ? 0.0 : std::pow(3.0, k / 2.0) / (k + 1);
        case LawKind::two_point_matched: return (imag ? law.im : law.re).moment(k);
    }
    return 0.0;
}

inline double std_sample(const EntryLaw& law, bool imag, CounterRng& rng) {
    switch (law.kind) {
        case LawKind::gaussian: return rng.normal();
        case LawKind::rademacher: return rng.uniform() < 0.5 ? -1.0 : 1.0;
        case LawKind::uniform: return std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
        case LawKind::two_point_matched: return (imag ? law.im : law.re).sample(rng.uniform());
    }
    return 0.0;
}

inline double component_variance(Field f, bool imag) {
    if (f == Field::real) return imag ? 0.0 : 1.0;
    return 0.5;
}

}  // namespace detail

inline void validate(const EnsembleSpec& spec) {
    if (spec.N < 1) throw ConfigError("N must be >= 1");
    if (!(spec.t >= 0.0) || !std::isfinite(spec.t)) throw ConfigError("t must be finite and >= 0");
    if (spec.law.kind == LawKind::two_point_matched) {
        spec.law.re.validate();
        if (spec.field == Field::complex) spec.law.im.validate();
    }
}

/// Draws one matrix. Entry (j,k) of X uses the stream keyed (seed, j, k, 0)
/// and the Gaussian component uses (seed, j, k, 1).
inline CMatrix sample_matrix(const EnsembleSpec& spec, std::uint64_t seed) {
    validate(spec);
    const int N = spec.N;
    const double scale = 1.0 / std::sqrt(static_cast<double>(N));
    const double norm = spec.normalized ? 1.0 / std::sqrt(1.0 + spec.t) : 1.0;
    const double sre = std::sqrt(detail::component_variance(spec.field, false));
    const double sim = std::sqrt(detail::component_variance(spec.field, true));
    const double st = std::sqrt(spec.t);
    CMatrix A(N, N);
    for (int j = 0; j < N; ++j) {
        for (int k = 0; k < N; ++k) {
            CounterRng rx(seed, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k), 0);
            double re = sre * detail::std_sample(spec.law, false, rx);
            double im = spec.field == Field::complex ? sim * detail::std_sample(spec.law, true, rx) : 0.0;
            if (spec.t > 0.0) {
                CounterRng ry(seed, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k), 1);
                re += st * sre * ry.normal();
                if (spec.field == Field::complex) im += st * sim * ry.normal();
            }
            A(j, k) = cplx(re, im) * (scale * norm);
        }
    }
    return A;
}

inline RMatrix sample_real_matrix(const EnsembleSpec& spec, std::uint64_t seed) {
    if (spec.field != Field::real) throw ConfigError("sample_real_matrix requires field = real");
    return sample_matrix(spec, seed).real();
}

/// Ginibre matrix with entry variance 1/N.
inline CMatrix ginibre(Field f, int N, std::uint64_t seed) {
    EnsembleSpec s;
    s.field = f;
    s.N = N;
    return sample_matrix(s, seed);
}

struct MomentEntry {
    int p = 0;
    int q = 0;
    double value = 0.0;  // E[N^{p/2} (Re a)^{p-q} (Im a)^q]
};

struct MomentTable {
    int order = 0;
    std::vector<MomentEntry> entries;
    std::vector<std::string> violations;

    double at(int p, int q) const {
        for (const auto& e : entries)
            if (e.p == p && e.q == q) return e.value;
        throw ConfigError("moment (p,q) not tabulated");
    }
};

/// Moment of one normalized component of the composite entry, E[(sqrt N part)^k].
inline double component_moment(const EnsembleSpec& spec, bool imag, int k) {
    const double v = detail::component_variance(spec.field, imag);
    if (v == 0.0) return k == 0 ? 1.0 : 0.0;
    const double sd = std::sqrt(v);
    const double norm = spec.normalized ? 1.0 / std::sqrt(1.0 + spec.t) : 1.0;
    // (sd*xi + sqrt(t)*sd*g) * norm
    double acc = 0.0;
    const double st = std::sqrt(spec.t);
    for (int j = 0; j <= k; ++j) {
        const double gm = detail::gaussian_std_moment(k - j);
        if (gm == 0.0 && k - j > 0) continue;
        acc += detail::binom(k, j) * detail::std_moment(spec.law, imag, j) * std::pow(st, k - j) * gm;
    }
    return acc * std::pow(sd * norm, k);
}

inline MomentTable verify_moment_conditions(const EnsembleSpec& spec, int order) {
    if (order < 1 || order > 8) throw ConfigError("moment order must be in [1, 8]");
    MomentTable tab;
    tab.order = order;
    for (int p = 1; p <= order; ++p) {
        for (int q = 0; q <= p; ++q) {
            const double v = component_moment(spec, false, p - q) * component_moment(spec, true, q);
            tab.entries.push_back({p, q, v});
            if (!std::isfinite(v)) tab.violations.push_back("moment p=" + std::to_string(p) + " not finite");
        }
    }
    const double tol = 1e-12;
    if (std::abs(tab.at(1, 0)) > tol || std::abs(tab.at(1, 1)) > tol) tab.violations.push_back("mean is not zero");
    if (order >= 2) {
        const double var = tab.at(2, 0) + tab.at(2, 2);
        const double target = spec.normalized ? 1.0 : 1.0 + spec.t;
        if (std::abs(var - target) > 1e-12) {
            std::ostringstream os;
            os << "variance " << var << " differs from " << target;
            tab.violations.push_back(os.str());
        }
    }
    return tab;
}

namespace detail {

/// Standardized law with third moment m3 and fourth moment m4 >= 1 + m3^2.
inline DiscreteLaw four_point_law(double m3, double m4) {
    DiscreteLaw law;
    if (std::abs(m3) < 1e-14) {
        const double a = std::sqrt(m4);
        const double p = 1.0 / m4;
        if (p >= 1.0 - 1e-15) return DiscreteLaw{{-1.0, 1.0}, {0.5, 0.5}};
        return DiscreteLaw{{-a, 0.0, a}, {p / 2, 1.0 - p, p / 2}};
    }
    // xi = sqrt(lam) T + sqrt(1-lam) S, T two-point with skewness kappa, S Rademacher.
    auto f = [m3](double lam) { return 1.0 + 4.0 * lam - 4.0 * lam * lam + m3 * m3 / lam; };
    double lam = 1.0;
    if (f(1.0) < m4) {
        double lo = 1.0, hi = 1.0;
        lo = 0.5;
        while (f(lo) < m4) lo *= 0.5;
        hi = 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (f(mid) >= m4) lo = mid; else hi = mid;
        }
        lam = 0.5 * (lo + hi);
    }
    const double kappa = m3 / std::pow(lam, 1.5);
    const double p = 0.5 * (1.0 - kappa / std::sqrt(kappa * kappa + 4.0));
    const double a = std::sqrt((1.0 - p) / p);
    const double b = -std::sqrt(p / (1.0 - p));
    const double sl = std::sqrt(lam);
    const double sr = std::sqrt(1.0 - lam);
    if (sr < 1e-15) return DiscreteLaw{{b, a}, {1.0 - p, p}};
    return DiscreteLaw{{sl * b - sr, sl * b + sr, sl * a - sr, sl * a + sr},
                       {(1.0 - p) / 2, (1.0 - p) / 2, p / 2, p / 2}};
}

}  // namespace detail

/// Builds B = (A~ + sqrt(t) Y)/sqrt(1+t) matching spec_a up to third moments, fourth within t.
inline MatchedPair build_matched_pair(const EnsembleSpec& spec_a, double t) {
    validate(spec_a);
    if (spec_a.t != 0.0) throw ConfigError("spec_a must not itself carry a Gaussian component");
    if (t < 0.0 || t > 1.0) throw ConfigError("matching time t must lie in [0, 1]");
    MatchedPair pair{spec_a, spec_a, t};
    pair.spec_b.t = t;
    pair.spec_b.normalized = true;
    if (spec_a.law.kind == LawKind::gaussian) return pair;
    if (t == 0.0) throw InfeasibleError("t = 0: non-Gaussian law has no Gauss-divisible match (m4 forced exactly)");

    const double g = t / (1.0 + t);
    auto solve_component = [&](bool imag) {
        const double m3 = detail::std_moment(spec_a.law, imag, 3);
        const double m4 = detail::std_moment(spec_a.law, imag, 4);
        const double m3p = m3 / std::pow(1.0 - g, 1.5);
        const double target = (m4 - 6.0 * g * (1.0 - g) - 3.0 * g * g) / ((1.0 - g) * (1.0 - g));
        const double floor4 = 1.0 + m3p * m3p;
        const double m4p = std::max(target, floor4);
        const double v = detail::component_variance(spec_a.field, imag);
        const double gap = (1.0 - g) * (1.0 - g) * (m4p - target) * v * v;
        if (gap > t * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "no matching law: fourth moment (" << (imag ? "Im" : "Re")
               << " part) differs by at least " << gap << " > t = " << t << " in N^2-normalized units";
            throw InfeasibleError(os.str());
        }
        return detail::four_point_law(m3p, m4p);
    };
    pair.spec_b.law.kind = LawKind::two_point_matched;
    pair.spec_b.law.re = solve_component(false);
    if (spec_a.field == Field::complex) pair.spec_b.law.im = solve_component(true);
    return pair;
}

struct MatchingReport {
    double max_diff_order3 = 0.0;
    double max_diff_order4 = 0.0;
    bool matched = false;
};

/// Exact comparison of the two moment tables (normalized units: bound t at order 4).
inline MatchingReport certify(const MatchedPair& pair) {
    const auto a = verify_moment_conditions(pair.spec_a, 4);
    const auto b = verify_moment_conditions(pair.spec_b, 4);
    MatchingReport r;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        const double d = std::abs(a.entries[i].value - b.entries[i].value);
        if (a.entries[i].p <= 3) r.max_diff_order3 = std::max(r.max_diff_order3, d);
        else r.max_diff_order4 = std::max(r.max_diff_order4, d);
    }
    r.matched = r.max_diff_order3 < 1e-12 && r.max_diff_order4 <= pair.t + 1e-12;
    return r;
}

}  // namespace nhw
