#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "nhw/hermitized_resolvent.hpp"

namespace nhw {

struct SaddleConstants {
    double C_eta = 10.0;      // t/C < eta_z < C t
    double regime_C = 1.0;    // decay-regime constant for L
    double c_delta_scale = 0.25;  // c_delta = scale * delta
    double C_delta_scale = 4.0;   // C_delta = scale / delta
};

/// Saddle of phi_z(eta) = eta^2/t - Tr log(eta^2 + |X_z|^2), plus the curvature data.
struct SaddleData {
    cplx z;
    double t = 0.0;
    int N = 0;
    double eta_z = 0.0;
    double phi_z = 0.0;
    double sigma_z = 0.0;
    double sigma_tilde_z = 0.0;
    double tr_H = 0.0;       // Tr H_z(eta_z)
    double tr_H2 = 0.0;      // Tr H_z(eta_z)^2
    double tr_H_Hbar = 0.0;  // Tr H_z H_{zbar}
    bool eta_in_bounds = true;
};

struct RDependentSaddle {
    double u = 0.0;
    double t = 0.0;
    double r = 0.0;
    double eta_r = 0.0;
    double phi_tilde_r = 0.0;
};

/// t * Tr H(eta) with normalization count n_norm (N of the ambient matrix).
inline double t_trace_H(const RVector& s, double n_norm, double t, double eta) {
    return t * (s.array().square() + eta * eta).inverse().sum() / n_norm;
}

/// Solves t * Tr H(eta) = target by bracketed Newton on e = eta^2 with bisection fallback.
inline double solve_eta_from_singular(const RVector& s, double n_norm, double t, double target) {
    if (!(t > 0.0)) throw ConfigError("t must be positive");
    if (!(target > 0.0)) throw ConfigError("saddle target must be positive");
    const RVector lam = s.array().square();
    auto g = [&](double e) { return t * (lam.array() + e).inverse().sum() / n_norm - target; };
    auto dg = [&](double e) { return -t * (lam.array() + e).square().inverse().sum() / n_norm; };
    double lo = 1e-24;
    const double smax = s.size() ? s.maxCoeff() : 0.0;
    double hi = std::pow(smax + 10.0 * std::sqrt(t), 2);
    if (g(lo) <= 0.0) throw NumericError("no saddle: t Tr H(0+) does not exceed the target");
    while (g(hi) > 0.0) hi *= 4.0;
    double e = std::sqrt(lo * hi);
    for (int it = 0; it < 400; ++it) {
        const double ge = g(e);
        if (ge > 0.0) lo = e; else hi = e;
        if (std::abs(ge) <= 1e-15 * target || (hi - lo) <= 1e-16 * hi) break;
        double next = e - ge / dg(e);
        if (!(next > lo && next < hi)) next = (hi / lo > 16.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
        e = next;
    }
    return std::sqrt(e);
}

inline double phi_of(const RVector& s, double n_norm, double t, double eta) {
    return eta * eta / t - (s.array().square() + eta * eta).log().sum() / n_norm;
}

inline SaddleData solve_eta(const CMatrix& X, cplx z, double t, const SaddleConstants& k = {}) {
    const SingularData sd = singular_decompose(X, z);
    const SingularData sdb = singular_decompose(X, std::conj(z));
    const double N = sd.N();
    SaddleData out;
    out.z = z;
    out.t = t;
    out.N = sd.N();
    const double eta = solve_eta_from_singular(sd.s, N, t, 1.0);
    out.eta_z = eta;
    out.phi_z = phi_of(sd.s, N, t, eta);
    const RVector D = (sd.s.array().square() + eta * eta).inverse();
    const RVector Db = (sdb.s.array().square() + eta * eta).inverse();
    out.tr_H = D.sum() / N;
    out.tr_H2 = D.array().square().sum() / N;
    const CMatrix O = sd.V.adjoint() * sd.U;      // v_n^* u_m
    const CMatrix Ob = sdb.V.adjoint() * sd.U;    // v'_n^* u_m
    const CMatrix P = sd.V.adjoint() * sdb.V;     // v_n^* v'_m
    double hht = 0.0, hbht = 0.0, hhb = 0.0;
    cplx h2x = 0.0, hbxh = 0.0;
    for (int n = 0; n < out.N; ++n) {
        h2x += D[n] * D[n] * O(n, n) * sd.s[n];
        for (int m = 0; m < out.N; ++m) {
            hht += D[n] * D[m] * std::norm(O(n, m));
            hbht += Db[n] * D[m] * std::norm(Ob(n, m));
            hhb += D[n] * Db[m] * std::norm(P(n, m));
            // tr(D' (V'^*U) S D (V^* V'))
            hbxh += Db[n] * Ob(n, m) * sd.s[m] * D[m] * P(m, n);
        }
    }
    hht /= N;
    hbht /= N;
    hhb /= N;
    h2x /= N;
    hbxh /= N;
    out.tr_H_Hbar = hhb;
    out.sigma_z = eta * eta * hht + std::norm(h2x) / out.tr_H2;
    out.sigma_tilde_z = eta * eta * hbht + std::norm(hbxh) / hhb;
    out.eta_in_bounds = eta > t / k.C_eta && eta < k.C_eta * t;
    return out;
}

inline RDependentSaddle solve_eta_r(const CMatrix& X, double u, double t, double r) {
    if (!(r > 0.0)) throw ConfigError("r must be positive");
    const RVector s = singular_values(X, cplx(u, 0.0));
    const double N = s.size();
    const double eta_u = solve_eta_from_singular(s, N, t, 1.0);
    const double phi_u = phi_of(s, N, t, eta_u);
    RDependentSaddle out{u, t, r, 0.0, 0.0};
    out.eta_r = solve_eta_from_singular(s, N, t, r / (1.0 + r));
    const double e2 = out.eta_r * out.eta_r;
    out.phi_tilde_r = phi_u - r * e2 / (t * (1.0 + r)) + (s.array().square() + e2).log().sum() / N;
    return out;
}

enum class NormFlavour { complex_K, real_K, r_dependent };
enum class NormMode { quadrature, asymptotic };

struct NormalizationResult {
    double log_value = 0.0;
    double error_estimate = 0.0;  // relative
    double tail_bound = 0.0;      // relative
    double p_max = 0.0;
    double eta = 0.0;
};

/// Normalization of the sphere measures (surface measure convention):
///   K(z)    = (N/(pi t))^{N-1}   int_{S(C^N)} e^{-(N/t)|X_z v|^2} dS(v)
///   K_R(u)  = (N/(2 pi t))^{N/2-1} int_{S(R^N)} e^{-(N/2t)|X_u v|^2} dS(v)
/// evaluated through the duality formula
///   K = e^{c eta^2} prod (eta^2+l_i)^{-beta} int e^{icp} prod (1+ip h_i)^{-beta} dp
/// at the saddle beta sum h_i = c, so the linear phase cancels.
inline NormalizationResult duality_normalization(const RVector& s, double t, NormFlavour flavour, NormMode mode,
                                                 double r = 1.0) {
    const double N = s.size();
    double beta = 1.0, c = N / t, target = 1.0;
    if (flavour == NormFlavour::real_K) {
        beta = 0.5;
        c = N / (2.0 * t);
    } else if (flavour == NormFlavour::r_dependent) {
        if (!(r > 0.0)) throw ConfigError("r must be positive");
        beta = 0.5;
        c = N * r / (2.0 * t * (1.0 + r));
        target = r / (1.0 + r);
    }
    NormalizationResult out;
    const double eta = solve_eta_from_singular(s, N, t, target);
    out.eta = eta;
    const RVector lam = s.array().square();
    const RVector h = (lam.array() + eta * eta).inverse();
    const double log_pref = c * eta * eta + beta * h.array().log().sum();
    const double sum_h2 = h.array().square().sum();

    if (mode == NormMode::asymptotic) {
        out.log_value = log_pref + 0.5 * std::log(2.0 * kPi / (beta * sum_h2));
        out.error_estimate = std::pow(std::log(N), 3) / std::sqrt(N * t);
        return out;
    }
    if (beta * N <= 1.0) throw PrecisionError("duality integral not absolutely convergent for this N");

    auto integrand = [&](double p) {
        cplx e(0.0, c * p);
        for (Eigen::Index i = 0; i < h.size(); ++i) e -= beta * std::log(cplx(1.0, p * h[i]));
        return std::exp(e).real();
    };
    auto log_modulus = [&](double p) {
        return -0.5 * beta * (1.0 + (p * h.array()).square()).log().sum();
    };
    using G20 = boost::math::quadrature::gauss<double, 20>;
    using G10 = boost::math::quadrature::gauss<double, 10>;
    auto rule = [&](auto tag, double a, double b) {
        using Rule = decltype(tag);
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        const auto& x = Rule::abscissa();
        const auto& w = Rule::weights();
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == 0.0) {
                acc += w[i] * integrand(mid);
            } else {
                acc += w[i] * (integrand(mid - half * x[i]) + integrand(mid + half * x[i]));
            }
        }
        return acc * half;
    };
    const double width = 1.0 / std::sqrt(beta * sum_h2);
    const double seg = 0.5 * std::min(width, 2.0 * kPi / c);
    double total = 0.0, err = 0.0, p = 0.0, tail = std::numeric_limits<double>::infinity();
    const long max_segments = 4000000;
    for (long k = 0; k < max_segments; ++k) {
        const double a = p, b = p + seg;
        const double v20 = rule(G20{}, a, b);
        const double v10 = rule(G10{}, a, b);
        total += v20;
        err += std::abs(v20 - v10);
        p = b;
        // Tail bound: M(q) <= M(p) (p/q)^alpha for q >= p, alpha = beta sum kappa_i.
        const double alpha = beta * ((p * h.array()).square() / (1.0 + (p * h.array()).square())).sum();
        if (alpha > 1.0) {
            tail = std::exp(log_modulus(p)) * p / (alpha - 1.0);
            if (total > 0.0 && tail < 1e-13 * total) break;
        }
    }
    // Integrand real part is even in p.
    total *= 2.0;
    err *= 2.0;
    tail *= 2.0;
    out.p_max = p;
    if (!(total > 0.0)) throw PrecisionError("duality integral did not resolve to a positive value");
    out.error_estimate = (err + tail) / total;
    out.tail_bound = tail / total;
    if (out.error_estimate > 1e-6) throw PrecisionError("unresolved oscillation in the duality integral");
    out.log_value = log_pref + std::log(total);
    return out;
}

inline NormalizationResult duality_normalization(const CMatrix& X, cplx z, double t, NormFlavour flavour,
                                                 NormMode mode, double r = 1.0) {
    return duality_normalization(singular_values(X, z), t, flavour, mode, r);
}

/// log |S^{2N-1}| (complex sphere) or log |S^{N-1}| (real sphere).
inline double log_sphere_area(int N, Field f) {
    if (f == Field::complex) return std::log(2.0) + N * std::log(kPi) - std::lgamma(static_cast<double>(N));
    return std::log(2.0) + 0.5 * N * std::log(kPi) - std::lgamma(0.5 * N);
}

enum class LRegime { gaussian_core, suppressed, far_tail };

inline const char* to_string(LRegime r) {
    switch (r) {
        case LRegime::gaussian_core: return "gaussian-core";
        case LRegime::suppressed: return "suppressed";
        case LRegime::far_tail: return "far-tail";
    }
    return "?";
}

struct LAsymptotic {
    double log_value = 0.0;  // log of e^{-N phi} L(delta, z)
    LRegime regime = LRegime::gaussian_core;
};

inline LAsymptotic L_asymptotic(double delta, const SaddleData& sd, double norm_X, const SaddleConstants& k = {}) {
    if (delta < 0.0) throw ConfigError("delta must be nonnegative");
    const double N = sd.N;
    const double core = std::log(N) / std::sqrt(N * sd.t);
    LAsymptotic out;
    if (delta < core) {
        out.regime = LRegime::gaussian_core;
        out.log_value = 2.5 * std::log(2.0) + 1.5 * std::log(kPi) - 1.5 * std::log(N) - 0.5 * std::log(sd.tr_H2) -
                        std::log(sd.tr_H_Hbar) - N * sd.sigma_tilde_z * delta * delta / 2.0;
    } else if (delta <= k.regime_C * norm_X) {
        out.regime = LRegime::suppressed;
        out.log_value = -k.regime_C * std::log(N) * std::log(N);
    } else {
        out.regime = LRegime::far_tail;
        out.log_value = -k.regime_C * N * delta * delta / sd.t;
    }
    return out;
}

struct MomentHypothesisRow {
    double delta = 0.0;
    double min_eta_trH = 0.0;
    double max_eta_trH = 0.0;
    double min_eta3_trH2 = 0.0;
    double c_delta = 0.0;
    double C_delta = 0.0;
    bool pass = false;
};

inline std::vector<MomentHypothesisRow> check_moment_hypotheses(const CMatrix& X, double u, double t,
                                                            const std::vector<double>& delta_grid,
                                                            const SaddleConstants& k = {}, int eta_points = 200) {
    const RVector s = singular_values(X, cplx(u, 0.0));
    const double N = s.size();
    std::vector<MomentHypothesisRow> rows;
    for (double d : delta_grid) {
        if (!(d > 0.0 && d < 1.0)) throw ConfigError("delta must lie in (0,1)");
        MomentHypothesisRow row;
        row.delta = d;
        row.c_delta = k.c_delta_scale * d;
        row.C_delta = k.C_delta_scale / d;
        row.min_eta_trH = row.min_eta3_trH2 = std::numeric_limits<double>::infinity();
        row.max_eta_trH = 0.0;
        const double lo = std::log(d * t), hi = std::log(t / d);
        for (int i = 0; i < eta_points; ++i) {
            const double eta = std::exp(lo + (hi - lo) * i / (eta_points - 1));
            const RVector D = (s.array().square() + eta * eta).inverse();
            const double a = eta * D.sum() / N;
            const double b = eta * eta * eta * D.array().square().sum() / N;
            row.min_eta_trH = std::min(row.min_eta_trH, a);
            row.max_eta_trH = std::max(row.max_eta_trH, a);
            row.min_eta3_trH2 = std::min(row.min_eta3_trH2, b);
        }
        row.pass = row.min_eta_trH >= row.c_delta && row.max_eta_trH <= row.C_delta && row.min_eta3_trH2 >= row.c_delta;
        rows.push_back(row);
    }
    return rows;
}

/// Compression of X to the orthogonal complement of span(V), in an orthonormal basis of that complement.
inline CMatrix compress_complement(const CMatrix& X, const CMatrix& V) {
    const Eigen::Index N = X.rows(), k = V.cols();
    Eigen::HouseholderQR<CMatrix> qr(V);
    const CMatrix Q = qr.householderQ() * CMatrix::Identity(N, N);
    const CMatrix P = Q.rightCols(N - k);
    return P.adjoint() * X * P;
}

}  // namespace nhw
