#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "nhw/hermitized_resolvent.hpp"

namespace nhw {

struct DeterministicApprox {
    cplx z;
    cplx w;
    cplx m;
    cplx u;
};

/// m^3 + 2w m^2 + (w^2 + 1 - |z|^2) m + w, the cleared form of -1/m = w + m - |z|^2/(w+m).
inline cplx cubic_residual(cplx z, cplx w, cplx m) {
    const double z2 = std::norm(z);
    return ((m + 2.0 * w) * m + (w * w + 1.0 - z2)) * m + w;
}

inline double equation_residual(cplx z, cplx w, cplx m) {
    return std::abs(1.0 / m + w + m - std::norm(z) / (w + m));
}

namespace detail {

inline std::array<cplx, 3> cubic_roots(cplx z, cplx w) {
    const double z2 = std::norm(z);
    Eigen::Matrix3cd C = Eigen::Matrix3cd::Zero();
    C(0, 0) = -2.0 * w;
    C(0, 1) = -(w * w + 1.0 - z2);
    C(0, 2) = -w;
    C(1, 0) = 1.0;
    C(2, 1) = 1.0;
    Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(C, false);
    const auto ev = es.eigenvalues();
    return {ev[0], ev[1], ev[2]};
}

inline cplx newton_polish(cplx z, cplx w, cplx m) {
    const double z2 = std::norm(z);
    for (int it = 0; it < 4; ++it) {
        const cplx p = cubic_residual(z, w, m);
        const cplx dp = (3.0 * m + 4.0 * w) * m + (w * w + 1.0 - z2);
        if (std::abs(dp) < 1e-300) break;
        const cplx step = p / dp;
        m -= step;
        if (std::abs(step) < 1e-17 * std::max(1.0, std::abs(m))) break;
    }
    return m;
}

inline bool on_branch(cplx w, cplx m) { return w.imag() * m.imag() > 0.0 && std::abs(w + m) > 1e-300; }

}  // namespace detail

/// Unique solution with Im w * Im m > 0. Ambiguous cases follow the large-|Im w|
/// branch m ~ -1/w by homotopy in Im w.
inline DeterministicApprox solve_m(cplx z, cplx w) {
    if (w.imag() == 0.0) throw ConfigError("solve_m: Im w must be nonzero");
    auto candidates = [&](cplx ww) {
        std::array<cplx, 3> r = detail::cubic_roots(z, ww);
        for (auto& m : r) m = detail::newton_polish(z, ww, m);
        return r;
    };
    auto roots = candidates(w);
    int count = 0;
    cplx best = 0.0;
    double best_res = std::numeric_limits<double>::infinity();
    for (const auto& m : roots) {
        if (!detail::on_branch(w, m)) continue;
        // Roots with Im m of order rounding noise are ambiguous.
        if (std::abs(m.imag()) < 1e-10 * std::max(1.0, std::abs(m))) continue;
        ++count;
        const double res = std::abs(cubic_residual(z, w, m));
        if (res < best_res) {
            best_res = res;
            best = m;
        }
    }
    if (count != 1) {
        // Homotopy from Im w = max(10, 10|w|) down to the target.
        const double sgn = w.imag() > 0 ? 1.0 : -1.0;
        double top = std::max(10.0, 10.0 * std::abs(w));
        cplx wk(w.real(), sgn * top);
        cplx m = -1.0 / wk;
        const int steps = 400;
        const double ratio = std::pow(std::abs(w.imag()) / top, 1.0 / steps);
        for (int k = 0; k <= steps; ++k) {
            if (k > 0) wk = cplx(w.real(), wk.imag() * ratio);
            if (k == steps) wk = w;
            const auto r = candidates(wk);
            cplx next = r[0];
            for (const auto& c : r)
                if (std::abs(c - m) < std::abs(next - m)) next = c;
            m = next;
        }
        if (!detail::on_branch(w, m)) throw NumericError("solve_m: no root on the branch Im w Im m > 0");
        best = m;
    }
    return {z, w, best, best / (w + best)};
}

/// [[m, -z u], [-conj(z) u, m]].
inline Block2 build_M(const DeterministicApprox& da) {
    Block2 M;
    M << da.m, -da.z * da.u, -std::conj(da.z) * da.u, da.m;
    return M;
}

/// S[[A,B],[C,D]] = [[Tr D, 0], [0, Tr A]] on block-scalar matrices.
inline Block2 S_operator(const Block2& X) {
    Block2 S = Block2::Zero();
    S(0, 0) = X(1, 1);
    S(1, 1) = X(0, 0);
    return S;
}

struct TwoResolventApprox {
    cplx z1, z2, w1, w2;
    Block2 F;
    Block2 M12;
    double rcond = 0.0;          // reciprocal condition of the 2x2 trace system
    double inverse_norm = 0.0;   // ||(1 - M1 S[.] M2)^{-1}|| on the trace space
};

inline Block2 stability_apply(const Block2& M1, const Block2& M2, const Block2& X) {
    return X - M1 * S_operator(X) * M2;
}

/// M12 = B^{-1}[M1 F M2], B[X] = X - M1 S[X] M2, solved on the two diagonal traces.
inline TwoResolventApprox solve_two_resolvent(cplx z1, cplx z2, cplx w1, cplx w2, const Block2& F,
                                              double min_rcond = 1e-12) {
    const Block2 M1 = build_M(solve_m(z1, w1));
    const Block2 M2 = build_M(solve_m(z2, w2));
    const Block2 Y = M1 * F * M2;
    // X = Y + M1 diag(delta, alpha) M2; unknowns alpha = X11, delta = X22.
    Eigen::Matrix2cd L;
    L << 1.0 - M1(0, 1) * M2(1, 0), -M1(0, 0) * M2(0, 0),
         -M1(1, 1) * M2(1, 1), 1.0 - M1(1, 0) * M2(0, 1);
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(L);
    const auto sv = svd.singularValues();
    TwoResolventApprox out{z1, z2, w1, w2, F, Block2::Zero(), 0.0, 0.0};
    out.rcond = sv[0] > 0 ? sv[1] / sv[0] : 0.0;
    out.inverse_norm = sv[1] > 0 ? 1.0 / sv[1] : std::numeric_limits<double>::infinity();
    if (!(out.rcond >= min_rcond)) {
        std::ostringstream os;
        os << "stability operator near-singular: reciprocal condition " << out.rcond;
        throw ConditioningError(os.str(), out.rcond);
    }
    const Eigen::Vector2cd ad = L.fullPivLu().solve(Eigen::Vector2cd(Y(0, 0), Y(1, 1)));
    Block2 D = Block2::Zero();
    D(0, 0) = ad[1];
    D(1, 1) = ad[0];
    out.M12 = Y + M1 * D * M2;
    return out;
}

inline double two_resolvent_residual(const TwoResolventApprox& tr) {
    const Block2 M1 = build_M(solve_m(tr.z1, tr.w1));
    const Block2 M2 = build_M(solve_m(tr.z2, tr.w2));
    return (stability_apply(M1, M2, tr.M12) - M1 * tr.F * M2).norm();
}

enum class Observable { trace, isotropic, two_resolvent };

struct ResidualSpec {
    Observable kind = Observable::trace;
    Block2 F = Block2::Identity();
    Block2 F2 = Block2::Identity();
    cplx w2 = cplx(0.0, 1.0);  // second spectral parameter for two_resolvent
    CVector x, y;              // length 2N, isotropic
};

struct ResidualResult {
    double residual = 0.0;
    double bound = 0.0;  // 1/(N eta_*), 1/sqrt(N eta_*), or 1/(N eta_*^{1/2}) for off-diagonal F
};

namespace detail {

/// tr(D1 X D2 Y) for block-structured operands in the singular basis.
inline cplx hat_trace4(const SpectralResolvent& r1, const Block2& F1, const SpectralResolvent& r2, const Block2& F2,
                       const CMatrix& O) {
    const Eigen::Index N = O.rows();
    // Blocks of the hat-basis images: F -> [[f11 I, f12 O^*], [f21 O, f22 I]].
    enum Kind { I, Om, Oa };
    auto kind = [](int i, int j) { return i == j ? I : (i == 1 ? Om : Oa); };
    auto gblock = [](const SpectralResolvent& r, int i, int j) -> const CVector& { return i == j ? r.a : r.b; };
    auto entry = [&](Kind k, Eigen::Index n, Eigen::Index m) -> cplx {
        if (k == I) return n == m ? cplx(1.0) : cplx(0.0);
        if (k == Om) return O(n, m);
        return std::conj(O(m, n));
    };
    cplx total = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    const cplx c = F1(j, k) * F2(l, i);
                    if (c == 0.0) continue;
                    const CVector& d1 = gblock(r1, i, j);
                    const CVector& d2 = gblock(r2, k, l);
                    const Kind kx = kind(j, k), ky = kind(l, i);
                    cplx acc = 0.0;
                    if (kx == I && ky == I) {
                        for (Eigen::Index n = 0; n < N; ++n) acc += d1[n] * d2[n];
                    } else if (kx == I) {
                        for (Eigen::Index n = 0; n < N; ++n) acc += d1[n] * d2[n] * entry(ky, n, n);
                    } else if (ky == I) {
                        for (Eigen::Index n = 0; n < N; ++n) acc += d1[n] * entry(kx, n, n) * d2[n];
                    } else {
                        for (Eigen::Index n = 0; n < N; ++n)
                            for (Eigen::Index m = 0; m < N; ++m)
                                acc += d1[n] * entry(kx, n, m) * d2[m] * entry(ky, m, n);
                    }
                    total += c * acc;
                }
    return total;
}

}  // namespace detail

/// Local-law deviation of one sample against the deterministic approximation.
inline ResidualResult local_law_residual(const SingularData& sd, const DeterministicApprox& da,
                                         const ResidualSpec& obs) {
    if (std::abs(sd.z - da.z) > 1e-14 * std::max(1.0, std::abs(da.z)))
        throw ConfigError("local_law_residual: sample and approximation use different z");
    const double N = sd.N();
    const Block2 M = build_M(da);
    const double eta = std::abs(da.w.imag());
    ResidualResult out;
    switch (obs.kind) {
        case Observable::trace: {
            const Block2 T = resolvent_block_traces(sd, da.w);
            const cplx g = (T * obs.F).trace();
            const cplx m = (M * obs.F).trace();
            out.residual = std::abs(g - m);
            const bool offdiag = obs.F(0, 0) == 0.0 && obs.F(1, 1) == 0.0;
            out.bound = offdiag ? 1.0 / (N * std::sqrt(eta)) : 1.0 / (N * eta);
            break;
        }
        case Observable::isotropic: {
            const Eigen::Index n = sd.N();
            const cplx g = resolvent_quadratic(sd, da.w, obs.x, obs.y);
            CVector My(2 * n);
            My.head(n) = M(0, 0) * obs.y.head(n) + M(0, 1) * obs.y.tail(n);
            My.tail(n) = M(1, 0) * obs.y.head(n) + M(1, 1) * obs.y.tail(n);
            out.residual = std::abs(g - obs.x.dot(My));
            out.bound = 1.0 / std::sqrt(N * eta);
            break;
        }
        case Observable::two_resolvent: {
            const SpectralResolvent r1(sd, da.w), r2(sd, obs.w2);
            const CMatrix O = sd.V.adjoint() * sd.U;
            const cplx g = detail::hat_trace4(r1, obs.F, r2, obs.F2, O) / N;
            const auto tr = solve_two_resolvent(da.z, da.z, da.w, obs.w2, obs.F);
            out.residual = std::abs(g - (tr.M12 * obs.F2).trace());
            const double eta_star = std::min(eta, std::abs(obs.w2.imag()));
            out.bound = 1.0 / (N * eta_star * eta_star);
            break;
        }
    }
    return out;
}

}  // namespace nhw
