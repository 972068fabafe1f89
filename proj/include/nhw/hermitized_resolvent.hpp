#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "nhw/types.hpp"

namespace nhw {

/// SVD of A_z = A - z with unit singular vectors, A_z v_n = s_n u_n, s descending.
struct SingularData {
    cplx z;
    RVector s;
    CMatrix U;
    CMatrix V;

    int N() const { return static_cast<int>(s.size()); }
};

inline CMatrix shifted(const CMatrix& A, cplx z) {
    CMatrix Az = A;
    Az.diagonal().array() -= z;
    return Az;
}

inline SingularData singular_decompose(const CMatrix& A, cplx z) {
    if (A.rows() != A.cols()) throw ConfigError("singular_decompose: matrix must be square");
    if (!A.allFinite()) throw NumericError("singular_decompose: non-finite entries");
    Eigen::BDCSVD<CMatrix> svd(shifted(A, z), Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) throw NumericError("SVD did not converge");
    return {z, svd.singularValues(), svd.matrixU(), svd.matrixV()};
}

/// Singular values only, descending.
inline RVector singular_values(const CMatrix& A, cplx z) {
    Eigen::BDCSVD<CMatrix> svd(shifted(A, z));
    if (svd.info() != Eigen::Success) throw NumericError("SVD did not converge");
    return svd.singularValues();
}

/// The 2N x 2N Hermitisation [[0, A_z], [A_z^*, 0]].
inline CMatrix hermitisation(const CMatrix& A, cplx z) {
    const Eigen::Index N = A.rows();
    CMatrix H = CMatrix::Zero(2 * N, 2 * N);
    const CMatrix Az = shifted(A, z);
    H.topRightCorner(N, N) = Az;
    H.bottomLeftCorner(N, N) = Az.adjoint();
    return H;
}

/// Block constants of the form F (x) I_N, stored as the 2x2 coefficient matrix.
using Block2 = Eigen::Matrix2cd;

namespace blocks {
inline Block2 identity() { return Block2::Identity(); }
inline Block2 E1() { Block2 b = Block2::Zero(); b(0, 0) = 1.0; return b; }
inline Block2 E2() { Block2 b = Block2::Zero(); b(1, 0) = 1.0; return b; }
inline Block2 E2_star() { Block2 b = Block2::Zero(); b(0, 1) = 1.0; return b; }
inline Block2 E3() { Block2 b = Block2::Zero(); b(1, 1) = 1.0; return b; }
/// Default F in the trace statistics.
inline Block2 F() { return E2(); }
}  // namespace blocks

inline CMatrix expand(const Block2& b, Eigen::Index N) {
    CMatrix M = CMatrix::Zero(2 * N, 2 * N);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) M.block(i * N, j * N, N, N).diagonal().setConstant(b(i, j));
    return M;
}

namespace detail {
inline void pole_guard(const SingularData& sd, cplx w) {
    const double tol = 1e-14 * std::max(1.0, std::abs(w));
    for (Eigen::Index n = 0; n < sd.s.size(); ++n) {
        if (std::abs(w - sd.s[n]) <= tol || std::abs(w + sd.s[n]) <= tol)
            throw PoleError("spectral parameter lies on the spectrum of the Hermitisation");
    }
}
}  // namespace detail

/// Resolvent in the singular basis P = diag(U, V):
/// P^* G P = [[diag a, diag b], [diag b, diag a]], a = w/(s^2-w^2), b = s/(s^2-w^2).
struct SpectralResolvent {
    CVector a;
    CVector b;

    SpectralResolvent(const SingularData& sd, cplx w) {
        detail::pole_guard(sd, w);
        const Eigen::Index N = sd.s.size();
        a.resize(N);
        b.resize(N);
        for (Eigen::Index n = 0; n < N; ++n) {
            const cplx d = sd.s[n] * sd.s[n] - w * w;
            a[n] = w / d;
            b[n] = sd.s[n] / d;
        }
    }
};

inline CMatrix resolvent_full(const SingularData& sd, cplx w) {
    const SpectralResolvent r(sd, w);
    const Eigen::Index N = sd.N();
    CMatrix G(2 * N, 2 * N);
    G.topLeftCorner(N, N) = sd.U * r.a.asDiagonal() * sd.U.adjoint();
    G.topRightCorner(N, N) = sd.U * r.b.asDiagonal() * sd.V.adjoint();
    G.bottomLeftCorner(N, N) = sd.V * r.b.asDiagonal() * sd.U.adjoint();
    G.bottomRightCorner(N, N) = sd.V * r.a.asDiagonal() * sd.V.adjoint();
    return G;
}

/// Tr G = N^{-1} tr G = (2/N) sum_n w/(s_n^2 - w^2).
inline cplx resolvent_trace(const SingularData& sd, cplx w) {
    const SpectralResolvent r(sd, w);
    return 2.0 * r.a.sum() / static_cast<double>(sd.N());
}

/// x^* G y for x, y in C^{2N}.
inline cplx resolvent_quadratic(const SingularData& sd, cplx w, const CVector& x, const CVector& y) {
    const Eigen::Index N = sd.N();
    if (x.size() != 2 * N || y.size() != 2 * N) throw ConfigError("quadratic form: vectors must have length 2N");
    const SpectralResolvent r(sd, w);
    const CVector x1 = sd.U.adjoint() * x.head(N), x2 = sd.V.adjoint() * x.tail(N);
    const CVector y1 = sd.U.adjoint() * y.head(N), y2 = sd.V.adjoint() * y.tail(N);
    cplx acc = 0.0;
    for (Eigen::Index n = 0; n < N; ++n) {
        acc += std::conj(x1[n]) * (r.a[n] * y1[n] + r.b[n] * y2[n]);
        acc += std::conj(x2[n]) * (r.b[n] * y1[n] + r.a[n] * y2[n]);
    }
    return acc;
}

/// Normalized block traces Tr G_{ij} (each over N), the 2x2 matrix of block averages.
inline Block2 resolvent_block_traces(const SingularData& sd, cplx w) {
    const SpectralResolvent r(sd, w);
    const Eigen::Index N = sd.N();
    Block2 T = Block2::Zero();
    for (Eigen::Index n = 0; n < N; ++n) {
        const cplx vu = sd.V.col(n).dot(sd.U.col(n));  // v_n^* u_n = tr(u v^*)
        T(0, 0) += r.a[n];
        T(1, 1) += r.a[n];
        T(0, 1) += r.b[n] * vu;
        T(1, 0) += r.b[n] * std::conj(vu);
    }
    return T / static_cast<double>(N);
}

struct BlockResolvents {
    CMatrix H;        // (eta^2 + A_z^* A_z)^{-1}
    CMatrix H_tilde;  // (eta^2 + A_z A_z^*)^{-1}
};

inline BlockResolvents block_resolvents(const SingularData& sd, double eta) {
    if (!(eta > 0.0)) throw ConfigError("block_resolvents: eta must be positive");
    const RVector d = (sd.s.array().square() + eta * eta).inverse();
    const CVector dc = d.cast<cplx>();
    return {sd.V * dc.asDiagonal() * sd.V.adjoint(), sd.U * dc.asDiagonal() * sd.U.adjoint()};
}

/// Tr H_z(eta) = N^{-1} sum 1/(s^2 + eta^2).
inline double trace_H(const RVector& s, double eta) {
    return (s.array().square() + eta * eta).inverse().sum() / static_cast<double>(s.size());
}

/// f_eta = eta^2 tr H_z(eta) - 1 (unnormalized trace).
inline double f_eta(const RVector& s, double eta) {
    if (!(eta > 0.0)) throw ConfigError("f_eta: eta must be positive");
    const double e2 = eta * eta;
    double acc = 0.0;
    for (Eigen::Index n = 0; n < s.size(); ++n) acc += e2 / (s[n] * s[n] + e2);
    return acc - 1.0;
}

inline double f_eta(const SingularData& sd, double eta) { return f_eta(sd.s, eta); }

enum class ExtStat { ext1, ext2, ext3, ext4, ext5, ext6 };

/// Extended trace statistics ext1..ext6. F is E2 or E2^* (pass blocks::E2() / blocks::E2_star()).
/// In the singular basis E2 -> [[0,0],[O,0]] and E2^* -> [[0,O^*],[0,0]] with O = V^* U.
inline cplx extended_trace_stats(const SingularData& sd, cplx w, ExtStat which, const CVector* x = nullptr,
                                 const CVector* y = nullptr, const Block2& F = blocks::F()) {
    const bool lower = std::abs(F(1, 0)) > 0.5 && std::abs(F(0, 1)) < 0.5;
    const bool upper = std::abs(F(0, 1)) > 0.5 && std::abs(F(1, 0)) < 0.5;
    if (!lower && !upper) throw ConfigError("extended_trace_stats: F must be E2 or E2^*");
    const Eigen::Index N = sd.N();
    const SpectralResolvent r(sd, w);
    const CMatrix O = sd.V.adjoint() * sd.U;
    const double invN = 1.0 / static_cast<double>(N);

    switch (which) {
        case ExtStat::ext1: return 2.0 * r.a.sum() * invN;
        case ExtStat::ext2: {
            cplx acc = 0.0;
            for (Eigen::Index n = 0; n < N; ++n) acc += 2.0 * r.a[n] * r.b[n] * (lower ? O(n, n) : std::conj(O(n, n)));
            return acc * invN;
        }
        case ExtStat::ext3: {
            // Tr G^2 F G F^* = N^{-1} sum_{n,m} (a_n^2 + b_n^2) a_m |O_nm|^2 for F = E2.
            cplx acc = 0.0;
            for (Eigen::Index n = 0; n < N; ++n) {
                const cplx c = r.a[n] * r.a[n] + r.b[n] * r.b[n];
                for (Eigen::Index m = 0; m < N; ++m)
                    acc += c * r.a[m] * std::norm(lower ? O(n, m) : O(m, n));
            }
            return acc * invN;
        }
        default: break;
    }

    if (!x || !y || x->size() != 2 * N || y->size() != 2 * N)
        throw ConfigError("extended_trace_stats: ext4-ext6 need vectors x, y of length 2N");
    auto to_hat = [&](const CVector& v) {
        CVector h(2 * N);
        h.head(N) = sd.U.adjoint() * v.head(N);
        h.tail(N) = sd.V.adjoint() * v.tail(N);
        return h;
    };
    auto applyG = [&](const CVector& v) {
        CVector o(2 * N);
        o.head(N) = r.a.cwiseProduct(v.head(N)) + r.b.cwiseProduct(v.tail(N));
        o.tail(N) = r.b.cwiseProduct(v.head(N)) + r.a.cwiseProduct(v.tail(N));
        return o;
    };
    auto applyF = [&](const CVector& v, bool adjoint) {
        CVector o = CVector::Zero(2 * N);
        const bool low = lower != adjoint;
        if (low) o.tail(N) = O * v.head(N);
        else o.head(N) = O.adjoint() * v.tail(N);
        return o;
    };
    const CVector xh = to_hat(*x);
    CVector v = applyG(to_hat(*y));
    if (which == ExtStat::ext5) v = applyG(applyF(v, false));
    if (which == ExtStat::ext6) v = applyG(applyF(applyG(applyF(v, true)), false));
    return xh.dot(v);
}

struct DelocalisationOverlaps {
    double max_q_u = 0.0;
    double max_q_v = 0.0;
    double max_u_v = 0.0;
    int modes = 0;
};

/// Maxima over s_n < 1; std::nullopt when no mode lies below 1.
inline std::optional<DelocalisationOverlaps> delocalisation_overlaps(const SingularData& sd, const CVector& q) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index n = 0; n < sd.s.size(); ++n)
        if (sd.s[n] < 1.0) idx.push_back(n);
    if (idx.empty()) return std::nullopt;
    DelocalisationOverlaps d;
    d.modes = static_cast<int>(idx.size());
    for (auto n : idx) {
        d.max_q_u = std::max(d.max_q_u, std::abs(q.dot(sd.U.col(n))));
        d.max_q_v = std::max(d.max_q_v, std::abs(q.dot(sd.V.col(n))));
    }
    CMatrix Us(sd.N(), idx.size()), Vs(sd.N(), idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        Us.col(k) = sd.U.col(idx[k]);
        Vs.col(k) = sd.V.col(idx[k]);
    }
    d.max_u_v = (Us.adjoint() * Vs).cwiseAbs().maxCoeff();
    return d;
}

}  // namespace nhw
