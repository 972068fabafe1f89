#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "nhw/rng.hpp"
#include "nhw/saddle_quantities.hpp"
#include "nhw/stats.hpp"

namespace nhw {

/// Householder R(v) = I - 2 w w^* / |w|^2, w = v - e1: a Hermitian involution with R e1 = v.
template <class Scalar>
struct Reflector {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Vec w;
    double wn2 = 0.0;
    bool identity = true;

    Vec apply(const Vec& x) const {
        if (identity) return x;
        return x - (2.0 / wn2) * w * w.dot(x);
    }

    /// R M R (R is Hermitian and R^{-1} = R).
    Mat conjugate(const Mat& M) const {
        if (identity) return M;
        Mat T = M - (2.0 / wn2) * w * (w.adjoint() * M);
        return T - (2.0 / wn2) * (T * w) * w.adjoint();
    }

    Mat matrix(Eigen::Index n) const {
        Mat R = Mat::Identity(n, n);
        if (!identity) R -= (2.0 / wn2) * w * w.adjoint();
        return R;
    }
};

template <class Vec>
inline Reflector<typename Vec::Scalar> reflector(const Vec& v) {
    using Scalar = typename Vec::Scalar;
    if (std::abs(v.norm() - 1.0) > 1e-10) throw ConfigError("reflector: v must be a unit vector");
    const Scalar v1 = v[0];
    if (std::abs(std::imag(cplx(v1))) > 1e-12 || std::real(cplx(v1)) < -1e-12)
        throw ConfigError("reflector: first component must be real and nonnegative");
    Reflector<Scalar> R;
    if (std::abs(std::real(cplx(v1)) - 1.0) <= 1e-14) return R;
    R.w = v;
    R.w[0] -= Scalar(1.0);
    R.wn2 = R.w.squaredNorm();
    R.identity = false;
    return R;
}

/// Multiplies by a unit phase so the first entry with |.| > tol is real positive.
inline CVector phase_normalize(CVector v, double tol = 1e-12) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > tol) {
            v *= std::conj(v[i]) / std::abs(v[i]);
            v[i] = std::abs(v[i]);
            return v;
        }
    }
    return v;
}

inline RVector sign_normalize(RVector v, double tol = 1e-12) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > tol) {
            if (v[i] < 0) v = -v;
            return v;
        }
    }
    return v;
}

/// The 2x2 block [[x, b], [-c, x]] with b >= c.
struct ZBlock {
    double x = 0.0;
    double b = 0.0;
    double c = 0.0;

    double y() const { return std::sqrt(b * c); }
    double delta() const { return b - c; }

    static ZBlock from_y_delta(double x, double y, double delta) {
        if (y < 0.0 || delta < 0.0) throw ConfigError("ZBlock: y and delta must be nonnegative");
        const double root = std::sqrt(delta * delta + 4.0 * y * y);
        return {x, 0.5 * (delta + root), 0.5 * (-delta + root)};
    }

    Eigen::Matrix2d matrix() const {
        Eigen::Matrix2d Z;
        Z << x, b, -c, x;
        return Z;
    }
};

struct ComplexPartialSchur {
    cplx z;
    CVector v;   // unit right eigenvector, v(0) >= 0
    CVector w;   // length N-1
    CMatrix Bp;  // (N-1) x (N-1)
};

struct RealPartialSchur {
    double u = 0.0;
    RVector v;
    RVector w;
    RMatrix Bp;
};

struct RealComplexPartialSchur {
    ZBlock Z;
    RMatrix V;   // N x 2, orthonormal columns
    RMatrix W;   // (N-2) x 2, coupling block is W^T
    RMatrix Bp;  // (N-2) x (N-2)
};

inline CMatrix assemble(const ComplexPartialSchur& ps) {
    const Eigen::Index N = ps.v.size();
    CMatrix T = CMatrix::Zero(N, N);
    T(0, 0) = ps.z;
    if (N > 1) {
        T.block(0, 1, 1, N - 1) = ps.w.adjoint();
        T.bottomRightCorner(N - 1, N - 1) = ps.Bp;
    }
    return reflector(ps.v).conjugate(T);
}

inline RMatrix assemble(const RealPartialSchur& ps) {
    const Eigen::Index N = ps.v.size();
    RVector v = ps.v;
    // Real Householder needs no sign condition; use the gauge-free form.
    RMatrix T = RMatrix::Zero(N, N);
    T(0, 0) = ps.u;
    if (N > 1) {
        T.block(0, 1, 1, N - 1) = ps.w.transpose();
        T.bottomRightCorner(N - 1, N - 1) = ps.Bp;
    }
    if (std::abs(v[0] - 1.0) <= 1e-14) return T;
    RVector w = v;
    w[0] -= 1.0;
    const RMatrix R = RMatrix::Identity(N, N) - (2.0 / w.squaredNorm()) * w * w.transpose();
    return R * T * R;
}

namespace detail {

inline RMatrix real_householder(const RVector& v) {
    const Eigen::Index N = v.size();
    if (std::abs(v[0] - 1.0) <= 1e-14) return RMatrix::Identity(N, N);
    RVector w = v;
    w[0] -= 1.0;
    return RMatrix::Identity(N, N) - (2.0 / w.squaredNorm()) * w * w.transpose();
}

}  // namespace detail

/// Q(V) = R1 R2 with Q e1 = v1, Q e2 = v2.
inline RMatrix frame_reflector(const RMatrix& V) {
    const Eigen::Index N = V.rows();
    const RMatrix R1 = detail::real_householder(V.col(0));
    RVector v2 = R1 * V.col(1);
    v2[0] = 0.0;
    v2 /= v2.norm();
    RMatrix R2 = RMatrix::Identity(N, N);
    R2.bottomRightCorner(N - 1, N - 1) = detail::real_householder(v2.tail(N - 1));
    return R1 * R2;
}

inline RMatrix assemble(const RealComplexPartialSchur& ps) {
    const Eigen::Index N = ps.V.rows();
    RMatrix T = RMatrix::Zero(N, N);
    T.topLeftCorner(2, 2) = ps.Z.matrix();
    if (N > 2) {
        T.topRightCorner(2, N - 2) = ps.W.transpose();
        T.bottomRightCorner(N - 2, N - 2) = ps.Bp;
    }
    const RMatrix Q = frame_reflector(ps.V);
    return Q * T * Q.transpose();
}

namespace detail {

template <class Vec>
inline Eigen::Index select_simple(const Vec& ev, cplx target, double scale) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < ev.size(); ++i)
        if (std::abs(cplx(ev[i]) - target) < std::abs(cplx(ev[best]) - target)) best = i;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (i == best) continue;
        const double gap = std::abs(cplx(ev[i]) - cplx(ev[best]));
        if (gap <= 1e-10 * std::max(1.0, scale)) {
            std::ostringstream os;
            os << "selected eigenvalue is not simple (gap " << gap << ")";
            throw DegenerateError(os.str());
        }
    }
    return best;
}

/// Unit null vector of A - z from the smallest right singular vector.
inline CVector null_vector(const CMatrix& A, cplx z) {
    Eigen::JacobiSVD<CMatrix> svd(shifted(A, z), Eigen::ComputeFullV);
    return svd.matrixV().col(A.cols() - 1);
}

}  // namespace detail

/// Partial Schur data for the eigenvalue of B nearest to target.
inline ComplexPartialSchur extract_complex(const CMatrix& B, cplx target) {
    const Eigen::Index N = B.rows();
    Eigen::ComplexEigenSolver<CMatrix> es(B, false);
    const Eigen::Index k = detail::select_simple(es.eigenvalues(), target, B.norm());
    const cplx z = es.eigenvalues()[k];
    const CVector v = phase_normalize(detail::null_vector(B, z));
    const CMatrix T = reflector(v).conjugate(B);
    ComplexPartialSchur ps;
    ps.z = T(0, 0);
    ps.v = v;
    if (N > 1) {
        ps.w = T.block(0, 1, 1, N - 1).adjoint();
        ps.Bp = T.bottomRightCorner(N - 1, N - 1);
    } else {
        ps.w.resize(0);
        ps.Bp.resize(0, 0);
    }
    return ps;
}

inline RealPartialSchur extract_real(const RMatrix& B, double target) {
    const Eigen::Index N = B.rows();
    Eigen::EigenSolver<RMatrix> es(B, false);
    const Eigen::Index k = detail::select_simple(es.eigenvalues(), cplx(target, 0.0), B.norm());
    const cplx ev = es.eigenvalues()[k];
    if (std::abs(ev.imag()) > 1e-9 * std::max(1.0, B.norm())) throw ConfigError("extract_real: selected eigenvalue is not real");
    const double u = ev.real();
    Eigen::JacobiSVD<RMatrix> svd(B - u * RMatrix::Identity(N, N), Eigen::ComputeFullV);
    const RVector v = sign_normalize(svd.matrixV().col(N - 1));
    const RMatrix R = detail::real_householder(v);
    const RMatrix T = R * B * R;
    RealPartialSchur ps;
    ps.u = T(0, 0);
    ps.v = v;
    if (N > 1) {
        ps.w = T.block(0, 1, 1, N - 1).transpose();
        ps.Bp = T.bottomRightCorner(N - 1, N - 1);
    }
    return ps;
}

/// Canonical frame for the conjugate pair nearest to target (Im target > 0):
/// equal diagonals, b >= c > 0, first nonzero entry of v1 positive.
inline RealComplexPartialSchur extract_real_complex(const RMatrix& B, cplx target) {
    const Eigen::Index N = B.rows();
    if (N < 2) throw ConfigError("real-complex decomposition needs N >= 2");
    Eigen::EigenSolver<RMatrix> es(B, false);
    const Eigen::Index k = detail::select_simple(es.eigenvalues(), cplx(target.real(), std::abs(target.imag())), B.norm());
    cplx ev = es.eigenvalues()[k];
    if (ev.imag() <= 1e-9 * std::max(1.0, B.norm())) throw ConfigError("extract_real_complex: selected eigenvalue is real");
    const CVector r = detail::null_vector(B.cast<cplx>(), ev);
    RMatrix ab(N, 2);
    ab.col(0) = r.real();
    ab.col(1) = r.imag();
    Eigen::HouseholderQR<RMatrix> qr(ab);
    RMatrix V = qr.householderQ() * RMatrix::Identity(N, 2);
    Eigen::Matrix2d M = V.transpose() * B * V;
    const double theta = 0.5 * std::atan2(-(M(0, 0) - M(1, 1)), M(0, 1) + M(1, 0));
    Eigen::Matrix2d Rt;
    Rt << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    V = V * Rt;
    M = V.transpose() * B * V;
    if (std::abs(M(0, 1)) < std::abs(M(1, 0))) {
        Eigen::Matrix2d Q90;
        Q90 << 0.0, -1.0, 1.0, 0.0;
        V = V * Q90;
        M = V.transpose() * B * V;
    }
    if (M(0, 1) < 0.0) {
        V.col(1) = -V.col(1);
        M = V.transpose() * B * V;
    }
    const RVector v1 = sign_normalize(V.col(0));
    if (v1.dot(V.col(0)) < 0.0) V = -V;
    const RMatrix Q = frame_reflector(V);
    const RMatrix T = Q.transpose() * B * Q;
    RealComplexPartialSchur ps;
    ps.Z = {0.5 * (T(0, 0) + T(1, 1)), T(0, 1), -T(1, 0)};
    ps.V = V;
    if (N > 2) {
        ps.W = T.topRightCorner(2, N - 2).transpose();
        ps.Bp = T.bottomRightCorner(N - 2, N - 2);
    } else {
        ps.W.resize(0, 2);
        ps.Bp.resize(0, 0);
    }
    return ps;
}

/// r(V) = sqrt(b/(b+c)) v1 + i sqrt(c/(b+c)) v2, unit eigenvector for x + i y.
inline CVector eigvec_from_frame(const RMatrix& V, const ZBlock& Z) {
    const double bc = Z.b + Z.c;
    if (!(std::abs(bc) > 0.0)) throw DegenerateError("r(V): b + c = 0");
    const double alpha = std::sqrt(Z.b / bc), beta = std::sqrt(Z.c / bc);
    return alpha * V.col(0).cast<cplx>() + cplx(0.0, beta) * V.col(1).cast<cplx>();
}

enum class DirectionFlavour { complex_mu, real_nu, xi };
enum class SamplerMethod { rejection, mcmc };

struct DirectionSamples {
    std::vector<CMatrix> samples;  // N x 1 vectors, or N x 2 frames for xi
    SamplerMethod method = SamplerMethod::rejection;
    long proposals = 0;
    double acceptance_rate = 0.0;
    double integrated_autocorrelation = 0.0;
    double log_norm = 0.0;         // log of K(z), K_R(u) or L(delta, z)
    double log_norm_rel_stderr = 0.0;
};

struct DirectionParams {
    cplx z = 0.0;         // mu: z; nu: real part used as u; xi: x + i y
    double delta = 0.0;   // xi only
};

namespace detail {

inline RMatrix random_frame(Eigen::Index N, CounterRng& rng) {
    RMatrix G(N, 2);
    for (Eigen::Index i = 0; i < N; ++i) {
        G(i, 0) = rng.normal();
        G(i, 1) = rng.normal();
    }
    Eigen::HouseholderQR<RMatrix> qr(G);
    RMatrix V = qr.householderQ() * RMatrix::Identity(N, 2);
    // Sign fix makes the frame Haar distributed.
    const RMatrix Rr = qr.matrixQR().topLeftCorner(2, 2).triangularView<Eigen::Upper>();
    for (int j = 0; j < 2; ++j)
        if (Rr(j, j) < 0) V.col(j) = -V.col(j);
    return V;
}

}  // namespace detail

/// Samples from mu_z (complex sphere), nu_u (real sphere) or xi_{delta,z} (2-frames)
/// with densities prop. to exp(-(N/t)|X_z v|^2), exp(-(N/2t)|X_u v|^2), exp(-(N/2t)|X V - V Z|_F^2)
/// relative to surface measure. Normalization estimates use the same surface measure.
inline DirectionSamples sample_direction_measure(const CMatrix& X, const DirectionParams& par, double t,
                                                 DirectionFlavour flavour, long M, std::uint64_t seed,
                                                 SamplerMethod method = SamplerMethod::rejection) {
    const Eigen::Index N = X.rows();
    if (N > 64) throw ConfigError("sample_direction_measure: N must be <= 64");
    if (!(t > 0.0)) throw ConfigError("t must be positive");
    DirectionSamples out;
    out.method = method;
    CounterRng rng(seed, 0xd1ec);

    if (flavour == DirectionFlavour::xi) {
        if (N < 3) throw ConfigError("xi needs N >= 3");
        const RMatrix Xr = X.real();
        const ZBlock Zb = ZBlock::from_y_delta(par.z.real(), par.z.imag(), par.delta);
        const Eigen::Matrix2d Z = Zb.matrix();
        const double c = N / (2.0 * t);
        auto energy = [&](const RMatrix& V) { return (Xr * V - V * Z).squaredNorm(); };
        const double log_pref = (N - 3) * std::log(c / kPi) + log_sphere_area(static_cast<int>(N), Field::real) +
                                log_sphere_area(static_cast<int>(N - 1), Field::real);
        if (method == SamplerMethod::rejection) {
            double s1 = 0.0, s2 = 0.0;
            long cap = std::max<long>(2000000, 2000 * M);
            while (static_cast<long>(out.samples.size()) < M && out.proposals < cap) {
                const RMatrix V = detail::random_frame(N, rng);
                const double wgt = std::exp(-c * energy(V));
                ++out.proposals;
                s1 += wgt;
                s2 += wgt * wgt;
                if (rng.uniform() < wgt) out.samples.push_back(V.cast<cplx>());
                if (out.proposals >= 1000000 && out.samples.size() < out.proposals * 1e-6)
                    throw InfeasibleError("rejection acceptance below 1e-6; use MCMC or asymptotic mode");
            }
            out.acceptance_rate = static_cast<double>(out.samples.size()) / out.proposals;
            const double mean = s1 / out.proposals;
            const double var = std::max(0.0, s2 / out.proposals - mean * mean);
            out.log_norm = log_pref + std::log(mean);
            out.log_norm_rel_stderr = std::sqrt(var / out.proposals) / mean;
            return out;
        }
        // Random-walk Metropolis with Cayley-transform rotations.
        RMatrix V = detail::random_frame(N, rng);
        double E = energy(V);
        double step = 0.5 / std::sqrt(static_cast<double>(N));
        const long burn = 2000, thin = 10;
        std::vector<double> trace;
        long accepted = 0, moves = 0;
        for (long it = 0; static_cast<long>(out.samples.size()) < M; ++it) {
            RMatrix G(N, N);
            for (Eigen::Index i = 0; i < N; ++i)
                for (Eigen::Index j = 0; j < N; ++j) G(i, j) = rng.normal();
            const RMatrix Om = 0.5 * step * (G - G.transpose());
            const RMatrix I = RMatrix::Identity(N, N);
            const RMatrix Q = (I - 0.5 * Om).partialPivLu().solve(I + 0.5 * Om);
            const RMatrix Vp = Q * V;
            const double Ep = energy(Vp);
            ++moves;
            if (std::log(rng.uniform()) < -c * (Ep - E)) {
                V = Vp;
                E = Ep;
                ++accepted;
            }
            if (it < burn) {
                if (it % 100 == 99) {
                    const double rate = static_cast<double>(accepted) / moves;
                    step *= rate > 0.3 ? 1.2 : 0.8;
                    accepted = moves = 0;
                }
                continue;
            }
            if ((it - burn) % thin == 0) {
                out.samples.push_back(V.cast<cplx>());
                trace.push_back(E);
            }
        }
        out.acceptance_rate = moves ? static_cast<double>(accepted) / moves : 0.0;
        // Integrated autocorrelation of the energy (initial positive sequence).
        const auto ms = mean_stderr(trace);
        double var = 0.0;
        for (double e : trace) var += (e - ms.mean) * (e - ms.mean);
        var /= trace.size();
        double tau = 1.0;
        for (std::size_t lag = 1; lag < trace.size() / 2 && var > 0.0; ++lag) {
            double acc = 0.0;
            for (std::size_t i = 0; i + lag < trace.size(); ++i) acc += (trace[i] - ms.mean) * (trace[i + lag] - ms.mean);
            const double rho = acc / ((trace.size() - lag) * var);
            if (rho <= 0.0) break;
            tau += 2.0 * rho;
        }
        out.integrated_autocorrelation = tau;
        out.log_norm = std::numeric_limits<double>::quiet_NaN();
        return out;
    }

    const bool cx = flavour == DirectionFlavour::complex_mu;
    const cplx shift = cx ? par.z : cplx(par.z.real(), 0.0);
    const CMatrix Xz = shifted(cx ? X : CMatrix(X.real().cast<cplx>()), shift);
    const double c = cx ? N / t : N / (2.0 * t);
    const RVector s = singular_values(X, shift);
    const double lam_min = s[s.size() - 1] * s[s.size() - 1];
    const double log_pref = cx ? (N - 1) * std::log(c / kPi) + log_sphere_area(static_cast<int>(N), Field::complex)
                               : (0.5 * N - 1.0) * std::log(c / kPi) + log_sphere_area(static_cast<int>(N), Field::real);
    double s1 = 0.0, s2 = 0.0;
    const long cap = std::max<long>(2000000, 2000 * M);
    while (static_cast<long>(out.samples.size()) < M && out.proposals < cap) {
        CVector v = cx ? random_complex_unit(N, rng) : CVector(random_real_unit(N, rng).cast<cplx>());
        const double e = (Xz * v).squaredNorm();
        const double wgt = std::exp(-c * (e - lam_min));
        ++out.proposals;
        s1 += wgt;
        s2 += wgt * wgt;
        if (rng.uniform() < wgt) out.samples.push_back(v);
        if (out.proposals >= 1000000 && out.samples.size() < out.proposals * 1e-6)
            throw InfeasibleError("rejection acceptance below 1e-6; use the asymptotic normalization");
    }
    out.acceptance_rate = static_cast<double>(out.samples.size()) / out.proposals;
    const double mean = s1 / out.proposals;
    const double var = std::max(0.0, s2 / out.proposals - mean * mean);
    out.log_norm = log_pref - c * lam_min + std::log(mean);
    out.log_norm_rel_stderr = std::sqrt(var / out.proposals) / mean;
    return out;
}

}  // namespace nhw
