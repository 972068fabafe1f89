#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include <boost/math/quadrature/gauss.hpp>

#include "nhw/char_poly_moments.hpp"
#include "nhw/ensembles.hpp"
#include "nhw/hermitized_resolvent.hpp"
#include "nhw/saddle_quantities.hpp"
#include "nhw/schur_decomposition.hpp"
#include "nhw/stats.hpp"

namespace nhw {

enum class EigenClass { real, upper, lower, complex };

/// Unit right vectors r_n (columns of R), left vectors with l_n^* r_m = delta_nm (columns of L).
struct EigenSystem {
    CVector z;
    CMatrix R;
    CMatrix L;
    std::vector<EigenClass> kind;
    int n_real = 0;
    int n_pairs = 0;
    bool real_input = false;

    double biorthogonality_residual() const {
        return (L.adjoint() * R - CMatrix::Identity(R.cols(), R.cols())).cwiseAbs().maxCoeff();
    }
};

namespace detail {

inline void check_simple(const CVector& z, double scale) {
    for (Eigen::Index i = 0; i < z.size(); ++i)
        for (Eigen::Index j = i + 1; j < z.size(); ++j) {
            const double gap = std::abs(z[i] - z[j]);
            if (gap <= 1e-10 * std::max(1.0, scale)) {
                std::ostringstream os;
                os << "near-defective eigenvalue pair: gap " << gap;
                throw ConditioningError(os.str(), gap);
            }
        }
}

inline EigenSystem finish_eigen(CVector z, CMatrix R, double scale) {
    check_simple(z, scale);
    for (Eigen::Index n = 0; n < R.cols(); ++n) R.col(n).normalize();
    EigenSystem es;
    es.z = std::move(z);
    es.L = R.partialPivLu().inverse().adjoint();
    es.R = std::move(R);
    es.kind.assign(es.z.size(), EigenClass::complex);
    return es;
}

}  // namespace detail

inline EigenSystem bi_orthogonal_eigen(const CMatrix& A) {
    Eigen::ComplexEigenSolver<CMatrix> solver(A, true);
    if (solver.info() != Eigen::Success) throw NumericError("eigen solver did not converge");
    return detail::finish_eigen(solver.eigenvalues(), solver.eigenvectors(), A.norm());
}

/// Real input: eigenvalues with |Im z| <= 1e-9 |A| are classified real and made exactly real.
inline EigenSystem bi_orthogonal_eigen(const RMatrix& A) {
    Eigen::EigenSolver<RMatrix> solver(A, true);
    if (solver.info() != Eigen::Success) throw NumericError("eigen solver did not converge");
    CVector z = solver.eigenvalues();
    CMatrix R = solver.eigenvectors();
    const double tol = 1e-9 * std::max(1.0, A.norm());
    std::vector<EigenClass> kind(z.size());
    int nr = 0, nu = 0;
    for (Eigen::Index n = 0; n < z.size(); ++n) {
        if (std::abs(z[n].imag()) <= tol) {
            z[n] = z[n].real();
            R.col(n) = R.col(n).real().cast<cplx>();
            kind[n] = EigenClass::real;
            ++nr;
        } else {
            kind[n] = z[n].imag() > 0 ? EigenClass::upper : EigenClass::lower;
            if (z[n].imag() > 0) ++nu;
        }
    }
    EigenSystem es = detail::finish_eigen(std::move(z), std::move(R), A.norm());
    es.kind = std::move(kind);
    es.n_real = nr;
    es.n_pairs = nu;
    es.real_input = true;
    return es;
}

inline CVector eigenvalues(const CMatrix& A) {
    Eigen::ComplexEigenSolver<CMatrix> solver(A, false);
    if (solver.info() != Eigen::Success) throw NumericError("eigen solver did not converge");
    return solver.eigenvalues();
}

/// Unit right eigenvector for a computed eigenvalue z by two steps of inverse iteration.
inline CVector right_eigenvector(const CMatrix& A, cplx z, std::uint64_t seed = 0) {
    const Eigen::Index N = A.rows();
    const double nudge = 1e-13 * std::max(1.0, A.norm());
    const Eigen::PartialPivLU<CMatrix> lu(shifted(A, z + cplx(nudge, nudge)));
    CounterRng rng(seed, 0x1e1);
    CVector x = random_complex_unit(N, rng);
    for (int it = 0; it < 3; ++it) {
        x = lu.solve(x);
        x.normalize();
    }
    return x;
}

/// Radial C^2 bump: 1 for |z - z0| <= inner, 0 beyond 2 inner, quintic smoothstep between.
/// Radial C-infinity bump: 1 on |z - z0| <= inner, 0 beyond outer (default 2 inner).
/// Profile on rho in [1, 2]: 1 / (1 + e^q), q = 1/(2 - rho) - 1/(rho - 1).
class BumpFunction {
public:
    BumpFunction(cplx z0, double inner, double outer = 0.0) : z0_(z0), inner_(inner), outer_(outer > 0.0 ? outer : 2.0 * inner) {
        if (!(inner > 0.0) || !(outer_ > inner_)) throw ConfigError("bump radii must satisfy 0 < inner < outer");
    }

    /// Bump in sqrt(N)(z - z0)/r units.
    static BumpFunction local(cplx z0, double r, int N) { return {z0, r / std::sqrt(static_cast<double>(N))}; }

    static double profile(double rho) {
        if (rho <= 1.0) return 1.0;
        if (rho >= 2.0) return 0.0;
        const double q = logit(rho - 1.0);
        return q > 0.0 ? std::exp(-q) / (1.0 + std::exp(-q)) : 1.0 / (1.0 + std::exp(q));
    }
    static double profile_d1(double rho) {
        if (rho <= 1.0 || rho >= 2.0) return 0.0;
        const double x = rho - 1.0;
        return -spread(x) * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x)));
    }
    static double profile_d2(double rho) {
        if (rho <= 1.0 || rho >= 2.0) return 0.0;
        const double x = rho - 1.0;
        const double q1 = 1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x));
        const double q2 = -2.0 / (x * x * x) + 2.0 / std::pow(1.0 - x, 3);
        return -profile_d1(rho) * (1.0 - 2.0 * profile(rho)) * q1 - spread(x) * q2;
    }

    double operator()(cplx z) const { return profile(rho(z)); }

    double laplacian(cplx z) const {
        const double r = std::abs(z - z0_);
        const double w = outer_ - inner_;
        const double rh = 1.0 + (r - inner_) / w;
        if (rh <= 1.0 || rh >= 2.0) return 0.0;
        return profile_d2(rh) / (w * w) + profile_d1(rh) / (w * r);
    }

    cplx center() const { return z0_; }
    double inner() const { return inner_; }
    double outer() const { return outer_; }

private:
    double rho(cplx z) const { return 1.0 + (std::abs(z - z0_) - inner_) / (outer_ - inner_); }
    static double logit(double x) { return 1.0 / (1.0 - x) - 1.0 / x; }
    // P(1 - P) without cancellation.
    static double spread(double x) {
        const double e = std::exp(-std::abs(logit(x)));
        return e / ((1.0 + e) * (1.0 + e));
    }

    cplx z0_;
    double inner_;
    double outer_;
};

enum class EigenSelection { all, real_eigs, complex_eigs };

/// theta(sqrt(N)(z_n - z0), (N |q_j^* r_n|^2)_j).
using ThetaFn = std::function<cplx(cplx, const std::vector<double>&)>;

inline cplx statistic_L(const EigenSystem& es, const ThetaFn& theta, cplx z0, const std::vector<CVector>& qs,
                        EigenSelection sel = EigenSelection::all) {
    const double N = static_cast<double>(es.z.size());
    const double sN = std::sqrt(N);
    cplx acc = 0.0;
    std::vector<double> x(qs.size());
    for (Eigen::Index n = 0; n < es.z.size(); ++n) {
        if (es.real_input) {
            if (sel == EigenSelection::real_eigs && es.kind[n] != EigenClass::real) continue;
            if (sel == EigenSelection::complex_eigs && es.kind[n] != EigenClass::upper) continue;
        }
        for (std::size_t j = 0; j < qs.size(); ++j) x[j] = N * std::norm(qs[j].dot(es.R.col(n)));
        acc += theta(sN * (es.z[n] - z0), x);
    }
    return acc;
}

/// L_theta using eigenvectors only for eigenvalues with sqrt(N)|z_n - z0| < support.
inline cplx statistic_L_local(const CMatrix& A, const ThetaFn& theta, cplx z0, double support,
                              const std::vector<CVector>& qs) {
    const double N = static_cast<double>(A.rows());
    const double sN = std::sqrt(N);
    const CVector z = eigenvalues(A);
    cplx acc = 0.0;
    std::vector<double> x(qs.size());
    for (Eigen::Index n = 0; n < z.size(); ++n) {
        const cplx zz = sN * (z[n] - z0);
        if (std::abs(zz) >= support) continue;
        if (!qs.empty()) {
            const CVector r = right_eigenvector(A, z[n], static_cast<std::uint64_t>(n));
            for (std::size_t j = 0; j < qs.size(); ++j) x[j] = N * std::norm(qs[j].dot(r));
        }
        acc += theta(zz, x);
    }
    return acc;
}

/// f_eta at an eigenvalue: sum_{m<N} eta^2/(s_m^2+eta^2), dropping the vanishing s_N.
inline double f_eta_at_eigenvalue(const RVector& s, double eta) {
    const double e2 = eta * eta;
    double acc = 0.0;
    for (Eigen::Index m = 0; m + 1 < s.size(); ++m) acc += e2 / (s[m] * s[m] + e2);
    const double sl = s[s.size() - 1];
    return acc - sl * sl / (sl * sl + e2);
}

struct TailExperiment {
    EnsembleSpec spec;
    cplx z0 = 0.0;
    double r = 1.0;
    double eps = 0.05;
    long M = 200;
    std::vector<double> eta_grid;  // for the f_eta g trend
    std::uint64_t seed = 1;
    int workers = 1;
};

struct TailSample {
    bool event = false;
    double min_s = std::numeric_limits<double>::infinity();  // min s_{N-1} inside the r-disk
    int count_in_disk = 0;
    double markov = 0.0;               // 2 sum f_eta g at eta = N^{-1-eps}
    std::vector<double> sum_fg;        // per eta_grid entry
};

struct TailResult {
    long M = 0;
    long events = 0;
    double frequency = 0.0;
    double wilson_lo = 0.0;
    double wilson_hi = 0.0;
    double markov_mean = 0.0;
    std::vector<double> eta_grid;
    std::vector<double> mean_fg;
    std::vector<double> stderr_fg;
    double loglog_slope = std::numeric_limits<double>::quiet_NaN();
    std::vector<TailSample> samples;
};

/// Per-matrix tail statistics; SVDs only at eigenvalues inside the bump support.
inline TailSample tail_sample(const CMatrix& A, cplx z0, double r, double eps, const std::vector<double>& eta_grid) {
    const int N = static_cast<int>(A.rows());
    const BumpFunction g = BumpFunction::local(z0, r, N);
    const double thr = std::pow(static_cast<double>(N), -1.0 - eps);
    TailSample ts;
    ts.sum_fg.assign(eta_grid.size(), 0.0);
    const CVector z = eigenvalues(A);
    for (Eigen::Index n = 0; n < z.size(); ++n) {
        const double d = std::abs(z[n] - z0);
        if (d >= g.outer()) continue;
        const RVector s = singular_values(A, z[n]);
        const double gv = g(z[n]);
        if (d < g.inner()) {
            ++ts.count_in_disk;
            const double sN1 = N >= 2 ? s[N - 2] : 0.0;
            ts.min_s = std::min(ts.min_s, sN1);
            if (sN1 < thr) ts.event = true;
        }
        ts.markov += 2.0 * f_eta_at_eigenvalue(s, thr) * gv;
        for (std::size_t k = 0; k < eta_grid.size(); ++k) ts.sum_fg[k] += f_eta_at_eigenvalue(s, eta_grid[k]) * gv;
    }
    return ts;
}

inline TailResult run_tail_experiment(const TailExperiment& cfg) {
    if (cfg.M < 50) throw ConfigError("tail experiment requires M >= 50");
    if (!(cfg.eps > 0.0)) throw ConfigError("eps must be positive");
    if (!(cfg.r > 0.0)) throw ConfigError("r must be positive");
    TailResult out;
    out.M = cfg.M;
    out.eta_grid = cfg.eta_grid;
    out.samples.resize(cfg.M);
    parallel_for(cfg.M, cfg.workers, [&](long i) {
        const CMatrix A = sample_matrix(cfg.spec, substream(cfg.seed, static_cast<std::uint64_t>(i)));
        out.samples[i] = tail_sample(A, cfg.z0, cfg.r, cfg.eps, cfg.eta_grid);
    });
    std::vector<double> markov;
    for (const auto& s : out.samples) {
        out.events += s.event ? 1 : 0;
        markov.push_back(s.markov);
    }
    out.frequency = static_cast<double>(out.events) / cfg.M;
    std::tie(out.wilson_lo, out.wilson_hi) = wilson_interval(out.events, cfg.M);
    out.markov_mean = mean_stderr(markov).mean;
    for (std::size_t k = 0; k < cfg.eta_grid.size(); ++k) {
        std::vector<double> col;
        for (const auto& s : out.samples) col.push_back(s.sum_fg[k]);
        const auto ms = mean_stderr(col);
        out.mean_fg.push_back(ms.mean);
        out.stderr_fg.push_back(ms.stderr_);
    }
    if (cfg.eta_grid.size() >= 2 &&
        std::all_of(out.mean_fg.begin(), out.mean_fg.end(), [](double v) { return v > 0.0; }))
        out.loglog_slope = loglog_slope(cfg.eta_grid, out.mean_fg);
    return out;
}

/// Geometric grid of n points on [N^{lo}, N^{hi}].
inline std::vector<double> eta_grid(int N, double lo_exp, double hi_exp, int n) {
    std::vector<double> g;
    for (int k = 0; k < n; ++k) {
        const double e = n == 1 ? lo_exp : lo_exp + (hi_exp - lo_exp) * k / (n - 1);
        g.push_back(std::pow(static_cast<double>(N), e));
    }
    return g;
}

struct GirkoConfig {
    cplx center = 0.0;
    double half_width = 1.0;  // square [center +- half_width]^2 covering supp F
    int grid = 160;
    double sigma_max = 1e3;
};

struct GirkoResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double discrepancy = 0.0;
    int perturbed_nodes = 0;
    int eigenvalue_count = 0;  // eigenvalues inside the box
};

/// sum F(z_n) against -(1/4pi) int Delta F(z) int_0^{sigma_max} Im tr G_z(i sigma) d sigma dz.
/// The sigma-integral is sum_n log(1 + sigma_max^2/s_n^2); its constant part N log sigma_max^2
/// integrates to zero against Delta F and is dropped to keep midpoint-rule noise out.
inline GirkoResult girko_evaluate(const CMatrix& A, const std::function<double(cplx)>& F,
                                  const std::function<double(cplx)>& lapF, const GirkoConfig& cfg) {
    if (cfg.grid < 2 || !(cfg.half_width > 0.0) || !(cfg.sigma_max > 0.0)) throw ConfigError("invalid Girko grid");
    GirkoResult out;
    const CVector z = eigenvalues(A);
    for (Eigen::Index n = 0; n < z.size(); ++n) {
        out.lhs += F(z[n]);
        const cplx d = z[n] - cfg.center;
        if (std::abs(d.real()) <= cfg.half_width && std::abs(d.imag()) <= cfg.half_width) ++out.eigenvalue_count;
    }
    const double h = 2.0 * cfg.half_width / cfg.grid;
    const double s2max = cfg.sigma_max * cfg.sigma_max;
    double acc = 0.0;
    for (int i = 0; i < cfg.grid; ++i) {
        for (int j = 0; j < cfg.grid; ++j) {
            cplx node = cfg.center + cplx(-cfg.half_width + (i + 0.5) * h, -cfg.half_width + (j + 0.5) * h);
            const double lap = lapF(node);
            if (lap == 0.0) continue;
            RVector s = singular_values(A, node);
            if (s[s.size() - 1] < 1e-12 * std::max(1.0, s[0])) {
                node += cplx(1e-3 * h, 0.7e-3 * h);
                s = singular_values(A, node);
                ++out.perturbed_nodes;
            }
            double inner = 0.0;
            for (Eigen::Index n = 0; n < s.size(); ++n) inner += std::log1p(s[n] * s[n] / s2max) - 2.0 * std::log(s[n]);
            acc += lapF(node) * inner;
        }
    }
    out.rhs = -acc * h * h / (4.0 * kPi);
    out.discrepancy = std::abs(out.lhs - out.rhs);
    return out;
}

/// Five-point Laplacian for test functions without an analytic one.
inline std::function<double(cplx)> stencil_laplacian(std::function<double(cplx)> F, double h) {
    return [F = std::move(F), h](cplx z) {
        return (F(z + h) + F(z - h) + F(z + cplx(0, h)) + F(z - cplx(0, h)) - 4.0 * F(z)) / (h * h);
    };
}

enum class ReferenceFlavour { complex_gaussian, real_gaussian, delta_y_mixture };

struct ReferenceDensity {
    ReferenceFlavour flavour = ReferenceFlavour::complex_gaussian;
    std::vector<CVector> q;
    double y = 1.0;  // mixture flavour only
};

struct ReferenceSamples {
    std::vector<std::vector<double>> x;  // M x l values of |q_j^* p|^2 (limit law of N|q_j^* r_n|^2)
    std::vector<double> delta;           // mixture flavour only
};

namespace detail {

/// Inverse-CDF table for the density prop. to (2 y d / sqrt(d^2 + 4y^2)) exp(-d^2/2) on d >= 0.
class DeltaTable {
public:
    explicit DeltaTable(double y, int n = 8000, double dmax = 12.0) : grid_(n + 1), cdf_(n + 1, 0.0) {
        auto w = [y](double d) { return 2.0 * y * d / std::sqrt(d * d + 4.0 * y * y) * std::exp(-0.5 * d * d); };
        for (int k = 0; k <= n; ++k) grid_[k] = dmax * k / n;
        for (int k = 1; k <= n; ++k) cdf_[k] = cdf_[k - 1] + 0.5 * (w(grid_[k - 1]) + w(grid_[k])) * (grid_[k] - grid_[k - 1]);
        for (auto& c : cdf_) c /= cdf_.back();
    }
    double quantile(double u) const {
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        const std::size_t k = std::clamp<std::size_t>(it - cdf_.begin(), 1, cdf_.size() - 1);
        const double f = (u - cdf_[k - 1]) / std::max(1e-300, cdf_[k] - cdf_[k - 1]);
        return grid_[k - 1] + f * (grid_[k] - grid_[k - 1]);
    }

private:
    std::vector<double> grid_;
    std::vector<double> cdf_;
};

/// S with S S^T = G for a symmetric PSD Gram matrix.
inline RMatrix psd_sqrt(const RMatrix& G) {
    Eigen::SelfAdjointEigenSolver<RMatrix> es(G);
    const RVector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace detail

/// i.i.d. draws of (|q_j^* p|^2)_j with p = alpha v1 + i beta v2, v1, v2 independent standard real Gaussian:
/// complex flavour alpha = beta = 1/sqrt2; real flavour alpha = 1, beta = 0;
/// mixture alpha^2, beta^2 = (1 +- d/sqrt(d^2+4y^2))/2 with d drawn from the y-conditional weight.
inline ReferenceSamples reference_sampler(const ReferenceDensity& rd, long M, std::uint64_t seed) {
    const std::size_t l = rd.q.size();
    if (l == 0) throw ConfigError("reference sampler needs at least one q");
    for (const auto& q : rd.q)
        if (std::abs(q.norm() - 1.0) > 1e-10) throw ConfigError("q vectors must be unit");
    if (rd.flavour == ReferenceFlavour::delta_y_mixture && !(rd.y > 0.0)) throw ConfigError("mixture needs y > 0");
    const Eigen::Index N = rd.q[0].size();
    RMatrix Qr(N, 2 * l);
    for (std::size_t j = 0; j < l; ++j) {
        Qr.col(2 * j) = rd.q[j].real();
        Qr.col(2 * j + 1) = rd.q[j].imag();
    }
    const RMatrix S = detail::psd_sqrt(Qr.transpose() * Qr);
    std::optional<detail::DeltaTable> table;
    if (rd.flavour == ReferenceFlavour::delta_y_mixture) table.emplace(rd.y);
    ReferenceSamples out;
    out.x.assign(M, std::vector<double>(l));
    CounterRng rng(seed, 0x4ef);
    RVector xi1(2 * l), xi2(2 * l);
    for (long i = 0; i < M; ++i) {
        for (std::size_t k = 0; k < 2 * l; ++k) xi1[k] = rng.normal();
        for (std::size_t k = 0; k < 2 * l; ++k) xi2[k] = rng.normal();
        const RVector g1 = S * xi1, g2 = S * xi2;  // (a_j.v1, b_j.v1), (a_j.v2, b_j.v2)
        double alpha = M_SQRT1_2, beta = M_SQRT1_2;
        if (rd.flavour == ReferenceFlavour::real_gaussian) {
            alpha = 1.0;
            beta = 0.0;
        } else if (table) {
            const double d = table->quantile(rng.uniform());
            const double k = d / std::sqrt(d * d + 4.0 * rd.y * rd.y);
            alpha = std::sqrt(0.5 * (1.0 + k));
            beta = std::sqrt(0.5 * (1.0 - k));
            out.delta.push_back(d);
        }
        for (std::size_t j = 0; j < l; ++j) {
            const double re = alpha * g1[2 * j] + beta * g2[2 * j + 1];
            const double im = beta * g2[2 * j] - alpha * g1[2 * j + 1];
            out.x[i][j] = re * re + im * im;
        }
    }
    return out;
}

/// Column j of the reference samples.
inline std::vector<double> reference_column(const ReferenceSamples& rs, std::size_t j = 0) {
    std::vector<double> c;
    c.reserve(rs.x.size());
    for (const auto& row : rs.x) c.push_back(row[j]);
    return c;
}

struct OverlapPool {
    std::vector<double> values;  // N |e_j^* r_n|^2 pooled over eigenvalues and coordinates
    long matrices = 0;
    long eigenvalues_used = 0;
};

/// Pools N|q^* r_n|^2 with q = e_j, j in coords, over eigenvalues with sqrt(N)|z_n - z0| < r,
/// drawing matrices until min_samples values are collected.
inline OverlapPool pool_overlaps(const EnsembleSpec& spec, cplx z0, double r, const std::vector<int>& coords,
                                 long min_samples, std::uint64_t seed, long max_matrices = 100000) {
    OverlapPool pool;
    const double N = spec.N;
    while (static_cast<long>(pool.values.size()) < min_samples && pool.matrices < max_matrices) {
        const CMatrix A = sample_matrix(spec, substream(seed, static_cast<std::uint64_t>(pool.matrices)));
        ++pool.matrices;
        const CVector z = eigenvalues(A);
        for (Eigen::Index n = 0; n < z.size(); ++n) {
            if (std::sqrt(N) * std::abs(z[n] - z0) >= r) continue;
            const CVector v = right_eigenvector(A, z[n], static_cast<std::uint64_t>(n));
            ++pool.eigenvalues_used;
            for (int j : coords) pool.values.push_back(N * std::norm(v[j]));
        }
    }
    return pool;
}

struct PairComparison {
    double mean_a = 0.0;
    double mean_b = 0.0;
    double difference = 0.0;
    double stderr_ = 0.0;
    std::vector<double> per_sample_a;
    std::vector<double> per_sample_b;
};

/// E_A[L_theta] - E_B[L_theta] with common random numbers: sample i of A and B share the substream.
inline PairComparison matched_pair_comparison(const MatchedPair& pair, const ThetaFn& theta, cplx z0, double support,
                                              const std::vector<CVector>& qs, long M, std::uint64_t seed,
                                              int workers = 1) {
    if (M < 2) throw ConfigError("compare-pair needs M >= 2");
    PairComparison out;
    out.per_sample_a.assign(M, 0.0);
    out.per_sample_b.assign(M, 0.0);
    parallel_for(M, workers, [&](long i) {
        const auto s = substream(seed, static_cast<std::uint64_t>(i));
        out.per_sample_a[i] = statistic_L_local(sample_matrix(pair.spec_a, s), theta, z0, support, qs).real();
        out.per_sample_b[i] = statistic_L_local(sample_matrix(pair.spec_b, s), theta, z0, support, qs).real();
    });
    std::vector<double> diff(M);
    for (long i = 0; i < M; ++i) diff[i] = out.per_sample_a[i] - out.per_sample_b[i];
    out.mean_a = mean_stderr(out.per_sample_a).mean;
    out.mean_b = mean_stderr(out.per_sample_b).mean;
    const auto d = mean_stderr(diff);
    out.difference = d.mean;
    out.stderr_ = d.stderr_;
    return out;
}

struct SchurIdentityConfig {
    CMatrix X;                  // deterministic part
    double t = 1.0;
    BumpFunction g{0.0, 0.5};   // z-part of the test function, supported in |z - c| < 2 inner
    int coord = 0;              // h(v) = |v_coord|^2
    long M_lhs = 20000;
    long M_inner = 1500;        // direction samples per z node
    int radial_nodes = 6;       // per radial piece
    int angular_nodes = 20;
    std::uint64_t seed = 7;
    int workers = 1;
};

struct SchurIdentityResult {
    double lhs = 0.0, lhs_stderr = 0.0;
    double rhs = 0.0, rhs_stderr = 0.0;
    double z_score = 0.0;
    int nodes = 0;
};

/// Both sides of E sum_n f(z_n, r_n) = N/(2 pi^2 t) int K(z) E_{mu_z} E_{Y'}[f(z, v) |det B'_z|^2] dz
/// for B = X + sqrt(t) Y, f(z, v) = g(z) |v_coord|^2, B' = X^{(v)} + sqrt(t) Y~ with Var Y~_ij = 1/N.
inline SchurIdentityResult schur_identity_check(const SchurIdentityConfig& cfg) {
    const Eigen::Index N = cfg.X.rows();
    if (N < 2) throw ConfigError("identity check needs N >= 2");
    SchurIdentityResult out;
    const double st = std::sqrt(cfg.t);

    std::vector<double> lhs(cfg.M_lhs);
    parallel_for(cfg.M_lhs, cfg.workers, [&](long i) {
        const CMatrix B = cfg.X + st * ginibre(Field::complex, static_cast<int>(N), substream(cfg.seed, i, 1));
        Eigen::ComplexEigenSolver<CMatrix> es(B, true);
        double acc = 0.0;
        for (Eigen::Index n = 0; n < N; ++n) {
            const double gv = cfg.g(es.eigenvalues()[n]);
            if (gv == 0.0) continue;
            const CVector r = es.eigenvectors().col(n).normalized();
            acc += gv * std::norm(r[cfg.coord]);
        }
        lhs[i] = acc;
    });
    const auto ml = mean_stderr(lhs);
    out.lhs = ml.mean;
    out.lhs_stderr = ml.stderr_;

    // Polar product rule: Gauss-Legendre on the plateau and on the annulus, trapezoid in angle.
    struct Node {
        cplx z;
        double w;
    };
    std::vector<Node> nodes;
    using GL = boost::math::quadrature::gauss<double, 6>;
    auto radial = [&](double a, double b, std::vector<std::pair<double, double>>& rw) {
        const auto& x = GL::abscissa();
        const auto& w = GL::weights();
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (double sg : {-1.0, 1.0}) {
                if (x[i] == 0.0 && sg > 0) continue;
                const double r = mid + sg * half * x[i];
                rw.emplace_back(r, w[i] * half * r);
            }
        }
    };
    std::vector<std::pair<double, double>> rw;
    radial(0.0, cfg.g.inner(), rw);
    radial(cfg.g.inner(), cfg.g.outer(), rw);
    for (const auto& [r, w] : rw)
        for (int k = 0; k < cfg.angular_nodes; ++k) {
            const double th = 2.0 * kPi * (k + 0.5) / cfg.angular_nodes;
            nodes.push_back({cfg.g.center() + r * cplx(std::cos(th), std::sin(th)), w * 2.0 * kPi / cfg.angular_nodes});
        }
    out.nodes = static_cast<int>(nodes.size());

    std::vector<double> val(nodes.size()), var(nodes.size());
    parallel_for(static_cast<long>(nodes.size()), cfg.workers, [&](long k) {
        const cplx z = nodes[k].z;
        const double gv = cfg.g(z);
        if (gv == 0.0) return;
        const double logK = duality_normalization(cfg.X, z, cfg.t, NormFlavour::complex_K, NormMode::quadrature).log_value;
        const auto ds = sample_direction_measure(cfg.X, {z, 0.0}, cfg.t, DirectionFlavour::complex_mu, cfg.M_inner,
                                                 substream(cfg.seed, k, 2));
        std::vector<double> inner(ds.samples.size());
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            const CVector v = phase_normalize(ds.samples[i].col(0));
            const CMatrix Xv = reflector(v).conjugate(cfg.X).bottomRightCorner(N - 1, N - 1);
            CounterRng rng(substream(cfg.seed, k, 3), i);
            CMatrix Yt(N - 1, N - 1);
            for (Eigen::Index a = 0; a < N - 1; ++a)
                for (Eigen::Index b = 0; b < N - 1; ++b) Yt(a, b) = rng.complex_normal() / std::sqrt(double(N));
            const double ld = log_abs_det(CMatrix(shifted(Xv + st * Yt, z)));
            inner[i] = std::norm(v[cfg.coord]) * std::exp(2.0 * ld);
        }
        const auto mi = mean_stderr(inner);
        const double scale = N / (2.0 * kPi * kPi * cfg.t) * std::exp(logK) * gv * nodes[k].w;
        val[k] = scale * mi.mean;
        var[k] = std::pow(scale * mi.stderr_, 2);
    });
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        out.rhs += val[k];
        out.rhs_stderr += var[k];
    }
    out.rhs_stderr = std::sqrt(out.rhs_stderr);
    out.z_score = (out.lhs - out.rhs) / std::hypot(out.lhs_stderr, out.rhs_stderr);
    return out;
}

}  // namespace nhw
