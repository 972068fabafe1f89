#include <gtest/gtest.h>

#include "nhw/eigen_statistics.hpp"

using namespace nhw;

TEST(EigenSystem, DiagonalAndRotation) {
    CMatrix D = CMatrix::Zero(2, 2);
    D(0, 0) = 1.0;
    D(1, 1) = 2.0;
    const auto es = bi_orthogonal_eigen(D);
    for (int n = 0; n < 2; ++n) {
        const int k = std::abs(es.z[n] - 1.0) < 1e-12 ? 0 : 1;
        EXPECT_NEAR(std::abs(es.R(k, n)), 1.0, 1e-14);
        EXPECT_NEAR(std::abs(es.L(k, n)), 1.0, 1e-14);
    }
    RMatrix J(2, 2);
    J << 0, 1, -1, 0;
    const auto ej = bi_orthogonal_eigen(J);
    EXPECT_EQ(ej.n_real, 0);
    EXPECT_EQ(ej.n_pairs, 1);
    for (int n = 0; n < 2; ++n) EXPECT_NEAR(std::abs(ej.z[n]), 1.0, 1e-14);
    EXPECT_NEAR(ej.z[0].real(), 0.0, 1e-14);
}

TEST(EigenSystem, BiorthogonalityOnGinibre) {
    const auto es = bi_orthogonal_eigen(ginibre(Field::complex, 32, 3));
    EXPECT_LT(es.biorthogonality_residual(), 1e-8);
    for (int n = 0; n < 32; ++n) EXPECT_NEAR(es.R.col(n).norm(), 1.0, 1e-12);
    const RMatrix R = ginibre(Field::real, 33, 4).real();
    const auto er = bi_orthogonal_eigen(R);
    EXPECT_EQ(er.n_real + 2 * er.n_pairs, 33);
    EXPECT_LT(er.biorthogonality_residual(), 1e-8);
    for (int n = 0; n < 33; ++n) {
        double best = 1e9;
        for (int m = 0; m < 33; ++m) best = std::min(best, std::abs(er.z[m] - std::conj(er.z[n])));
        EXPECT_LT(best, 1e-10);
    }
}

TEST(EigenSystem, DefectiveRaisesConditioning) {
    CMatrix J = CMatrix::Zero(2, 2);
    J(0, 1) = 1.0;
    EXPECT_THROW(bi_orthogonal_eigen(J), ConditioningError);
}

TEST(EigenSystem, InverseIterationMatchesSolver) {
    const CMatrix A = ginibre(Field::complex, 40, 8);
    const auto es = bi_orthogonal_eigen(A);
    for (int n = 0; n < 5; ++n) {
        const CVector r = right_eigenvector(A, es.z[n]);
        EXPECT_NEAR(std::abs(r.dot(es.R.col(n))), 1.0, 1e-9);
    }
}

TEST(Bump, PlateausAndSmoothness) {
    const BumpFunction g(cplx(0.5, -0.2), 0.1);
    EXPECT_EQ(g(cplx(0.5, -0.2)), 1.0);
    EXPECT_EQ(g(cplx(0.59, -0.2)), 1.0);
    EXPECT_EQ(g(cplx(0.71, -0.2)), 0.0);
    for (double rho = 0.0; rho < 2.5; rho += 0.013) {
        const double v = BumpFunction::profile(rho);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    // Seams: value, first and second derivatives continuous.
    const double h = 1e-6;
    for (double seam : {1.0, 2.0}) {
        EXPECT_NEAR(BumpFunction::profile(seam - h), BumpFunction::profile(seam + h), 1e-10);
        EXPECT_NEAR(BumpFunction::profile_d1(seam - h), BumpFunction::profile_d1(seam + h), 1e-9);
        EXPECT_NEAR(BumpFunction::profile_d2(seam - h), BumpFunction::profile_d2(seam + h), 1e-4);
    }
    // Analytic derivative and Laplacian against finite differences.
    for (double rho : {1.2, 1.5, 1.8}) {
        const double fd = (BumpFunction::profile(rho + 1e-5) - BumpFunction::profile(rho - 1e-5)) / 2e-5;
        EXPECT_NEAR(BumpFunction::profile_d1(rho), fd, 1e-8);
        const cplx z = g.center() + 0.1 * rho * std::polar(1.0, 0.3);
        EXPECT_NEAR(g.laplacian(z), stencil_laplacian([&](cplx x) { return g(x); }, 1e-4)(z), 1e-3 * std::abs(g.laplacian(z)));
        const double fd2 = (BumpFunction::profile_d1(rho + 1e-5) - BumpFunction::profile_d1(rho - 1e-5)) / 2e-5;
        EXPECT_NEAR(BumpFunction::profile_d2(rho), fd2, 1e-6 * std::max(1.0, std::abs(fd2)));
    }
}

TEST(Bump, ExplicitOuterRadius) {
    const BumpFunction g(0.0, 0.2, 0.5);
    EXPECT_EQ(g(cplx(0.19, 0.0)), 1.0);
    EXPECT_EQ(g(cplx(0.0, 0.51)), 0.0);
    EXPECT_NEAR(g(cplx(0.35, 0.0)), 0.5, 1e-15);
    const cplx z(0.31, 0.1);
    EXPECT_NEAR(g.laplacian(z), stencil_laplacian([&](cplx x) { return g(x); }, 1e-4)(z), 1e-3 * std::abs(g.laplacian(z)));
    EXPECT_THROW(BumpFunction(0.0, 0.3, 0.2), ConfigError);
}

TEST(StatisticL, TrivialCases) {
    const CMatrix A = ginibre(Field::complex, 20, 2);
    const auto es = bi_orthogonal_eigen(A);
    EXPECT_EQ(statistic_L(es, [](cplx, const std::vector<double>&) { return cplx(0.0); }, 0.0, {}), cplx(0.0));
    const double r = 2.0;
    const cplx cnt = statistic_L(es, [&](cplx z, const std::vector<double>&) { return cplx(std::abs(z) < r ? 1.0 : 0.0); }, 0.0, {});
    int direct = 0;
    for (int n = 0; n < 20; ++n) direct += std::sqrt(20.0) * std::abs(es.z[n]) < r;
    EXPECT_EQ(cnt.real(), direct);
    // Real matrix selections partition the spectrum.
    const auto er = bi_orthogonal_eigen(RMatrix(ginibre(Field::real, 20, 2).real()));
    auto one = [](cplx, const std::vector<double>&) { return cplx(1.0); };
    EXPECT_EQ(statistic_L(er, one, 0.0, {}, EigenSelection::real_eigs).real(), er.n_real);
    EXPECT_EQ(statistic_L(er, one, 0.0, {}, EigenSelection::complex_eigs).real(), er.n_pairs);
}

TEST(StatisticL, LocalVersionAgreesWithFull) {
    const CMatrix A = ginibre(Field::complex, 60, 12);
    const auto es = bi_orthogonal_eigen(A);
    CVector q = CVector::Zero(60);
    q[3] = 1.0;
    auto theta = [](cplx z, const std::vector<double>& x) { return cplx(std::abs(z) < 2.0 ? x[0] : 0.0); };
    const cplx full = statistic_L(es, theta, 0.1, {q});
    const cplx local = statistic_L_local(A, theta, 0.1, 2.0, {q});
    EXPECT_NEAR(std::abs(full - local), 0.0, 1e-8);
}

TEST(Tail, PlantedHitAndGinibreFrequency) {
    CMatrix A = CMatrix::Zero(6, 6);
    A.diagonal() << 0.0, 0.0, 3.0, 4.0, 5.0, 6.0;
    A(0, 2) = 1e-3;  // keeps the double eigenvalue non-degenerate in the solver sense
    const auto ts = tail_sample(A, 0.0, 1.0, 0.05, {});
    EXPECT_TRUE(ts.event);
    EXPECT_LT(ts.min_s, 1e-12);

    TailExperiment cfg;
    cfg.spec.N = 64;
    cfg.M = 60;
    cfg.seed = 4;
    cfg.eta_grid = eta_grid(64, -1.3, -1.0, 4);
    const auto res = run_tail_experiment(cfg);
    EXPECT_LT(res.wilson_hi, 0.25);
    EXPECT_EQ(res.mean_fg.size(), 4u);
    cfg.M = 10;
    EXPECT_THROW(run_tail_experiment(cfg), ConfigError);
}

TEST(Tail, FEtaAtEigenvalueDropsZeroMode) {
    RVector s(3);
    s << 1.0, 0.5, 1e-17;
    EXPECT_NEAR(f_eta_at_eigenvalue(s, 0.1), 0.01 / 1.01 + 0.01 / 0.26, 1e-15);
}

TEST(Girko, DiagonalNarrowBump) {
    CMatrix A = CMatrix::Zero(2, 2);
    A(0, 0) = 1.0;
    A(1, 1) = -1.0;
    const BumpFunction g(cplx(1.0, 0.05), 0.1);
    GirkoConfig cfg{g.center(), g.outer(), 160, 1e3};
    auto F = [&](cplx z) { return g(z); };
    auto L = [&](cplx z) { return g.laplacian(z); };
    const auto r = girko_evaluate(A, F, L, cfg);
    EXPECT_NEAR(r.lhs, 1.0, 1e-15);
    EXPECT_LT(r.discrepancy, 0.02);
    cfg.grid = 80;
    const auto coarse = girko_evaluate(A, F, L, cfg);
    EXPECT_GE(coarse.discrepancy / r.discrepancy, 2.0);
    const auto zero = girko_evaluate(A, [](cplx) { return 0.0; }, [](cplx) { return 0.0; }, cfg);
    EXPECT_EQ(zero.lhs, 0.0);
    EXPECT_EQ(zero.rhs, 0.0);
}

TEST(Reference, ComplexRealAndMixtureMarginals) {
    CVector q = CVector::Zero(10);
    q[2] = 1.0;
    const long M = 100000;
    const auto c = reference_column(reference_sampler({ReferenceFlavour::complex_gaussian, {q}, 0.0}, M, 1));
    const auto mc = mean_stderr(c);
    EXPECT_NEAR(mc.mean, 1.0, 4.0 / std::sqrt(double(M)));
    EXPECT_LT(ks_against_cdf(c, [](double x) { return 1.0 - std::exp(-x); }), 0.01);

    const auto r = reference_column(reference_sampler({ReferenceFlavour::real_gaussian, {q}, 0.0}, M, 2));
    const auto mr = mean_stderr(r);
    std::vector<double> dev;
    for (double x : r) dev.push_back((x - mr.mean) * (x - mr.mean));
    const auto mv = mean_stderr(dev);
    EXPECT_NEAR(mv.mean, 2.0, 4 * mv.stderr_);

    const auto m = reference_column(reference_sampler({ReferenceFlavour::delta_y_mixture, {q}, 10.0}, M, 3));
    EXPECT_LT(ks_against_cdf(m, [](double x) { return 1.0 - std::exp(-x); }), 0.02);
}

TEST(Reference, MixtureDeltaLaw) {
    // Small y: weight ~ d e^{-d^2/2}, a Rayleigh law with mean sqrt(pi/2) as y -> infinity;
    // for y -> 0 the weight tends to 2y e^{-d^2/2}: half-normal mean sqrt(2/pi).
    CVector q = CVector::Zero(3);
    q[0] = 1.0;
    const auto big = reference_sampler({ReferenceFlavour::delta_y_mixture, {q}, 1e4}, 50000, 4);
    EXPECT_NEAR(mean_stderr(big.delta).mean, std::sqrt(kPi / 2), 0.02);
    const auto small = reference_sampler({ReferenceFlavour::delta_y_mixture, {q}, 1e-4}, 50000, 5);
    EXPECT_NEAR(mean_stderr(small.delta).mean, std::sqrt(2 / kPi), 0.02);
}

TEST(Reference, CorrelatedProjections) {
    // Two orthogonal q give independent Exp(1) values; identical q give equal values.
    CVector q1 = CVector::Zero(4), q2 = CVector::Zero(4);
    q1[0] = 1.0;
    q2[1] = 1.0;
    const auto rs = reference_sampler({ReferenceFlavour::complex_gaussian, {q1, q2, q1}, 0.0}, 20000, 6);
    double cov = 0.0;
    for (const auto& row : rs.x) {
        cov += (row[0] - 1) * (row[1] - 1);
        EXPECT_EQ(row[0], row[2]);
    }
    EXPECT_NEAR(cov / 20000, 0.0, 0.05);
}

TEST(PairComparison, GaussianSelfMatchAgrees) {
    EnsembleSpec s;
    s.N = 30;
    const auto pair = build_matched_pair(s, 0.2);
    auto theta = [](cplx z, const std::vector<double>&) { return cplx(BumpFunction::profile(std::abs(z))); };
    const auto r = matched_pair_comparison(pair, theta, 0.0, 2.0, {}, 400, 3);
    EXPECT_GT(r.stderr_, 0.0);
    EXPECT_LE(std::abs(r.difference), 4.0 * r.stderr_);
}

TEST(PairComparison, UniformAgainstMatchedGaussDivisible) {
    EnsembleSpec s;
    s.N = 64;
    s.law.kind = LawKind::uniform;
    const auto pair = build_matched_pair(s, 0.1);
    auto theta = [](cplx z, const std::vector<double>&) { return cplx(BumpFunction::profile(std::abs(z) / 1.5)); };
    const auto r = matched_pair_comparison(pair, theta, 0.0, 3.0, {}, 150, 8);
    EXPECT_LT(std::abs(r.difference), 3 * r.stderr_ + 1e-12);
}

TEST(SchurIdentity, ZeroMatrixSmallRun) {
    SchurIdentityConfig cfg;
    cfg.X = CMatrix::Zero(4, 4);
    cfg.t = 1.0;
    cfg.g = BumpFunction(0.0, 0.4);
    cfg.M_lhs = 20000;
    cfg.M_inner = 300;
    cfg.radial_nodes = 6;
    cfg.angular_nodes = 8;
    const auto r = schur_identity_check(cfg);
    EXPECT_LT(std::abs(r.z_score), 4.0);
}
