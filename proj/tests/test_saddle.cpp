#include <gtest/gtest.h>

#include "nhw/ensembles.hpp"
#include "nhw/saddle_quantities.hpp"

using namespace nhw;

TEST(Saddle, ZeroMatrixClosedForm) {
    for (double t : {0.3, 1.0, 2.5}) {
        const auto sd = solve_eta(CMatrix::Zero(4, 4), 0.0, t);
        EXPECT_NEAR(sd.eta_z, std::sqrt(t), 1e-12);
        EXPECT_NEAR(sd.phi_z, 1.0 - std::log(t), 1e-12);
        EXPECT_NEAR(sd.sigma_z, 1.0 / t, 1e-12);
        EXPECT_NEAR(t * sd.tr_H, 1.0, 1e-12);
    }
}

TEST(Saddle, GinoeShiftClosedForm) {
    for (double u : {0.0, 0.4, -0.8}) {
        const auto sd = solve_eta(CMatrix::Zero(5, 5), u, 1.0);
        EXPECT_NEAR(sd.eta_z * sd.eta_z, 1.0 - u * u, 1e-12);
        EXPECT_NEAR(sd.sigma_tilde_z, sd.sigma_z, 1e-12);
    }
}

TEST(Saddle, DiagonalClosedForm) {
    CMatrix X = CMatrix::Zero(2, 2);
    X(0, 0) = 0.4;
    X(1, 1) = -0.4;
    const auto sd = solve_eta(X, 0.0, 0.5);
    EXPECT_NEAR(sd.eta_z * sd.eta_z, 0.5 - 0.16, 1e-12);
}

TEST(Saddle, SaddleEquationAndPhiOnRandomInput) {
    const CMatrix X = ginibre(Field::complex, 40, 2);
    const cplx z(0.2, 0.3);
    const double t = 0.4;
    const auto sd = solve_eta(X, z, t);
    EXPECT_NEAR(t * sd.tr_H, 1.0, 1e-12);
    const RVector s = singular_values(X, z);
    const double e2 = sd.eta_z * sd.eta_z;
    EXPECT_NEAR(sd.phi_z, e2 / t - (s.array().square() + e2).log().sum() / 40.0, 1e-12);
    // phi is minimized at the saddle.
    EXPECT_LT(sd.phi_z, phi_of(s, 40, t, sd.eta_z * 1.01));
    EXPECT_LT(sd.phi_z, phi_of(s, 40, t, sd.eta_z * 0.99));
    EXPECT_TRUE(sd.eta_in_bounds);
}

TEST(Saddle, SigmaOnGinoeNearOne) {
    const CMatrix X = ginibre(Field::real, 256, 8);
    const auto sd = solve_eta(X, 0.0, 1.0);
    // Haar singular frames: Tr H H~ ~ (Tr H)^2 = 1 and Tr H^2 X ~ 0, so sigma ~ eta^2;
    // the square Marchenko-Pastur saddle gives eta^2 = 1/2.
    EXPECT_NEAR(sd.eta_z * sd.eta_z, 0.5, 0.03);
    EXPECT_NEAR(sd.sigma_z, 0.5, 0.03);
}

TEST(Saddle, SigmaAgainstDirectTraces) {
    const int N = 6;
    const CMatrix X = ginibre(Field::complex, N, 19);
    const cplx z(0.1, 0.25);
    const double t = 0.7;
    const auto sd = solve_eta(X, z, t);
    const double e2 = sd.eta_z * sd.eta_z;
    const CMatrix I = CMatrix::Identity(N, N);
    const CMatrix Xz = shifted(X, z), Xb = shifted(X, std::conj(z));
    const CMatrix H = (e2 * I + Xz.adjoint() * Xz).inverse(), Ht = (e2 * I + Xz * Xz.adjoint()).inverse();
    const CMatrix Hb = (e2 * I + Xb.adjoint() * Xb).inverse();
    auto Tr = [&](const CMatrix& M) { return M.trace() / double(N); };
    const double sigma = e2 * Tr(H * Ht).real() + std::norm(Tr(H * H * Xz.adjoint())) / Tr(H * H).real();
    EXPECT_NEAR(sd.sigma_z, sigma, 1e-10);
    EXPECT_NEAR(sd.tr_H_Hbar, Tr(H * Hb).real(), 1e-12);
    const double sigma_t = e2 * Tr(Hb * Ht).real() + std::norm(Tr(Hb * Xz * H)) / Tr(H * Hb).real();
    EXPECT_NEAR(sd.sigma_tilde_z, sigma_t, 1e-10);
}

TEST(Saddle, RDependentSaddle) {
    const CMatrix Z = CMatrix::Zero(3, 3);
    for (double r : {0.5, 2.0, 10.0}) {
        const auto rd = solve_eta_r(Z, 0.3, 1.0, r);
        EXPECT_NEAR(rd.eta_r * rd.eta_r, (1 + r) / r - 0.09, 1e-12);
    }
    const CMatrix X = ginibre(Field::real, 30, 4);
    double prev_eta = 1e300, prev_phi = 1e300;
    for (double r : {0.2, 0.5, 1.0, 3.0, 10.0, 100.0}) {
        const auto rd = solve_eta_r(X, 0.1, 0.5, r);
        EXPECT_LT(rd.eta_r, prev_eta);
        EXPECT_LT(rd.phi_tilde_r, prev_phi);
        prev_eta = rd.eta_r;
        prev_phi = rd.phi_tilde_r;
    }
    const double eta_u = solve_eta(X, 0.1, 0.5).eta_z;
    EXPECT_NEAR(solve_eta_r(X, 0.1, 0.5, 1e3).eta_r / eta_u, 1.0, 0.01);
    EXPECT_NEAR(solve_eta_r(X, 0.1, 0.5, 1e8).phi_tilde_r, 0.0, 1e-6);
    // d phi~/dr = -eta_r^2/(t (1+r)^2).
    const double r = 1.7, h = 1e-5;
    const double fd = (solve_eta_r(X, 0.1, 0.5, r + h).phi_tilde_r - solve_eta_r(X, 0.1, 0.5, r - h).phi_tilde_r) / (2 * h);
    const double e = solve_eta_r(X, 0.1, 0.5, r).eta_r;
    EXPECT_NEAR(fd / (-e * e / (0.5 * (1 + r) * (1 + r))), 1.0, 1e-6);
}

TEST(Saddle, NormalizationZeroShiftIsSphereArea) {
    const int N = 5;
    const double t = 0.8;
    // X_z = 0: K = (N/(pi t))^{N-1} |S^{2N-1}|.
    const auto k = duality_normalization(RVector::Zero(N), t, NormFlavour::complex_K, NormMode::quadrature);
    const double expect = (N - 1) * std::log(N / (kPi * t)) + log_sphere_area(N, Field::complex);
    EXPECT_NEAR(k.log_value, expect, 1e-8);
    EXPECT_NEAR(std::exp(expect), 2 * kPi * std::pow(N / t, N - 1) / 24.0, 1e-9 * std::exp(expect));
    const auto kr = duality_normalization(RVector::Zero(N), t, NormFlavour::real_K, NormMode::quadrature);
    EXPECT_NEAR(kr.log_value, (0.5 * N - 1) * std::log(N / (2 * kPi * t)) + log_sphere_area(N, Field::real), 1e-8);
}

TEST(Saddle, NormalizationTwoByTwoBetaOracle) {
    // N = 2, X_z = diag(a, 0), t = 1: K = (2/pi) |S^3| (1 - e^{-2a^2})/(2a^2).
    const double a = 0.7;
    RVector s(2);
    s << a, 0.0;
    const auto k = duality_normalization(s, 1.0, NormFlavour::complex_K, NormMode::quadrature);
    const double expect = std::log(2 / kPi) + log_sphere_area(2, Field::complex) +
                          std::log((1 - std::exp(-2 * a * a)) / (2 * a * a));
    EXPECT_NEAR(k.log_value, expect, 1e-8);
}

TEST(Saddle, NormalizationExactDividedDifferenceOracle) {
    // K = (c/pi)^{N-1} |S| (N-1)! (-1)^{N-1} [c l_1..c l_N] e^{-x} for distinct l_i = s_i^2.
    const int N = 6;
    const double t = 0.6, c = N / t;
    RVector s(N);
    s << 1.3, 1.0, 0.8, 0.5, 0.3, 0.1;
    std::vector<double> x(N), dd(N);
    for (int i = 0; i < N; ++i) x[i] = c * s[i] * s[i];
    for (int i = 0; i < N; ++i) dd[i] = std::exp(-x[i]);
    for (int k = 1; k < N; ++k)
        for (int i = N - 1; i >= k; --i) dd[i] = (dd[i] - dd[i - 1]) / (x[i] - x[i - k]);
    const double E = std::tgamma(N) * (N % 2 ? 1 : -1) * dd[N - 1];
    const double expect = (N - 1) * std::log(c / kPi) + log_sphere_area(N, Field::complex) + std::log(E);
    const auto k = duality_normalization(s, t, NormFlavour::complex_K, NormMode::quadrature);
    EXPECT_NEAR(k.log_value, expect, 1e-7);
}

TEST(Saddle, AsymptoticModeAgreesAtModerateN) {
    const CMatrix X = ginibre(Field::complex, 48, 12);
    const auto q = duality_normalization(X, 0.0, 0.5, NormFlavour::complex_K, NormMode::quadrature);
    const auto a = duality_normalization(X, 0.0, 0.5, NormFlavour::complex_K, NormMode::asymptotic);
    EXPECT_LT(std::abs(std::expm1(a.log_value - q.log_value)), 0.25);
    const auto rq = duality_normalization(X, 0.0, 0.5, NormFlavour::r_dependent, NormMode::quadrature, 2.0);
    EXPECT_TRUE(std::isfinite(rq.log_value));
}

TEST(Saddle, LAsymptoticRegimes) {
    const auto sd = solve_eta(ginibre(Field::real, 40, 3), 0.0, 0.5);
    const auto l0 = L_asymptotic(0.0, sd, 1.0);
    EXPECT_EQ(l0.regime, LRegime::gaussian_core);
    const double d = 0.01;
    const auto l1 = L_asymptotic(d, sd, 1.0), l2 = L_asymptotic(2 * d, sd, 1.0);
    EXPECT_NEAR(l1.log_value - l2.log_value, 3.0 * 40 * sd.sigma_tilde_z * d * d / 2.0, 1e-10);
    EXPECT_EQ(L_asymptotic(5.0, sd, 2.0).regime, LRegime::far_tail);
    EXPECT_THROW(L_asymptotic(-1.0, sd, 1.0), ConfigError);
}

TEST(Saddle, HypothesisChecks) {
    const auto rows = check_moment_hypotheses(CMatrix::Zero(4, 4), 0.0, 1.0, {0.5});
    ASSERT_EQ(rows.size(), 1u);
    // X = 0: eta Tr H = 1/eta on [delta, 1/delta] and eta^3 Tr H^2 = 1/eta.
    EXPECT_NEAR(rows[0].min_eta_trH, 0.5, 1e-12);
    EXPECT_NEAR(rows[0].max_eta_trH, 2.0, 1e-12);
    EXPECT_TRUE(rows[0].pass);
    const auto g = check_moment_hypotheses(ginibre(Field::real, 256, 1), 0.0, 0.3, {0.3});
    EXPECT_TRUE(g[0].pass);
    EXPECT_THROW(check_moment_hypotheses(CMatrix::Zero(2, 2), 0.0, 1.0, {1.5}), ConfigError);
}

TEST(Saddle, NoSaddleRaises) {
    RVector s(3);
    s << 10.0, 10.0, 10.0;
    EXPECT_THROW(solve_eta_from_singular(s, 3, 1.0, 1.0), NumericError);
}

TEST(Saddle, CompressionDimension) {
    const CMatrix X = ginibre(Field::complex, 6, 1);
    CMatrix V = CMatrix::Zero(6, 2);
    V(0, 0) = 1.0;
    V(1, 1) = 1.0;
    const CMatrix C = compress_complement(X, V);
    EXPECT_EQ(C.rows(), 4);
    EXPECT_NEAR(std::abs(C.trace() - X.bottomRightCorner(4, 4).trace()), 0.0, 1e-12);
}
