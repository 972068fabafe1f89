#include <gtest/gtest.h>

#include "nhw/char_poly_moments.hpp"

using namespace nhw;

TEST(BarnesG, IntegerValuesAndRecursion) {
    const auto& g = barnes_g();
    EXPECT_NEAR(g.log(1.0), 0.0, 1e-15);
    EXPECT_NEAR(g.log(2.0), 0.0, 1e-15);
    EXPECT_NEAR(g.log(3.0), 0.0, 1e-15);
    EXPECT_NEAR(g.log(4.0), std::log(2.0), 1e-14);
    EXPECT_NEAR(g.log(1.5) - g.log(0.5), 0.5 * std::log(kPi), 1e-14);
    for (int k = 1; k + 2 <= BarnesG::kMax; ++k)
        EXPECT_NEAR(g.log_half(k + 2) - g.log_half(k), std::lgamma(k / 2.0), 1e-12);
}

TEST(BarnesG, HalfValueAgainstIndependentConstant) {
    // G(1/2) = 0.603244281209446... (reference value of the Barnes function).
    EXPECT_NEAR(std::exp(barnes_g().log(0.5)), 0.6032442812094465, 1e-13);
}

TEST(BarnesG, ProductIdentity) {
    const auto& g = barnes_g();
    for (int m = 2; m <= 8; ++m) EXPECT_LT(product_identity_error(g, m), 1e-10) << m;
    // m = 2 by hand: 4/pi G(5/2) G(3)/G(1/2) with G(5/2) = (pi/2) G(1/2).
    EXPECT_NEAR(g.log(2.5) - g.log(0.5), std::log(kPi / 2), 1e-14);
}

TEST(BarnesG, ValidationDetectsCorruptedGlaisher) {
    EXPECT_TRUE(validate_barnes(barnes_g()).ok);
    const BarnesG bad(kGlaisher * 1.001);
    const auto v = validate_barnes(bad);
    EXPECT_FALSE(v.ok);
    EXPECT_GT(v.max_asymptotic_error, 1e-4);
}

TEST(BarnesG, DomainErrors) {
    EXPECT_THROW(barnes_g_log(0.0), ConfigError);
    EXPECT_THROW(barnes_g_log(33.0), ConfigError);
    EXPECT_THROW(barnes_g_log(1.25), ConfigError);
}

TEST(Moments, GinoeFormulaExamples) {
    const int N = 10;
    EXPECT_NEAR(ginoe_closed_form(N, 1, 0.0), 0.5 * std::log(2.0) - N / 2.0, 1e-12);
    EXPECT_NEAR(ginoe_closed_form(N, 2, 0.0), 0.5 * std::log(2 * kPi * N) - N, 1e-12);
    EXPECT_NEAR(std::exp(ginoe_closed_form(N, 2, 0.0)), 3.599e-4, 1e-7);
    EXPECT_NEAR(ginoe_closed_form(N, 3, 0.4), ginoe_closed_form(N, 3, -0.4), 1e-14);
    EXPECT_NEAR(ginoe_closed_form(N, 2, 0.5) - ginoe_closed_form(N, 2, 0.0), N * 0.25, 1e-12);
    EXPECT_THROW(ginoe_closed_form(N, 2, 1.0), ConfigError);
}

TEST(Moments, AsymptoticReducesToGinoe) {
    for (double u : {0.0, 0.3}) {
        const auto sd = solve_eta(CMatrix::Zero(12, 12), u, 1.0);
        for (int m = 1; m <= 4; ++m) EXPECT_NEAR(moment_asymptotic_log(12, m, sd), ginoe_closed_form(12, m, u), 1e-10);
    }
}

TEST(Moments, EvenPrefactorConsistency) {
    // The Barnes form of d_{N,2m} equals the (2j)! form for every saddle.
    const CMatrix X = ginibre(Field::real, 9, 4);
    const auto sd = solve_eta(X, 0.2, 0.7);
    for (int m = 1; m <= 4; ++m) {
        const double barnes = moment_asymptotic_log(9, 2 * m, sd) + 0.5 * 9 * 2 * m * sd.phi_z;
        EXPECT_NEAR(barnes, even_moment_log_prefactor(9, m, sd.t, sd.tr_H2), 1e-10) << m;
    }
}

TEST(Moments, ExactGinoeOracle) {
    // m = 2: N!/N^N.
    for (int N : {1, 3, 10}) EXPECT_NEAR(ginoe_exact_log_moment(N, 2), std::lgamma(N + 1.0) - N * std::log(N), 1e-12);
    // Closed form approaches exact: relative error about 1/(12N) at m = 2.
    const double rel10 = std::expm1(ginoe_closed_form(10, 2, 0.0) - ginoe_exact_log_moment(10, 2));
    EXPECT_NEAR(rel10, -1.0 / 120.0, 0.002);
}

TEST(Moments, LogAbsDetMatchesEigen) {
    const CMatrix A = ginibre(Field::complex, 7, 3);
    EXPECT_NEAR(log_abs_det(A), std::log(std::abs(A.determinant())), 1e-12);
    const RMatrix R = ginibre(Field::real, 7, 3).real();
    EXPECT_NEAR(log_abs_det(R), std::log(std::abs(R.determinant())), 1e-12);
}

TEST(Moments, ScalarMonteCarlo) {
    RMatrix X = RMatrix::Zero(1, 1);
    const auto r = mc_moment_oracle(X, 0.0, 1.0, 2, 20000, 5);
    EXPECT_LT(std::abs(r.log_mc_estimate - 0.0), 4 * r.mc_stderr_log);
    EXPECT_NEAR(r.jackknife_stderr_log, r.mc_stderr_log, 0.1 * r.mc_stderr_log);
}

TEST(Moments, MonteCarloMatchesExactAtSmallN) {
    const int N = 6;
    const auto r = mc_moment_oracle(RMatrix::Zero(N, N), 0.0, 1.0, 2, 20000, 9);
    EXPECT_LT(std::abs(r.log_mc_estimate - ginoe_exact_log_moment(N, 2)), 4 * r.mc_stderr_log);
    const auto r1 = mc_moment_oracle(RMatrix::Zero(N, N), 0.0, 1.0, 1, 20000, 10);
    EXPECT_LT(std::abs(r1.log_mc_estimate - ginoe_exact_log_moment(N, 1)), 4 * r1.mc_stderr_log);
}

TEST(Moments, MonteCarloIsWorkerIndependent) {
    const auto a = mc_moment_oracle(RMatrix::Zero(5, 5), 0.1, 0.5, 2, 500, 77, 1);
    const auto b = mc_moment_oracle(RMatrix::Zero(5, 5), 0.1, 0.5, 2, 500, 77, 3);
    EXPECT_EQ(a.log_mc_estimate, b.log_mc_estimate);
    EXPECT_EQ(a.log_abs_det, b.log_abs_det);
}

TEST(Moments, MonteCarloPreconditions) {
    EXPECT_THROW(mc_moment_oracle(RMatrix::Zero(3, 3), 0.0, 1.0, 2, 50, 1), ConfigError);
}
