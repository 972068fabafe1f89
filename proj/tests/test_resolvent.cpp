#include <gtest/gtest.h>

#include "nhw/ensembles.hpp"
#include "nhw/hermitized_resolvent.hpp"

using namespace nhw;

namespace {

CMatrix nilpotent() {
    CMatrix A = CMatrix::Zero(2, 2);
    A(0, 1) = 1.0;
    return A;
}

CMatrix direct_resolvent(const CMatrix& A, cplx z, cplx w) {
    const CMatrix H = hermitisation(A, z);
    return (H - w * CMatrix::Identity(H.rows(), H.cols())).inverse();
}

}  // namespace

TEST(Resolvent, SingularDecompositionExamples) {
    auto sd = singular_decompose(nilpotent(), 0.0);
    EXPECT_NEAR(sd.s[0], 1.0, 1e-15);
    EXPECT_NEAR(sd.s[1], 0.0, 1e-15);
    sd = singular_decompose(CMatrix::Zero(3, 3), 3.0);
    for (int n = 0; n < 3; ++n) EXPECT_NEAR(sd.s[n], 3.0, 1e-14);
    CMatrix D = CMatrix::Zero(2, 2);
    D(0, 0) = 2.0;
    D(1, 1) = -1.0;
    sd = singular_decompose(D, 0.0);
    EXPECT_NEAR(sd.s[0], 2.0, 1e-15);
    EXPECT_NEAR(sd.s[1], 1.0, 1e-15);
}

TEST(Resolvent, SvdInvariantsOnGinue) {
    const CMatrix A = ginibre(Field::complex, 12, 9);
    const cplx z(0.2, -0.1);
    const auto sd = singular_decompose(A, z);
    const CMatrix Az = shifted(A, z);
    for (int n = 0; n < 12; ++n) EXPECT_LT((Az * sd.V.col(n) - sd.s[n] * sd.U.col(n)).norm(), 1e-10 * Az.norm());
    EXPECT_LT((sd.U.adjoint() * sd.U - CMatrix::Identity(12, 12)).norm(), 1e-10);
    EXPECT_LT((sd.V.adjoint() * sd.V - CMatrix::Identity(12, 12)).norm(), 1e-10);
}

TEST(Resolvent, BlockConstants) {
    EXPECT_EQ(blocks::E1() + blocks::E3(), blocks::identity());
    const Block2 e2 = blocks::E2();
    EXPECT_EQ(e2(1, 0), cplx(1.0));
    EXPECT_EQ(e2(0, 0) + e2(0, 1) + e2(1, 1), cplx(0.0));
    EXPECT_EQ(blocks::E2_star(), Block2(e2.adjoint()));
}

TEST(Resolvent, SpectralFormMatchesDirectInverse) {
    const CMatrix A = ginibre(Field::complex, 8, 21);
    const cplx z(0.3, 0.4), w(0.1, 0.7);
    const auto sd = singular_decompose(A, z);
    const CMatrix G = resolvent_full(sd, w);
    const CMatrix H = hermitisation(A, z);
    EXPECT_LT((( H - w * CMatrix::Identity(16, 16)) * G - CMatrix::Identity(16, 16)).norm(), 1e-8);
    EXPECT_LT((G - direct_resolvent(A, z, w)).norm(), 1e-10 * G.norm());
    EXPECT_NEAR(std::abs(resolvent_trace(sd, w) - G.trace() / 8.0), 0.0, 1e-12);
    // G(conj w) = G(w)^*.
    EXPECT_LT((resolvent_full(sd, std::conj(w)) - G.adjoint()).norm(), 1e-12 * G.norm());
}

TEST(Resolvent, ZeroMatrixClosedForm) {
    const auto sd = singular_decompose(CMatrix::Zero(3, 3), 0.0);
    const double eta = 0.5;
    // Hermitisation is 0, so G = (i/eta) I and Tr G = 2i/eta with the 1/N normalization.
    EXPECT_LT((resolvent_full(sd, cplx(0, eta)) - cplx(0, 1 / eta) * CMatrix::Identity(6, 6)).norm(), 1e-14);
    EXPECT_NEAR(std::abs(resolvent_trace(sd, cplx(0, eta)) - cplx(0, 2 / eta)), 0.0, 1e-14);
}

TEST(Resolvent, NilpotentTraceByHand) {
    // s = (1, 0), w = i: (2/N) sum w/(s^2 - w^2) = i (1/2 + 1) = 1.5 i.
    const auto sd = singular_decompose(nilpotent(), 0.0);
    EXPECT_NEAR(std::abs(resolvent_trace(sd, cplx(0, 1)) - cplx(0, 1.5)), 0.0, 1e-14);
}

TEST(Resolvent, PoleIsRejected) {
    const auto sd = singular_decompose(nilpotent(), 0.0);
    EXPECT_THROW(resolvent_full(sd, 1.0), PoleError);
}

TEST(Resolvent, QuadraticFormAndBlockTraces) {
    const CMatrix A = ginibre(Field::complex, 6, 4);
    const cplx z(-0.2, 0.1), w(0.05, 0.3);
    const auto sd = singular_decompose(A, z);
    const CMatrix G = direct_resolvent(A, z, w);
    CounterRng rng(1, 2);
    const CVector x = random_complex_unit(12, rng), y = random_complex_unit(12, rng);
    EXPECT_NEAR(std::abs(resolvent_quadratic(sd, w, x, y) - x.dot(G * y)), 0.0, 1e-12);
    const Block2 T = resolvent_block_traces(sd, w);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(std::abs(T(i, j) - G.block(6 * i, 6 * j, 6, 6).trace() / 6.0), 0.0, 1e-12);
}

TEST(Resolvent, BlockResolventsAndTrace) {
    const CMatrix A = ginibre(Field::complex, 8, 17);
    const double eta = 0.3;
    const auto sd = singular_decompose(A, 0.1);
    const auto br = block_resolvents(sd, eta);
    const CMatrix Az = shifted(A, 0.1);
    const CMatrix I = CMatrix::Identity(8, 8);
    EXPECT_LT(((eta * eta * I + Az.adjoint() * Az) * br.H - I).norm(), 1e-10);
    EXPECT_LT(((eta * eta * I + Az * Az.adjoint()) * br.H_tilde - I).norm(), 1e-10);
    EXPECT_NEAR(trace_H(sd.s, eta), br.H.trace().real() / 8.0, 1e-12);
    const auto sd2 = singular_decompose(nilpotent(), 0.0);
    EXPECT_NEAR(trace_H(sd2.s, 1.0), 0.75, 1e-15);
    const auto zero = singular_decompose(CMatrix::Zero(2, 2), 0.0);
    EXPECT_LT((block_resolvents(zero, 0.5).H - 4.0 * CMatrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(Resolvent, FEtaExamples) {
    const auto sd = singular_decompose(nilpotent(), 0.0);
    EXPECT_NEAR(f_eta(sd, 0.1), 0.01 / 1.01, 1e-15);
    RVector s(3);
    s << 2.0, 0.25, 0.0;
    EXPECT_NEAR(f_eta(s, 0.25) - 0.0625 / (4.0 + 0.0625), 0.5, 1e-15);
    EXPECT_NEAR(f_eta(s, 1e6), 2.0, 1e-9);
}

TEST(Resolvent, ExtendedStatsAgainstDirectProducts) {
    const int N = 5;
    const CMatrix A = ginibre(Field::complex, N, 77);
    const cplx z(0.1, -0.2);
    const double eta = 0.4;
    const cplx w(0.0, eta);
    const auto sd = singular_decompose(A, z);
    const CMatrix G = direct_resolvent(A, z, w);
    const CMatrix F = expand(blocks::E2(), N), Fs = expand(blocks::E2_star(), N);
    CounterRng rng(4, 5);
    const CVector x = random_complex_unit(2 * N, rng), y = random_complex_unit(2 * N, rng);
    auto tr = [&](const CMatrix& M) { return M.trace() / double(N); };
    EXPECT_NEAR(std::abs(extended_trace_stats(sd, w, ExtStat::ext1) - tr(G)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(extended_trace_stats(sd, w, ExtStat::ext2) - tr(G * G * F)), 0.0, 1e-12);
    const cplx e3 = extended_trace_stats(sd, w, ExtStat::ext3);
    EXPECT_NEAR(std::abs(e3 - tr(G * G * F * G * Fs)), 0.0, 1e-12);
    EXPECT_NEAR(e3.real(), 0.0, 1e-12);  // purely imaginary at w = i eta
    EXPECT_NEAR(std::abs(extended_trace_stats(sd, w, ExtStat::ext4, &x, &y) - x.dot(G * y)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(extended_trace_stats(sd, w, ExtStat::ext5, &x, &y) - x.dot(G * F * G * y)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(extended_trace_stats(sd, w, ExtStat::ext6, &x, &y) - x.dot(G * F * G * Fs * G * y)), 0.0,
                1e-12);
    // E2^* variant.
    EXPECT_NEAR(std::abs(extended_trace_stats(sd, w, ExtStat::ext2, nullptr, nullptr, blocks::E2_star()) -
                         tr(G * G * Fs)),
                0.0, 1e-12);
    EXPECT_THROW(extended_trace_stats(sd, w, ExtStat::ext4), ConfigError);
}

TEST(Resolvent, Ext2ImaginaryForRealDiagonal) {
    CMatrix D = CMatrix::Zero(3, 3);
    D.diagonal() << 0.5, -1.2, 2.0;
    const auto sd = singular_decompose(D, 0.0);
    EXPECT_NEAR(extended_trace_stats(sd, cplx(0, 0.3), ExtStat::ext2).real(), 0.0, 1e-14);
}

TEST(Resolvent, DelocalisationEdgeCases) {
    CMatrix A(1, 1);
    A(0, 0) = 0.3;
    CVector q(1);
    q[0] = 1.0;
    const auto d = delocalisation_overlaps(singular_decompose(A, 0.0), q);
    ASSERT_TRUE(d.has_value());
    EXPECT_NEAR(d->max_q_u, 1.0, 1e-15);
    EXPECT_NEAR(d->max_q_v, 1.0, 1e-15);
    EXPECT_NEAR(d->max_u_v, 1.0, 1e-15);
    A(0, 0) = 3.0;
    EXPECT_FALSE(delocalisation_overlaps(singular_decompose(A, 0.0), q).has_value());
}

TEST(Resolvent, DelocalisationOnGinue) {
    const int N = 256;
    int pass = 0;
    const int seeds = 20;
    const double thr = std::pow(N, -0.5 + 0.2);
    CVector q = CVector::Zero(N);
    q[0] = 1.0;
    for (int s = 0; s < seeds; ++s) {
        const auto d = delocalisation_overlaps(singular_decompose(ginibre(Field::complex, N, 1000 + s), 0.0), q);
        ASSERT_TRUE(d.has_value());
        if (std::max(d->max_q_u, d->max_q_v) <= thr) ++pass;
    }
    EXPECT_GE(pass, 19);
}
