#include <gtest/gtest.h>

#include <random>

#include "mlx/fock.hpp"
#include "mlx/linalg.hpp"
#include "mlx/oracle/operator_strings.hpp"

using namespace mlx;

namespace {

CMatrix random_orthonormal_rows(int M, int K, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    CMatrix c(M, K);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < K; ++j) c(i, j) = cplx(nd(rng), nd(rng));
    gram_schmidt(c);
    return c;
}

struct BasisSpec {
    Statistics stats;
    int n;
    int m;
};

/// Every basis with K <= 100, N <= 12 and m <= 100.
std::vector<BasisSpec> small_bases() {
    std::vector<BasisSpec> out;
    for (Statistics st : {Statistics::boson, Statistics::fermion})
        for (int n = 1; n <= 12; ++n)
            for (int m = 1; m <= 100; ++m) {
                if (st == Statistics::fermion && m < n) continue;
                if (basis_size(st, n, m) <= 100) out.push_back({st, n, m});
            }
    return out;
}

}  // namespace

TEST(FockBasis, BosonTwoInTwo) {
    const FockBasis b = enumerate_basis(Statistics::boson, 2, 2);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(b[0], (OccupationVector{2, 0}));
    EXPECT_EQ(b[1], (OccupationVector{1, 1}));
    EXPECT_EQ(b[2], (OccupationVector{0, 2}));
}

TEST(FockBasis, FermionTwoInThree) {
    const FockBasis b = enumerate_basis(Statistics::fermion, 2, 3);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(b[0], (OccupationVector{1, 1, 0}));
    EXPECT_EQ(b[1], (OccupationVector{1, 0, 1}));
    EXPECT_EQ(b[2], (OccupationVector{0, 1, 1}));
}

TEST(FockBasis, SixFermionsInFifteen) {
    const FockBasis b = enumerate_basis(Statistics::fermion, 6, 15);
    EXPECT_EQ(b.size(), 5005u);
    EXPECT_NEAR(static_cast<double>(b.size() * b.size()), 25e6, 0.01 * 25e6);
}

TEST(FockBasis, SizesMatchBinomialAndLookupIsBijection) {
    for (const auto& s : small_bases()) {
        if (s.m > 20) continue;
        const FockBasis b = enumerate_basis(s.stats, s.n, s.m);
        ASSERT_EQ(b.size(), basis_size(s.stats, s.n, s.m));
        for (std::size_t i = 0; i < b.size(); ++i) {
            ASSERT_EQ(b.index(b[i]), i);
            int sum = 0;
            for (int v : b[i]) {
                sum += v;
                if (s.stats == Statistics::fermion) {
                    ASSERT_LE(v, 1);
                }
            }
            ASSERT_EQ(sum, s.n);
            if (i > 0) {
                ASSERT_TRUE(b[i - 1] > b[i]);  // strictly descending
            }
        }
    }
}

TEST(FockBasis, Rejections) {
    EXPECT_THROW(enumerate_basis(Statistics::fermion, 3, 2), std::invalid_argument);
    EXPECT_THROW(enumerate_basis(Statistics::boson, 0, 2), std::invalid_argument);
    EXPECT_EQ(enumerate_basis(Statistics::boson, 1, 1).find({2}), -1);
}

TEST(PhaseFactors, SpecExamples) {
    EXPECT_DOUBLE_EQ(phase_Q({1, 0}, 0, 0, Statistics::boson), 2.0);
    EXPECT_DOUBLE_EQ(phase_Q({1, 0, 0}, 1, 2, Statistics::fermion), 1.0);
    EXPECT_DOUBLE_EQ(phase_Q({0, 1, 0, 0}, 0, 3, Statistics::fermion), -1.0);
    EXPECT_DOUBLE_EQ(phase_P({0, 1, 0}, 2, 2, Statistics::fermion), 0.0);
    EXPECT_DOUBLE_EQ(phase_P({0, 0}, 0, 0, Statistics::boson), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(phase_P({0, 0, 0}, 2, 0, Statistics::fermion), -1.0);
    EXPECT_THROW(phase_Q({0, 1}, 0, 2, Statistics::boson), std::out_of_range);
    EXPECT_THROW(phase_P({0, 1}, -1, 0, Statistics::fermion), std::out_of_range);
}

// Q_n(k, q) = <n + e_k| a+_k a_q |n + e_q> and P_n(k, q) = <n + e_k + e_q| a+_k a+_q |n>.
TEST(PhaseFactors, MatchOperatorStrings) {
    for (Statistics st : {Statistics::boson, Statistics::fermion}) {
        for (int n = 2; n <= 4; ++n) {
            const int m = 5;
            const oracle::OperatorLadder lad(st, n, m);
            for (std::size_t a = 0; a < lad.n1.size(); ++a) {
                const OccupationVector& base = lad.n1[a];
                for (int k = 0; k < m; ++k)
                    for (int q = 0; q < m; ++q) {
                        OccupationVector tk = base, tq = base;
                        ++tk[static_cast<std::size_t>(k)];
                        ++tq[static_cast<std::size_t>(q)];
                        const long ik = lad.n0.find(tk), iq = lad.n0.find(tq);
                        if (ik < 0 || iq < 0) continue;
                        EXPECT_DOUBLE_EQ(lad.one(k, q)(ik, iq), phase_Q(base, k, q, st));
                    }
            }
            for (std::size_t a = 0; a < lad.n2.size(); ++a) {
                const OccupationVector& base = lad.n2[a];
                for (int k = 0; k < m; ++k)
                    for (int q = 0; q < m; ++q) {
                        OccupationVector up = base;
                        ++up[static_cast<std::size_t>(k)];
                        ++up[static_cast<std::size_t>(q)];
                        const long iu = lad.n0.find(up);
                        const double p = phase_P(base, k, q, st);
                        if (iu < 0) continue;  // Pauli-blocked target
                        // <up| a+_k a+_q |base> = (a_q a_k)(base, up)
                        const RMatrix aa = lad.a1[static_cast<std::size_t>(q)] * lad.a0[static_cast<std::size_t>(k)];
                        EXPECT_DOUBLE_EQ(aa(static_cast<Eigen::Index>(a), iu), p);
                    }
            }
        }
    }
}

TEST(TransitionTensors, BosonCondensate) {
    const FockBasis b = enumerate_basis(Statistics::boson, 2, 2);
    CMatrix c = CMatrix::Zero(1, 3);
    c(0, 0) = 1.0;
    const auto t = transition_tensors(c, b);
    EXPECT_NEAR(std::abs(t.one(0, 0, 0, 0) - 2.0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(t.two(0, 0, 0, 0, 0, 0) - 2.0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(t.one(0, 0, 1, 1)), 0.0, 1e-14);
}

TEST(TransitionTensors, FermionSignExample) {
    const FockBasis b = enumerate_basis(Statistics::fermion, 2, 3);
    CMatrix c = CMatrix::Zero(2, 3);
    c(0, b.index({1, 1, 0})) = 1.0;
    c(1, b.index({1, 0, 1})) = 1.0;
    const auto t = transition_tensors(c, b);
    EXPECT_NEAR(std::abs(t.one(0, 1, 1, 2) - 1.0), 0.0, 1e-14);  // a+_2 a_3 |101> = +|110>
    EXPECT_NEAR(std::abs(t.one(1, 1, 1, 2)), 0.0, 1e-14);
}

TEST(TransitionTensors, SingleParticleReduction) {
    for (Statistics st : {Statistics::boson, Statistics::fermion}) {
        const FockBasis b = enumerate_basis(st, 1, 4);
        const CMatrix c = random_orthonormal_rows(3, 4, 11);
        const auto t = transition_tensors(c, b);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 4; ++k)
                    for (int q = 0; q < 4; ++q) {
                        const cplx ref = std::conj(c(i, b.index(OccupationVector{k == 0, k == 1, k == 2, k == 3}))) *
                                         c(j, b.index(OccupationVector{q == 0, q == 1, q == 2, q == 3}));
                        EXPECT_NEAR(std::abs(t.one(i, j, k, q) - ref), 0.0, 1e-14);
                    }
    }
}

TEST(TransitionTensors, DimensionMismatchRejected) {
    const FockBasis b = enumerate_basis(Statistics::boson, 2, 3);
    EXPECT_THROW(transition_tensors(CMatrix::Zero(1, 5), b), std::invalid_argument);
}

TEST(TransitionTensors, TraceContractionAndAntisymmetry) {
    for (Statistics st : {Statistics::boson, Statistics::fermion}) {
        const int n = 3, m = 5;
        const FockBasis b = enumerate_basis(st, n, m);
        const CMatrix c = random_orthonormal_rows(3, static_cast<int>(b.size()), 5);
        const auto t = transition_tensors(c, b);
        for (int i = 0; i < 3; ++i) {
            cplx tr = 0.0;
            for (int k = 0; k < m; ++k) tr += t.one(i, i, k, k);
            EXPECT_NEAR(std::abs(tr - cplx(n)), 0.0, 1e-12);
            for (int k = 0; k < m; ++k) {
                for (int kp = 0; kp < m; ++kp) {
                    cplx s = 0.0;
                    for (int q = 0; q < m; ++q) s += t.two(i, i, k, q, q, kp);
                    EXPECT_NEAR(std::abs(s - double(n - 1) * t.one(i, i, k, kp)), 0.0, 1e-12);
                }
            }
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < m; ++k)
                    for (int q = 0; q < m; ++q) {
                        EXPECT_NEAR(std::abs(t.one(i, j, k, q) - std::conj(t.one(j, i, q, k))), 0.0, 1e-13);
                        if (st != Statistics::fermion) continue;
                        for (int qp = 0; qp < m; ++qp)
                            for (int kp = 0; kp < m; ++kp) {
                                EXPECT_NEAR(std::abs(t.two(i, j, k, q, qp, kp) + t.two(i, j, q, k, qp, kp)), 0.0,
                                            1e-13);
                                if (k == q || qp == kp) {
                                    EXPECT_EQ(std::abs(t.two(i, j, k, q, qp, kp)), 0.0);
                                }
                            }
                    }
    }
}

TEST(TransitionTensors, MatchDenseOperatorStringsForAllSmallBases) {
    double worst = 0.0;
    std::size_t count = 0;
    for (const auto& s : small_bases()) {
        const FockBasis b = enumerate_basis(s.stats, s.n, s.m);
        const int M = std::min<int>(2, static_cast<int>(b.size()));
        const CMatrix c = random_orthonormal_rows(M, static_cast<int>(b.size()), 17u + count);
        const bool two = s.n >= 2;  // N = 1 has no two-body part
        const auto fast = transition_tensors(c, b, two);
        const auto ref = oracle::dense_transition_tensors(c, b, two);
        worst = std::max(worst, (fast.d1 - ref.d1).cwiseAbs().maxCoeff());
        if (two) {
            worst = std::max(worst, (fast.d2 - ref.d2).cwiseAbs().maxCoeff());
        } else {
            EXPECT_EQ(build_two_body_table(b).pairs.size(), 0u);
        }
        ++count;
    }
    EXPECT_GT(count, 100u);
    EXPECT_LE(worst, 1e-12);
}

TEST(Operators, ApplyOneAndTwoBodyMatchDense) {
    for (Statistics st : {Statistics::boson, Statistics::fermion}) {
        const int n = 3, m = 4;
        const FockBasis b = enumerate_basis(st, n, m);
        const oracle::OperatorLadder lad(st, n, m);
        const int K = static_cast<int>(b.size());
        const CMatrix c = random_orthonormal_rows(2, K, 3);
        CMatrix x = CMatrix::Random(m, m);
        CMatrix v = CMatrix::Random(m * m, m * m);
        CMatrix out = CMatrix::Zero(2, K);
        apply_one_body(build_one_body_table(b), x, c, out);
        apply_two_body(build_two_body_table(b), v, c, out);
        RMatrix perm = RMatrix::Zero(K, K);  // brute index <- fock index
        for (int i = 0; i < K; ++i) perm(lad.n0.find(b[static_cast<std::size_t>(i)]), i) = 1.0;
        CMatrix h = CMatrix::Zero(K, K);
        for (int r = 0; r < m; ++r) {
            for (int s2 = 0; s2 < m; ++s2) {
                h += x(r, s2) * lad.one(r, s2).cast<cplx>();
                for (int u = 0; u < m; ++u)
                    for (int w = 0; w < m; ++w) h += 0.5 * v(r * m + s2, u * m + w) * lad.two(r, s2, w, u).cast<cplx>();
                }
            }
        const CMatrix hf = perm.transpose().cast<cplx>() * h * perm.cast<cplx>();
        const CMatrix ref = (hf * c.transpose()).transpose();
        EXPECT_LT((out - ref).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Operators, ContractTwoBodyMatchesD2) {
    const FockBasis b = enumerate_basis(Statistics::boson, 3, 4);
    const CMatrix c = random_orthonormal_rows(3, static_cast<int>(b.size()), 8);
    CMatrix eta = CMatrix::Random(3, 3);
    eta = eta * eta.adjoint();
    const auto t = transition_tensors(c, b);
    const CMatrix rho2 = contract_two_body(build_two_body_table(b), eta, c);
    const int m = 4;
    for (int k = 0; k < m; ++k)
        for (int q = 0; q < m; ++q)
            for (int u = 0; u < m; ++u)
                for (int v = 0; v < m; ++v) {
                    cplx ref = 0.0;
                    for (int i = 0; i < 3; ++i)
                        for (int j = 0; j < 3; ++j) ref += eta(i, j) * t.two(i, j, k, q, v, u);
                    EXPECT_NEAR(std::abs(rho2(k * m + q, u * m + v) - ref), 0.0, 1e-12);
                }
}
