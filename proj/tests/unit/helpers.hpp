#pragma once

#include <random>

#include <Eigen/Eigenvalues>

#include "mlx/linalg.hpp"
#include "mlx/system.hpp"

namespace mlx::testing {

inline System make_system(Statistics sa, int na, Statistics sb, int nb, double L, std::size_t G, double ga = 0.0,
                          double gb = 0.0, double gab = 0.0, double xa = 0.0, double xb = 0.0) {
    System s;
    s.grid = build_grid(L, G);
    s.species[kA].statistics = sa;
    s.species[kA].particles = na;
    s.species[kA].offset = xa;
    s.species[kA].intra = InteractionKernel::contact(ga);
    s.species[kB].statistics = sb;
    s.species[kB].particles = nb;
    s.species[kB].offset = xb;
    s.species[kB].intra = InteractionKernel::contact(gb);
    s.inter = InteractionKernel::contact(gab);
    return s;
}

inline CMatrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937& rng) {
    std::normal_distribution<double> nd;
    CMatrix out(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) out(i, j) = cplx(nd(rng), nd(rng));
    return out;
}

/// Random normalized A, orthonormal SBS rows and smooth orthonormal orbitals
/// drawn from the lowest `span` trap eigenfunctions.
inline MixtureState random_state(const Model& model, unsigned seed, int span = 12) {
    std::mt19937 rng(seed);
    const int M = model.sbs();
    const double dx = model.grid().spacing;
    MixtureState st;
    st.top = random_matrix(M, M, rng);
    st.top /= st.top.norm();
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        const auto K = static_cast<Eigen::Index>(model.basis_size(s));
        st.coeffs[i] = random_matrix(M, K, rng);
        gram_schmidt(st.coeffs[i]);
        const int m = model.orbitals(s);
        const auto G = static_cast<Eigen::Index>(model.grid().point_count);
        const int n = std::min<int>(std::max(span, m), static_cast<int>(G));
        Eigen::SelfAdjointEigenSolver<RMatrix> es(model.one_body(s).matrix());
        const CMatrix basis = (es.eigenvectors().leftCols(n).transpose() / std::sqrt(dx)).cast<cplx>();
        st.orbitals[i] = random_matrix(m, n, rng) * basis;
        gram_schmidt(st.orbitals[i], dx);
    }
    return st;
}

}  // namespace mlx::testing
