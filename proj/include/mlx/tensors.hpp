#pragma once

// Composite objects built from transition matrices: species and particle
// reduced density matrices, mean-field operator matrices and the Hamiltonian
// matrix in the SBS product basis. These are the literal contractions; the
// propagator uses the cheaper transition-density route in eom.hpp and the
// two routes are cross-checked in the tests.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlx/fock.hpp"
#include "mlx/system.hpp"

namespace mlx {

/// eta[s](i, j) = sum over the partner index of conj(A_{..i..}) A_{..j..}.
/// The binary two-species density is conj(A(iA, iB)) A(jA, jB).
struct SpeciesDensities {
    std::array<CMatrix, kSpecies> eta;
    CMatrix top;

    cplx eta2(int iA, int iB, int jA, int jB) const { return std::conj(top(iA, iB)) * top(jA, jB); }
};

inline SpeciesDensities species_densities(const CMatrix& top, double norm_tol = 1e-6) {
    if (top.rows() != top.cols()) throw std::invalid_argument("species_densities: A must be square");
    const double n2 = top.squaredNorm();
    if (std::abs(n2 - 1.0) > norm_tol)
        throw std::invalid_argument("species_densities: top-layer coefficients not normalized (sum |A|^2 = " +
                                    std::to_string(n2) + ")");
    SpeciesDensities d;
    d.top = top;
    d.eta[kA] = top.conjugate() * top.transpose();
    d.eta[kB] = top.adjoint() * top;
    return d;
}

/// rho1[s](k, q) = <a+_k a_q>, trace N_s.
/// rho2[s](k*m + q, u*m + v) = <a+_k a+_q a_v a_u>, trace N_s (N_s - 1).
/// rho2_inter(k*mB + q, u*mB + v) = <a+_k a_u b+_q b_v>, trace N_A N_B.
struct ParticleDensities {
    std::array<CMatrix, kSpecies> rho1;
    std::array<CMatrix, kSpecies> rho2;
    CMatrix rho2_inter;
};

namespace detail {

/// Row vector with entry i*M + j equal to eta(i, j).
inline CMatrix flat_row(const CMatrix& eta) {
    CMatrix r(1, eta.size());
    const auto M = eta.rows();
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j < M; ++j) r(0, i * M + j) = eta(i, j);
    return r;
}

/// Reshapes a 1 x m^2 row (k*m + q) into an m x m matrix.
inline CMatrix square(const CMatrix& row, int m) {
    CMatrix out(m, m);
    for (int k = 0; k < m; ++k)
        for (int q = 0; q < m; ++q) out(k, q) = row(0, k * m + q);
    return out;
}

/// W(iA*M + jA, iB*M + jB) = conj(A(iA, iB)) A(jA, jB).
inline CMatrix pair_weights(const CMatrix& top) {
    const auto M = top.rows();
    CMatrix w(M * M, M * M);
    for (Eigen::Index iA = 0; iA < M; ++iA)
        for (Eigen::Index jA = 0; jA < M; ++jA)
            for (Eigen::Index iB = 0; iB < M; ++iB)
                for (Eigen::Index jB = 0; jB < M; ++jB)
                    w(iA * M + jA, iB * M + jB) = std::conj(top(iA, iB)) * top(jA, jB);
    return w;
}

}  // namespace detail

/// Inter-species two-body density from the per-species one-body transitions.
inline CMatrix inter_two_body_density(const CMatrix& top, const CMatrix& d1A, int mA, const CMatrix& d1B,
                                      int mB) {
    const CMatrix z = detail::pair_weights(top) * d1B;  // (iA jA) x (q v)
    const CMatrix r = d1A.transpose() * z;              // (k u) x (q v)
    CMatrix out(mA * mB, mA * mB);
    for (int k = 0; k < mA; ++k)
        for (int u = 0; u < mA; ++u)
            for (int q = 0; q < mB; ++q)
                for (int v = 0; v < mB; ++v) out(k * mB + q, u * mB + v) = r(k * mA + u, q * mB + v);
    return out;
}

inline ParticleDensities particle_densities(const SpeciesDensities& eta,
                                            const std::array<TransitionTensors, kSpecies>& t) {
    ParticleDensities p;
    const auto M = eta.top.rows();
    for (int s = 0; s < kSpecies; ++s) {
        const auto& ts = t[static_cast<std::size_t>(s)];
        if (ts.sbs != M || ts.d1.rows() != M * M)
            throw std::invalid_argument("particle_densities: transition tensors do not match M");
        const int m = ts.orbitals;
        const CMatrix w = detail::flat_row(eta.eta[static_cast<std::size_t>(s)]);
        p.rho1[static_cast<std::size_t>(s)] = detail::square(w * ts.d1, m);
        const auto mm = static_cast<Eigen::Index>(m) * m;
        CMatrix r2 = CMatrix::Zero(mm, mm);
        if (ts.d2.size() != 0) {
            const CMatrix flat = w * ts.d2;
            for (int k = 0; k < m; ++k)
                for (int q = 0; q < m; ++q)
                    for (int u = 0; u < m; ++u)
                        for (int v = 0; v < m; ++v)
                            r2(k * m + q, u * m + v) = flat(0, ((k * m + q) * m + v) * m + u);
        }
        p.rho2[static_cast<std::size_t>(s)] = r2;
    }
    p.rho2_inter = inter_two_body_density(eta.top, t[kA].d1, t[kA].orbitals, t[kB].d1, t[kB].orbitals);
    return p;
}

/// One- and two-body integrals over the current orbitals.
///   h[s](r, s')                 = <phi_r| h |phi_s'>
///   v[s](r*m + s', u*m + v')    = <phi_r phi_s'| v |phi_u phi_v'>
///   w(r*mB + u, s*mB + v)       = <phi^A_r phi^B_u| w |phi^A_s phi^B_v>
struct OrbitalIntegrals {
    std::array<CMatrix, kSpecies> h;
    std::array<CMatrix, kSpecies> v;
    CMatrix w;
};

namespace detail {

/// Pair products P(x, q*m + l) = conj(phi_q(x)) phi_l(x), one column per pair.
inline CMatrix pair_products(const CMatrix& left, const CMatrix& right) {
    const auto G = left.cols();
    const auto ml = left.rows(), mr = right.rows();
    CMatrix out(G, ml * mr);
    for (Eigen::Index q = 0; q < ml; ++q)
        for (Eigen::Index l = 0; l < mr; ++l)
            out.col(q * mr + l) = (left.row(q).conjugate().array() * right.row(l).array()).transpose();
    return out;
}

}  // namespace detail

inline OrbitalIntegrals orbital_integrals(const Model& model, const std::array<CMatrix, kSpecies>& orbitals) {
    const Grid& grid = model.grid();
    const double dx = grid.spacing;
    OrbitalIntegrals ints;
    std::array<CMatrix, kSpecies> pairs;
    for (int s = 0; s < kSpecies; ++s) {
        const auto& phi = orbitals[static_cast<std::size_t>(s)];
        const CMatrix hphi = model.one_body(s).apply_rows(phi);
        ints.h[static_cast<std::size_t>(s)] = dx * (phi.conjugate() * hphi.transpose());
        pairs[static_cast<std::size_t>(s)] = detail::pair_products(phi, phi);
        const CMatrix mf = model.intra(s).fold(grid, pairs[static_cast<std::size_t>(s)]);  // [v]^s_v(x)
        const int m = static_cast<int>(phi.rows());
        const CMatrix raw = dx * (pairs[static_cast<std::size_t>(s)].transpose() * mf);  // (r u) x (s v)
        CMatrix v(m * m, m * m);
        for (int r = 0; r < m; ++r)
            for (int u = 0; u < m; ++u)
                for (int s2 = 0; s2 < m; ++s2)
                    for (int vv = 0; vv < m; ++vv) v(r * m + s2, u * m + vv) = raw(r * m + u, s2 * m + vv);
        ints.v[static_cast<std::size_t>(s)] = v;
    }
    const CMatrix wB = model.inter().fold(grid, pairs[kB]);  // [w_{A|B}]^u_v(x)
    ints.w = dx * (pairs[kA].transpose() * wB);                // (r s) x (u v)
    const int mA = static_cast<int>(orbitals[kA].rows()), mB = static_cast<int>(orbitals[kB].rows());
    CMatrix w(mA * mB, mA * mB);
    for (int r = 0; r < mA; ++r)
        for (int s = 0; s < mA; ++s)
            for (int u = 0; u < mB; ++u)
                for (int v = 0; v < mB; ++v) w(r * mB + u, s * mB + v) = ints.w(r * mA + s, u * mB + v);
    ints.w = w;
    return ints;
}

/// <Psi|H|Psi> from reduced density matrices and orbital integrals.
inline double energy_from_densities(const ParticleDensities& p, const OrbitalIntegrals& ints) {
    cplx e = 0.0;
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        e += (p.rho1[i].array() * ints.h[i].array()).sum();
        // v(kq, uv) pairs with <a+_k a+_q a_v a_u> = rho2(kq, uv)
        e += 0.5 * (p.rho2[i].array() * ints.v[i].array()).sum();
    }
    // w(r*mB + u, s*mB + v) pairs with <a+_r a_s b+_u b_v> = rho2_inter(r*mB + u, s*mB + v)
    e += (p.rho2_inter.array() * ints.w.array()).sum();
    return e.real();
}

/// Mean-field operator matrices.
///   species[A][i*M + j] : m_A x m_A coefficient matrix of <psi^B_i| W_AB |psi^B_j>
///   species[B][i*M + j] : m_B x m_B coefficient matrix of <psi^A_i| W_AB |psi^A_j>
///   intra[s]            : [v_s]^q_l(x), row q*m + l
///   inter[A]            : [w_{A|B}]^q_l(x) (pairs of B orbitals), row q*mB + l
///   inter[B]            : [w_{B|A}]^q_l(x) (pairs of A orbitals), row q*mA + l
struct MeanFieldSet {
    std::array<std::vector<CMatrix>, kSpecies> species;
    std::array<CMatrix, kSpecies> intra;
    std::array<CMatrix, kSpecies> inter;
};

inline MeanFieldSet mean_field_set(const Model& model, const std::array<CMatrix, kSpecies>& orbitals,
                                   const std::array<TransitionTensors, kSpecies>& t) {
    const Grid& grid = model.grid();
    MeanFieldSet mf;
    std::array<CMatrix, kSpecies> pairs;
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        if (orbitals[i].cols() != static_cast<Eigen::Index>(grid.point_count))
            throw std::invalid_argument("mean_field_set: orbital length does not match grid");
        pairs[i] = detail::pair_products(orbitals[i], orbitals[i]);
        mf.intra[i] = model.intra(s).fold(grid, pairs[i]).transpose();
    }
    mf.inter[kA] = model.inter().fold(grid, pairs[kB]).transpose();
    mf.inter[kB] = model.inter().fold(grid, pairs[kA]).transpose();

    const OrbitalIntegrals ints = orbital_integrals(model, orbitals);
    const int mA = static_cast<int>(orbitals[kA].rows()), mB = static_cast<int>(orbitals[kB].rows());
    const int M = t[kA].sbs;
    if (t[kB].sbs != M || t[kA].orbitals != mA || t[kB].orbitals != mB)
        throw std::invalid_argument("mean_field_set: transition tensors do not match orbitals");
    mf.species[kA].assign(static_cast<std::size_t>(M * M), CMatrix::Zero(mA, mA));
    mf.species[kB].assign(static_cast<std::size_t>(M * M), CMatrix::Zero(mB, mB));
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < M; ++j) {
            auto& wa = mf.species[kA][static_cast<std::size_t>(i * M + j)];
            auto& wb = mf.species[kB][static_cast<std::size_t>(i * M + j)];
            for (int r = 0; r < mA; ++r)
                for (int s = 0; s < mA; ++s)
                    for (int u = 0; u < mB; ++u)
                        for (int v = 0; v < mB; ++v) {
                            const cplx w = ints.w(r * mB + u, s * mB + v);
                            wa(r, s) += w * t[kB].one(i, j, u, v);
                            wb(u, v) += w * t[kA].one(i, j, r, s);
                        }
        }
    }
    return mf;
}

/// H(iA*M + iB, jA*M + jB) = <psi^A_iA psi^B_iB| H |psi^A_jA psi^B_jB>.
using HamiltonianMatrixSBS = CMatrix;

/// Intra-species block <psi_i| H_s + V_s |psi_j> from d1 and d2.
inline CMatrix intra_species_matrix(const TransitionTensors& t, const CMatrix& h, const CMatrix& v) {
    const int M = t.sbs, m = t.orbitals;
    CMatrix out = CMatrix::Zero(M, M);
    // d1 columns are (r*m + s): contract with h(r, s)
    CMatrix hflat(m * m, 1);
    for (int r = 0; r < m; ++r)
        for (int s = 0; s < m; ++s) hflat(r * m + s, 0) = h(r, s);
    const CMatrix one = t.d1 * hflat;
    CMatrix two = CMatrix::Zero(M * M, 1);
    if (t.d2.size() != 0) {
        // 1/2 sum v^{rs}_{uv} <a+_r a+_s a_v a_u>: d2 column ((r*m + s)*m + v)*m + u
        CMatrix vflat(static_cast<Eigen::Index>(m) * m * m * m, 1);
        for (int r = 0; r < m; ++r)
            for (int s = 0; s < m; ++s)
                for (int u = 0; u < m; ++u)
                    for (int vv = 0; vv < m; ++vv) vflat(((r * m + s) * m + vv) * m + u, 0) = v(r * m + s, u * m + vv);
        two = 0.5 * (t.d2 * vflat);
    }
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) out(i, j) = one(i * M + j, 0) + two(i * M + j, 0);
    return out;
}

inline HamiltonianMatrixSBS hamiltonian_matrix(const Model& model, const std::array<CMatrix, kSpecies>& orbitals,
                                               const std::array<TransitionTensors, kSpecies>& t) {
    const OrbitalIntegrals ints = orbital_integrals(model, orbitals);
    const int M = t[kA].sbs;
    const int mA = t[kA].orbitals, mB = t[kB].orbitals;
    const CMatrix hA = intra_species_matrix(t[kA], ints.h[kA], ints.v[kA]);
    const CMatrix hB = intra_species_matrix(t[kB], ints.h[kB], ints.v[kB]);
    // inter: sum w(r u, s v) d1A(iA jA, r s) d1B(iB jB, u v)
    CMatrix wrs(mA * mA, mB * mB);
    for (int r = 0; r < mA; ++r)
        for (int s = 0; s < mA; ++s)
            for (int u = 0; u < mB; ++u)
                for (int v = 0; v < mB; ++v) wrs(r * mA + s, u * mB + v) = ints.w(r * mB + u, s * mB + v);
    const CMatrix inter = t[kA].d1 * wrs * t[kB].d1.transpose();  // (iA jA) x (iB jB)
    HamiltonianMatrixSBS h = CMatrix::Zero(M * M, M * M);
    for (int iA = 0; iA < M; ++iA)
        for (int iB = 0; iB < M; ++iB)
            for (int jA = 0; jA < M; ++jA)
                for (int jB = 0; jB < M; ++jB) {
                    cplx val = inter(iA * M + jA, iB * M + jB);
                    if (iB == jB) val += hA(iA, jA);
                    if (iA == jA) val += hB(iB, jB);
                    h(iA * M + iB, jA * M + jB) = val;
                }
    return h;
}

/// Row-major flattening of A: entry iA*M + iB.
inline CVector flatten_top(const CMatrix& top) {
    const auto M = top.rows();
    CVector v(M * M);
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j < M; ++j) v(i * M + j) = top(i, j);
    return v;
}

inline CMatrix unflatten_top(const CVector& v, Eigen::Index M) {
    CMatrix top(M, M);
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j < M; ++j) top(i, j) = v(i * M + j);
    return top;
}

}  // namespace mlx
