#pragma once

// Brute-force second quantization: explicit annihilation matrices built from
// ordered creation strings. Fermion signs come from counting the creators a_k
// has to pass; nothing here uses the closed-form phase factors.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "mlx/fock.hpp"

namespace mlx::oracle {

/// All occupation vectors with the given particle number, in arbitrary order.
class BruteBasis {
public:
    BruteBasis(Statistics stats, int particles, int orbitals) : stats_(stats), m_(orbitals) {
        if (particles < 0) return;
        OccupationVector cur(static_cast<std::size_t>(orbitals), 0);
        grow(cur, 0, particles, stats == Statistics::fermion ? 1 : particles);
    }

    std::size_t size() const { return states_.size(); }
    const OccupationVector& operator[](std::size_t i) const { return states_[i]; }
    long find(const OccupationVector& n) const {
        auto it = index_.find(n);
        return it == index_.end() ? -1 : static_cast<long>(it->second);
    }
    Statistics statistics() const { return stats_; }
    int orbitals() const { return m_; }

private:
    // ascending occupations, the reverse of FockBasis order
    void grow(OccupationVector& cur, int pos, int left, int cap) {
        if (pos == m_) {
            if (left == 0) {
                index_[cur] = states_.size();
                states_.push_back(cur);
            }
            return;
        }
        for (int v = 0; v <= std::min(cap, left); ++v) {
            cur[static_cast<std::size_t>(pos)] = v;
            grow(cur, pos + 1, left - v, cap);
        }
        cur[static_cast<std::size_t>(pos)] = 0;
    }

    Statistics stats_;
    int m_;
    std::vector<OccupationVector> states_;
    std::map<OccupationVector, std::size_t> index_;
};

/// Matrix of a_k from the N-particle space `from` to the (N-1)-particle space `to`.
/// Fermionic |n> = a+_{o1} a+_{o2} ... |0> with o1 < o2 < ...; a_k anticommutes
/// past every creator standing left of a+_k.
inline RMatrix annihilator(const BruteBasis& from, const BruteBasis& to, int k) {
    RMatrix a = RMatrix::Zero(static_cast<Eigen::Index>(to.size()), static_cast<Eigen::Index>(from.size()));
    for (std::size_t j = 0; j < from.size(); ++j) {
        const OccupationVector& n = from[j];
        if (n[static_cast<std::size_t>(k)] == 0) continue;
        OccupationVector out = n;
        --out[static_cast<std::size_t>(k)];
        const long i = to.find(out);
        if (i < 0) throw std::logic_error("annihilator: target state missing");
        double amp;
        if (from.statistics() == Statistics::boson) {
            amp = std::sqrt(static_cast<double>(n[static_cast<std::size_t>(k)]));
        } else {
            std::vector<int> creators;
            for (int o = 0; o < static_cast<int>(n.size()); ++o)
                if (n[static_cast<std::size_t>(o)]) creators.push_back(o);
            int swaps = 0;
            for (int c : creators) {
                if (c == k) break;
                ++swaps;
            }
            amp = swaps % 2 == 0 ? 1.0 : -1.0;
        }
        a(i, static_cast<Eigen::Index>(j)) = amp;
    }
    return a;
}

/// Annihilators on the N-, (N-1)- and (N-2)-particle spaces of one species.
struct OperatorLadder {
    BruteBasis n0, n1, n2;
    std::vector<RMatrix> a0;  // N -> N-1
    std::vector<RMatrix> a1;  // N-1 -> N-2

    OperatorLadder(Statistics stats, int particles, int orbitals)
        : n0(stats, particles, orbitals), n1(stats, particles - 1, orbitals), n2(stats, particles - 2, orbitals) {
        for (int k = 0; k < orbitals; ++k) {
            a0.push_back(annihilator(n0, n1, k));
            if (particles >= 2) a1.push_back(annihilator(n1, n2, k));
        }
    }

    /// a+_k a_q on the N-particle space.
    RMatrix one(int k, int q) const { return a0[static_cast<std::size_t>(k)].transpose() * a0[static_cast<std::size_t>(q)]; }

    /// a+_k a+_q a_q' a_k' on the N-particle space.
    RMatrix two(int k, int q, int qp, int kp) const {
        if (a1.empty()) return RMatrix::Zero(static_cast<Eigen::Index>(n0.size()), static_cast<Eigen::Index>(n0.size()));
        const auto& A0 = a0;
        const auto& A1 = a1;
        return A0[static_cast<std::size_t>(k)].transpose() * A1[static_cast<std::size_t>(q)].transpose() *
               A1[static_cast<std::size_t>(qp)] * A0[static_cast<std::size_t>(kp)];
    }
};

/// Reorders the columns of C (FockBasis order) into the brute-force order.
inline CMatrix to_brute_order(const CMatrix& coeffs, const FockBasis& basis, const BruteBasis& brute) {
    CMatrix out = CMatrix::Zero(coeffs.rows(), static_cast<Eigen::Index>(brute.size()));
    for (std::size_t n = 0; n < basis.size(); ++n) {
        const long b = brute.find(basis[n]);
        if (b < 0) throw std::logic_error("to_brute_order: state missing from brute basis");
        out.col(b) = coeffs.col(static_cast<Eigen::Index>(n));
    }
    return out;
}

/// Dense reference for d1 and d2 with the TransitionTensors layout, from
/// <psi_i| a+_k a_q |psi_j> = (a_k psi_i)^dagger (a_q psi_j) and
/// <psi_i| a+_k a+_q a_q' a_k' |psi_j> = (a_q a_k psi_i)^dagger (a_q' a_k' psi_j).
inline TransitionTensors dense_transition_tensors(const CMatrix& coeffs, const FockBasis& basis,
                                                  bool with_two_body = true) {
    const OperatorLadder lad(basis.statistics(), basis.particles(), basis.orbitals());
    if (lad.n0.size() != basis.size()) throw std::logic_error("dense_transition_tensors: basis size mismatch");
    const CMatrix c = to_brute_order(coeffs, basis, lad.n0).transpose();  // K x M, columns are states
    const int M = static_cast<int>(c.cols()), m = basis.orbitals();
    TransitionTensors t;
    t.sbs = M;
    t.orbitals = m;
    const auto k1 = static_cast<Eigen::Index>(lad.n1.size());
    CMatrix one(k1, m * M);
    for (int k = 0; k < m; ++k) one.middleCols(k * M, M) = lad.a0[static_cast<std::size_t>(k)].cast<cplx>() * c;
    const CMatrix g1 = one.adjoint() * one;  // (k i) x (q j)
    t.d1.resize(M * M, m * m);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            for (int k = 0; k < m; ++k)
                for (int q = 0; q < m; ++q) t.d1(i * M + j, k * m + q) = g1(k * M + i, q * M + j);
    if (!with_two_body) return t;
    const auto mm = static_cast<Eigen::Index>(m) * m;
    t.d2 = CMatrix::Zero(M * M, mm * mm);
    if (lad.a1.empty()) return t;
    const auto k2 = static_cast<Eigen::Index>(lad.n2.size());
    CMatrix two(k2, mm * M);  // column block (k*m + q) holds a_q a_k psi
    for (int k = 0; k < m; ++k)
        for (int q = 0; q < m; ++q)
            two.middleCols((k * m + q) * M, M) =
                lad.a1[static_cast<std::size_t>(q)].cast<cplx>() * one.middleCols(k * M, M);
    const CMatrix g2 = two.adjoint() * two;
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            for (int k = 0; k < m; ++k)
                for (int q = 0; q < m; ++q)
                    for (int qp = 0; qp < m; ++qp)
                        for (int kp = 0; kp < m; ++kp)
                            t.d2(i * M + j, ((k * m + q) * m + qp) * m + kp) =
                                g2((k * m + q) * M + i, (kp * m + qp) * M + j);
    return t;
}

}  // namespace mlx::oracle
