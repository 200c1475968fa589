#pragma once

// Occupation-number bases of one species, second-quantization phase factors
// and reduced one-/two-body transition matrices between species basis states.
//
// Fermionic convention: |n> = (a+_1)^{n_1} (a+_2)^{n_2} ... |vac>, i.e. creation
// operators ordered by ascending orbital index. Every sign below follows from it.

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlx/grid.hpp"

namespace mlx {

enum class Statistics { boson, fermion };

inline const char* to_string(Statistics s) { return s == Statistics::boson ? "boson" : "fermion"; }

inline Statistics statistics_from_string(const std::string& s) {
    if (s == "boson" || s == "bosonic" || s == "B") return Statistics::boson;
    if (s == "fermion" || s == "fermionic" || s == "F") return Statistics::fermion;
    throw std::invalid_argument("unknown statistics '" + s + "' (expected boson or fermion)");
}

using OccupationVector = std::vector<int>;

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(r);
}

/// Number of number states: C(N+m-1, m-1) for bosons, C(m, N) for fermions.
inline std::size_t basis_size(Statistics s, int particles, int orbitals) {
    if (particles == 0) return 1;
    return static_cast<std::size_t>(s == Statistics::boson
                                        ? binomial(particles + orbitals - 1, orbitals - 1)
                                        : binomial(orbitals, particles));
}

/// Enumerated occupation vectors in lexicographically descending order.
class FockBasis {
public:
    FockBasis() = default;
    FockBasis(Statistics stats, int particles, int orbitals) : stats_(stats), n_(particles), m_(orbitals) {
        if (particles < 0 || orbitals < 1)
            throw std::invalid_argument("FockBasis: need N >= 0 and m >= 1");
        if (stats == Statistics::fermion && orbitals < particles)
            throw std::invalid_argument("FockBasis: " + std::to_string(particles) +
                                        " fermions do not fit into " + std::to_string(orbitals) +
                                        " orbitals");
        OccupationVector cur(static_cast<std::size_t>(orbitals), 0);
        fill(cur, 0, particles);
        for (std::size_t i = 0; i < states_.size(); ++i) index_.emplace(states_[i], i);
    }

    Statistics statistics() const { return stats_; }
    int particles() const { return n_; }
    int orbitals() const { return m_; }
    std::size_t size() const { return states_.size(); }
    const OccupationVector& operator[](std::size_t i) const { return states_[i]; }
    const std::vector<OccupationVector>& states() const { return states_; }

    /// Index of an occupation vector, or -1 if it is not part of the basis.
    std::int64_t find(const OccupationVector& n) const {
        auto it = index_.find(n);
        return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
    }

    std::size_t index(const OccupationVector& n) const {
        auto i = find(n);
        if (i < 0) throw std::out_of_range("FockBasis: occupation vector not in basis");
        return static_cast<std::size_t>(i);
    }

private:
    void fill(OccupationVector& cur, int pos, int left) {
        if (pos == m_ - 1) {
            if (stats_ == Statistics::fermion && left > 1) return;
            cur[static_cast<std::size_t>(pos)] = left;
            states_.push_back(cur);
            return;
        }
        const int hi = stats_ == Statistics::fermion ? std::min(left, 1) : left;
        for (int k = hi; k >= 0; --k) {
            if (stats_ == Statistics::fermion && left - k > m_ - pos - 1) continue;
            cur[static_cast<std::size_t>(pos)] = k;
            fill(cur, pos + 1, left - k);
        }
        cur[static_cast<std::size_t>(pos)] = 0;
    }

    Statistics stats_ = Statistics::boson;
    int n_ = 0;
    int m_ = 0;
    std::vector<OccupationVector> states_;
    std::map<OccupationVector, std::size_t> index_;
};

/// Public entry point: N >= 1 and, for fermions, m >= N.
inline FockBasis enumerate_basis(Statistics stats, int particles, int orbitals) {
    if (particles < 1) throw std::invalid_argument("enumerate_basis: need at least one particle");
    return FockBasis(stats, particles, orbitals);
}

namespace detail {

inline void check_orbital(const OccupationVector& n, int k, const char* who) {
    if (k < 0 || k >= static_cast<int>(n.size()))
        throw std::out_of_range(std::string(who) + ": orbital index " + std::to_string(k) +
                                " outside 0.." + std::to_string(static_cast<int>(n.size()) - 1));
}

inline int occupied_between(const OccupationVector& n, int k, int q) {
    const int lo = std::min(k, q), hi = std::max(k, q);
    int d = 0;
    for (int a = lo + 1; a < hi; ++a) d += n[static_cast<std::size_t>(a)];
    return d;
}

}  // namespace detail

/// Q_n(k, q) for an (N-1)-particle vector n. Orbital indices are 0-based.
inline double phase_Q(const OccupationVector& n, int k, int q, Statistics stats) {
    detail::check_orbital(n, k, "phase_Q");
    detail::check_orbital(n, q, "phase_Q");
    if (stats == Statistics::boson)
        return std::sqrt(static_cast<double>((n[static_cast<std::size_t>(k)] + 1) *
                                             (n[static_cast<std::size_t>(q)] + 1)));
    return (detail::occupied_between(n, k, q) % 2 == 0) ? 1.0 : -1.0;
}

/// P_n(k, q) for an (N-2)-particle vector n. Orbital indices are 0-based.
inline double phase_P(const OccupationVector& n, int k, int q, Statistics stats) {
    detail::check_orbital(n, k, "phase_P");
    detail::check_orbital(n, q, "phase_P");
    if (stats == Statistics::boson) {
        const int dk = (k == q) ? 1 : 0;
        return std::sqrt(static_cast<double>((n[static_cast<std::size_t>(k)] + 1 + dk) *
                                             (n[static_cast<std::size_t>(q)] + 1)));
    }
    if (k == q) return 0.0;
    const int e = detail::occupied_between(n, k, q) + (k > q ? 1 : 0);
    return (e % 2 == 0) ? 1.0 : -1.0;
}

/// Sparse form of every one-body excitation a+_r a_s on a basis:
/// <target| a+_r a_s |source> = factor, assembled from Q over (N-1)-particle vectors.
struct OneBodyTable {
    struct Entry {
        std::uint32_t target;
        std::uint32_t source;
        std::uint16_t r;
        std::uint16_t s;
        double factor;
    };
    int orbitals = 0;
    std::size_t dim = 0;
    std::vector<Entry> entries;
};

inline OneBodyTable build_one_body_table(const FockBasis& basis) {
    OneBodyTable t;
    t.orbitals = basis.orbitals();
    t.dim = basis.size();
    const int n = basis.particles();
    if (n < 1) return t;
    const FockBasis reduced(basis.statistics(), n - 1, basis.orbitals());
    const int m = basis.orbitals();
    for (const auto& occ : reduced.states()) {
        for (int r = 0; r < m; ++r) {
            OccupationVector tr = occ;
            ++tr[static_cast<std::size_t>(r)];
            const auto ti = basis.find(tr);
            if (ti < 0) continue;
            for (int s = 0; s < m; ++s) {
                OccupationVector sr = occ;
                ++sr[static_cast<std::size_t>(s)];
                const auto si = basis.find(sr);
                if (si < 0) continue;
                t.entries.push_back({static_cast<std::uint32_t>(ti), static_cast<std::uint32_t>(si),
                                     static_cast<std::uint16_t>(r), static_cast<std::uint16_t>(s),
                                     phase_Q(occ, r, s, basis.statistics())});
            }
        }
    }
    return t;
}

/// Sparse pair-removal structure over (N-2)-particle vectors n: for each n the
/// list of ordered pairs (k, q) with the index of |n + k + q> and P_n(k, q).
struct TwoBodyTable {
    struct Pair {
        std::uint32_t state;
        std::uint16_t k;
        std::uint16_t q;
        double factor;
    };
    int orbitals = 0;
    std::size_t dim = 0;
    std::vector<std::size_t> offsets;  // group g spans pairs[offsets[g], offsets[g+1])
    std::vector<Pair> pairs;

    std::size_t groups() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

inline TwoBodyTable build_two_body_table(const FockBasis& basis) {
    TwoBodyTable t;
    t.orbitals = basis.orbitals();
    t.dim = basis.size();
    t.offsets.push_back(0);
    const int n = basis.particles();
    if (n < 2) return t;
    const FockBasis reduced(basis.statistics(), n - 2, basis.orbitals());
    const int m = basis.orbitals();
    for (const auto& occ : reduced.states()) {
        for (int k = 0; k < m; ++k) {
            for (int q = 0; q < m; ++q) {
                const double p = phase_P(occ, k, q, basis.statistics());
                if (p == 0.0) continue;
                OccupationVector up = occ;
                ++up[static_cast<std::size_t>(k)];
                ++up[static_cast<std::size_t>(q)];
                const auto idx = basis.find(up);
                if (idx < 0) continue;
                t.pairs.push_back({static_cast<std::uint32_t>(idx), static_cast<std::uint16_t>(k),
                                   static_cast<std::uint16_t>(q), p});
            }
        }
        t.offsets.push_back(t.pairs.size());
    }
    return t;
}

/// Reduced transition matrices between the species basis states (rows of C).
///   d1(i*M + j, k*m + q)              = <psi_i| a+_k a_q |psi_j>
///   d2(i*M + j, ((k*m + q)*m + q')*m + k') = <psi_i| a+_k a+_q a_q' a_k' |psi_j>
/// d2 is only filled when requested.
struct TransitionTensors {
    int sbs = 0;
    int orbitals = 0;
    CMatrix d1;
    CMatrix d2;

    cplx one(int i, int j, int k, int q) const { return d1(i * sbs + j, k * orbitals + q); }
    cplx two(int i, int j, int k, int q, int qp, int kp) const {
        const int m = orbitals;
        return d2(i * sbs + j, ((k * m + q) * m + qp) * m + kp);
    }
};

/// d1 only, from the sparse one-body table. Coefficient rows are SBSs.
inline CMatrix one_body_transitions(const CMatrix& coeffs, const OneBodyTable& table) {
    const auto M = coeffs.rows();
    const int m = table.orbitals;
    CMatrix d1 = CMatrix::Zero(M * M, m * m);
    const CMatrix cc = coeffs.conjugate();
    for (const auto& e : table.entries) {
        cplx* col = d1.col(e.r * m + e.s).data();
        const cplx* left = cc.col(e.target).data();
        const cplx* right = coeffs.col(e.source).data();
        for (Eigen::Index i = 0; i < M; ++i) {
            const cplx li = e.factor * left[i];
            for (Eigen::Index j = 0; j < M; ++j) col[i * M + j] += li * right[j];
        }
    }
    return d1;
}

inline TransitionTensors transition_tensors(const CMatrix& coeffs, const FockBasis& basis,
                                            bool with_two_body = true) {
    if (static_cast<std::size_t>(coeffs.cols()) != basis.size())
        throw std::invalid_argument("transition_tensors: coefficient matrix has " +
                                    std::to_string(coeffs.cols()) + " columns, basis has " +
                                    std::to_string(basis.size()) + " states");
    TransitionTensors t;
    t.sbs = static_cast<int>(coeffs.rows());
    t.orbitals = basis.orbitals();
    t.d1 = one_body_transitions(coeffs, build_one_body_table(basis));
    if (!with_two_body) return t;

    const int M = t.sbs, m = t.orbitals;
    const auto m4 = static_cast<Eigen::Index>(m) * m * m * m;
    t.d2 = CMatrix::Zero(static_cast<Eigen::Index>(M) * M, m4);
    const TwoBodyTable two = build_two_body_table(basis);
    const CMatrix cc = coeffs.conjugate();
    for (std::size_t g = 0; g < two.groups(); ++g) {
        for (std::size_t a = two.offsets[g]; a < two.offsets[g + 1]; ++a) {
            const auto& left = two.pairs[a];  // a+_k a+_q
            for (std::size_t b = two.offsets[g]; b < two.offsets[g + 1]; ++b) {
                const auto& right = two.pairs[b];  // a_q' a_k' with (k', q') = (right.k, right.q)
                const double f = left.factor * right.factor;
                const Eigen::Index col = ((left.k * m + left.q) * m + right.q) * m + right.k;
                for (int i = 0; i < M; ++i)
                    for (int j = 0; j < M; ++j)
                        t.d2(i * M + j, col) += f * cc(i, left.state) * coeffs(j, right.state);
            }
        }
    }
    return t;
}

/// out.col(target) += X(r, s) <target|a+_r a_s|source> in.col(source) for all
/// entries: the one-body operator sum_rs X(r, s) a+_r a_s applied to every row of
/// `in` (rows are states, columns number states).
inline void apply_one_body(const OneBodyTable& table, const CMatrix& x, const CMatrix& in, CMatrix& out) {
    const auto rows = in.rows();
    for (const auto& e : table.entries) {
        const cplx f = x(e.r, e.s) * e.factor;
        if (f == cplx{}) continue;
        cplx* o = out.col(e.target).data();
        const cplx* v = in.col(e.source).data();
        for (Eigen::Index i = 0; i < rows; ++i) o[i] += f * v[i];
    }
}

/// Coupled variant: out.col(target) += blocks[r*m + s] * in.col(source), where
/// blocks[rs](i, j) couples output row i to input row j.
inline void apply_one_body_coupled(const OneBodyTable& table, const std::vector<CMatrix>& blocks,
                                   const CMatrix& in, CMatrix& out) {
    const int m = table.orbitals;
    const auto rows = out.rows(), cols = in.rows();
    for (const auto& e : table.entries) {
        const CMatrix& b = blocks[static_cast<std::size_t>(e.r * m + e.s)];
        cplx* o = out.col(e.target).data();
        const cplx* v = in.col(e.source).data();
        for (Eigen::Index j = 0; j < cols; ++j) {
            const cplx vj = e.factor * v[j];
            const cplx* bj = b.col(j).data();
            for (Eigen::Index i = 0; i < rows; ++i) o[i] += bj[i] * vj;
        }
    }
}

/// Applies (1/2) sum v(rs, uv) a+_r a+_s a_v a_u to every row of `in`, with v
/// given as an m^2 x m^2 matrix indexed (r*m + s, u*m + v).
inline void apply_two_body(const TwoBodyTable& table, const CMatrix& v, const CMatrix& in, CMatrix& out) {
    const int m = table.orbitals;
    const auto rows = in.rows();
    CMatrix gathered = CMatrix::Zero(m * m, rows);
    CMatrix scattered(m * m, rows);
    for (std::size_t g = 0; g < table.groups(); ++g) {
        gathered.setZero();
        for (std::size_t a = table.offsets[g]; a < table.offsets[g + 1]; ++a) {
            const auto& p = table.pairs[a];
            gathered.row(p.k * m + p.q) = p.factor * in.col(p.state).transpose();
        }
        scattered.noalias() = v * gathered;
        for (std::size_t a = table.offsets[g]; a < table.offsets[g + 1]; ++a) {
            const auto& p = table.pairs[a];
            out.col(p.state) += (0.5 * p.factor) * scattered.row(p.k * m + p.q).transpose();
        }
    }
}

/// rho2(k*m + q, u*m + v) = sum_ij eta(i, j) <psi_i| a+_k a+_q a_v a_u |psi_j>,
/// the two-body density contracted directly from the pair table.
inline CMatrix contract_two_body(const TwoBodyTable& table, const CMatrix& eta, const CMatrix& coeffs) {
    const int m = table.orbitals;
    const auto M = coeffs.rows();
    const auto mm = static_cast<Eigen::Index>(m) * m;
    CMatrix rho2 = CMatrix::Zero(mm, mm);
    CMatrix t = CMatrix::Zero(M, mm);
    for (std::size_t g = 0; g < table.groups(); ++g) {
        t.setZero();
        for (std::size_t a = table.offsets[g]; a < table.offsets[g + 1]; ++a) {
            const auto& p = table.pairs[a];
            t.col(p.k * m + p.q) = p.factor * coeffs.col(p.state);
        }
        // sum_ij eta_ij conj(t_i)[kq] t_j[uv]
        rho2.noalias() += t.adjoint() * (eta * t);
    }
    return rho2;
}

}  // namespace mlx
