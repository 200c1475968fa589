#pragma once

// The three coupled equations of motion. Each layer's generator F is defined by
// i dy/dt = F; real time uses dy/dt = -iF, imaginary time dy/dtau = -F.
//
// Inter-species terms go through transition densities
//   rho^s_{ij}(x) = <psi_i| Psi+(x) Psi(x) |psi_j> = sum_rv d1^s[ij][rv] conj(phi_r(x)) phi_v(x)
// and their folded potentials U^s_{ij} = w * rho^s_{ij}, which avoids the
// four-index inter-species integrals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mlx/fock.hpp"
#include "mlx/linalg.hpp"
#include "mlx/system.hpp"
#include "mlx/tensors.hpp"

namespace mlx {

/// Basis-dependent intermediates: functions of C and phi only.
struct LayerData {
    std::array<CMatrix, kSpecies> d1;             // M^2 x m^2
    std::array<CMatrix, kSpecies> pairs;          // G x m^2, conj(phi_r) phi_v
    std::array<CMatrix, kSpecies> density;        // G x M^2, rho_{ij}(x)
    std::array<CMatrix, kSpecies> potential;      // G x M^2, inter kernel folded with density
    std::array<CMatrix, kSpecies> intra_field;    // G x m^2, [v]^q_l(x); empty without intra terms
    std::array<CMatrix, kSpecies> h;              // m x m
    std::array<CMatrix, kSpecies> v;              // m^2 x m^2; empty without intra terms
    std::array<CMatrix, kSpecies> hc;             // M x K, (H_s + V_s) applied to every SBS
    std::array<CMatrix, kSpecies> intra_block;    // M x M
    CMatrix hamiltonian;                          // M^2 x M^2
};

struct RhsDiagnostics {
    std::array<double, kSpecies> min_eta{1.0, 1.0};
    std::array<double, kSpecies> min_rho{1.0, 1.0};
    std::size_t regularized_inversions = 0;
};

inline bool has_intra_terms(const Model& model, int s) {
    return !model.intra(s).is_zero() && model.particles(s) >= 2;
}

inline LayerData build_layer_data(const Model& model, const MixtureState& st) {
    const Grid& grid = model.grid();
    const double dx = grid.spacing;
    const int M = model.sbs();
    LayerData L;
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        const auto& tabs = model.tables(s);
        const CMatrix& phi = st.orbitals[i];
        const CMatrix& c = st.coeffs[i];
        const int m = model.orbitals(s);
        L.d1[i] = one_body_transitions(c, tabs.one);
        L.pairs[i] = detail::pair_products(phi, phi);
        L.density[i].noalias() = L.pairs[i] * L.d1[i].transpose();
        L.potential[i] = model.inter().fold(grid, L.density[i]);
        const CMatrix hphi = model.one_body(s).apply_rows(phi);
        L.h[i] = dx * (phi.conjugate() * hphi.transpose());
        L.hc[i] = CMatrix::Zero(c.rows(), c.cols());
        apply_one_body(tabs.one, L.h[i], c, L.hc[i]);
        if (has_intra_terms(model, s)) {
            L.intra_field[i] = model.intra(s).fold(grid, L.pairs[i]);
            const CMatrix raw = dx * (L.pairs[i].transpose() * L.intra_field[i]);  // (r u) x (s v)
            CMatrix v(m * m, m * m);
            for (int r = 0; r < m; ++r)
                for (int u = 0; u < m; ++u)
                    for (int s2 = 0; s2 < m; ++s2)
                        for (int w = 0; w < m; ++w) v(r * m + s2, u * m + w) = raw(r * m + u, s2 * m + w);
            L.v[i] = std::move(v);
            apply_two_body(tabs.two, L.v[i], c, L.hc[i]);
        }
        L.intra_block[i] = c.conjugate() * L.hc[i].transpose();
    }
    const CMatrix inter = dx * (L.density[kA].transpose() * L.potential[kB]);  // (iA jA) x (iB jB)
    L.hamiltonian.resize(M * M, M * M);
    for (int iA = 0; iA < M; ++iA)
        for (int iB = 0; iB < M; ++iB)
            for (int jA = 0; jA < M; ++jA)
                for (int jB = 0; jB < M; ++jB) {
                    cplx val = inter(iA * M + jA, iB * M + jB);
                    if (iB == jB) val += L.intra_block[kA](iA, jA);
                    if (iA == jA) val += L.intra_block[kB](iB, jB);
                    L.hamiltonian(iA * M + iB, jA * M + jB) = val;
                }
    return L;
}

/// i dA/dt = H_SBS A (A flattened row-major).
inline CMatrix top_generator(const CMatrix& top, const CMatrix& h_sbs) {
    return unflatten_top(h_sbs * flatten_top(top), top.rows());
}

/// dA/dt = -i H_SBS A.
inline CMatrix rhs_top(const CMatrix& top, const CMatrix& h_sbs) {
    return cplx(0.0, -1.0) * top_generator(top, h_sbs);
}

namespace detail {

inline CMatrix normalized_top(const CMatrix& top) {
    const double n = top.norm();
    if (!(n > 0.0)) throw std::invalid_argument("top-layer coefficients vanish");
    return top / n;
}

inline CMatrix species_eta(const CMatrix& a, int s) {
    return s == kA ? CMatrix(a.conjugate() * a.transpose()) : CMatrix(a.adjoint() * a);
}

inline void note(RhsDiagnostics* d, const RegularizedInverse& r, bool species, int s) {
    if (!d) return;
    auto& slot = species ? d->min_eta[static_cast<std::size_t>(s)] : d->min_rho[static_cast<std::size_t>(s)];
    slot = std::min(slot, r.min_eigenvalue);
    if (r.regularized) ++d->regularized_inversions;
}

}  // namespace detail

/// Species-layer generator: (1 - P1)[(H_s + V_s) psi_l + sum_j O^{lj} psi_j].
inline CMatrix species_generator(const Model& model, int s, const MixtureState& st, const LayerData& L,
                                 const RegularizationPolicy& policy, RhsDiagnostics* diag = nullptr) {
    const auto i = static_cast<std::size_t>(s);
    const CMatrix& c = st.coeffs[i];
    if (model.species_layer_complete(s)) return CMatrix::Zero(c.rows(), c.cols());
    CMatrix y = L.hc[i];
    if (!model.inter().is_zero()) {
        const int M = model.sbs();
        const int m = model.orbitals(s);
        const int other = s == kA ? kB : kA;
        const CMatrix a = detail::normalized_top(st.top);
        const CMatrix wmat = model.grid().spacing *
                             (L.pairs[i].transpose() * L.potential[static_cast<std::size_t>(other)]);  // (rs) x (bc)
        const CMatrix pw = s == kA ? detail::pair_weights(a) : detail::pair_weights(a.transpose());
        const CMatrix q = pw * wmat.transpose();  // (i j) x (r s)
        const RegularizedInverse inv = regularized_inverse(detail::species_eta(a, s), policy);
        detail::note(diag, inv, true, s);
        std::vector<CMatrix> blocks(static_cast<std::size_t>(m * m));
        CMatrix qrs(M, M);
        for (int rs = 0; rs < m * m; ++rs) {
            for (int a1 = 0; a1 < M; ++a1)
                for (int b1 = 0; b1 < M; ++b1) qrs(a1, b1) = q(a1 * M + b1, rs);
            blocks[static_cast<std::size_t>(rs)] = inv.inverse * qrs;
        }
        apply_one_body_coupled(model.tables(s).one, blocks, c, y);
    }
    y -= (y * c.adjoint()) * c;
    return y;
}

/// dC_s/dt = -i (species generator).
inline CMatrix rhs_species(const Model& model, int s, const MixtureState& st, const LayerData& L,
                           const RegularizationPolicy& policy, RhsDiagnostics* diag = nullptr) {
    return cplx(0.0, -1.0) * species_generator(model, s, st, L, policy, diag);
}

/// Particle-layer generator:
/// (1 - P2)[h phi_j + sum_k rhoinv(j, k) sum_{qsl} (rho2(kq, sl) [v]^q_l + rho2inter [w]^q_l) phi_s].
inline CMatrix orbital_generator(const Model& model, int s, const MixtureState& st, const LayerData& L,
                                 const RegularizationPolicy& policy, RhsDiagnostics* diag = nullptr) {
    const auto i = static_cast<std::size_t>(s);
    const CMatrix& phi = st.orbitals[i];
    if (model.particle_layer_complete(s)) return CMatrix::Zero(phi.rows(), phi.cols());
    const int m = model.orbitals(s);
    const double dx = model.grid().spacing;
    const CMatrix a = detail::normalized_top(st.top);
    const CMatrix eta = detail::species_eta(a, s);
    CMatrix f = model.one_body(s).apply_rows(phi);

    CMatrix extra = CMatrix::Zero(m, phi.cols());
    bool any = false;
    auto accumulate = [&](const CMatrix& t) {  // t(x, k*m + s')
        for (int k = 0; k < m; ++k)
            for (int s2 = 0; s2 < m; ++s2)
                extra.row(k).array() += t.col(k * m + s2).transpose().array() * phi.row(s2).array();
        any = true;
    };
    if (has_intra_terms(model, s)) {
        const CMatrix rho2 = contract_two_body(model.tables(s).two, eta, st.coeffs[i]);
        CMatrix r2(m * m, m * m);  // (k s) x (q l)
        for (int k = 0; k < m; ++k)
            for (int q = 0; q < m; ++q)
                for (int s2 = 0; s2 < m; ++s2)
                    for (int l = 0; l < m; ++l) r2(k * m + s2, q * m + l) = rho2(k * m + q, s2 * m + l);
        accumulate(L.intra_field[i] * r2.transpose());
    }
    if (!model.inter().is_zero()) {
        const CMatrix pw = detail::pair_weights(a);  // (iA jA) x (iB jB)
        const CMatrix z = s == kA ? CMatrix(L.potential[kB] * pw.transpose()) : CMatrix(L.potential[kA] * pw);
        accumulate(z * L.d1[i]);
    }
    if (any) {
        const CMatrix rho1 = detail::square(detail::flat_row(eta) * L.d1[i], m);
        const RegularizedInverse inv = regularized_inverse(rho1, policy);
        detail::note(diag, inv, false, s);
        f.noalias() += inv.inverse * extra;
    }
    f -= (dx * (f * phi.adjoint())) * phi;
    return f;
}

/// dphi_s/dt = -i (orbital generator).
inline CMatrix rhs_orbitals(const Model& model, int s, const MixtureState& st, const LayerData& L,
                            const RegularizationPolicy& policy, RhsDiagnostics* diag = nullptr) {
    return cplx(0.0, -1.0) * orbital_generator(model, s, st, L, policy, diag);
}

/// Evaluates generators and energies, reusing the layer data while C and phi
/// stay bitwise unchanged.
class Evaluator {
public:
    explicit Evaluator(const Model& model, RegularizationPolicy policy = {}) : model_(&model), policy_(policy) {}

    const Model& model() const { return *model_; }
    const RegularizationPolicy& policy() const { return policy_; }
    RhsDiagnostics& diagnostics() { return diag_; }
    std::size_t rebuilds() const { return rebuilds_; }

    const LayerData& layers(const MixtureState& st) {
        if (!cached_ || !same(st)) {
            data_ = build_layer_data(*model_, st);
            key_coeffs_ = st.coeffs;
            key_orbitals_ = st.orbitals;
            cached_ = true;
            ++rebuilds_;
        }
        return data_;
    }

    const CMatrix& hamiltonian(const MixtureState& st) { return layers(st).hamiltonian; }

    /// <Psi|H|Psi> / <Psi|Psi>.
    double energy(const MixtureState& st) {
        const CVector a = flatten_top(st.top);
        const cplx e = a.dot(hamiltonian(st) * a);
        return e.real() / a.squaredNorm();
    }

    /// Generator F of every layer, packed like MixtureState::pack.
    MixtureState generator(const MixtureState& st) {
        const LayerData& L = layers(st);
        MixtureState f;
        f.time = st.time;
        f.top = top_generator(st.top, L.hamiltonian);
        for (int s = 0; s < kSpecies; ++s) {
            const auto i = static_cast<std::size_t>(s);
            f.coeffs[i] = species_generator(*model_, s, st, L, policy_, &diag_);
            f.orbitals[i] = orbital_generator(*model_, s, st, L, policy_, &diag_);
        }
        return f;
    }

private:
    static bool equal(const CMatrix& a, const CMatrix& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() &&
               std::memcmp(a.data(), b.data(), sizeof(cplx) * static_cast<std::size_t>(a.size())) == 0;
    }
    bool same(const MixtureState& st) const {
        for (std::size_t i = 0; i < kSpecies; ++i)
            if (!equal(st.coeffs[i], key_coeffs_[i]) || !equal(st.orbitals[i], key_orbitals_[i])) return false;
        return true;
    }

    const Model* model_;
    RegularizationPolicy policy_;
    RhsDiagnostics diag_;
    bool cached_ = false;
    std::size_t rebuilds_ = 0;
    std::array<CMatrix, kSpecies> key_coeffs_;
    std::array<CMatrix, kSpecies> key_orbitals_;
    LayerData data_;
};

/// Total energy via the SBS Hamiltonian matrix.
inline double total_energy(const Model& model, const MixtureState& st) {
    Evaluator ev(model);
    return ev.energy(st);
}

}  // namespace mlx
