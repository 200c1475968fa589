#pragma once

// Observables: one-body densities, natural species / natural orbital spectra,
// Schmidt-resolved densities and the convergence metrics.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mlx/eom.hpp"
#include "mlx/system.hpp"
#include "mlx/tensors.hpp"

namespace mlx {

/// populations descending, summing to one; modes are rows (NSFs in SBS
/// coordinates, NOs as grid functions).
struct SpectralDecomposition {
    RVector populations;
    CMatrix modes;
};

struct DensityRecord {
    double time = 0.0;
    std::array<RVector, kSpecies> density;
    RVector lambdas;                         // Schmidt weights, descending
    std::array<RMatrix, kSpecies> layers;    // row k: lambda_k rho_{1,k}(x)
};

namespace detail {

/// Eigen-decomposition of a Hermitian matrix stored as <a+_k a_q>. The
/// returned modes are the operator eigenvectors (complex conjugates of the
/// eigenvectors of the stored matrix) as rows.
inline SpectralDecomposition descending_spectrum(const CMatrix& stored, double trace, const char* who) {
    if (stored.rows() != stored.cols()) throw std::invalid_argument(std::string(who) + ": matrix not square");
    if (hermiticity_defect(stored) > 1e-8) throw std::invalid_argument(std::string(who) + ": matrix not Hermitian");
    const double tr = stored.trace().real();
    if (std::abs(tr - trace) > 1e-6 * std::max(1.0, trace))
        throw std::invalid_argument(std::string(who) + ": trace " + std::to_string(tr) + " differs from " +
                                    std::to_string(trace));
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (stored + stored.adjoint()) / trace);
    const auto n = stored.rows();
    SpectralDecomposition out;
    out.populations.resize(n);
    out.modes.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.populations(i) = es.eigenvalues()(n - 1 - i);
        out.modes.row(i) = es.eigenvectors().col(n - 1 - i).conjugate().transpose();
    }
    return out;
}

/// Within groups of populations closer than `tie`, reorders modes to follow
/// the previous output (greedy maximal |overlap|). `weight` is the inner
/// product weight of the mode rows.
inline void continuity_order(SpectralDecomposition& d, const CMatrix& previous, double weight, double tie) {
    if (previous.rows() != d.modes.rows() || previous.cols() != d.modes.cols()) return;
    const auto n = d.populations.size();
    Eigen::Index a = 0;
    while (a < n) {
        Eigen::Index b = a + 1;
        while (b < n && std::abs(d.populations(b - 1) - d.populations(b)) < tie) ++b;
        if (b - a > 1) {
            const CMatrix ov = weight * (previous.middleRows(a, b - a).conjugate() *
                                         d.modes.middleRows(a, b - a).transpose());
            std::vector<Eigen::Index> assign(static_cast<std::size_t>(b - a), -1);
            std::vector<bool> used(static_cast<std::size_t>(b - a), false);
            for (Eigen::Index p = 0; p < b - a; ++p) {
                Eigen::Index best = -1;
                double bv = -1.0;
                for (Eigen::Index c = 0; c < b - a; ++c)
                    if (!used[static_cast<std::size_t>(c)] && std::abs(ov(p, c)) > bv) {
                        bv = std::abs(ov(p, c));
                        best = c;
                    }
                used[static_cast<std::size_t>(best)] = true;
                assign[static_cast<std::size_t>(p)] = best;
            }
            const CMatrix rows = d.modes.middleRows(a, b - a);
            const RVector pops = d.populations.segment(a, b - a);
            for (Eigen::Index p = 0; p < b - a; ++p) {
                d.modes.row(a + p) = rows.row(assign[static_cast<std::size_t>(p)]);
                d.populations(a + p) = pops(assign[static_cast<std::size_t>(p)]);
            }
        }
        a = b;
    }
}

}  // namespace detail

/// Natural species functions from eta (unit trace). `previous` enables the
/// continuity tie-break.
inline SpectralDecomposition natural_species(const CMatrix& eta, const CMatrix* previous = nullptr,
                                             double tie = 1e-8) {
    SpectralDecomposition d = detail::descending_spectrum(eta, 1.0, "natural_species");
    if (previous) detail::continuity_order(d, *previous, 1.0, tie);
    return d;
}

/// Natural orbitals from rho1 (trace N) expressed on the grid through the
/// orbital rows. Populations are normalized to unit sum.
inline SpectralDecomposition natural_orbitals(const CMatrix& rho1, const CMatrix& orbitals, int particles,
                                              double dx, const CMatrix* previous = nullptr, double tie = 1e-8) {
    if (orbitals.rows() != rho1.rows()) throw std::invalid_argument("natural_orbitals: orbital count mismatch");
    SpectralDecomposition d = detail::descending_spectrum(rho1, static_cast<double>(particles), "natural_orbitals");
    d.modes = d.modes * orbitals;
    if (previous) detail::continuity_order(d, *previous, dx, tie);
    return d;
}

/// rho(x) = sum_kq rho1(k, q) conj(phi_k(x)) phi_q(x).
inline RVector one_body_density(const CMatrix& rho1, const CMatrix& orbitals) {
    const CMatrix t = rho1.transpose() * orbitals.conjugate();  // (q, x): sum_k rho1(k,q) conj(phi_k)
    return t.cwiseProduct(orbitals).colwise().sum().real().transpose();
}

/// One-body density matrices of both species.
inline std::array<CMatrix, kSpecies> one_body_matrices(const Model& model, const MixtureState& st) {
    const CMatrix a = st.top / st.top.norm();
    const SpeciesDensities eta = species_densities(a);
    std::array<CMatrix, kSpecies> out;
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        const CMatrix d1 = one_body_transitions(st.coeffs[i], model.tables(s).one);
        out[i] = detail::square(detail::flat_row(eta.eta[i]) * d1, model.orbitals(s));
    }
    return out;
}

inline std::array<RVector, kSpecies> densities(const Model& model, const MixtureState& st) {
    const auto rho = one_body_matrices(model, st);
    return {one_body_density(rho[kA], st.orbitals[kA]), one_body_density(rho[kB], st.orbitals[kB])};
}

/// Schmidt decomposition from the SVD of A and the species-resolved densities.
inline DensityRecord schmidt_layers(const Model& model, const MixtureState& st) {
    const CMatrix a = st.top / st.top.norm();
    Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RVector sv = svd.singularValues();
    DensityRecord rec;
    rec.time = st.time;
    rec.lambdas = sv.cwiseAbs2();
    const auto M = a.rows();
    const auto G = static_cast<Eigen::Index>(model.grid().point_count);
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        const int m = model.orbitals(s);
        // rows: Schmidt partners in number-state coordinates
        const CMatrix rows =
            (s == kA ? CMatrix(svd.matrixU().transpose()) : CMatrix(svd.matrixV().adjoint())) * st.coeffs[i];
        const CMatrix d1 = one_body_transitions(rows, model.tables(s).one);
        rec.layers[i] = RMatrix::Zero(M, G);
        for (Eigen::Index k = 0; k < M; ++k) {
            const CMatrix rho = detail::square(d1.row(k * M + k), m);
            rec.layers[i].row(k) = rec.lambdas(k) * one_body_density(rho, st.orbitals[i]).transpose();
        }
        rec.density[i] = rec.layers[i].colwise().sum().transpose();
    }
    return rec;
}

/// (1 / 2N) dx sum_x |rho_C - rho_C'|.
inline double density_difference(const RVector& a, const RVector& b, int particles, double dx) {
    if (a.size() != b.size()) throw std::invalid_argument("density_difference: grid mismatch");
    if (particles < 1 || !(dx > 0.0)) throw std::invalid_argument("density_difference: bad N or dx");
    return dx * (a - b).cwiseAbs().sum() / (2.0 * particles);
}

/// |lambda_C - lambda_C'| / lambda_C' at index i; absent when lambda_C' < 1e-12.
inline std::optional<double> population_difference(const RVector& c, const RVector& cp, Eigen::Index i) {
    if (i < 0 || i >= c.size() || i >= cp.size()) throw std::out_of_range("population_difference: index");
    if (cp(i) < 1e-12) return std::nullopt;
    return std::abs(c(i) - cp(i)) / cp(i);
}

/// 1/N - n_i for unit-sum NO populations.
inline RVector depletion(const RVector& populations, int particles) {
    return RVector::Constant(populations.size(), 1.0 / particles) - populations;
}

/// Everything the output writer records at one output time.
struct Observables {
    double time = 0.0;
    double energy = 0.0;
    double norm = 0.0;
    SpectralDecomposition nsf_A;
    RVector lambda_B;
    std::array<SpectralDecomposition, kSpecies> no;
    DensityRecord record;
};

/// `previous` (optional) carries the last output for continuity ordering.
inline Observables observe(const Model& model, const MixtureState& st, double energy,
                           const Observables* previous = nullptr) {
    Observables o;
    o.time = st.time;
    o.energy = energy;
    o.norm = st.top.squaredNorm();
    const CMatrix a = st.top / st.top.norm();
    const SpeciesDensities eta = species_densities(a);
    o.nsf_A = natural_species(eta.eta[kA], previous ? &previous->nsf_A.modes : nullptr);
    o.lambda_B = natural_species(eta.eta[kB]).populations;
    const auto rho = one_body_matrices(model, st);
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        o.no[i] = natural_orbitals(rho[i], st.orbitals[i], model.particles(s), model.grid().spacing,
                                   previous ? &previous->no[i].modes : nullptr);
    }
    o.record = schmidt_layers(model, st);
    return o;
}

/// Position expectation dx sum_x x rho(x).
inline double position_moment(const Grid& g, const RVector& rho) { return g.spacing * g.points.dot(rho); }

/// Mass-weighted total center of mass sum_s M_s <x>_s / sum_s M_s N_s.
inline double center_of_mass(const Model& model, const std::array<RVector, kSpecies>& rho) {
    double num = 0.0, den = 0.0;
    for (int s = 0; s < kSpecies; ++s) {
        const double mass = model.system().species[static_cast<std::size_t>(s)].mass;
        num += mass * position_moment(model.grid(), rho[static_cast<std::size_t>(s)]);
        den += mass * model.particles(s);
    }
    return num / den;
}

}  // namespace mlx
