#pragma once

// Coupled Gross-Pitaevskii (bosons, one orbital) / Hartree-Fock (fermions,
// N orbitals) for contact interactions. Ground state by self-consistent
// diagonalization with density mixing; dynamics by a fourth-order
// (Yoshida) composition of Strang split steps with the exact kinetic
// propagator of the grid.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mlx/system.hpp"

namespace mlx::oracle {

struct MeanFieldState {
    std::array<CMatrix, kSpecies> orbitals;  // rows; m = 1 for bosons, N for fermions
};

struct MeanFieldSample {
    double time = 0.0;
    double energy = 0.0;
    std::array<RVector, kSpecies> density;
};

class MeanFieldSolver {
public:
    explicit MeanFieldSolver(System sys) : sys_(std::move(sys)) {
        if (sys_.inter.kind() != InteractionKernel::Kind::contact)
            throw std::invalid_argument("mean_field: contact interactions only");
        for (int s = 0; s < kSpecies; ++s) {
            const auto& p = sys_.species[static_cast<std::size_t>(s)];
            if (p.intra.kind() != InteractionKernel::Kind::contact)
                throw std::invalid_argument("mean_field: contact interactions only");
            Eigen::SelfAdjointEigenSolver<RMatrix> es(kinetic_operator(sys_.grid, p.mass).matrix());
            kin_vectors_[static_cast<std::size_t>(s)] = es.eigenvectors();
            kin_values_[static_cast<std::size_t>(s)] = es.eigenvalues();
        }
    }

    const System& system() const { return sys_; }

    static int orbital_count(const SpeciesParams& p) {
        return p.statistics == Statistics::boson ? 1 : p.particles;
    }

    std::array<RVector, kSpecies> densities(const MeanFieldState& st) const {
        std::array<RVector, kSpecies> out;
        for (int s = 0; s < kSpecies; ++s) {
            const auto i = static_cast<std::size_t>(s);
            const RVector sq = st.orbitals[i].cwiseAbs2().colwise().sum().transpose();
            out[i] = sys_.species[i].statistics == Statistics::boson ? RVector(sys_.species[i].particles * sq) : sq;
        }
        return out;
    }

    /// Local mean-field potential of species s (trap included).
    RVector potential(int s, const std::array<RVector, kSpecies>& rho) const {
        const auto i = static_cast<std::size_t>(s);
        const auto& p = sys_.species[i];
        RVector v = (sys_.grid.points.array() - p.offset).square() * (0.5 * p.mass * p.frequency * p.frequency);
        v += sys_.inter.strength() * rho[1 - i];
        // same-species fermions: contact direct and exchange terms cancel
        if (p.statistics == Statistics::boson && p.particles > 1)
            v += p.intra.strength() * (p.particles - 1.0) / p.particles * rho[i];
        return v;
    }

    double energy(const MeanFieldState& st) const {
        const auto rho = densities(st);
        const double dx = sys_.grid.spacing;
        double e = 0.0;
        for (int s = 0; s < kSpecies; ++s) {
            const auto i = static_cast<std::size_t>(s);
            const auto& p = sys_.species[i];
            const CMatrix& phi = st.orbitals[i];
            const CMatrix hphi = sys_.one_body(s).apply_rows(phi);
            const double occ = p.statistics == Statistics::boson ? p.particles : 1.0;
            e += occ * dx * (phi.conjugate().cwiseProduct(hphi)).sum().real();
            if (p.statistics == Statistics::boson && p.particles > 1)
                e += 0.5 * p.intra.strength() * (p.particles - 1.0) / p.particles * dx * rho[i].squaredNorm();
        }
        e += sys_.inter.strength() * dx * rho[kA].dot(rho[kB]);
        return e;
    }

    /// Self-consistent ground state.
    MeanFieldState ground_state(double tol = 1e-13, int max_iter = 2000, double mixing = 0.5) const {
        const double dx = sys_.grid.spacing;
        MeanFieldState st;
        std::array<RVector, kSpecies> rho;
        for (int s = 0; s < kSpecies; ++s) rho[static_cast<std::size_t>(s)] = RVector::Zero(sys_.grid.points.size());
        for (int it = 0; it < max_iter; ++it) {
            std::array<RVector, kSpecies> next;
            for (int s = 0; s < kSpecies; ++s) {
                const auto i = static_cast<std::size_t>(s);
                const int m = orbital_count(sys_.species[i]);
                RMatrix h = kinetic_operator(sys_.grid, sys_.species[i].mass).matrix();
                h.diagonal() += potential(s, rho);
                Eigen::SelfAdjointEigenSolver<RMatrix> es(h);
                CMatrix phi(m, h.rows());
                for (int r = 0; r < m; ++r) {
                    RVector v = es.eigenvectors().col(r);
                    Eigen::Index arg;
                    v.cwiseAbs().maxCoeff(&arg);
                    if (v(arg) < 0.0) v = -v;
                    phi.row(r) = (v / std::sqrt(dx)).cast<cplx>().transpose();
                }
                st.orbitals[i] = phi;
            }
            next = densities(st);
            double change = 0.0;
            for (std::size_t i = 0; i < kSpecies; ++i) change = std::max(change, (next[i] - rho[i]).cwiseAbs().maxCoeff());
            if (it > 0 && change < tol) return st;
            for (std::size_t i = 0; i < kSpecies; ++i)
                rho[i] = it == 0 ? next[i] : RVector((1.0 - mixing) * rho[i] + mixing * next[i]);
        }
        throw std::runtime_error("mean_field: self-consistency not reached");
    }

    /// Evolves `st` to t_final with fixed step dt, sampling every `stride`.
    std::vector<MeanFieldSample> propagate(MeanFieldState st, double t_final, double stride, double dt = 2e-3) const {
        const auto per = static_cast<long>(std::llround(stride / dt));
        if (per < 1 || std::abs(per * dt - stride) > 1e-12 * stride)
            throw std::invalid_argument("mean_field: stride must be a multiple of dt");
        const double w1 = 1.0 / (2.0 - std::cbrt(2.0));
        const double w0 = 1.0 - 2.0 * w1;
        const std::array<double, 3> sub{w1 * dt, w0 * dt, w1 * dt};
        std::array<std::array<CMatrix, kSpecies>, 3> kin;
        for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t s = 0; s < kSpecies; ++s) kin[k][s] = kinetic_propagator(static_cast<int>(s), sub[k]);
        std::vector<MeanFieldSample> out;
        auto sample = [&](double t) {
            MeanFieldSample m;
            m.time = t;
            m.energy = energy(st);
            m.density = densities(st);
            out.push_back(std::move(m));
        };
        sample(0.0);
        const auto n = static_cast<long>(std::floor(t_final / stride + 1e-9));
        for (long k = 0; k < n; ++k) {
            for (long j = 0; j < per; ++j)
                for (std::size_t q = 0; q < 3; ++q) strang(st, sub[q], kin[q]);
            sample(static_cast<double>(k + 1) * stride);
        }
        return out;
    }

private:
    CMatrix kinetic_propagator(int s, double dt) const {
        const auto i = static_cast<std::size_t>(s);
        CVector ph(kin_values_[i].size());
        for (Eigen::Index k = 0; k < ph.size(); ++k) ph(k) = std::polar(1.0, -kin_values_[i](k) * dt);
        const CMatrix u = kin_vectors_[i].cast<cplx>();
        return u * ph.asDiagonal() * u.transpose();
    }

    void potential_step(MeanFieldState& st, double tau) const {
        const auto rho = densities(st);
        for (int s = 0; s < kSpecies; ++s) {
            const RVector v = potential(s, rho);
            CVector ph(v.size());
            for (Eigen::Index x = 0; x < v.size(); ++x) ph(x) = std::polar(1.0, -v(x) * tau);
            auto& phi = st.orbitals[static_cast<std::size_t>(s)];
            phi = phi * ph.asDiagonal();
        }
    }

    void strang(MeanFieldState& st, double dt, const std::array<CMatrix, kSpecies>& kin) const {
        potential_step(st, 0.5 * dt);
        for (std::size_t s = 0; s < kSpecies; ++s) st.orbitals[s] = st.orbitals[s] * kin[s];
        potential_step(st, 0.5 * dt);
    }

    System sys_;
    std::array<RMatrix, kSpecies> kin_vectors_;
    std::array<RVector, kSpecies> kin_values_;
};

/// Ground state of `initial`, evolved under `quenched`.
inline std::vector<MeanFieldSample> mean_field_quench(const System& initial, const System& quenched, double t_final,
                                                      double stride, double dt = 2e-3) {
    const MeanFieldState g = MeanFieldSolver(initial).ground_state();
    return MeanFieldSolver(quenched).propagate(g, t_final, stride, dt);
}

}  // namespace mlx::oracle
