#pragma once

// One A and one B particle on the full product grid: psi(x_a, x_b) as a
// G*G vector (index a*G + b), Hamiltonian h_A x 1 + 1 x h_B + w(x_a, x_b),
// exact diagonalization, propagation by the spectral exponential.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mlx/system.hpp"

namespace mlx::oracle {

inline constexpr std::size_t kTwoParticleMaxPoints = 64;

struct TwoParticleSample {
    double time = 0.0;
    double energy = 0.0;
    double norm = 0.0;
    std::array<RVector, kSpecies> density;
};

class ExactTwoParticle {
public:
    explicit ExactTwoParticle(const System& sys) : grid_(sys.grid) {
        for (const auto& p : sys.species)
            if (p.particles != 1) throw std::invalid_argument("exact_two_particle: needs N_A = N_B = 1");
        const auto G = static_cast<Eigen::Index>(grid_.point_count);
        if (grid_.point_count > kTwoParticleMaxPoints)
            throw std::invalid_argument("exact_two_particle: G = " + std::to_string(G) + " exceeds the cap of " +
                                        std::to_string(kTwoParticleMaxPoints));
        const RMatrix ha = sys.one_body(kA).matrix();
        const RMatrix hb = sys.one_body(kB).matrix();
        const Eigen::Index D = G * G;
        RMatrix h = RMatrix::Zero(D, D);
        for (Eigen::Index a = 0; a < G; ++a)
            for (Eigen::Index b = 0; b < G; ++b) {
                const Eigen::Index r = a * G + b;
                for (Eigen::Index c = 0; c < G; ++c) {
                    h(r, c * G + b) += ha(a, c);
                    h(r, a * G + c) += hb(b, c);
                }
                h(r, r) += sys.inter.value(grid_, a, b);
            }
        Eigen::SelfAdjointEigenSolver<RMatrix> es(h);
        if (es.info() != Eigen::Success) throw std::runtime_error("exact_two_particle: diagonalization failed");
        energies_ = es.eigenvalues();
        vectors_ = es.eigenvectors();
    }

    const RVector& spectrum() const { return energies_; }
    double ground_energy() const { return energies_(0); }

    /// Ground state normalized as dx^2 sum |psi|^2 = 1.
    CVector ground_state() const { return vectors_.col(0).cast<cplx>() / grid_.spacing; }

    /// Coefficients of psi in the eigenbasis and back.
    CVector to_eigenbasis(const CVector& psi) const {
        return grid_.spacing * (vectors_.transpose().cast<cplx>() * psi);
    }
    CVector from_eigenbasis(const CVector& c) const { return (vectors_.cast<cplx>() * c) / grid_.spacing; }

    double energy(const CVector& psi) const {
        const CVector c = to_eigenbasis(psi);
        return (c.cwiseAbs2().array() * energies_.array()).sum() / c.squaredNorm();
    }

    /// rho_A(x_a) = dx sum_b |psi(a, b)|^2 and likewise for B.
    std::array<RVector, kSpecies> densities(const CVector& psi) const {
        const auto G = static_cast<Eigen::Index>(grid_.point_count);
        const RMatrix p = Eigen::Map<const CMatrix>(psi.data(), G, G).cwiseAbs2();  // (b, a)
        return {grid_.spacing * p.colwise().sum().transpose(), grid_.spacing * p.rowwise().sum()};
    }

    /// Exact evolution of psi0 sampled at 0, stride, 2 stride, ... t_final.
    std::vector<TwoParticleSample> propagate(const CVector& psi0, double t_final, double stride) const {
        if (!(stride > 0.0) || t_final < 0.0) throw std::invalid_argument("exact_two_particle: bad times");
        const CVector c0 = to_eigenbasis(psi0);
        std::vector<TwoParticleSample> out;
        const auto n = static_cast<long>(std::floor(t_final / stride + 1e-9));
        for (long k = 0; k <= n; ++k) {
            const double t = static_cast<double>(k) * stride;
            CVector c(c0.size());
            for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = c0(i) * std::polar(1.0, -energies_(i) * t);
            const CVector psi = from_eigenbasis(c);
            TwoParticleSample s;
            s.time = t;
            s.norm = grid_.spacing * grid_.spacing * psi.squaredNorm();
            s.energy = (c.cwiseAbs2().array() * energies_.array()).sum() / c.squaredNorm();
            s.density = densities(psi);
            out.push_back(std::move(s));
        }
        return out;
    }

private:
    Grid grid_;
    RVector energies_;
    RMatrix vectors_;
};

/// Ground state of `initial` propagated under `quenched` (same grid).
inline std::vector<TwoParticleSample> exact_two_particle(const System& initial, const System& quenched,
                                                         double t_final, double stride) {
    const ExactTwoParticle before(initial);
    const ExactTwoParticle after(quenched);
    return after.propagate(before.ground_state(), t_final, stride);
}

}  // namespace mlx::oracle
