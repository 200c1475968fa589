#pragma once

// Physical system (two species on a shared grid), truncation parameters and
// the variational state of a binary mixture.

#include <array>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mlx/fock.hpp"
#include "mlx/grid.hpp"

namespace mlx {

inline constexpr int kSpecies = 2;
inline constexpr int kA = 0;
inline constexpr int kB = 1;

inline const char* species_name(int s) { return s == kA ? "A" : "B"; }

struct SpeciesParams {
    Statistics statistics = Statistics::boson;
    int particles = 1;
    double mass = 1.0;
    double frequency = 1.0;
    double offset = 0.0;
    InteractionKernel intra = InteractionKernel::contact(0.0);
};

/// Hamiltonian of the binary mixture: one-body terms per species, intra- and
/// inter-species kernels on a common grid.
struct System {
    Grid grid;
    std::array<SpeciesParams, kSpecies> species;
    InteractionKernel inter = InteractionKernel::contact(0.0);

    /// h = p^2/2M + (1/2) M omega^2 (x - x0)^2 for species s.
    OneBodyOperator one_body(int s) const {
        const auto& p = species[static_cast<std::size_t>(s)];
        return kinetic_operator(grid, p.mass) + harmonic_potential(grid, p.offset, p.frequency, p.mass);
    }

    /// Same system with every trap offset set to zero.
    System quenched() const {
        System q = *this;
        for (auto& p : q.species) p.offset = 0.0;
        return q;
    }
};

/// Truncation M-(m_A, m_B).
struct Truncation {
    int sbs = 1;
    std::array<int, kSpecies> orbitals{1, 1};

    std::string label() const {
        std::ostringstream os;
        os << sbs << "-(" << orbitals[0] << "," << orbitals[1] << ")";
        return os.str();
    }
};

/// Precomputed combinatorics for one species.
struct SpeciesTables {
    FockBasis basis;
    OneBodyTable one;
    TwoBodyTable two;
};

/// System + truncation + the static tables derived from them.
class Model {
public:
    Model(System system, Truncation trunc) : system_(std::move(system)), trunc_(trunc) {
        const auto G = static_cast<int>(system_.grid.point_count);
        if (trunc_.sbs < 1) throw std::invalid_argument("truncation: M must be >= 1");
        for (int s = 0; s < kSpecies; ++s) {
            const auto& p = system_.species[static_cast<std::size_t>(s)];
            const int m = trunc_.orbitals[static_cast<std::size_t>(s)];
            if (p.particles < 1)
                throw std::invalid_argument(std::string("species ") + species_name(s) + ": N must be >= 1");
            if (m < 1 || m > G)
                throw std::invalid_argument(std::string("species ") + species_name(s) +
                                            ": orbital count must lie in 1..G");
            if (p.statistics == Statistics::fermion && m < p.particles)
                throw std::invalid_argument(std::string("species ") + species_name(s) + ": " +
                                            std::to_string(p.particles) + " fermions need m >= N, got m = " +
                                            std::to_string(m));
            if (!(p.mass > 0.0)) throw std::invalid_argument("species mass must be positive");
            auto& t = tables_[static_cast<std::size_t>(s)];
            t.basis = FockBasis(p.statistics, p.particles, m);
            if (static_cast<std::size_t>(trunc_.sbs) > t.basis.size())
                throw std::invalid_argument(std::string("truncation: M = ") + std::to_string(trunc_.sbs) +
                                            " exceeds the number of number states of species " +
                                            species_name(s) + " (" + std::to_string(t.basis.size()) + ")");
            t.one = build_one_body_table(t.basis);
            t.two = build_two_body_table(t.basis);
            h_[static_cast<std::size_t>(s)] = system_.one_body(s);
        }
    }

    const System& system() const { return system_; }
    const Grid& grid() const { return system_.grid; }
    const Truncation& truncation() const { return trunc_; }
    int sbs() const { return trunc_.sbs; }
    int orbitals(int s) const { return trunc_.orbitals[static_cast<std::size_t>(s)]; }
    int particles(int s) const { return system_.species[static_cast<std::size_t>(s)].particles; }
    Statistics statistics(int s) const { return system_.species[static_cast<std::size_t>(s)].statistics; }
    const SpeciesTables& tables(int s) const { return tables_[static_cast<std::size_t>(s)]; }
    std::size_t basis_size(int s) const { return tables_[static_cast<std::size_t>(s)].basis.size(); }
    const OneBodyOperator& one_body(int s) const { return h_[static_cast<std::size_t>(s)]; }
    const InteractionKernel& intra(int s) const { return system_.species[static_cast<std::size_t>(s)].intra; }
    const InteractionKernel& inter() const { return system_.inter; }

    /// True when the species layer of s is untruncated (M = K_s): its SBSs do not move.
    bool species_layer_complete(int s) const { return static_cast<std::size_t>(sbs()) == basis_size(s); }
    /// True when the particle layer of s is untruncated (m_s = G): its SPFs do not move.
    bool particle_layer_complete(int s) const {
        return static_cast<std::size_t>(orbitals(s)) == system_.grid.point_count;
    }

    /// Same truncation and tables, different Hamiltonian parameters (quench).
    Model with_system(System system) const { return Model(std::move(system), trunc_); }

    /// Number of complex coefficients M^2 + M (K_A + K_B) + G (m_A + m_B).
    std::size_t coefficient_count() const {
        const auto M = static_cast<std::size_t>(sbs());
        return M * M + M * (basis_size(kA) + basis_size(kB)) +
               system_.grid.point_count * static_cast<std::size_t>(orbitals(kA) + orbitals(kB));
    }

private:
    System system_;
    Truncation trunc_;
    std::array<SpeciesTables, kSpecies> tables_;
    std::array<OneBodyOperator, kSpecies> h_;
};

/// Variational state: top-layer coefficients A (M x M), SBS coefficients C_s
/// (M x K_s, rows are SBSs) and orbitals phi_s (m_s x G, rows are SPFs).
struct MixtureState {
    CMatrix top;
    std::array<CMatrix, kSpecies> coeffs;
    std::array<CMatrix, kSpecies> orbitals;
    double time = 0.0;

    Eigen::Index packed_size() const {
        Eigen::Index n = top.size();
        for (int s = 0; s < kSpecies; ++s) n += coeffs[static_cast<std::size_t>(s)].size() +
                                                  orbitals[static_cast<std::size_t>(s)].size();
        return n;
    }

    CVector pack() const {
        CVector v(packed_size());
        Eigen::Index o = 0;
        auto put = [&](const CMatrix& m) {
            v.segment(o, m.size()) = m.reshaped();
            o += m.size();
        };
        put(top);
        for (const auto& c : coeffs) put(c);
        for (const auto& p : orbitals) put(p);
        return v;
    }

    /// Inverse of pack(); the shapes of *this are kept.
    void unpack(const CVector& v) {
        if (v.size() != packed_size()) throw std::invalid_argument("MixtureState::unpack: size mismatch");
        Eigen::Index o = 0;
        auto get = [&](CMatrix& m) {
            m.reshaped() = v.segment(o, m.size());
            o += m.size();
        };
        get(top);
        for (auto& c : coeffs) get(c);
        for (auto& p : orbitals) get(p);
    }
};

}  // namespace mlx
