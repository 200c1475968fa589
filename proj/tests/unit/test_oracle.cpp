#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "helpers.hpp"
#include "mlx/analysis.hpp"
#include "mlx/oracle/exact_two_particle.hpp"
#include "mlx/oracle/fullci.hpp"
#include "mlx/oracle/mean_field.hpp"
#include "mlx/propagate.hpp"

using namespace mlx;
using namespace mlx::oracle;
using mlx::testing::make_system;
using mlx::testing::random_state;

TEST(ExactTwoParticle, NoCouplingFactorizes) {
    const System sys = make_system(Statistics::boson, 1, Statistics::boson, 1, 5.0, 32, 0, 0, 0.0, 1.0, -0.5);
    const ExactTwoParticle ex(sys);
    const CVector g = ex.ground_state();
    auto rank_defect = [](const CVector& psi) {
        const CMatrix m = Eigen::Map<const CMatrix>(psi.data(), 32, 32);
        Eigen::JacobiSVD<CMatrix> svd(m);
        return svd.singularValues()(1) / svd.singularValues()(0);
    };
    EXPECT_LT(rank_defect(g), 1e-12);
    const ExactTwoParticle centered(sys.quenched());
    const CVector c = centered.to_eigenbasis(g);
    CVector ct(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) ct(i) = c(i) * std::polar(1.0, -centered.spectrum()(i) * 1.7);
    EXPECT_LT(rank_defect(centered.from_eigenbasis(ct)), 1e-12);
    EXPECT_NEAR(ex.ground_energy(), 1.0, 1e-7);  // G = 32 discretization
}

TEST(ExactTwoParticle, DisplacedParticleOscillatesAndNormIsExact) {
    const System sys = make_system(Statistics::boson, 1, Statistics::boson, 1, 6.0, 40, 0, 0, 0.0, 1.0, 0.0);
    const auto samples = exact_two_particle(sys, sys.quenched(), 6.0, 0.5);
    double worst = 0.0, drift = 0.0;
    for (const auto& s : samples) {
        worst = std::max(worst, std::abs(position_moment(sys.grid, s.density[kA]) - std::cos(s.time)));
        drift = std::max(drift, std::abs(s.norm - 1.0));
    }
    EXPECT_LT(worst, 1e-8);
    EXPECT_LT(drift, 1e-12);
    EXPECT_THROW(ExactTwoParticle(make_system(Statistics::boson, 1, Statistics::boson, 1, 6.0, 80)),
                 std::invalid_argument);
    EXPECT_THROW(ExactTwoParticle(make_system(Statistics::boson, 2, Statistics::boson, 1, 6.0, 16)),
                 std::invalid_argument);
}

TEST(ExactTwoParticle, FullTruncationRelaxationMatches) {
    const System sys = make_system(Statistics::boson, 1, Statistics::fermion, 1, 5.0, 24, 0, 0, 1.0, 1.0, -1.0);
    const Model model(sys, Truncation{24, {24, 24}});
    const RelaxResult r = relax(model);
    const ExactTwoParticle ex(sys);
    EXPECT_NEAR(total_energy(model, r.state), ex.ground_energy(), 1e-8);
}

TEST(FullCI, IdealFermionsAndBoson) {
    const System sys = make_system(Statistics::fermion, 2, Statistics::boson, 1, 6.0, 64);
    const FullCI ci(sys, {6, 4});
    EXPECT_EQ(ci.dimension(), 15u * 4u);
    EXPECT_NEAR(ci.ground_state().first, 2.0 + 0.5, 1e-12);
}

TEST(FullCI, BosonEnergyRisesTowardFermionization) {
    double last = 0.0;
    for (double g : {0.0, 1.0, 3.0, 10.0}) {
        System sys = make_system(Statistics::boson, 2, Statistics::boson, 1, 6.0, 64, g);
        const double e = FullCI(sys, {24, 1}).ground_state().first - 0.5;
        if (g == 0.0) {
            EXPECT_NEAR(e, 1.0, 1e-12);
        }
        EXPECT_GT(e, last);
        EXPECT_LT(e, 2.0);
        last = e;
    }
}

TEST(FullCI, DisplacedTrapEnergy) {
    // one-body energy is exact once the basis spans the coherent state
    const System sys = make_system(Statistics::boson, 2, Statistics::fermion, 2, 6.0, 64, 0, 0, 0, 1.0, -1.0);
    const FullCI ci(sys, {14, 14});
    EXPECT_NEAR(ci.ground_state().first, 3.0, 1e-9);
}

TEST(FullCI, MatchesVariationalEnergyInSameOrbitals) {
    const System sys = make_system(Statistics::boson, 2, Statistics::fermion, 2, 6.0, 48, 0.3, 0.0, 0.8, 1.0, -1.0);
    const Model model(sys, Truncation{3, {4, 4}});
    for (unsigned seed : {1u, 2u}) {
        MixtureState st = random_state(model, seed);
        const FullCI ci(sys, st.orbitals);
        const CVector c = ci.from_state(model, st);
        EXPECT_NEAR(c.norm(), 1.0, 1e-12);
        EXPECT_NEAR(ci.energy(c), total_energy(model, st), 1e-10);
        const auto rho = densities(model, st);
        EXPECT_LT((ci.density(c, kA) - rho[kA]).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((ci.density(c, kB) - rho[kB]).cwiseAbs().maxCoeff(), 1e-10);
        const RVector lam = ci.natural_species_populations(c);
        const Observables o = observe(model, st, 0.0);
        EXPECT_LT((lam.head(3) - o.nsf_A.populations).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT(lam.tail(lam.size() - 3).cwiseAbs().maxCoeff(), 1e-10);
        const RVector n = ci.natural_orbital_populations(c, kB);
        EXPECT_LT((n - o.no[kB].populations).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(FullCI, HarmonicAndGridQuadratureAgree) {
    const System sys = make_system(Statistics::boson, 2, Statistics::fermion, 2, 7.0, 160, 0.5, 0.0, 1.0, 0.5, -0.5);
    const FullCI ho(sys, {6, 6});
    const std::array<CMatrix, kSpecies> rows{hermite_functions(6, 1.0, sys.grid.points).cast<cplx>(),
                                             hermite_functions(6, 1.0, sys.grid.points).cast<cplx>()};
    const FullCI grid(sys, rows);
    EXPECT_NEAR(ho.ground_state().first, grid.ground_state().first, 1e-8);
}

TEST(FullCI, LanczosAndKrylovPropagation) {
    const System sys = make_system(Statistics::boson, 2, Statistics::fermion, 2, 6.0, 64, 0.2, 0.0, 1.0, 1.0, -1.0);
    const FullCI ci(sys, {6, 6});
    const auto dense = ci.ground_state();
    const auto lz = ci.ground_state_lanczos();
    EXPECT_NEAR(dense.first, lz.first, 1e-11);
    EXPECT_NEAR(std::abs(dense.second.dot(lz.second)), 1.0, 1e-10);

    const FullCI quenched(sys.quenched(), {6, 6});
    const auto traj = quenched.propagate(dense.second, 2.0, 0.5);
    const CMatrix h(quenched.hamiltonian());
    const CMatrix u = (cplx(0.0, -2.0) * h).exp();
    EXPECT_LT((traj.back() - u * dense.second).cwiseAbs().maxCoeff(), 1e-10);
    for (const auto& c : traj) EXPECT_NEAR(c.norm(), 1.0, 1e-12);
    EXPECT_NEAR(quenched.energy(traj.back()), quenched.energy(traj.front()), 1e-11);
}

TEST(FullCI, DimensionCap) {
    const System sys = make_system(Statistics::boson, 4, Statistics::boson, 4, 6.0, 64);
    EXPECT_THROW(FullCI(sys, {12, 12}), std::invalid_argument);
}

TEST(MeanField, IdealDisplacedOscillation) {
    const System sys = make_system(Statistics::boson, 3, Statistics::fermion, 2, 8.0, 128, 0, 0, 0, 2.0, -1.0);
    const auto traj = mean_field_quench(sys, sys.quenched(), 3.0, 0.5);
    for (const auto& s : traj) {
        EXPECT_NEAR(position_moment(sys.grid, s.density[kA]) / 3.0, 2.0 * std::cos(s.time), 1e-8);
        EXPECT_NEAR(position_moment(sys.grid, s.density[kB]) / 2.0, -std::cos(s.time), 1e-8);
    }
    EXPECT_NEAR(traj.front().energy, 1.5 + 2.0 + 3 * 2.0 + 2 * 0.5, 1e-8);
}

TEST(MeanField, MatchesSingleConfigurationDynamics) {
    const System sys = make_system(Statistics::boson, 2, Statistics::fermion, 2, 8.0, 128, 0.05, 0.0, 1.0, 2.0, -2.0);
    const Model model0(sys, Truncation{1, {1, 2}});
    RelaxConfig rc;
    rc.energy_rate_tol = 1e-12;
    const RelaxResult r = relax(model0, rc);
    const MeanFieldSolver mf0(sys);
    const MeanFieldState g = mf0.ground_state();
    EXPECT_NEAR(total_energy(model0, r.state), mf0.energy(g), 1e-8);
    const Model model = model0.with_system(sys.quenched());
    PropagationConfig pc;
    pc.t_final = 2.0;
    pc.output_stride = 0.5;
    const Trajectory tr = propagate(model, r.state, pc);
    const auto ref = MeanFieldSolver(sys.quenched()).propagate(g, 2.0, 0.5);
    ASSERT_EQ(ref.size(), tr.snapshots.size());
    for (std::size_t k = 0; k < ref.size(); ++k) {
        const auto rho = densities(model, tr.snapshots[k].state);
        for (int s = 0; s < kSpecies; ++s)
            EXPECT_LT(density_difference(rho[static_cast<std::size_t>(s)], ref[k].density[static_cast<std::size_t>(s)],
                                         model.particles(s), model.grid().spacing),
                      1e-5);
        // the ground-state energy is stationary, the quenched one is first order in the state error
        EXPECT_NEAR(ref[k].energy, tr.snapshots[k].energy, 1e-5);
    }
}
