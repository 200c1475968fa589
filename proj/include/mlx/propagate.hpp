#pragma once

// Real- and imaginary-time propagation of the coupled layers, relaxation to the
// variational ground state and the seed state used for it.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mlx/eom.hpp"
#include "mlx/integrator.hpp"
#include "mlx/linalg.hpp"

namespace mlx {

enum class TimeMode { real, imaginary };

struct PropagationConfig {
    TimeMode mode = TimeMode::real;
    double atol = 1e-8;
    double rtol = 1e-8;
    double initial_step = 1e-3;
    double max_step = 0.1;
    double output_stride = 0.1;
    double t_final = 20.0;
    double orthonormality_tol = 1e-8;
    double energy_tol = 1e-6;
    double abort_factor = 100.0;
    bool keep_states = true;
    RegularizationPolicy regularization{};
    std::optional<double> reference_energy;  // energy drift baseline; defaults to E(t0)

    void validate(double t0) const {
        if (!(atol > 0.0) || !(rtol > 0.0)) throw std::invalid_argument("propagation: tolerances must be positive");
        if (!(t_final > t0))
            throw std::invalid_argument("propagation: final time must exceed start time");
        if (!(output_stride > 0.0)) throw std::invalid_argument("propagation: output stride must be positive");
        if (!(max_step > 0.0) || !(initial_step > 0.0))
            throw std::invalid_argument("propagation: step sizes must be positive");
        if (!(regularization.epsilon > 0.0)) throw std::invalid_argument("propagation: epsilon must be positive");
    }
};

struct Snapshot {
    double time = 0.0;
    double energy = 0.0;
    double norm = 1.0;
    MixtureState state;  // empty unless states are kept
};

struct PropagationStats {
    double max_norm_defect = 0.0;                     // single-step, before renormalization
    std::array<double, kSpecies> max_coeff_defect{};  // Gram defects before correction
    std::array<double, kSpecies> max_orbital_defect{};
    double max_energy_drift = 0.0;                    // relative, real time only
    std::size_t corrections = 0;
    StepperStats stepper;
    RhsDiagnostics rhs;
    std::size_t basis_rebuilds = 0;
};

struct Trajectory {
    std::vector<Snapshot> snapshots;
    PropagationStats stats;
    MixtureState final_state;
};

class InvariantViolation : public std::runtime_error {
public:
    InvariantViolation(const std::string& what, MixtureState last_good)
        : std::runtime_error(what), last_good_state(std::move(last_good)) {}
    MixtureState last_good_state;
};

struct LayerDefects {
    double norm = 0.0;
    std::array<double, kSpecies> coeffs{};
    std::array<double, kSpecies> orbitals{};

    double max() const {
        double m = norm;
        for (int s = 0; s < kSpecies; ++s)
            m = std::max({m, coeffs[static_cast<std::size_t>(s)], orbitals[static_cast<std::size_t>(s)]});
        return m;
    }
};

inline LayerDefects layer_defects(const Model& model, const MixtureState& st) {
    LayerDefects d;
    d.norm = std::abs(st.top.squaredNorm() - 1.0);
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        d.coeffs[i] = gram_defect(st.coeffs[i]);
        d.orbitals[i] = gram_defect(st.orbitals[i], model.grid().spacing);
    }
    return d;
}

/// Renormalizes A when its defect exceeds `norm_tol` and re-orthonormalizes
/// every moving layer whose defect exceeds `tol`. Returns true if anything changed.
inline bool restore_layers(const Model& model, MixtureState& st, const LayerDefects& d, double tol,
                           double norm_tol) {
    bool changed = false;
    if (d.norm > norm_tol) {
        st.top /= st.top.norm();
        changed = true;
    }
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        if (!model.species_layer_complete(s) && d.coeffs[i] > tol) {
            lowdin_orthonormalize(st.coeffs[i]);
            changed = true;
        }
        if (!model.particle_layer_complete(s) && d.orbitals[i] > tol) {
            lowdin_orthonormalize(st.orbitals[i], model.grid().spacing);
            changed = true;
        }
    }
    return changed;
}

/// Called at every output time with the snapshot and the full state.
using SnapshotObserver = std::function<void(const Snapshot&, const MixtureState&)>;

inline Trajectory propagate(const Model& model, const MixtureState& initial, const PropagationConfig& cfg,
                            const SnapshotObserver& observer = {}) {
    cfg.validate(initial.time);
    const double tol = cfg.orthonormality_tol;
    const LayerDefects d0 = layer_defects(model, initial);
    if (d0.max() > cfg.abort_factor * tol)
        throw std::invalid_argument("propagate: initial state violates normalization/orthonormality (defect " +
                                    std::to_string(d0.max()) + ")");

    Evaluator ev(model, cfg.regularization);
    MixtureState work = initial;
    const bool imag = cfg.mode == TimeMode::imaginary;
    const cplx factor = imag ? cplx(-1.0, 0.0) : cplx(0.0, -1.0);

    auto rhs = [&](double t, const CVector& y) {
        work.unpack(y);
        work.time = t;
        return CVector(factor * ev.generator(work).pack());
    };

    Trajectory traj;
    auto& stats = traj.stats;
    MixtureState last_good = initial;
    auto after_step = [&](double t, CVector& y) {
        work.unpack(y);
        work.time = t;
        const LayerDefects d = layer_defects(model, work);
        stats.max_norm_defect = std::max(stats.max_norm_defect, imag ? 0.0 : d.norm);
        for (std::size_t i = 0; i < kSpecies; ++i) {
            stats.max_coeff_defect[i] = std::max(stats.max_coeff_defect[i], d.coeffs[i]);
            stats.max_orbital_defect[i] = std::max(stats.max_orbital_defect[i], d.orbitals[i]);
        }
        bool changed;
        if (imag) {
            changed = restore_layers(model, work, d, 1e-13, 0.0);
        } else {
            if (d.max() > cfg.abort_factor * tol)
                throw InvariantViolation("invariant violation at t = " + std::to_string(t) + ": defect " +
                                             std::to_string(d.max()) + " exceeds " +
                                             std::to_string(cfg.abort_factor * tol),
                                         last_good);
            changed = restore_layers(model, work, d, tol, 0.0);
        }
        if (changed) {
            ++stats.corrections;
            y = work.pack();
        }
        last_good = work;
        return changed;
    };

    StepperOptions so;
    so.atol = cfg.atol;
    so.rtol = cfg.rtol;
    so.initial_step = cfg.initial_step;
    so.max_step = cfg.max_step;
    {
        Eigen::Index end = initial.top.size();
        so.blocks.push_back(end);
        for (const auto& c : initial.coeffs) so.blocks.push_back(end += c.size());
        for (const auto& o : initial.orbitals) so.blocks.push_back(end += o.size());
    }
    DormandPrince stepper(rhs, so);

    MixtureState cur = initial;
    if (imag) cur.top /= cur.top.norm();
    const double e0 = cfg.reference_energy ? *cfg.reference_energy : ev.energy(cur);
    auto emit = [&](const MixtureState& st) {
        Snapshot snap;
        snap.time = st.time;
        snap.energy = ev.energy(st);
        snap.norm = st.top.squaredNorm();
        if (!imag) {
            const double drift = std::abs(snap.energy - e0) / std::max(1.0, std::abs(e0));
            stats.max_energy_drift = std::max(stats.max_energy_drift, drift);
            if (drift > cfg.abort_factor * cfg.energy_tol)
                throw InvariantViolation("energy drift " + std::to_string(drift) + " at t = " +
                                             std::to_string(st.time) + " exceeds abort threshold",
                                         st);
        }
        if (cfg.keep_states) snap.state = st;
        if (observer) observer(snap, st);
        traj.snapshots.push_back(std::move(snap));
    };
    emit(cur);

    CVector y = cur.pack();
    double t = cur.time;
    const double t0 = t;
    std::size_t k = 1;
    while (t < cfg.t_final) {
        double target = t0 + static_cast<double>(k) * cfg.output_stride;
        if (target > cfg.t_final || cfg.t_final - target < 1e-12 * cfg.output_stride) target = cfg.t_final;
        stepper.advance(t, y, target, after_step);
        cur.unpack(y);
        cur.time = t;
        emit(cur);
        ++k;
    }
    traj.final_state = cur;
    stats.stepper = stepper.stats();
    stats.rhs = ev.diagnostics();
    stats.basis_rebuilds = ev.rebuilds();
    return traj;
}

/// Lowest eigenfunctions of each species' one-body Hamiltonian as orbitals,
/// the first M number states as SBSs (the first is the ground configuration),
/// and A = e_1 e_1^T. Degenerate orbitals get a small random admixture.
inline MixtureState seed_state(const Model& model, std::uint64_t seed = 0, double perturbation = 1e-3) {
    const int M = model.sbs();
    const auto G = static_cast<Eigen::Index>(model.grid().point_count);
    const double dx = model.grid().spacing;
    MixtureState st;
    st.top = CMatrix::Zero(M, M);
    st.top(0, 0) = 1.0;
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        const int m = model.orbitals(s);
        Eigen::SelfAdjointEigenSolver<RMatrix> es(model.one_body(s).matrix());
        const RVector& e = es.eigenvalues();
        CMatrix phi(m, G);
        for (int r = 0; r < m; ++r) {
            RVector v = es.eigenvectors().col(r);
            Eigen::Index arg;
            v.cwiseAbs().maxCoeff(&arg);
            if (v(arg) < 0.0) v = -v;
            phi.row(r) = (v / std::sqrt(dx)).cast<cplx>().transpose();
        }
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(s) * 7919u);
        std::normal_distribution<double> nd(0.0, 1.0);
        bool perturbed = false;
        for (int r = 0; r < m; ++r) {
            const bool below = r > 0 && std::abs(e(r) - e(r - 1)) < 1e-8 * std::max(1.0, std::abs(e(r)));
            const bool above = r + 1 < e.size() && std::abs(e(r + 1) - e(r)) < 1e-8 * std::max(1.0, std::abs(e(r)));
            if (!below && !above) continue;
            for (Eigen::Index x = 0; x < G; ++x) phi(r, x) += perturbation * nd(rng) / std::sqrt(dx);
            perturbed = true;
        }
        if (perturbed) gram_schmidt(phi, dx);
        st.orbitals[i] = phi;
        const auto K = static_cast<Eigen::Index>(model.basis_size(s));
        st.coeffs[i] = CMatrix::Zero(M, K);
        for (int r = 0; r < M; ++r) st.coeffs[i](r, r) = 1.0;
    }
    return st;
}

struct RelaxConfig {
    double atol = 1e-8;
    double rtol = 1e-8;
    double initial_step = 1e-3;
    double max_step = 0.1;
    double chunk = 0.5;
    double tau_max = 400.0;
    double energy_rate_tol = 1e-10;
    double state_rate_tol = 0.0;  // 0: energy criterion only
    std::uint64_t seed = 0;
    double perturbation = 1e-3;
    RegularizationPolicy regularization{};
};

struct RelaxResult {
    MixtureState state;
    std::vector<std::pair<double, double>> energies;  // (tau, E)
    bool converged = false;
    double tau = 0.0;
};

class RelaxationFailure : public std::runtime_error {
public:
    RelaxationFailure(const std::string& what, RelaxResult partial)
        : std::runtime_error(what), result(std::move(partial)) {}
    RelaxResult result;
};

/// Largest entry change between two states of equal shape.
inline double max_state_change(const MixtureState& a, const MixtureState& b) {
    double d = (a.top - b.top).cwiseAbs().maxCoeff();
    for (std::size_t s = 0; s < kSpecies; ++s) {
        d = std::max(d, (a.coeffs[s] - b.coeffs[s]).cwiseAbs().maxCoeff());
        d = std::max(d, (a.orbitals[s] - b.orbitals[s]).cwiseAbs().maxCoeff());
    }
    return d;
}

/// Imaginary-time relaxation from `start` until |dE/dtau| < energy_rate_tol
/// and, if state_rate_tol > 0, the largest state entry moves slower than it.
inline RelaxResult relax_from(const Model& model, MixtureState start, const RelaxConfig& rc) {
    if (!(rc.chunk > 0.0) || !(rc.tau_max > rc.chunk)) throw std::invalid_argument("relax: bad chunk/tau_max");
    Evaluator ev(model, rc.regularization);
    RelaxResult res;
    start.time = 0.0;
    res.energies.emplace_back(0.0, ev.energy(start));
    PropagationConfig pc;
    pc.mode = TimeMode::imaginary;
    pc.atol = rc.atol;
    pc.rtol = rc.rtol;
    pc.initial_step = rc.initial_step;
    pc.max_step = rc.max_step;
    pc.output_stride = rc.chunk;
    pc.keep_states = false;
    pc.regularization = rc.regularization;
    MixtureState cur = start;
    double step = rc.initial_step;
    while (cur.time < rc.tau_max) {
        pc.t_final = cur.time + rc.chunk;
        pc.initial_step = step;
        Trajectory tr = propagate(model, cur, pc);
        step = std::max(1e-6, std::min(rc.max_step, tr.stats.stepper.accepted ? rc.chunk / static_cast<double>(
                                                                                   tr.stats.stepper.accepted)
                                                                             : step));
        const double moved = max_state_change(tr.final_state, cur) / rc.chunk;
        cur = tr.final_state;
        const double e = ev.energy(cur);
        const double rate = std::abs(e - res.energies.back().second) / rc.chunk;
        res.energies.emplace_back(cur.time, e);
        if (rate < rc.energy_rate_tol && (rc.state_rate_tol <= 0.0 || moved < rc.state_rate_tol)) {
            res.converged = true;
            break;
        }
    }
    // the relaxed state is re-based at t = 0
    cur.time = 0.0;
    res.tau = res.energies.back().first;
    res.state = cur;
    if (!res.converged)
        throw RelaxationFailure("relaxation did not converge within tau = " + std::to_string(rc.tau_max), res);
    return res;
}

inline RelaxResult relax(const Model& model, const RelaxConfig& rc = {}) {
    return relax_from(model, seed_state(model, rc.seed, rc.perturbation), rc);
}

}  // namespace mlx
