#pragma once

// Run pipeline: relax with the configured offsets, quench the offsets to zero,
// propagate and stream observables into a run directory.
//
//   relaxed.bin       relaxed state (t = 0)
//   relaxation.csv    tau, E
//   checkpoint.bin    latest state at the checkpoint stride, and the final state
//   error.json        written on abort; the exit status is then nonzero

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>

#include "mlx/analysis.hpp"
#include "mlx/checkpoint.hpp"
#include "mlx/io/config.hpp"
#include "mlx/io/output.hpp"
#include "mlx/propagate.hpp"

namespace mlx::io {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitConfig = 2,
    kExitInvariant = 3,
    kExitRelaxation = 4,
    kExitCheckpoint = 5,
};

struct RunOutcome {
    int exit_code = kExitOk;
    std::string message;
    double final_time = 0.0;
    double initial_energy = 0.0;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void write_error(const std::filesystem::path& dir, const std::string& type, const std::string& message,
                        const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json j = extra;
    j["type"] = type;
    j["message"] = message;
    write_json(dir / "error.json", j);
}

inline bool on_stride(double t, double stride) {
    if (!(stride > 0.0)) return false;
    const double k = std::round(t / stride);
    return k >= 1.0 && std::abs(t - k * stride) < 1e-9 * std::max(1.0, stride);
}

/// Relaxation with progress written to relaxation.csv and relaxed.bin.
inline RelaxResult relax_into(const RunConfig& cfg, const Model& model, const std::filesystem::path& dir,
                              nlohmann::json& meta) {
    std::filesystem::create_directories(dir);
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&](const RelaxResult& r) {
        CsvWriter w(dir / "relaxation.csv", {"tau", "E"}, false);
        for (const auto& [tau, e] : r.energies) {
            RVector v(1);
            v << e;
            w.row(tau, v);
        }
        meta["relaxation"] = {{"energy", r.energies.back().second},
                              {"tau", r.tau},
                              {"converged", r.converged},
                              {"wall_seconds", seconds_since(t0)}};
    };
    try {
        RelaxResult r = relax(model, cfg.relaxation);
        record(r);
        write_checkpoint((dir / "relaxed.bin").string(), r.state);
        return r;
    } catch (const RelaxationFailure& f) {
        record(f.result);
        throw;
    }
}

}  // namespace detail

/// Propagates `start` under the quenched Hamiltonian and writes every output.
/// With `append`, rows at or before start.time are assumed present.
inline RunOutcome propagate_into(const RunConfig& cfg, const MixtureState& start, const std::filesystem::path& dir,
                                 nlohmann::json meta, bool append, std::optional<double> reference_energy) {
    const Model model = cfg.model().with_system(cfg.system().quenched());
    check_compatible(model, start);
    RunOutcome out;
    const double t_start = start.time;
    {
        Evaluator ev(model, cfg.propagation.regularization);
        out.initial_energy = reference_energy ? *reference_energy : ev.energy(start);
    }
    meta["initial_energy"] = out.initial_energy;
    meta["status"] = "running";
    write_json(dir / "metadata.json", meta);

    if (!(cfg.propagation.t_final > t_start + 1e-12)) {
        out.final_time = t_start;
        out.message = "nothing to propagate";
        meta["status"] = "completed";
        write_json(dir / "metadata.json", meta);
        return out;
    }

    RunWriter writer(dir, cfg, model, append);
    PropagationConfig pc = cfg.propagation;
    pc.mode = TimeMode::real;
    pc.keep_states = false;
    pc.reference_energy = out.initial_energy;
    std::optional<Observables> prev;
    double schmidt_asymmetry = 0.0;
    const auto ckpt = (dir / "checkpoint.bin").string();
    auto observer = [&](const Snapshot& snap, const MixtureState& st) {
        Observables o = observe(model, st, snap.energy, prev ? &*prev : nullptr);
        RVector la = o.nsf_A.populations, lb = o.lambda_B;
        std::sort(la.begin(), la.end());
        std::sort(lb.begin(), lb.end());
        schmidt_asymmetry = std::max(schmidt_asymmetry, (la - lb).cwiseAbs().maxCoeff());
        if (!append || snap.time > t_start + 1e-12) writer.write(o);
        prev = std::move(o);
        if (snap.time > t_start + 1e-12 && detail::on_stride(snap.time, cfg.checkpoint_stride)) {
            writer.flush();
            write_checkpoint(ckpt, st);
        }
    };

    const auto t0 = std::chrono::steady_clock::now();
    try {
        const Trajectory tr = propagate(model, start, pc, observer);
        writer.flush();
        write_checkpoint(ckpt, tr.final_state);
        out.final_time = tr.final_state.time;
        meta["status"] = "completed";
        meta["final_time"] = out.final_time;
        meta["invariants"] = stats_json(tr.stats);
        meta["invariants"]["max_schmidt_asymmetry"] = schmidt_asymmetry;
        meta["propagation_wall_seconds"] = detail::seconds_since(t0);
        write_json(dir / "metadata.json", meta);
    } catch (const InvariantViolation& e) {
        writer.flush();
        write_checkpoint((dir / "last_good.bin").string(), e.last_good_state);
        detail::write_error(dir, "invariant_violation", e.what(), {{"last_good_time", e.last_good_state.time}});
        meta["status"] = "failed";
        write_json(dir / "metadata.json", meta);
        out.exit_code = kExitInvariant;
        out.message = e.what();
        out.final_time = e.last_good_state.time;
    }
    return out;
}

/// Relaxation only: relaxed.bin, relaxation.csv and metadata.json.
inline RunOutcome relax_only(const RunConfig& cfg, const std::filesystem::path& dir) {
    nlohmann::json meta = base_metadata(cfg, cfg.model());
    meta["verb"] = "relax-only";
    RunOutcome out;
    try {
        const RelaxResult r = detail::relax_into(cfg, cfg.model(), dir, meta);
        out.initial_energy = r.energies.back().second;
        meta["status"] = "completed";
    } catch (const RelaxationFailure& f) {
        detail::write_error(dir, "relaxation_failure", f.what());
        meta["status"] = "failed";
        out.exit_code = kExitRelaxation;
        out.message = f.what();
    }
    write_json(dir / "metadata.json", meta);
    return out;
}

/// Full pipeline. `start_checkpoint` replaces the relaxation by a stored state.
inline RunOutcome run(const RunConfig& cfg, const std::filesystem::path& dir,
                      const std::optional<std::string>& start_checkpoint = std::nullopt) {
    std::filesystem::create_directories(dir);
    const Model model = cfg.model();
    nlohmann::json meta = base_metadata(cfg, model);
    meta["verb"] = "run";
    MixtureState start;
    if (start_checkpoint) {
        try {
            start = read_checkpoint(*start_checkpoint);
            check_compatible(model, start);
        } catch (const CheckpointError& e) {
            detail::write_error(dir, "checkpoint_error", e.what());
            return {kExitCheckpoint, e.what(), 0.0, 0.0};
        }
        start.time = 0.0;
        meta["start_checkpoint"] = *start_checkpoint;
    } else {
        try {
            start = detail::relax_into(cfg, model, dir, meta).state;
        } catch (const RelaxationFailure& f) {
            detail::write_error(dir, "relaxation_failure", f.what());
            meta["status"] = "failed";
            write_json(dir / "metadata.json", meta);
            return {kExitRelaxation, f.what(), 0.0, 0.0};
        }
    }
    return propagate_into(cfg, start, dir, std::move(meta), false, std::nullopt);
}

/// Continues an interrupted run in `dir` from its checkpoint (default
/// dir/checkpoint.bin). Rows after the checkpoint time are discarded first.
inline RunOutcome resume(const std::filesystem::path& dir, const std::optional<std::string>& checkpoint = std::nullopt) {
    nlohmann::json meta = read_json(dir / "metadata.json");
    const RunConfig cfg = parse_config(meta.at("config"));
    const std::string path = checkpoint ? *checkpoint : (dir / "checkpoint.bin").string();
    MixtureState st;
    try {
        st = read_checkpoint(path);
    } catch (const CheckpointError& e) {
        return {kExitCheckpoint, e.what(), 0.0, 0.0};
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".csv" && entry.path().filename() != "relaxation.csv")
            truncate_rows_after(entry.path(), st.time);
    std::filesystem::remove(dir / "error.json");
    std::optional<double> e0;
    if (meta.contains("initial_energy")) e0 = meta.at("initial_energy").get<double>();
    nlohmann::json resumes = meta.value("resumed_from", nlohmann::json::array());
    resumes.push_back({{"checkpoint", path}, {"time", st.time}});
    meta["resumed_from"] = resumes;
    return propagate_into(cfg, st, dir, std::move(meta), true, e0);
}

}  // namespace mlx::io
