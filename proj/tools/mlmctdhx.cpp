// mlmctdhx: relax, quench, propagate and compare binary-mixture runs.
//
//   mlmctdhx run        --config FILE --out DIR [--seed S] [--threads T] [--checkpoint FILE]
//   mlmctdhx relax-only --config FILE --out DIR [--seed S] [--threads T]
//   mlmctdhx resume     --out DIR [--checkpoint FILE] [--threads T]
//   mlmctdhx compare    RUN1 RUN2 [--out DIR]
//
// Exit status: 0 ok, 1 usage, 2 config, 3 invariant abort, 4 relaxation
// failure, 5 checkpoint error.

#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Core>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "mlx/io/compare.hpp"
#include "mlx/io/run.hpp"

namespace {

void set_threads(int n) {
    if (n < 1) return;
    Eigen::setNbThreads(n);
#ifdef _OPENMP
    omp_set_num_threads(n);
#endif
}

int report(const mlx::io::RunOutcome& r, bool relaxation = false) {
    if (r.exit_code != mlx::io::kExitOk)
        std::cerr << "mlmctdhx: " << r.message << '\n';
    else if (relaxation)
        std::cout << std::setprecision(15) << "relaxed energy " << r.initial_energy << '\n';
    else
        std::cout << "finished at t = " << r.final_time << '\n';
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-layer MCTDH for binary bosonic/fermionic mixtures"};
    app.require_subcommand(1);

    std::string config, out, ckpt, run1, run2;
    std::optional<std::uint64_t> seed;
    int threads = 1;

    auto* run = app.add_subcommand("run", "relax, quench the trap offsets and propagate");
    run->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "output directory")->required();
    run->add_option("--seed", seed, "seed for the relaxation perturbation");
    run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--checkpoint", ckpt, "start from this relaxed state instead of relaxing")
        ->check(CLI::ExistingFile);

    auto* relax = app.add_subcommand("relax-only", "imaginary-time relaxation only");
    relax->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    relax->add_option("--out", out, "output directory")->required();
    relax->add_option("--seed", seed, "seed for the relaxation perturbation");
    relax->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    auto* resume = app.add_subcommand("resume", "continue an interrupted run from its checkpoint");
    resume->add_option("--out", out, "run directory")->required()->check(CLI::ExistingDirectory);
    resume->add_option("--checkpoint", ckpt, "checkpoint (default DIR/checkpoint.bin)")->check(CLI::ExistingFile);
    resume->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    auto* compare = app.add_subcommand("compare", "density and population differences of two runs");
    compare->add_option("run1", run1, "run directory")->required()->check(CLI::ExistingDirectory);
    compare->add_option("run2", run2, "reference run directory")->required()->check(CLI::ExistingDirectory);
    compare->add_option("--out", out, "write compare.csv and compare_summary.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : mlx::io::kExitUsage;
    }
    set_threads(threads);

    try {
        if (*compare) {
            const auto rep = mlx::io::compare_runs(run1, run2);
            if (!out.empty()) mlx::io::write_compare(rep, out);
            std::cout << mlx::io::summary_json(rep).dump(2) << '\n';
            return mlx::io::kExitOk;
        }
        if (*resume) return report(mlx::io::resume(out, ckpt.empty() ? std::nullopt : std::optional(ckpt)));

        mlx::io::RunConfig cfg = mlx::io::load_config(config);
        if (seed) {
            cfg.seed = *seed;
            cfg.relaxation.seed = *seed;
        }
        for (const auto& name : mlx::io::apply_env_overrides(cfg)) std::cerr << "override: " << name << '\n';
        if (*relax) return report(mlx::io::relax_only(cfg, out), true);
        return report(mlx::io::run(cfg, out, ckpt.empty() ? std::nullopt : std::optional(ckpt)));
    } catch (const mlx::io::ConfigError& e) {
        std::cerr << "mlmctdhx: config error: " << e.what() << '\n';
        return mlx::io::kExitConfig;
    } catch (const mlx::io::CompareError& e) {
        std::cerr << "mlmctdhx: " << e.what() << '\n';
        return mlx::io::kExitUsage;
    } catch (const mlx::CheckpointError& e) {
        std::cerr << "mlmctdhx: " << e.what() << '\n';
        return mlx::io::kExitCheckpoint;
    } catch (const std::exception& e) {
        std::cerr << "mlmctdhx: " << e.what() << '\n';
        return mlx::io::kExitUsage;
    }
}
