#pragma once

// Run directory writers. Every series is a CSV with a header row and one row
// per output time; doubles are written with 17 significant digits.
//
//   energies.csv             t, E, norm
//   populations.csv          t, lambda_1..lambda_M, nA_1..nA_mA, nB_1..nB_mB
//   density_A.csv, _B.csv    t, rho(x_0) .. rho(x_{G-1}); header carries x
//   schmidt_layer_k_A.csv    same layout, lambda_k rho_{1,k}(x) for k <= K
//   metadata.json            resolved config, versions, invariant summary

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlx/analysis.hpp"
#include "mlx/io/config.hpp"

namespace mlx::io {

inline constexpr const char* kVersion = "1.0.0";

class CsvWriter {
public:
    CsvWriter() = default;
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header, bool append) {
        const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
        f_.open(path, fresh ? std::ios::trunc : std::ios::app);
        if (!f_) throw std::runtime_error("cannot open " + path.string());
        f_ << std::setprecision(std::numeric_limits<double>::max_digits10);
        if (fresh) {
            for (std::size_t i = 0; i < header.size(); ++i) f_ << (i ? "," : "") << header[i];
            f_ << '\n';
        }
    }

    template <class Row>
    void row(double t, const Row& values) {
        f_ << t;
        for (Eigen::Index i = 0; i < values.size(); ++i) f_ << ',' << values(i);
        f_ << '\n';
    }

    void flush() { f_.flush(); }

private:
    std::ofstream f_;
};

/// Drops data rows whose time exceeds `t_max` (resume after an interrupted run).
inline void truncate_rows_after(const std::filesystem::path& path, double t_max) {
    if (!std::filesystem::exists(path)) return;
    std::ifstream in(path);
    std::vector<std::string> keep;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            keep.push_back(line);
            header = false;
            continue;
        }
        if (line.empty()) continue;
        const double t = std::stod(line.substr(0, line.find(',')));
        if (t <= t_max + 1e-9) keep.push_back(line);
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : keep) out << l << '\n';
}

class RunWriter {
public:
    /// `append` keeps existing rows (resume).
    RunWriter(std::filesystem::path dir, const RunConfig& cfg, const Model& model, bool append)
        : dir_(std::move(dir)), cfg_(cfg) {
        std::filesystem::create_directories(dir_);
        const int M = model.sbs();
        energies_ = CsvWriter(dir_ / "energies.csv", {"t", "E", "norm"}, append);
        if (cfg.analysis.populations) {
            std::vector<std::string> h{"t"};
            for (int i = 1; i <= M; ++i) h.push_back("lambda_" + std::to_string(i));
            for (int s = 0; s < kSpecies; ++s)
                for (int i = 1; i <= model.orbitals(s); ++i)
                    h.push_back(std::string("n") + species_name(s) + "_" + std::to_string(i));
            populations_ = std::make_unique<CsvWriter>(dir_ / "populations.csv", h, append);
        }
        std::vector<std::string> xh{"t"};
        for (Eigen::Index i = 0; i < model.grid().points.size(); ++i) {
            std::ostringstream os;
            os << std::setprecision(std::numeric_limits<double>::max_digits10) << "x=" << model.grid().points(i);
            xh.push_back(os.str());
        }
        for (int s = 0; s < kSpecies; ++s) {
            const std::string n = species_name(s);
            if (cfg.analysis.densities)
                density_[static_cast<std::size_t>(s)] =
                    std::make_unique<CsvWriter>(dir_ / ("density_" + n + ".csv"), xh, append);
            for (int k = 1; k <= cfg.analysis.schmidt_layers; ++k)
                layers_[static_cast<std::size_t>(s)].push_back(std::make_unique<CsvWriter>(
                    dir_ / ("schmidt_layer_" + std::to_string(k) + "_" + n + ".csv"), xh, append));
        }
    }

    void write(const Observables& o) {
        RVector e(2);
        e << o.energy, o.norm;
        energies_.row(o.time, e);
        if (populations_) {
            const auto& na = o.no[kA].populations;
            const auto& nb = o.no[kB].populations;
            RVector p(o.nsf_A.populations.size() + na.size() + nb.size());
            p << o.nsf_A.populations, na, nb;
            populations_->row(o.time, p);
        }
        for (std::size_t s = 0; s < kSpecies; ++s) {
            if (density_[s]) density_[s]->row(o.time, o.record.density[s]);
            for (std::size_t k = 0; k < layers_[s].size(); ++k)
                layers_[s][k]->row(o.time, RVector(o.record.layers[s].row(static_cast<Eigen::Index>(k)).transpose()));
        }
    }

    void flush() {
        energies_.flush();
        if (populations_) populations_->flush();
        for (auto& d : density_)
            if (d) d->flush();
        for (auto& l : layers_)
            for (auto& w : l) w->flush();
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    RunConfig cfg_;
    CsvWriter energies_;
    std::unique_ptr<CsvWriter> populations_;
    std::array<std::unique_ptr<CsvWriter>, kSpecies> density_;
    std::array<std::vector<std::unique_ptr<CsvWriter>>, kSpecies> layers_;
};

/// Invariant summary for metadata.json.
inline nlohmann::json stats_json(const PropagationStats& s) {
    return {{"max_norm_defect", s.max_norm_defect},
            {"max_coeff_defect", {s.max_coeff_defect[0], s.max_coeff_defect[1]}},
            {"max_orbital_defect", {s.max_orbital_defect[0], s.max_orbital_defect[1]}},
            {"max_relative_energy_drift", s.max_energy_drift},
            {"reorthonormalizations", s.corrections},
            {"accepted_steps", s.stepper.accepted},
            {"rejected_steps", s.stepper.rejected},
            {"rhs_evaluations", s.stepper.evaluations},
            {"regularized_inversions", s.rhs.regularized_inversions},
            {"min_species_density_eigenvalue", {s.rhs.min_eta[0], s.rhs.min_eta[1]}},
            {"min_orbital_density_eigenvalue", {s.rhs.min_rho[0], s.rhs.min_rho[1]}}};
}

inline nlohmann::json base_metadata(const RunConfig& cfg, const Model& model) {
    return {{"program", "mlmctdhx"},
            {"version", kVersion},
            {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
            {"config", to_json(cfg)},
            {"label", cfg.label()},
            {"basis_size", {model.basis_size(kA), model.basis_size(kB)}},
            {"coefficient_count", model.coefficient_count()},
            {"grid_spacing", model.grid().spacing}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    f << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    return nlohmann::json::parse(f);
}

/// Numeric CSV table: header names and rows.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error(path.string() + ": empty file");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.header.push_back(cell);
    }
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != t.header.size()) throw std::runtime_error(path.string() + ": ragged row");
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace mlx::io
