#pragma once

// Comparison of two run directories: density differences per species and
// relative NSF / NO population differences at the common output times.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mlx/analysis.hpp"
#include "mlx/io/output.hpp"

namespace mlx::io {

class CompareError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One metric column; NaN marks an undefined entry (reference population < 1e-12).
struct CompareSeries {
    std::string name;
    std::vector<double> values;
};

struct CompareReport {
    std::vector<double> times;
    std::vector<CompareSeries> series;  // Delta_A, Delta_B, dlambda_i, dnA_i, dnB_i

    const CompareSeries& at(const std::string& name) const {
        for (const auto& s : series)
            if (s.name == name) return s;
        throw std::out_of_range("compare: no series " + name);
    }

    /// Largest defined value and the time it occurs; NaN when none is defined.
    std::pair<double, double> max_of(const std::string& name) const {
        const auto& v = at(name).values;
        double best = std::numeric_limits<double>::quiet_NaN(), when = best;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!std::isnan(v[i]) && (std::isnan(best) || v[i] > best)) {
                best = v[i];
                when = times[i];
            }
        return {best, when};
    }
};

namespace detail {

inline std::vector<std::size_t> columns_with_prefix(const CsvTable& t, const std::string& prefix) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i].rfind(prefix, 0) == 0) out.push_back(i);
    return out;
}

inline std::optional<std::size_t> find_time(const CsvTable& t, double time) {
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        if (std::abs(t.rows[r][0] - time) < 1e-9 * std::max(1.0, std::abs(time))) return r;
    return std::nullopt;
}

}  // namespace detail

/// Run 2 is the reference C' in every relative difference.
inline CompareReport compare_runs(const std::filesystem::path& run1, const std::filesystem::path& run2) {
    const auto m1 = read_json(run1 / "metadata.json");
    const auto m2 = read_json(run2 / "metadata.json");
    const auto& s1 = m1.at("config").at("system");
    const auto& s2 = m2.at("config").at("system");
    std::array<int, kSpecies> particles{};
    for (int s = 0; s < kSpecies; ++s) {
        const std::string n = species_name(s);
        if (s1.at("N_" + n) != s2.at("N_" + n) || s1.at("statistics_" + n) != s2.at("statistics_" + n))
            throw CompareError("compare: species " + n + " differs between runs");
        particles[static_cast<std::size_t>(s)] = s1.at("N_" + n).get<int>();
    }
    const auto& t1 = m1.at("config").at("truncation");
    const auto& t2 = m2.at("config").at("truncation");
    if (t1.at("G") != t2.at("G") || t1.at("L") != t2.at("L")) throw CompareError("compare: incompatible grids");
    const double dx = m1.at("grid_spacing").get<double>();

    std::array<CsvTable, kSpecies> d1, d2;
    for (int s = 0; s < kSpecies; ++s) {
        const std::string f = std::string("density_") + species_name(s) + ".csv";
        d1[static_cast<std::size_t>(s)] = read_csv(run1 / f);
        d2[static_cast<std::size_t>(s)] = read_csv(run2 / f);
        if (d1[static_cast<std::size_t>(s)].header != d2[static_cast<std::size_t>(s)].header)
            throw CompareError("compare: density grids differ");
    }
    const CsvTable p1 = read_csv(run1 / "populations.csv");
    const CsvTable p2 = read_csv(run2 / "populations.csv");

    CompareReport rep;
    for (const auto& row : d1[0].rows) {
        const double t = row[0];
        if (detail::find_time(d2[0], t) && detail::find_time(d1[1], t) && detail::find_time(d2[1], t) &&
            detail::find_time(p1, t) && detail::find_time(p2, t))
            rep.times.push_back(t);
    }
    if (rep.times.empty()) throw CompareError("compare: no common output times");

    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        CompareSeries c{std::string("Delta_") + species_name(s), {}};
        for (double t : rep.times) {
            const auto& a = d1[i].rows[*detail::find_time(d1[i], t)];
            const auto& b = d2[i].rows[*detail::find_time(d2[i], t)];
            const Eigen::Map<const RVector> ra(a.data() + 1, static_cast<Eigen::Index>(a.size() - 1));
            const Eigen::Map<const RVector> rb(b.data() + 1, static_cast<Eigen::Index>(b.size() - 1));
            c.values.push_back(density_difference(ra, rb, particles[i], dx));
        }
        rep.series.push_back(std::move(c));
    }

    auto relative = [&](const std::string& prefix, const std::string& out_prefix) {
        const auto c1 = detail::columns_with_prefix(p1, prefix);
        const auto c2 = detail::columns_with_prefix(p2, prefix);
        const std::size_t n = std::min(c1.size(), c2.size());
        for (std::size_t k = 0; k < n; ++k) {
            CompareSeries c{out_prefix + std::to_string(k + 1), {}};
            for (double t : rep.times) {
                RVector a(1), b(1);
                a << p1.rows[*detail::find_time(p1, t)][c1[k]];
                b << p2.rows[*detail::find_time(p2, t)][c2[k]];
                const auto d = population_difference(a, b, 0);
                c.values.push_back(d ? *d : std::numeric_limits<double>::quiet_NaN());
            }
            rep.series.push_back(std::move(c));
        }
    };
    relative("lambda_", "dlambda_");
    relative("nA_", "dnA_");
    relative("nB_", "dnB_");
    return rep;
}

inline nlohmann::json summary_json(const CompareReport& rep) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& s : rep.series) {
        const auto [v, t] = rep.max_of(s.name);
        j[s.name] = std::isnan(v) ? nlohmann::json{{"max", nullptr}, {"argmax", nullptr}}
                                  : nlohmann::json{{"max", v}, {"argmax", t}};
    }
    return j;
}

/// compare.csv (t, metrics...) and compare_summary.json in `dir`.
inline void write_compare(const CompareReport& rep, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> h{"t"};
    for (const auto& s : rep.series) h.push_back(s.name);
    CsvWriter w(dir / "compare.csv", h, false);
    for (std::size_t r = 0; r < rep.times.size(); ++r) {
        RVector v(static_cast<Eigen::Index>(rep.series.size()));
        for (std::size_t k = 0; k < rep.series.size(); ++k) v(static_cast<Eigen::Index>(k)) = rep.series[k].values[r];
        w.row(rep.times[r], v);
    }
    write_json(dir / "compare_summary.json", summary_json(rep));
}

}  // namespace mlx::io
