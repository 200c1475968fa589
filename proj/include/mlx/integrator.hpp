#pragma once

// Adaptive Dormand-Prince 5(4) for complex vectors.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlx/grid.hpp"

namespace mlx {

struct StepperOptions {
    double atol = 1e-8;
    double rtol = 1e-8;
    double initial_step = 1e-3;
    double max_step = 0.1;
    double min_step = 1e-13;
    std::size_t max_steps = 50'000'000;
    // Ascending block end offsets; the error norm is the largest per-block RMS.
    // Empty means one block.
    std::vector<Eigen::Index> blocks;
};

class StepSizeUnderflow : public std::runtime_error {
public:
    StepSizeUnderflow(double t, double h, CVector last_good)
        : std::runtime_error("step size underflow at t = " + std::to_string(t) + " (h = " + std::to_string(h) + ")"),
          time(t), last_good_state(std::move(last_good)) {}
    double time;
    CVector last_good_state;
};

struct StepperStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t evaluations = 0;
};

/// dy/dt = f(t, y). After every accepted step `after_step(t, y)` may modify y
/// and returns true if it did.
class DormandPrince {
public:
    using Rhs = std::function<CVector(double, const CVector&)>;
    using AfterStep = std::function<bool(double, CVector&)>;

    DormandPrince(Rhs f, StepperOptions opt) : f_(std::move(f)), opt_(opt), h_(opt.initial_step) {
        if (!(opt_.atol > 0.0) || !(opt_.rtol > 0.0)) throw std::invalid_argument("tolerances must be positive");
        if (!(opt_.max_step > 0.0) || !(opt_.initial_step > 0.0))
            throw std::invalid_argument("step sizes must be positive");
    }

    const StepperStats& stats() const { return stats_; }
    double step_size() const { return h_; }
    void set_step_size(double h) { h_ = h; }

    /// Advances y from t to t_end, landing exactly on t_end.
    void advance(double& t, CVector& y, double t_end, const AfterStep& after_step = {}) {
        if (t_end < t) throw std::invalid_argument("advance: t_end before t");
        if (!have_k1_ || k1_t_ != t || k1_.size() != y.size()) refresh(t, y);
        while (t < t_end) {
            if (stats_.accepted + stats_.rejected >= opt_.max_steps)
                throw std::runtime_error("integrator: maximum number of steps exceeded");
            double h = std::min({h_, opt_.max_step, t_end - t});
            const bool last = (t_end - t) <= h * (1.0 + 1e-12);
            if (last) h = t_end - t;
            const double err = attempt(t, y, h);
            if (err <= 1.0) {
                ++stats_.accepted;
                t = last ? t_end : t + h;
                y.swap(ynew_);
                k1_.swap(k7_);
                k1_t_ = t;
                if (after_step && after_step(t, y)) refresh(t, y);
                const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
                if (!last || fac < 1.0) h_ = std::min(h * fac, opt_.max_step);
            } else {
                ++stats_.rejected;
                h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
                if (h_ < opt_.min_step) throw StepSizeUnderflow(t, h_, y);
            }
        }
    }

private:
    void refresh(double t, const CVector& y) {
        k1_ = f_(t, y);
        ++stats_.evaluations;
        k1_t_ = t;
        have_k1_ = true;
    }

    double attempt(double t, const CVector& y, double h) {
        static constexpr double a21 = 1.0 / 5.0;
        static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
        static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
        static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                                a54 = -212.0 / 729.0;
        static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                                a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
        static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                                b6 = 11.0 / 84.0;
        static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                                e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
        constexpr double reject = std::numeric_limits<double>::infinity();
        const CVector& k1 = k1_;
        tmp_ = y + h * (a21 * k1);
        if (!tmp_.allFinite()) return reject;
        const CVector k2 = f_(t + h / 5.0, tmp_);
        tmp_ = y + h * (a31 * k1 + a32 * k2);
        if (!tmp_.allFinite()) return reject;
        const CVector k3 = f_(t + 3.0 * h / 10.0, tmp_);
        tmp_ = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        if (!tmp_.allFinite()) return reject;
        const CVector k4 = f_(t + 4.0 * h / 5.0, tmp_);
        tmp_ = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        if (!tmp_.allFinite()) return reject;
        const CVector k5 = f_(t + 8.0 * h / 9.0, tmp_);
        tmp_ = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        if (!tmp_.allFinite()) return reject;
        const CVector k6 = f_(t + h, tmp_);
        ynew_ = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        if (!ynew_.allFinite()) return reject;
        k7_ = f_(t + h, ynew_);
        stats_.evaluations += 6;
        if (!k7_.allFinite()) return reject;
        const CVector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7_);
        double e = 0.0;
        Eigen::Index begin = 0;
        auto block = [&](Eigen::Index end) {
            end = std::min(end, y.size());
            if (end <= begin) return;
            double acc = 0.0;
            for (Eigen::Index i = begin; i < end; ++i) {
                const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y(i)), std::abs(ynew_(i)));
                const double r = std::abs(err(i)) / sc;
                acc += r * r;
            }
            const double v = std::sqrt(acc / static_cast<double>(end - begin));
            if (!(v <= e)) e = v;
            begin = end;
        };
        for (const Eigen::Index end : opt_.blocks) block(end);
        block(y.size());
        return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
    }

    Rhs f_;
    StepperOptions opt_;
    double h_;
    StepperStats stats_;
    bool have_k1_ = false;
    double k1_t_ = 0.0;
    CVector k1_, k7_, ynew_, tmp_;
};

}  // namespace mlx
