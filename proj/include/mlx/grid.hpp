#pragma once

// Uniform spatial grid, sine-DVR one-body operators and two-body interaction
// kernels. Harmonic-oscillator units throughout (hbar = 1).

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mlx {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Points x_0..x_{G-1} spanning [-L, L] with spacing 2L/(G-1).
struct Grid {
    double half_width = 0.0;
    std::size_t point_count = 0;
    double spacing = 0.0;
    RVector points;

    /// Quadrature inner product <f|g> = dx * sum_i conj(f_i) g_i.
    template <typename A, typename B>
    cplx inner(const Eigen::MatrixBase<A>& f, const Eigen::MatrixBase<B>& g) const {
        return spacing * f.dot(g);
    }
};

/// Endpoint-inclusive uniform points on [-L, L]; no minimum size.
inline RVector uniform_points(double half_width, std::size_t point_count) {
    if (point_count < 2) throw std::invalid_argument("uniform_points: need at least 2 points");
    return RVector::LinSpaced(static_cast<Eigen::Index>(point_count), -half_width, half_width);
}

inline Grid build_grid(double half_width, std::size_t point_count) {
    if (!(half_width > 0.0) || !std::isfinite(half_width))
        throw std::invalid_argument("build_grid: half width must be positive, got " +
                                    std::to_string(half_width));
    if (point_count < 8)
        throw std::invalid_argument("build_grid: need at least 8 grid points, got " +
                                    std::to_string(point_count));
    Grid g;
    g.half_width = half_width;
    g.point_count = point_count;
    g.spacing = 2.0 * half_width / static_cast<double>(point_count - 1);
    g.points = uniform_points(half_width, point_count);
    return g;
}

/// Half width of the hard-wall box underlying the sine DVR. The walls sit one
/// spacing outside the outermost grid points, where every DVR function vanishes.
inline double box_half_width(const Grid& g) { return g.half_width + g.spacing; }

/// One-body operator on the grid: a dense real-symmetric part (kinetic) plus a
/// diagonal part (potentials). Either part may be absent.
class OneBodyOperator {
public:
    enum class Kind { kinetic, potential, composite };

    static OneBodyOperator kinetic(RMatrix t) {
        OneBodyOperator op;
        op.kind_ = Kind::kinetic;
        op.dense_ = std::move(t);
        return op;
    }
    static OneBodyOperator potential(RVector v) {
        OneBodyOperator op;
        op.kind_ = Kind::potential;
        op.diagonal_ = std::move(v);
        return op;
    }

    Kind kind() const { return kind_; }
    const std::optional<RMatrix>& dense() const { return dense_; }
    const std::optional<RVector>& diagonal() const { return diagonal_; }

    Eigen::Index size() const {
        if (dense_) return dense_->rows();
        if (diagonal_) return diagonal_->size();
        return 0;
    }

    /// Full matrix representation.
    RMatrix matrix() const {
        const Eigen::Index n = size();
        RMatrix out = dense_ ? *dense_ : RMatrix::Zero(n, n);
        if (diagonal_) out.diagonal() += *diagonal_;
        return out;
    }

    /// Applies the operator to every row of `rows` (each row a grid function).
    CMatrix apply_rows(const CMatrix& rows) const {
        CMatrix out = CMatrix::Zero(rows.rows(), rows.cols());
        if (dense_) out.noalias() = rows * dense_->cast<cplx>();  // symmetric: T^T = T
        if (diagonal_) out += (rows.array().rowwise() * diagonal_->transpose().cast<cplx>().array()).matrix();
        return out;
    }

    CVector apply(const CVector& f) const {
        CVector out = CVector::Zero(f.size());
        if (dense_) out.noalias() = dense_->cast<cplx>() * f;
        if (diagonal_) out += (diagonal_->cast<cplx>().array() * f.array()).matrix();
        return out;
    }

    friend OneBodyOperator operator+(const OneBodyOperator& a, const OneBodyOperator& b) {
        if (a.size() != b.size() && a.size() != 0 && b.size() != 0)
            throw std::invalid_argument("OneBodyOperator: size mismatch in sum");
        OneBodyOperator out;
        out.kind_ = Kind::composite;
        if (a.dense_ && b.dense_) out.dense_ = *a.dense_ + *b.dense_;
        else if (a.dense_) out.dense_ = a.dense_;
        else if (b.dense_) out.dense_ = b.dense_;
        if (a.diagonal_ && b.diagonal_) out.diagonal_ = *a.diagonal_ + *b.diagonal_;
        else if (a.diagonal_) out.diagonal_ = a.diagonal_;
        else if (b.diagonal_) out.diagonal_ = b.diagonal_;
        if (!out.dense_) out.kind_ = Kind::potential;
        else if (!out.diagonal_) out.kind_ = Kind::kinetic;
        return out;
    }

private:
    Kind kind_ = Kind::composite;
    std::optional<RMatrix> dense_;
    std::optional<RVector> diagonal_;
};

/// Sine-DVR kinetic energy -(1/2M) d^2/dx^2 for the hard-wall box of
/// `box_half_width(grid)`. Closed form of Colbert and Miller for a box with
/// n = G + 1 intervals.
inline OneBodyOperator kinetic_operator(const Grid& grid, double mass) {
    if (!(mass > 0.0)) throw std::invalid_argument("kinetic_operator: mass must be positive");
    const auto G = static_cast<Eigen::Index>(grid.point_count);
    const double n = static_cast<double>(G + 1);
    const double box = 2.0 * box_half_width(grid);
    const double pi = std::numbers::pi;
    const double pref = (1.0 / (2.0 * mass)) * pi * pi / (2.0 * box * box);
    RMatrix t(G, G);
    for (Eigen::Index a = 0; a < G; ++a) {
        const double i = static_cast<double>(a + 1);
        for (Eigen::Index b = 0; b < G; ++b) {
            const double j = static_cast<double>(b + 1);
            if (a == b) {
                const double s = std::sin(pi * i / n);
                t(a, b) = pref * ((2.0 * n * n + 1.0) / 3.0 - 1.0 / (s * s));
            } else {
                const double sm = std::sin(pi * (i - j) / (2.0 * n));
                const double sp = std::sin(pi * (i + j) / (2.0 * n));
                const double sign = ((a - b) % 2 == 0) ? 1.0 : -1.0;
                t(a, b) = pref * sign * (1.0 / (sm * sm) - 1.0 / (sp * sp));
            }
        }
    }
    return OneBodyOperator::kinetic(std::move(t));
}

/// Diagonal potential (1/2) M omega^2 (x - offset)^2.
inline OneBodyOperator harmonic_potential(const Grid& grid, double offset, double frequency,
                                          double mass = 1.0) {
    RVector v = (grid.points.array() - offset).square() * (0.5 * mass * frequency * frequency);
    return OneBodyOperator::potential(std::move(v));
}

/// Two-body interaction kernel w(x, y). Contact kernels act diagonally with
/// weight g/dx; tabulated kernels carry an explicit symmetric G x G table.
class InteractionKernel {
public:
    enum class Kind { contact, tabulated };

    InteractionKernel() = default;

    static InteractionKernel contact(double strength) {
        InteractionKernel k;
        k.kind_ = Kind::contact;
        k.strength_ = strength;
        return k;
    }

    static InteractionKernel tabulated(RMatrix table, double symmetry_tol = 1e-12) {
        if (table.rows() != table.cols())
            throw std::invalid_argument("InteractionKernel: table must be square");
        const double scale = std::max(1.0, table.cwiseAbs().maxCoeff());
        if ((table - table.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * scale)
            throw std::invalid_argument("InteractionKernel: table must be symmetric");
        InteractionKernel k;
        k.kind_ = Kind::tabulated;
        k.strength_ = 1.0;
        k.table_ = std::move(table);
        return k;
    }

    Kind kind() const { return kind_; }
    double strength() const { return strength_; }
    const std::optional<RMatrix>& table() const { return table_; }

    bool is_zero() const {
        if (kind_ == Kind::contact) return strength_ == 0.0;
        return table_->isZero(0.0);
    }

    /// Kernel value w(x_i, x_j) on the grid.
    double value(const Grid& grid, Eigen::Index i, Eigen::Index j) const {
        if (kind_ == Kind::contact) return i == j ? strength_ / grid.spacing : 0.0;
        return (*table_)(i, j);
    }

    /// U(x) = int dy w(x, y) f(y) evaluated on the grid, column by column.
    /// For contact kernels this is g * f(x).
    CMatrix fold(const Grid& grid, const CMatrix& columns) const {
        if (kind_ == Kind::contact) return strength_ * columns;
        return grid.spacing * (table_->cast<cplx>() * columns);
    }

private:
    Kind kind_ = Kind::contact;
    double strength_ = 0.0;
    std::optional<RMatrix> table_;
};

}  // namespace mlx
