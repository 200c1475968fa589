#pragma once

// Dense-vector full configuration interaction for a binary mixture in a fixed
// orbital basis: harmonic-oscillator eigenfunctions (contact integrals by
// Gauss-Hermite quadrature) or user-supplied orthonormal grid orbitals. The
// Hamiltonian is assembled from the operator-string ladders, stored sparse,
// diagonalized by Lanczos and propagated by short-iterative Lanczos.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "mlx/oracle/operator_strings.hpp"
#include "mlx/system.hpp"

namespace mlx::oracle {

inline constexpr std::size_t kFullCIMaxDimension = 20000;

/// Gauss-Hermite nodes and weights for the weight exp(-y^2). Nodes from the
/// Jacobi matrix; weights from the Christoffel sum 1 / sum_k p_k(y)^2 over the
/// orthonormal polynomials, which keeps the tail weights relatively accurate.
inline std::pair<RVector, RVector> gauss_hermite(int n) {
    RMatrix j = RMatrix::Zero(n, n);
    for (int i = 1; i < n; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(i / 2.0);
    Eigen::SelfAdjointEigenSolver<RMatrix> es(j, Eigen::EigenvaluesOnly);
    const RVector y = es.eigenvalues();
    RVector w(n);
    for (int i = 0; i < n; ++i) {
        double prev = 0.0, cur = std::pow(std::numbers::pi, -0.25), sum = 0.0;
        for (int k = 0; k < n; ++k) {
            sum += cur * cur;
            const double next = std::sqrt(2.0 / (k + 1)) * y(i) * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
            prev = cur;
            cur = next;
        }
        w(i) = 1.0 / sum;
    }
    return {y, w};
}

/// Normalized oscillator eigenfunctions chi_n(x) for mass*omega = mw, n < count,
/// as rows evaluated at `x`. With `gauss_shift` = c the rows carry the extra
/// factor exp(c x^2 / 2).
inline RMatrix hermite_functions(int count, double mw, const RVector& x, double gauss_shift = 0.0) {
    RMatrix out(count, x.size());
    const double s = std::sqrt(mw);
    for (Eigen::Index p = 0; p < x.size(); ++p) {
        const double y = s * x(p);
        double prev = 0.0;
        double cur = std::pow(mw / std::numbers::pi, 0.25) * std::exp(-0.5 * (mw - gauss_shift) * x(p) * x(p));
        for (int n = 0; n < count; ++n) {
            out(n, p) = cur;
            const double next = std::sqrt(2.0 / (n + 1)) * y * cur - std::sqrt(static_cast<double>(n) / (n + 1)) * prev;
            prev = cur;
            cur = next;
        }
    }
    return out;
}

/// One species' orbital basis: one-body matrix, two-body matrix
/// v(k*n + q, l*n + r) = <chi_k chi_q|w|chi_l chi_r> and the orbitals on the grid.
struct FullCIOrbitals {
    int count = 0;
    CMatrix h;
    CMatrix v;
    CMatrix on_grid;  // rows
};

/// Oscillator basis centered at zero for the species' mass and frequency; the
/// trap offset enters through the position matrix. Contact kernels only.
inline std::array<FullCIOrbitals, kSpecies> harmonic_orbitals(const System& sys, std::array<int, kSpecies> n_ho,
                                                              CMatrix* inter_out) {
    std::array<FullCIOrbitals, kSpecies> out;
    const auto& inter = sys.inter;
    if (inter.kind() != InteractionKernel::Kind::contact)
        throw std::invalid_argument("fullci: harmonic basis supports contact interactions only");
    const int nq = 2 * std::max(n_ho[0], n_ho[1]) + 8;
    const auto [y, wy] = gauss_hermite(nq);
    std::array<RMatrix, kSpecies> at_nodes;
    // x = y / sqrt(2 mw_ref); each of the four factors carries exp(mw_ref x^2 / 2)
    // so their product is the polynomial part against the weight exp(-y^2)
    const double mw_ref = 0.5 * (sys.species[0].mass * sys.species[0].frequency +
                                 sys.species[1].mass * sys.species[1].frequency);
    const double scale = 1.0 / std::sqrt(2.0 * mw_ref);
    const RVector x = y * scale;
    const RVector wx = wy * scale;
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        const auto& p = sys.species[i];
        if (p.intra.kind() != InteractionKernel::Kind::contact)
            throw std::invalid_argument("fullci: harmonic basis supports contact interactions only");
        const int n = n_ho[i];
        const double mw = p.mass * p.frequency;
        at_nodes[i] = hermite_functions(n, mw, x, mw_ref);
        RMatrix h = RMatrix::Zero(n, n);
        for (int k = 0; k < n; ++k) {
            h(k, k) = (k + 0.5) * p.frequency + 0.5 * p.mass * p.frequency * p.frequency * p.offset * p.offset;
            if (k + 1 < n) {
                const double xk = std::sqrt((k + 1) / (2.0 * mw));
                h(k, k + 1) = h(k + 1, k) = -p.mass * p.frequency * p.frequency * p.offset * xk;
            }
        }
        out[i].count = n;
        out[i].h = h.cast<cplx>();
        out[i].v = CMatrix::Zero(n * n, n * n);
        const RMatrix& c = at_nodes[i];
        for (int k = 0; k < n; ++k)
            for (int q = 0; q < n; ++q)
                for (int l = 0; l < n; ++l)
                    for (int r = 0; r < n; ++r) {
                        const double val = (wx.array() * c.row(k).transpose().array() * c.row(q).transpose().array() *
                                            c.row(l).transpose().array() * c.row(r).transpose().array())
                                               .sum();
                        out[i].v(k * n + q, l * n + r) = p.intra.strength() * val;
                    }
        out[i].on_grid = hermite_functions(n, mw, sys.grid.points).cast<cplx>();
    }
    const int na = n_ho[0], nb = n_ho[1];
    CMatrix w = CMatrix::Zero(na * nb, na * nb);
    for (int k = 0; k < na; ++k)
        for (int u = 0; u < nb; ++u)
            for (int q = 0; q < na; ++q)
                for (int v = 0; v < nb; ++v) {
                    const double val = (wx.array() * at_nodes[0].row(k).transpose().array() *
                                        at_nodes[1].row(u).transpose().array() * at_nodes[0].row(q).transpose().array() *
                                        at_nodes[1].row(v).transpose().array())
                                           .sum();
                    w(k * nb + u, q * nb + v) = inter.strength() * val;
                }
    *inter_out = w;
    return out;
}

/// Grid-quadrature integrals over supplied orthonormal orbital rows.
inline std::array<FullCIOrbitals, kSpecies> grid_orbitals(const System& sys,
                                                          const std::array<CMatrix, kSpecies>& rows,
                                                          CMatrix* inter_out) {
    const Grid& g = sys.grid;
    const auto G = static_cast<Eigen::Index>(g.point_count);
    auto kernel = [&](const InteractionKernel& k) {
        RMatrix t(G, G);
        for (Eigen::Index a = 0; a < G; ++a)
            for (Eigen::Index b = 0; b < G; ++b) t(a, b) = k.value(g, a, b);
        return t;
    };
    // <f1 f2|w|f3 f4> = dx^2 sum_ab conj(f1_a f2_b) w_ab f3_a f4_b
    auto pair_integral = [&](const RMatrix& w, const CMatrix& left, int n1, const CMatrix& right, int n2) {
        CMatrix out(n1 * n2, n1 * n2);
        for (int k = 0; k < n1; ++k)
            for (int l = 0; l < n1; ++l) {
                const CVector fa = left.row(k).conjugate().transpose().cwiseProduct(left.row(l).transpose());
                const CVector wf = g.spacing * g.spacing * (w.cast<cplx>().transpose() * fa);  // over a
                for (int q = 0; q < n2; ++q)
                    for (int r = 0; r < n2; ++r) {
                        const CVector fb = right.row(q).conjugate().transpose().cwiseProduct(right.row(r).transpose());
                        out(k * n2 + q, l * n2 + r) = wf.cwiseProduct(fb).sum();
                    }
            }
        return out;
    };
    std::array<FullCIOrbitals, kSpecies> out;
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        const int n = static_cast<int>(rows[i].rows());
        out[i].count = n;
        out[i].on_grid = rows[i];
        const CMatrix hr = rows[i] * sys.one_body(s).matrix().cast<cplx>();
        out[i].h = g.spacing * (rows[i].conjugate() * hr.transpose());
        out[i].v = pair_integral(kernel(sys.species[i].intra), rows[i], n, rows[i], n);
    }
    *inter_out = pair_integral(kernel(sys.inter), rows[0], out[0].count, rows[1], out[1].count);
    return out;
}

class FullCI {
public:
    using Sparse = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

    /// Oscillator basis with n_ho functions per species.
    FullCI(const System& sys, std::array<int, kSpecies> n_ho) : sys_(sys) {
        CMatrix w;
        orb_ = harmonic_orbitals(sys, n_ho, &w);
        assemble(w);
    }

    /// Fixed grid orbitals (rows orthonormal under the grid quadrature).
    FullCI(const System& sys, const std::array<CMatrix, kSpecies>& rows) : sys_(sys) {
        CMatrix w;
        orb_ = grid_orbitals(sys, rows, &w);
        assemble(w);
    }

    std::size_t dimension() const { return static_cast<std::size_t>(hamiltonian_.rows()); }
    const Sparse& hamiltonian() const { return hamiltonian_; }
    const OperatorLadder& ladder(int s) const { return *ladders_[static_cast<std::size_t>(s)]; }
    std::size_t species_dimension(int s) const { return ladders_[static_cast<std::size_t>(s)]->n0.size(); }

    double energy(const CVector& c) const { return (c.dot(hamiltonian_ * c)).real() / c.squaredNorm(); }

    /// Lowest eigenpair; dense solver up to 3000 states, Lanczos beyond.
    std::pair<double, CVector> ground_state(double tol = 1e-12) const {
        const auto D = hamiltonian_.rows();
        if (D <= 3000) {
            const CMatrix dense(hamiltonian_);
            Eigen::SelfAdjointEigenSolver<CMatrix> es(dense);
            return {es.eigenvalues()(0), es.eigenvectors().col(0)};
        }
        return lanczos_ground(tol);
    }

    /// Restarted Lanczos regardless of size.
    std::pair<double, CVector> ground_state_lanczos(double tol = 1e-12) const { return lanczos_ground(tol); }

    /// c(t) sampled at 0, stride, ..., t_final by short-iterative Lanczos.
    std::vector<CVector> propagate(const CVector& c0, double t_final, double stride, int krylov = 24) const {
        if (!(stride > 0.0)) throw std::invalid_argument("fullci: stride must be positive");
        const double radius = spectral_bound();
        const double dt_max = std::min(stride, 6.0 / std::max(1.0, radius));
        std::vector<CVector> out{c0};
        CVector c = c0;
        const auto n = static_cast<long>(std::floor(t_final / stride + 1e-9));
        for (long k = 0; k < n; ++k) {
            const int sub = static_cast<int>(std::ceil(stride / dt_max - 1e-12));
            for (int j = 0; j < sub; ++j) c = krylov_step(c, stride / sub, krylov);
            out.push_back(c);
        }
        return out;
    }

    /// c as a K_A x K_B matrix (rows A states in ladder order).
    CMatrix as_matrix(const CVector& c) const {
        const auto ka = static_cast<Eigen::Index>(species_dimension(kA));
        const auto kb = static_cast<Eigen::Index>(species_dimension(kB));
        CMatrix m(ka, kb);
        for (Eigen::Index i = 0; i < ka; ++i)
            for (Eigen::Index j = 0; j < kb; ++j) m(i, j) = c(i * kb + j);
        return m;
    }

    /// Natural species populations, descending.
    RVector natural_species_populations(const CVector& c) const {
        const CMatrix m = as_matrix(c / c.norm());
        Eigen::JacobiSVD<CMatrix> svd(m);
        return svd.singularValues().cwiseAbs2();
    }

    /// rho1(k, q) = <a+_k a_q> of species s.
    CMatrix one_body_density_matrix(const CVector& c, int s) const {
        const CMatrix m = as_matrix(c / c.norm());
        const auto& lad = ladder(s);
        const int n = orb_[static_cast<std::size_t>(s)].count;
        CMatrix rho(n, n);
        // rows of m index A states; species operators act on that index
        const CMatrix x = s == kA ? m : CMatrix(m.transpose());
        for (int k = 0; k < n; ++k)
            for (int q = 0; q < n; ++q) {
                const CMatrix e = (lad.one(k, q).cast<cplx>() * x);
                rho(k, q) = (x.conjugate().cwiseProduct(e)).sum();
            }
        return rho;
    }

    /// Unit-sum natural orbital populations, descending.
    RVector natural_orbital_populations(const CVector& c, int s) const {
        const CMatrix rho = one_body_density_matrix(c, s);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho + rho.adjoint()));
        return es.eigenvalues().reverse() / rho.trace().real();
    }

    RVector density(const CVector& c, int s) const {
        const CMatrix rho = one_body_density_matrix(c, s);
        const CMatrix& phi = orb_[static_cast<std::size_t>(s)].on_grid;
        const CMatrix t = rho.transpose() * phi.conjugate();
        return t.cwiseProduct(phi).colwise().sum().real().transpose();
    }

    /// Product-basis vector of a variational state whose orbitals are the
    /// basis of this object (grid-orbital constructor).
    CVector from_state(const Model& model, const MixtureState& st) const {
        std::array<CMatrix, kSpecies> brute;
        for (int s = 0; s < kSpecies; ++s)
            brute[static_cast<std::size_t>(s)] =
                to_brute_order(st.coeffs[static_cast<std::size_t>(s)], model.tables(s).basis, ladder(s).n0);
        const CMatrix m = brute[kA].transpose() * st.top * brute[kB];  // K_A x K_B
        CVector c(m.size());
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) c(i * m.cols() + j) = m(i, j);
        return c;
    }

private:
    // Per-state lists of (state, pair index, amplitude) grouped by the
    // intermediate state reached after annihilating one or two particles.
    struct Entry {
        Eigen::Index state;
        int pair;
        double amp;
    };

    static std::vector<std::vector<Entry>> group(const std::vector<RMatrix>& ops, int count) {
        if (ops.empty()) return {};
        std::vector<std::vector<Entry>> g(static_cast<std::size_t>(ops[0].rows()));
        for (int p = 0; p < count; ++p) {
            const RMatrix& op = ops[static_cast<std::size_t>(p)];
            for (Eigen::Index r = 0; r < op.rows(); ++r)
                for (Eigen::Index c = 0; c < op.cols(); ++c)
                    if (op(r, c) != 0.0) g[static_cast<std::size_t>(r)].push_back({c, p, op(r, c)});
        }
        return g;
    }

    /// Species Hamiltonian on the N-particle space as dense K x K.
    CMatrix species_hamiltonian(int s) const {
        const auto& lad = ladder(s);
        const auto& o = orb_[static_cast<std::size_t>(s)];
        const int n = o.count;
        const auto K = static_cast<Eigen::Index>(lad.n0.size());
        CMatrix h = CMatrix::Zero(K, K);
        for (const auto& list : group(lad.a0, n))
            for (const auto& bra : list)
                for (const auto& ket : list) h(bra.state, ket.state) += o.h(bra.pair, ket.pair) * bra.amp * ket.amp;
        if (!lad.a1.empty()) {
            // a_q a_k with pair index k*n + q
            std::vector<RMatrix> pairs;
            for (int k = 0; k < n; ++k)
                for (int q = 0; q < n; ++q)
                    pairs.push_back(lad.a1[static_cast<std::size_t>(q)] * lad.a0[static_cast<std::size_t>(k)]);
            for (const auto& list : group(pairs, n * n))
                for (const auto& bra : list)
                    for (const auto& ket : list)
                        h(bra.state, ket.state) += 0.5 * o.v(bra.pair, ket.pair) * bra.amp * ket.amp;
        }
        return h;
    }

    void assemble(const CMatrix& w) {
        for (int s = 0; s < kSpecies; ++s) {
            const auto& p = sys_.species[static_cast<std::size_t>(s)];
            ladders_[static_cast<std::size_t>(s)] =
                std::make_shared<OperatorLadder>(p.statistics, p.particles, orb_[static_cast<std::size_t>(s)].count);
        }
        const auto ka = static_cast<Eigen::Index>(species_dimension(kA));
        const auto kb = static_cast<Eigen::Index>(species_dimension(kB));
        if (static_cast<std::size_t>(ka * kb) > kFullCIMaxDimension)
            throw std::invalid_argument("fullci: dimension " + std::to_string(ka * kb) + " exceeds the cap of " +
                                        std::to_string(kFullCIMaxDimension));
        const CMatrix ha = species_hamiltonian(kA);
        const CMatrix hb = species_hamiltonian(kB);
        std::vector<Eigen::Triplet<cplx>> trip;
        for (Eigen::Index i = 0; i < ka; ++i)
            for (Eigen::Index i2 = 0; i2 < ka; ++i2)
                if (ha(i, i2) != 0.0)
                    for (Eigen::Index j = 0; j < kb; ++j) trip.emplace_back(i * kb + j, i2 * kb + j, ha(i, i2));
        for (Eigen::Index j = 0; j < kb; ++j)
            for (Eigen::Index j2 = 0; j2 < kb; ++j2)
                if (hb(j, j2) != 0.0)
                    for (Eigen::Index i = 0; i < ka; ++i) trip.emplace_back(i * kb + j, i * kb + j2, hb(j, j2));
        // sum w(k*nb + u, q*nb + v) a+_k a_q b+_u b_v
        const int na = orb_[0].count, nb = orb_[1].count;
        struct Op {
            Eigen::Index row, col;
            double amp;
        };
        auto nonzeros = [](const RMatrix& m) {
            std::vector<Op> out;
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c)
                    if (m(r, c) != 0.0) out.push_back({r, c, m(r, c)});
            return out;
        };
        std::vector<std::vector<Op>> eb(static_cast<std::size_t>(nb * nb));
        for (int u = 0; u < nb; ++u)
            for (int v = 0; v < nb; ++v) eb[static_cast<std::size_t>(u * nb + v)] = nonzeros(ladder(kB).one(u, v));
        for (int k = 0; k < na; ++k)
            for (int q = 0; q < na; ++q) {
                const auto ea = nonzeros(ladder(kA).one(k, q));
                for (int u = 0; u < nb; ++u)
                    for (int v = 0; v < nb; ++v) {
                        const cplx wv = w(k * nb + u, q * nb + v);
                        if (wv == 0.0) continue;
                        for (const auto& a : ea)
                            for (const auto& b : eb[static_cast<std::size_t>(u * nb + v)])
                                trip.emplace_back(a.row * kb + b.row, a.col * kb + b.col, wv * a.amp * b.amp);
                    }
            }
        hamiltonian_.resize(ka * kb, ka * kb);
        hamiltonian_.setFromTriplets(trip.begin(), trip.end());
        hamiltonian_.prune(cplx(0.0), 0.0);
        const Sparse diff = hamiltonian_ - Sparse(hamiltonian_.adjoint());
        for (Eigen::Index i = 0; i < diff.outerSize(); ++i)
            for (Sparse::InnerIterator it(diff, i); it; ++it)
                if (std::abs(it.value()) > 1e-10) throw std::logic_error("fullci: Hamiltonian not Hermitian");
    }

    double spectral_bound() const {
        double r = 0.0;
        for (Eigen::Index i = 0; i < hamiltonian_.outerSize(); ++i) {
            double s = 0.0;
            for (Sparse::InnerIterator it(hamiltonian_, i); it; ++it) s += std::abs(it.value());
            r = std::max(r, s);
        }
        return r;
    }

    /// Lanczos tridiagonalization with full reorthogonalization from `v0`.
    void lanczos(const CVector& v0, int n, CMatrix& basis, RVector& alpha, RVector& beta) const {
        basis.resize(v0.size(), n);
        alpha.resize(n);
        beta.resize(n);
        basis.col(0) = v0 / v0.norm();
        int used = n;
        for (int j = 0; j < n; ++j) {
            CVector w = hamiltonian_ * basis.col(j);
            alpha(j) = basis.col(j).dot(w).real();
            for (int pass = 0; pass < 2; ++pass)
                for (int i = 0; i <= j; ++i) w -= basis.col(i).dot(w) * basis.col(i);
            beta(j) = w.norm();
            if (j + 1 < n) {
                if (beta(j) < 1e-14) {
                    used = j + 1;
                    break;
                }
                basis.col(j + 1) = w / beta(j);
            }
        }
        basis.conservativeResize(Eigen::NoChange, used);
        alpha.conservativeResize(used);
        beta.conservativeResize(used);
    }

    CVector krylov_step(const CVector& c, double dt, int n) const {
        CMatrix basis;
        RVector alpha, beta;
        lanczos(c, std::min<int>(n, static_cast<int>(c.size())), basis, alpha, beta);
        const auto k = alpha.size();
        RMatrix t = RMatrix::Zero(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
            t(i, i) = alpha(i);
            if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta(i);
        }
        Eigen::SelfAdjointEigenSolver<RMatrix> es(t);
        CVector e1 = CVector::Zero(k);
        e1(0) = c.norm();
        CVector y = es.eigenvectors().cast<cplx>().transpose() * e1;
        for (Eigen::Index i = 0; i < k; ++i) y(i) *= std::polar(1.0, -es.eigenvalues()(i) * dt);
        return basis * (es.eigenvectors().cast<cplx>() * y);
    }

    std::pair<double, CVector> lanczos_ground(double tol) const {
        CVector v = CVector::Ones(hamiltonian_.rows());
        double e = 0.0;
        for (int restart = 0; restart < 200; ++restart) {
            CMatrix basis;
            RVector alpha, beta;
            lanczos(v, 60, basis, alpha, beta);
            const auto k = alpha.size();
            RMatrix t = RMatrix::Zero(k, k);
            for (Eigen::Index i = 0; i < k; ++i) {
                t(i, i) = alpha(i);
                if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta(i);
            }
            Eigen::SelfAdjointEigenSolver<RMatrix> es(t);
            e = es.eigenvalues()(0);
            v = basis * es.eigenvectors().col(0).cast<cplx>();
            v /= v.norm();
            if ((hamiltonian_ * v - e * v).norm() < tol * std::max(1.0, std::abs(e))) return {e, v};
        }
        throw std::runtime_error("fullci: Lanczos did not converge");
    }

    System sys_;
    std::array<FullCIOrbitals, kSpecies> orb_;
    std::array<std::shared_ptr<OperatorLadder>, kSpecies> ladders_;
    Sparse hamiltonian_;
};

}  // namespace mlx::oracle
