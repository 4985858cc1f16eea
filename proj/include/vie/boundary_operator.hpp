#pragma once
//
// Boundary side of the problem: trace of grid fields, the double layer
// potential
//   D phi(x) = int_Gamma d/dn(y) G_k(x - y) phi(y) ds(y),
// its boundary operator K and the commutator [K, alpha].
//
// With G_k solving -(Delta + k^2) G = delta the Gauss identity reads
// D1 = -1 inside, and the interior limit is gamma D phi = -1/2 phi + K phi.
//

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

#include "vie/geometry.hpp"
#include "vie/special_functions.hpp"
#include "vie/volume_operator.hpp"

namespace vie {

// d/dn(y) G_k(x - y)
inline cplx double_layer_kernel(const WaveParameters& wave, const Vec& x, const Vec& y, const Vec& n) {
    const CVec g = greens_gradient(wave, x - y);
    return -(g[0] * n[0] + g[1] * n[1] + g[2] * n[2]);
}

inline double laplace_double_layer_kernel(int dim, const Vec& x, const Vec& y, const Vec& n) {
    const Vec z = x - y;
    const double r2 = dot(z, z);
    return dim == 3 ? dot(z, n) / (4.0 * pi * r2 * std::sqrt(r2)) : dot(z, n) / (2.0 * pi * r2);
}

// Sparse trace: each node value is a least-squares linear fit over the
// nearest included cell centres, evaluated at the node.
class TraceOperator {
public:
    struct Weight {
        std::size_t cell;
        double value;
    };

    TraceOperator(const VolumeGrid& grid, const BoundaryMesh& mesh, int max_cells = 6)
        : cells_(grid.size()), rows_(mesh.size()) {
        const int d = grid.dimension();
        const double h = grid.spacing();
        for (std::size_t i = 0; i < mesh.size(); ++i) {
            const Vec& x0 = mesh.nodes[i].x;
            std::array<int, 3> c0{};
            for (int a = 0; a < d; ++a) c0[a] = static_cast<int>(std::floor((x0[a] - grid.origin()[a]) / h));
            std::vector<std::pair<double, std::size_t>> cand;
            const int lo2 = d == 3 ? -3 : 0, hi2 = d == 3 ? 3 : 0;
            for (int dk = lo2; dk <= hi2; ++dk)
                for (int dj = -3; dj <= 3; ++dj)
                    for (int di = -3; di <= 3; ++di) {
                        const long idx = grid.index({c0[0] + di, c0[1] + dj, c0[2] + dk});
                        if (idx < 0) continue;
                        const double r = norm(grid.center(static_cast<std::size_t>(idx)) - x0);
                        if (r <= 3.0 * h) cand.emplace_back(r, static_cast<std::size_t>(idx));
                    }
            std::sort(cand.begin(), cand.end());
            if (static_cast<int>(cand.size()) < d + 1)
                throw std::invalid_argument("trace: fewer than " + std::to_string(d + 1) +
                                            " included cells within 3h of boundary node " + std::to_string(i));
            cand.resize(std::min<std::size_t>(cand.size(), static_cast<std::size_t>(max_cells)));
            Eigen::MatrixXd V(static_cast<Eigen::Index>(cand.size()), d + 1);
            for (std::size_t r = 0; r < cand.size(); ++r) {
                const Vec dx = grid.center(cand[r].second) - x0;
                V(static_cast<Eigen::Index>(r), 0) = 1.0;
                for (int a = 0; a < d; ++a) V(static_cast<Eigen::Index>(r), a + 1) = dx[a] / h;
            }
            const Eigen::MatrixXd pinv = V.completeOrthogonalDecomposition().pseudoInverse();
            for (std::size_t r = 0; r < cand.size(); ++r)
                rows_[i].push_back({cand[r].second, pinv(0, static_cast<Eigen::Index>(r))});
        }
    }

    std::size_t rows() const { return rows_.size(); }
    std::size_t cols() const { return cells_; }
    const std::vector<Weight>& row(std::size_t i) const { return rows_[i]; }

    BoundaryDensity apply(const GridField& u) const {
        if (static_cast<std::size_t>(u.size()) != cells_) throw std::invalid_argument("trace: field length mismatch");
        BoundaryDensity out(static_cast<Eigen::Index>(rows_.size()));
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            cplx s = 0.0;
            for (const auto& w : rows_[i]) s += w.value * u[static_cast<Eigen::Index>(w.cell)];
            out[static_cast<Eigen::Index>(i)] = s;
        }
        return out;
    }

    Eigen::MatrixXcd dense() const {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(cells_));
        for (std::size_t i = 0; i < rows_.size(); ++i)
            for (const auto& w : rows_[i]) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(w.cell)) += w.value;
        return m;
    }

private:
    std::size_t cells_;
    std::vector<std::vector<Weight>> rows_;
};

inline BoundaryDensity trace(const VolumeGrid& grid, const BoundaryMesh& mesh, const GridField& u) {
    return TraceOperator(grid, mesh).apply(u);
}

namespace detail {

// Trigonometric interpolation weight of node 0 at parameter offset x for m
// equispaced nodes on [0, 2 pi).
inline double periodic_sinc(int m, double x) {
    x = std::remainder(x, 2.0 * pi);
    const double s = std::sin(0.5 * x);
    if (std::abs(s) < 1e-15) return 1.0;
    const double num = std::sin(0.5 * m * x);
    return m % 2 == 0 ? num / (m * std::tan(0.5 * x)) : num / (m * s);
}

// Parameter of the point on x = (ax cos t, ay sin t) closest to p.
inline double ellipse_closest_parameter(double ax, double ay, const Vec& p) {
    double t = std::atan2(p[1] / ay, p[0] / ax);
    for (int it = 0; it < 50; ++it) {
        const double c = std::cos(t), s = std::sin(t);
        const double dx = ax * c - p[0], dy = ay * s - p[1];
        const double g = -dx * ax * s + dy * ay * c;
        const double gp = ax * ax * s * s + ay * ay * c * c - dx * ax * c - dy * ay * s;
        if (gp <= 0.0) break;
        const double step = g / gp;
        t -= step;
        if (std::abs(step) < 1e-15) break;
    }
    return t;
}

}  // namespace detail

// Rows of the double layer potential map phi -> D phi(x) for interior
// targets. Targets closer than three node spacings use singularity
// subtraction against the Gauss identity; on smooth closed curves the
// density is additionally refined by trigonometric interpolation onto an
// oversampled copy of the curve.
class DoubleLayerEvaluator {
public:
    DoubleLayerEvaluator(const BoundaryMesh& mesh, const WaveParameters& wave, int oversample = 8)
        : mesh_(mesh), wave_(wave), oversample_(oversample) {
        if (mesh.dimension != wave.dim) throw std::invalid_argument("double layer: dimension mismatch");
        if (mesh.periodic_parameterization && oversample_ > 1) {
            const int m = static_cast<int>(mesh.size());
            const int F = oversample_ * m;
            fine_ = detail::smooth_curve_mesh(mesh.semi_x, mesh.semi_y, F);
            interp_.resize(F, m);
            for (int f = 0; f < F; ++f)
                for (int j = 0; j < m; ++j) interp_(f, j) = detail::periodic_sinc(m, 2.0 * pi * (f - oversample_ * j) / F);
        }
    }

    const BoundaryMesh& mesh() const { return mesh_; }

    Eigen::RowVectorXcd row(const Vec& x) const {
        const auto M = static_cast<Eigen::Index>(mesh_.size());
        Eigen::RowVectorXcd out = Eigen::RowVectorXcd::Zero(M);
        double dmin = std::numeric_limits<double>::infinity();
        std::size_t nearest = 0;
        for (std::size_t j = 0; j < mesh_.size(); ++j) {
            const double r = norm(x - mesh_.nodes[j].x);
            if (r < dmin) {
                dmin = r;
                nearest = j;
            }
        }
        if (dmin >= 3.0 * mesh_.mean_spacing()) {
            for (std::size_t j = 0; j < mesh_.size(); ++j) {
                const auto& nd = mesh_.nodes[j];
                out[static_cast<Eigen::Index>(j)] = nd.weight * double_layer_kernel(wave_, x, nd.x, nd.normal);
            }
            return out;
        }
        const int dim = mesh_.dimension;
        const bool laplace = wave_.dim == 2 && wave_.k_real() == 0.0;
        if (!fine_.nodes.empty()) {
            const int m = static_cast<int>(mesh_.size());
            const double tstar = detail::ellipse_closest_parameter(mesh_.semi_x, mesh_.semi_y, x);
            Eigen::RowVectorXd at_star(M);
            for (int j = 0; j < m; ++j) at_star[j] = detail::periodic_sinc(m, tstar - 2.0 * pi * j / m);
            const int F = static_cast<int>(fine_.size());
            // out = c^T P - (sum_f w_f k0_f + 1) at_star, c_f = w_f (k0_f + kd_f)
            // Nodes with large Laplace weight are subtracted row by row to
            // avoid cancellation when x approaches the curve.
            Eigen::RowVectorXcd c = Eigen::RowVectorXcd::Zero(F);
            double k0_sum = 0.0;
            for (int f = 0; f < F; ++f) {
                const auto& nd = fine_.nodes[static_cast<std::size_t>(f)];
                if (nd.x == x) continue;
                const double k0 = laplace_double_layer_kernel(dim, x, nd.x, nd.normal);
                const cplx kt = laplace ? cplx(k0) : double_layer_kernel(wave_, x, nd.x, nd.normal);
                const double w0 = nd.weight * k0;
                if (std::abs(w0) > 1.0) {
                    // a fine node at the foot point contributes w0 (phi(y_f) - phi(y*)) = 0
                    const double dt = std::remainder(2.0 * pi * f / F - tstar, 2.0 * pi);
                    if (std::abs(dt) > 1e-7 * 2.0 * pi / F) out += w0 * (interp_.row(f) - at_star).cast<cplx>();
                    c[f] = nd.weight * (kt - k0);
                } else {
                    c[f] = nd.weight * kt;
                    k0_sum += w0;
                }
            }
            out += c * interp_.cast<cplx>();
            out -= (k0_sum + 1.0) * at_star.cast<cplx>();
            return out;
        }
        // nodes of polygons and spheres: subtract the nearest node value
        for (std::size_t j = 0; j < mesh_.size(); ++j) {
            const auto& nd = mesh_.nodes[j];
            if (nd.x == x) continue;
            out[static_cast<Eigen::Index>(j)] += nd.weight * double_layer_kernel(wave_, x, nd.x, nd.normal);
            const double k0 = laplace_double_layer_kernel(dim, x, nd.x, nd.normal);
            out[static_cast<Eigen::Index>(nearest)] -= nd.weight * k0;
        }
        out[static_cast<Eigen::Index>(nearest)] -= 1.0;
        return out;
    }

    Eigen::MatrixXcd matrix(const std::vector<Vec>& targets) const {
        Eigen::MatrixXcd m(static_cast<Eigen::Index>(targets.size()), static_cast<Eigen::Index>(mesh_.size()));
        for (std::size_t t = 0; t < targets.size(); ++t) m.row(static_cast<Eigen::Index>(t)) = row(targets[t]);
        return m;
    }

private:
    const BoundaryMesh& mesh_;
    WaveParameters wave_;
    int oversample_;
    BoundaryMesh fine_;
    Eigen::MatrixXd interp_;  // fine nodes x coarse nodes
};

inline Eigen::VectorXcd double_layer_potential(const BoundaryMesh& mesh, const WaveParameters& wave,
                                               const BoundaryDensity& phi, const std::vector<Vec>& targets) {
    if (static_cast<std::size_t>(phi.size()) != mesh.size())
        throw std::invalid_argument("double_layer_potential: density length mismatch");
    DoubleLayerEvaluator ev(mesh, wave);
    Eigen::VectorXcd out(static_cast<Eigen::Index>(targets.size()));
    for (std::size_t t = 0; t < targets.size(); ++t) out[static_cast<Eigen::Index>(t)] = ev.row(targets[t]) * phi;
    return out;
}

// Nystrom matrix of K. Smooth curves use the curvature limit -kappa/(4 pi)
// on the diagonal, polygon rows drop the self node, and on the sphere the
// self node is dropped as well (low order).
inline DenseOperator assemble_K(const BoundaryMesh& mesh, const WaveParameters& wave) {
    if (mesh.dimension != wave.dim) throw std::invalid_argument("assemble_K: dimension mismatch");
    const auto M = static_cast<Eigen::Index>(mesh.size());
    DenseOperator op;
    op.matrix = Eigen::MatrixXcd::Zero(M, M);
    op.boundary_unknowns = mesh.size();
    for (Eigen::Index i = 0; i < M; ++i) {
        const auto& xi = mesh.nodes[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < M; ++j) {
            const auto& yj = mesh.nodes[static_cast<std::size_t>(j)];
            if (i == j) {
                if (mesh.dimension == 2 && mesh.smooth) op.matrix(i, j) = -yj.curvature / (4.0 * pi) * yj.weight;
                continue;
            }
            if (xi.edge >= 0 && xi.edge == yj.edge) continue;  // straight edge: kernel vanishes
            op.matrix(i, j) = yj.weight * double_layer_kernel(wave, xi.x, yj.x, yj.normal);
        }
    }
    return op;
}

// max_i |gamma D phi - (-1/2 phi + K phi)| with the interior limit taken by
// Richardson extrapolation from three offsets along -n.
inline double jump_relation_check(const BoundaryMesh& mesh, const WaveParameters& wave, const BoundaryDensity& phi) {
    if (static_cast<std::size_t>(phi.size()) != mesh.size())
        throw std::invalid_argument("jump_relation_check: density length mismatch");
    const DenseOperator K = assemble_K(mesh, wave);
    const BoundaryDensity rhs = -0.5 * phi + K.matrix * phi;
    DoubleLayerEvaluator ev(mesh, wave);
    const double c = 2.0 * mesh.mean_spacing();
    double worst = 0.0;
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        const auto& nd = mesh.nodes[i];
        cplx f[3];
        for (int j = 0; j < 3; ++j) {
            const double eps = c * std::ldexp(1.0, -j);
            f[j] = ev.row(nd.x - eps * nd.normal) * phi;
        }
        const cplx limit = (8.0 * f[2] - 6.0 * f[1] + f[0]) / 3.0;
        worst = std::max(worst, std::abs(limit - rhs[static_cast<Eigen::Index>(i)]));
    }
    return worst;
}

// K diag(alpha) - diag(alpha) K
inline Eigen::MatrixXcd commutator_matrix(const DenseOperator& K, const Eigen::VectorXcd& alpha_nodes) {
    return K.matrix * alpha_nodes.asDiagonal() - alpha_nodes.asDiagonal() * K.matrix;
}

inline BoundaryDensity commutator_K_alpha(const BoundaryMesh& mesh, const WaveParameters& wave,
                                          const Eigen::VectorXcd& alpha_nodes, const BoundaryDensity& phi) {
    if (static_cast<std::size_t>(alpha_nodes.size()) != mesh.size() || static_cast<std::size_t>(phi.size()) != mesh.size())
        throw std::invalid_argument("commutator_K_alpha: length mismatch");
    const DenseOperator K = assemble_K(mesh, wave);
    return K.matrix * alpha_nodes.cwiseProduct(phi) - alpha_nodes.cwiseProduct(K.matrix * phi);
}

}  // namespace vie
