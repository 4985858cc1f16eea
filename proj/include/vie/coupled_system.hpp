#pragma once
//
// Boundary-domain system in the unknowns (u, phi), phi standing for the
// trace of u:
//
//   [ aI + A1      D(alpha .)                        ] [u  ]   [u_inc]
//   [ gamma A1     1/2 (1 + a) I + alpha K + [K, alpha] ] [phi] = [psi  ]
//
// With psi = gamma u_inc and a != 0 on the boundary, phi = gamma u and u
// solves the volume equation.
//

#include <Eigen/LU>

#include "vie/boundary_operator.hpp"
#include "vie/coefficients.hpp"
#include "vie/volume_operator.hpp"

namespace vie {

// Which discrete K enters the boundary block.
//  nystrom:          the Nystrom matrix of assemble_K.
//  trace_consistent: K := T D_h + 1/2 I, so that the discrete jump relation
//                    holds exactly for the trace T and the volume-target
//                    double layer D_h used in the other blocks.
enum class BoundaryKernel { nystrom, trace_consistent };

inline const char* to_string(BoundaryKernel b) {
    return b == BoundaryKernel::nystrom ? "nystrom" : "trace-consistent";
}

struct CoupledOperator {
    DenseOperator op;
    std::size_t volume_unknowns = 0;
    std::size_t boundary_unknowns = 0;
    BoundaryKernel kernel = BoundaryKernel::nystrom;
    Eigen::VectorXcd a_nodes;  // a on the boundary nodes

    auto volume_block() const {
        const auto N = static_cast<Eigen::Index>(volume_unknowns);
        return op.matrix.topLeftCorner(N, N);
    }
    auto boundary_block() const {
        const auto M = static_cast<Eigen::Index>(boundary_unknowns);
        return op.matrix.bottomRightCorner(M, M);
    }
};

struct CoupledParts {
    Eigen::MatrixXcd A1;        // N x N
    Eigen::MatrixXcd trace;     // M x N
    Eigen::MatrixXcd dl;        // N x M, D evaluated at cell centres
    Eigen::MatrixXcd K;         // M x M
    Eigen::VectorXcd a_volume;  // N
    Eigen::VectorXcd a_nodes;   // M
};

inline CoupledParts coupled_parts(const VolumeOperator& vop, const BoundaryMesh& mesh, const CoefficientField& coeffs,
                                  BoundaryKernel kernel, std::size_t cap = 7000) {
    if (vop.size() + mesh.size() > cap)
        throw std::invalid_argument("assemble_coupled: " + std::to_string(vop.size() + mesh.size()) +
                                    " unknowns exceed cap " + std::to_string(cap));
    CoupledParts p;
    p.A1 = vop.assemble_A1(cap).matrix;
    p.trace = TraceOperator(vop.grid(), mesh).dense();
    p.dl = DoubleLayerEvaluator(mesh, vop.wave()).matrix(vop.grid().centers());
    p.a_volume = vop.a_values();
    p.a_nodes.resize(static_cast<Eigen::Index>(mesh.size()));
    for (std::size_t i = 0; i < mesh.size(); ++i)
        p.a_nodes[static_cast<Eigen::Index>(i)] = coeffs.a_inside(mesh.nodes[i].x);
    const auto M = static_cast<Eigen::Index>(mesh.size());
    if (kernel == BoundaryKernel::nystrom)
        p.K = assemble_K(mesh, vop.wave()).matrix;
    else
        p.K = p.trace * p.dl + 0.5 * Eigen::MatrixXcd::Identity(M, M);
    return p;
}

inline CoupledOperator assemble_coupled(const CoupledParts& p, BoundaryKernel kernel) {
    const auto N = p.A1.rows();
    const auto M = p.K.rows();
    CoupledOperator c;
    c.volume_unknowns = static_cast<std::size_t>(N);
    c.boundary_unknowns = static_cast<std::size_t>(M);
    c.kernel = kernel;
    c.a_nodes = p.a_nodes;
    c.op.volume_unknowns = c.volume_unknowns;
    c.op.boundary_unknowns = c.boundary_unknowns;
    c.op.matrix.resize(N + M, N + M);
    const Eigen::VectorXcd alpha_nodes = p.a_nodes.array() - 1.0;
    c.op.matrix.topLeftCorner(N, N) = p.A1;
    c.op.matrix.topLeftCorner(N, N).diagonal() += p.a_volume;
    c.op.matrix.topRightCorner(N, M) = p.dl * alpha_nodes.asDiagonal();
    c.op.matrix.bottomLeftCorner(M, N) = p.trace * p.A1;
    Eigen::MatrixXcd B = alpha_nodes.asDiagonal() * p.K + commutator_matrix(DenseOperator{p.K}, alpha_nodes);
    B.diagonal() += 0.5 * (1.0 + p.a_nodes.array()).matrix();
    c.op.matrix.bottomRightCorner(M, M) = B;
    return c;
}

inline CoupledOperator assemble_coupled(const VolumeOperator& vop, const BoundaryMesh& mesh,
                                        const CoefficientField& coeffs,
                                        BoundaryKernel kernel = BoundaryKernel::trace_consistent,
                                        std::size_t cap = 7000) {
    return assemble_coupled(coupled_parts(vop, mesh, coeffs, kernel, cap), kernel);
}

// Upper-triangular principal part: A1, the smoothing coupling and [K, alpha]
// dropped, i.e. [[aI, D(alpha .)], [0, 1/2 (1 + a) I + alpha K]].
inline CoupledOperator assemble_reduced(const CoupledParts& p, BoundaryKernel kernel) {
    const auto N = p.A1.rows();
    const auto M = p.K.rows();
    CoupledOperator c;
    c.volume_unknowns = static_cast<std::size_t>(N);
    c.boundary_unknowns = static_cast<std::size_t>(M);
    c.kernel = kernel;
    c.a_nodes = p.a_nodes;
    c.op.volume_unknowns = c.volume_unknowns;
    c.op.boundary_unknowns = c.boundary_unknowns;
    c.op.matrix = Eigen::MatrixXcd::Zero(N + M, N + M);
    const Eigen::VectorXcd alpha_nodes = p.a_nodes.array() - 1.0;
    c.op.matrix.topLeftCorner(N, N).diagonal() = p.a_volume;
    c.op.matrix.topRightCorner(N, M) = p.dl * alpha_nodes.asDiagonal();
    Eigen::MatrixXcd B = alpha_nodes.asDiagonal() * p.K;
    B.diagonal() += 0.5 * (1.0 + p.a_nodes.array()).matrix();
    c.op.matrix.bottomRightCorner(M, M) = B;
    return c;
}

struct CoupledSolution {
    GridField u;
    BoundaryDensity phi;
    double rcond = 0.0;
    bool near_singular = false;
    double residual = 0.0;  // relative
};

inline CoupledSolution solve_coupled(const CoupledOperator& sys, const GridField& u_inc, const BoundaryDensity& psi) {
    const auto N = static_cast<Eigen::Index>(sys.volume_unknowns);
    const auto M = static_cast<Eigen::Index>(sys.boundary_unknowns);
    if (u_inc.size() != N || psi.size() != M) throw std::invalid_argument("solve_coupled: data length mismatch");
    for (Eigen::Index i = 0; i < sys.a_nodes.size(); ++i)
        if (std::abs(sys.a_nodes[i]) == 0.0)
            throw std::invalid_argument("solve_coupled: a vanishes at boundary node " + std::to_string(i));
    Eigen::VectorXcd rhs(N + M);
    rhs << u_inc, psi;
    CoupledSolution s;
    if (rhs.norm() == 0.0) {
        s.u = GridField::Zero(N);
        s.phi = BoundaryDensity::Zero(M);
        s.rcond = Eigen::PartialPivLU<Eigen::MatrixXcd>(sys.op.matrix).rcond();
        s.near_singular = s.rcond < 1e-13;
        return s;
    }
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(sys.op.matrix);
    s.rcond = lu.rcond();
    s.near_singular = s.rcond < 1e-13;
    Eigen::VectorXcd x = lu.solve(rhs);
    s.residual = (sys.op.matrix * x - rhs).norm() / rhs.norm();
    s.u = x.head(N);
    s.phi = x.tail(M);
    return s;
}

// ||phi - trace(u)||_inf
inline double check_equivalence(const GridField& u, const BoundaryDensity& phi, const BoundaryMesh& mesh,
                                const VolumeGrid& grid) {
    return max_abs(phi - trace(grid, mesh, u));
}

}  // namespace vie
