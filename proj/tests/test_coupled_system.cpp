#include <gtest/gtest.h>

#include "vie/coupled_system.hpp"
#include "vie/scattering.hpp"

using namespace vie;

namespace {

struct DiscSetup {
    DomainGeometry dom = DomainGeometry::disc(1.0);
    WaveParameters wave;
    VolumeGrid grid;
    BoundaryMesh mesh;
    CoefficientField cf;
    VolumeOperator op;

    DiscSetup(cplx a, double k, int n, int nodes)
        : wave(k, 2), grid(dom, n), mesh(build_boundary_mesh(dom, nodes)), cf(CoefficientField::constant(dom, wave, a)),
          op(grid, wave, cf) {}
};

}  // namespace

TEST(Coupled, TraceConsistentEquivalence) {
    DiscSetup s(2.0, 1.0, 32, 128);
    const GridField u_inc = incident_plane_wave(s.grid, s.wave, {1, 0, 0});
    const BoundaryDensity psi = trace(s.grid, s.mesh, u_inc);
    const auto sys = assemble_coupled(s.op, s.mesh, s.cf, BoundaryKernel::trace_consistent);
    const auto sol = solve_coupled(sys, u_inc, psi);
    EXPECT_FALSE(sol.near_singular);
    EXPECT_LT(sol.residual, 1e-12);
    EXPECT_LE(check_equivalence(sol.u, sol.phi, s.mesh, s.grid) / max_abs(sol.phi), 1e-8);

    const BoundaryDensity shifted = (psi.array() + 1.0).matrix();
    const auto bad = solve_coupled(sys, u_inc, shifted);
    EXPECT_GT(check_equivalence(bad.u, bad.phi, s.mesh, s.grid) / max_abs(bad.phi), 1e-3);
}

TEST(Coupled, AgreesWithDiscSeries) {
    // both the coupled volume part and the plain VIE approach the series solution
    DiscSetup s(2.0, 1.0, 48, 192);
    const MieDisc mie(1.0, s.wave, 2.0, s.wave.k_sq());
    const GridField u_inc = incident_plane_wave(s.grid, s.wave, {1, 0, 0});
    GridField ref(static_cast<Eigen::Index>(s.grid.size()));
    for (std::size_t j = 0; j < s.grid.size(); ++j) ref[static_cast<Eigen::Index>(j)] = mie.total(s.grid.center(j));
    const auto sys = assemble_coupled(s.op, s.mesh, s.cf, BoundaryKernel::trace_consistent);
    const auto sol = solve_coupled(sys, u_inc, trace(s.grid, s.mesh, u_inc));
    const auto vie = solve_vie(s.op, u_inc);
    EXPECT_LT((sol.u - ref).norm() / ref.norm(), 0.02);
    EXPECT_LT((vie.u - ref).norm() / ref.norm(), 0.02);
}

TEST(Coupled, ReducedSpectrumForLaplaceDisc) {
    // harmonic K on a circle is -1/2 on constants and 0 on other modes, so the
    // block-triangular principal part has eigenvalues a, (1 + a)/2 and 1
    const cplx a(3.0, 1.0);
    DiscSetup s(a, 0.0, 12, 32);
    const auto p = coupled_parts(s.op, s.mesh, s.cf, BoundaryKernel::nystrom);
    const auto red = assemble_reduced(p, BoundaryKernel::nystrom);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(red.op.matrix);
    std::size_t at_a = 0, at_mid = 0, at_one = 0;
    for (const auto& z : es.eigenvalues()) {
        if (std::abs(z - a) < 1e-8) ++at_a;
        else if (std::abs(z - 0.5 * (1.0 + a)) < 1e-8) ++at_mid;
        else if (std::abs(z - 1.0) < 1e-8) ++at_one;
    }
    EXPECT_EQ(at_a, s.grid.size());
    EXPECT_EQ(at_mid, s.mesh.size() - 1);
    EXPECT_EQ(at_one, 1u);
}

TEST(Coupled, BlockLayout) {
    DiscSetup s(2.0, 1.0, 12, 24);
    const auto sys = assemble_coupled(s.op, s.mesh, s.cf, BoundaryKernel::nystrom);
    EXPECT_EQ(sys.volume_unknowns, s.grid.size());
    EXPECT_EQ(sys.boundary_unknowns, s.mesh.size());
    EXPECT_EQ(sys.op.size(), s.grid.size() + s.mesh.size());
    for (Eigen::Index i = 0; i < sys.a_nodes.size(); ++i) EXPECT_EQ(sys.a_nodes[i], cplx(2.0));
}

TEST(Coupled, ZeroDataAndVanishingA) {
    DiscSetup s(2.0, 1.0, 12, 24);
    const auto sys = assemble_coupled(s.op, s.mesh, s.cf);
    const auto sol = solve_coupled(sys, GridField::Zero(static_cast<Eigen::Index>(s.grid.size())),
                                   BoundaryDensity::Zero(static_cast<Eigen::Index>(s.mesh.size())));
    EXPECT_EQ(sol.u.norm(), 0.0);
    EXPECT_EQ(sol.phi.norm(), 0.0);

    DiscSetup z(0.0, 1.0, 12, 24);
    const auto zsys = assemble_coupled(z.op, z.mesh, z.cf);
    EXPECT_THROW(solve_coupled(zsys, GridField::Ones(static_cast<Eigen::Index>(z.grid.size())),
                               BoundaryDensity::Ones(static_cast<Eigen::Index>(z.mesh.size()))),
                 std::invalid_argument);
}

TEST(Coupled, CapIsEnforced) {
    DiscSetup s(2.0, 1.0, 32, 64);
    EXPECT_THROW(assemble_coupled(s.op, s.mesh, s.cf, BoundaryKernel::nystrom, 100), std::invalid_argument);
}
