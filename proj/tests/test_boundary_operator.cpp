#include <gtest/gtest.h>

#include "vie/boundary_operator.hpp"

using namespace vie;

namespace {

BoundaryDensity fourier_mode(const BoundaryMesh& mesh, int m) {
    BoundaryDensity phi(static_cast<Eigen::Index>(mesh.size()));
    for (std::size_t i = 0; i < mesh.size(); ++i)
        phi[static_cast<Eigen::Index>(i)] = std::exp(cplx(0.0, m * std::atan2(mesh.nodes[i].x[1], mesh.nodes[i].x[0])));
    return phi;
}

// Double layer of e^{i m theta} on a circle of radius R at interior radius r,
// from the addition theorem for H_0.
cplx disc_double_layer(int m, double k, double R, double r) {
    return cplx(0, 0.5 * pi) * k * R * bessel_j(m, k * r) * hankel1_prime(m, k * R);
}

}  // namespace

TEST(DoubleLayer, LaplaceKernelOnCircleIsConstant) {
    const WaveParameters w(0.0, 2);
    const double R = 1.5;
    const Vec x{R * std::cos(0.3), R * std::sin(0.3), 0}, y{R * std::cos(2.1), R * std::sin(2.1), 0};
    const Vec n = (1.0 / R) * y;
    EXPECT_NEAR(double_layer_kernel(w, x, y, n).real(), -1.0 / (4.0 * pi * R), 1e-15);
    EXPECT_NEAR(laplace_double_layer_kernel(2, x, y, n), -1.0 / (4.0 * pi * R), 1e-15);
}

TEST(DoubleLayer, GaussIdentity) {
    const WaveParameters w(0.0, 2);
    for (const auto& dom : {DomainGeometry::ellipse(1.0, 0.6), DomainGeometry::square(0.5)}) {
        const auto mesh = build_boundary_mesh(dom, 256);
        const BoundaryDensity one = BoundaryDensity::Ones(static_cast<Eigen::Index>(mesh.size()));
        const auto v = double_layer_potential(mesh, w, one, {{0.1, 0.05, 0}, {0.3, -0.2, 0}, {0.45, 0.0, 0}});
        for (Eigen::Index i = 0; i < v.size(); ++i) EXPECT_LT(std::abs(v[i] + 1.0), 1e-3) << i;
    }
}

TEST(DoubleLayer, DiscSeriesInterior) {
    const auto mesh = build_boundary_mesh(DomainGeometry::disc(1.0), 128);
    for (double k : {0.0, 1.0, 3.0}) {
        const WaveParameters w(k, 2);
        for (int m : {0, 1, 3}) {
            const BoundaryDensity phi = fourier_mode(mesh, m);
            for (double r : {0.4, 0.97}) {
                const double th = 0.7;
                const cplx got = double_layer_potential(mesh, w, phi, {{r * std::cos(th), r * std::sin(th), 0}})[0];
                // Laplace: -1 for m = 0, -(r/R)^m / 2 otherwise
                const cplx expect = k == 0.0 ? (m == 0 ? cplx(-1.0) : cplx(-0.5 * std::pow(r, m)))
                                             : disc_double_layer(m, k, 1.0, r);
                EXPECT_LT(std::abs(got - expect * std::exp(cplx(0, m * th))), 1e-8) << k << " " << m << " " << r;
            }
        }
    }
}

TEST(JumpRelation, DiscModes) {
    const auto mesh = build_boundary_mesh(DomainGeometry::disc(1.0), 256);
    for (double k : {0.0, 1.0})
        for (int m : {0, 1, 3}) EXPECT_LE(jump_relation_check(mesh, WaveParameters(k, 2), fourier_mode(mesh, m)), 1e-3);
}

TEST(JumpRelation, Ellipse) {
    const auto mesh = build_boundary_mesh(DomainGeometry::ellipse(1.0, 0.6), 256);
    EXPECT_LE(jump_relation_check(mesh, WaveParameters(1.0, 2), fourier_mode(mesh, 2)), 1e-3);
}

TEST(NeumannPoincare, HarmonicDiscSpectrum) {
    const auto mesh = build_boundary_mesh(DomainGeometry::disc(1.0), 256);
    const Eigen::MatrixXcd K = assemble_K(mesh, WaveParameters(0.0, 2)).matrix;
    const auto M = K.rows();
    EXPECT_LT(max_abs(K * BoundaryDensity::Ones(M) + 0.5 * BoundaryDensity::Ones(M)), 1e-10);
    for (int m = 1; m <= 8; ++m) EXPECT_LT(max_abs(K * fourier_mode(mesh, m)), 1e-10) << m;
}

TEST(NeumannPoincare, HelmholtzDiscEigenvalues) {
    // K e^{i m theta} = (lim_{r -> R} D e^{i m theta} + 1/2) e^{i m theta}
    const auto mesh = build_boundary_mesh(DomainGeometry::disc(1.0), 256);
    const double k = 1.0;
    const Eigen::MatrixXcd K = assemble_K(mesh, WaveParameters(k, 2)).matrix;
    for (int m : {0, 1, 2, 5}) {
        const BoundaryDensity phi = fourier_mode(mesh, m);
        const cplx lambda = disc_double_layer(m, k, 1.0, 1.0) + 0.5;
        EXPECT_LT(max_abs(K * phi - lambda * phi), 1e-4) << m;
    }
}

TEST(Trace, ReproducesLinearFunctions) {
    const auto dom = DomainGeometry::ellipse(1.0, 0.7);
    const VolumeGrid g(dom, 32);
    const auto mesh = build_boundary_mesh(dom, 100);
    GridField u(static_cast<Eigen::Index>(g.size()));
    for (std::size_t j = 0; j < g.size(); ++j) u[static_cast<Eigen::Index>(j)] = cplx(1.0 + g.center(j)[0], -2.0 * g.center(j)[1]);
    const BoundaryDensity t = trace(g, mesh, u);
    for (std::size_t i = 0; i < mesh.size(); ++i)
        EXPECT_LT(std::abs(t[static_cast<Eigen::Index>(i)] - cplx(1.0 + mesh.nodes[i].x[0], -2.0 * mesh.nodes[i].x[1])),
                  1e-12);
}

TEST(Commutator, VanishesForConstantAlpha) {
    const auto mesh = build_boundary_mesh(DomainGeometry::square(0.5), 64);
    const WaveParameters w(1.0, 2);
    const auto M = static_cast<Eigen::Index>(mesh.size());
    const Eigen::VectorXcd alpha = Eigen::VectorXcd::Constant(M, cplx(1.0, 2.0));
    const BoundaryDensity phi = BoundaryDensity::LinSpaced(M, 0.0, 1.0);
    EXPECT_LT(max_abs(commutator_K_alpha(mesh, w, alpha, phi)), 1e-13);
    Eigen::VectorXcd varying = alpha;
    varying[0] = 5.0;
    EXPECT_GT(max_abs(commutator_K_alpha(mesh, w, varying, phi)), 1e-6);
}
