#include <gtest/gtest.h>

#include <random>

#include "vie/volume_operator.hpp"

using namespace vie;

namespace {

GridField random_field(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    GridField u(static_cast<Eigen::Index>(n));
    for (auto& z : u) z = cplx(nd(rng), nd(rng));
    return u;
}

GridField bump(const VolumeGrid& g) {
    GridField v(static_cast<Eigen::Index>(g.size()));
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double t = dot(g.center(j), g.center(j));
        v[static_cast<Eigen::Index>(j)] = t < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t)) : 0.0;
    }
    return v;
}

}  // namespace

TEST(VolumeOperatorTest, FftMatchesDirect) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.0, 2);
    for (const auto& cf : {CoefficientField::constant(dom, w, 2.0, 3.0), CoefficientField::smooth_bump(dom, w, 2.0)}) {
        const VolumeGrid g(dom, 24);
        const VolumeOperator op(g, w, cf);
        const GridField u = random_field(g.size(), 1);
        const GridField d = op.apply(u);
        EXPECT_LT((d - op.apply_fft(u)).norm() / d.norm(), 1e-10) << cf.name();
        const GridField d1 = op.apply_A1_direct(u);
        EXPECT_LT((d1 - op.apply_A1(u)).norm() / d1.norm(), 1e-10) << cf.name();
    }
}

TEST(VolumeOperatorTest, FftMatchesDirectInThreeDimensions) {
    const auto dom = DomainGeometry::ball(1.0);
    const WaveParameters w(1.0, 3);
    const VolumeGrid g(dom, 8);
    const VolumeOperator op(g, w, CoefficientField::constant(dom, w, 2.0));
    const GridField u = random_field(g.size(), 2);
    const GridField d = op.apply(u);
    EXPECT_LT((d - op.apply_fft(u)).norm() / d.norm(), 1e-10);
}

TEST(VolumeOperatorTest, AdjointAgreesWithDenseMatrix) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.5, 2);
    const VolumeGrid g(dom, 16);
    const VolumeOperator op(g, w, CoefficientField::constant(dom, w, cplx(3.0, 1.0)));
    const Eigen::MatrixXcd A =
        Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size())) -
        op.assemble_identity_minus_A().matrix;
    const GridField u = random_field(g.size(), 3), v = random_field(g.size(), 4);
    EXPECT_LT((A * u - op.apply_fft(u)).norm() / (A * u).norm(), 1e-10);
    EXPECT_LT((A.adjoint() * v - op.apply_adjoint_fft(v)).norm() / (A.adjoint() * v).norm(), 1e-10);
}

TEST(VolumeOperatorTest, ZeroContrastIsZero) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(2.0, 2);
    const VolumeGrid g(dom, 20);
    const VolumeOperator op(g, w, CoefficientField::constant(dom, w, 1.0));
    EXPECT_EQ(op.apply_fft(random_field(g.size(), 5)).norm(), 0.0);
}

TEST(VolumeOperatorTest, NewtonPotentialOfUnitDisc) {
    // -Delta N = 1 on the unit disc, N = (1 - r^2)/4 inside
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(0.0, 2);
    double prev = 1.0;
    for (int n : {16, 32, 64}) {
        const VolumeGrid g(dom, n);
        const GridField one = GridField::Ones(static_cast<Eigen::Index>(g.size()));
        const auto N = newton_potential(g, w, one, {{0.0, 0.0, 0.0}, {0.5, 0.0, 0.0}, {2.0, 0.0, 0.0}});
        const double err = std::max({std::abs(N[0] - 0.25), std::abs(N[1] - 0.1875),
                                     std::abs(N[2] + 0.5 * std::log(2.0))});
        EXPECT_LT(err, 0.02) << n;
        EXPECT_LT(err, prev) << n;
        prev = err;
    }
}

TEST(VolumeOperatorTest, NewtonResidualDecreases) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.0, 2);
    std::vector<double> r;
    for (int n : {32, 64, 128}) {
        const VolumeGrid g(dom, n);
        r.push_back(newton_residual(g, w, bump(g)).max_residual);
    }
    EXPECT_GT(r[0], r[1]);
    EXPECT_GT(r[1], r[2]);
    EXPECT_LT(r[2], 1e-3);
}

TEST(VolumeOperatorTest, SmoothFormConverges) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.0, 2);
    const auto cf = CoefficientField::smooth_bump(dom, w, 2.0);
    std::vector<double> d;
    for (int n : {32, 64, 128}) {
        const VolumeGrid g(dom, n);
        const VolumeOperator op(g, w, cf);
        const GridField u = random_field(g.size(), 7);
        d.push_back((op.apply_fft(u) - op.apply_smooth_form(u)).norm() / u.norm());
    }
    EXPECT_GT(d[0], d[1]);
    EXPECT_GT(d[1], d[2]);
    EXPECT_THROW(VolumeOperator(VolumeGrid(dom, 16), w, CoefficientField::constant(dom, w, 2.0))
                     .apply_smooth_form(GridField::Ones(1)),
                 std::invalid_argument);
}

TEST(VolumeOperatorTest, NormBoundedForSmoothCoefficient) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.0, 2);
    const auto cf = CoefficientField::smooth_bump(dom, w, 2.0);
    std::vector<double> nv;
    for (int n : {24, 48, 96}) {
        const VolumeGrid g(dom, n);
        const VolumeOperator op(g, w, cf);
        nv.push_back(operator_norm_estimate([&op](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return op.apply_fft(x); },
                                            [&op](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
                                                return op.apply_adjoint_fft(x);
                                            },
                                            static_cast<Eigen::Index>(g.size())));
    }
    for (std::size_t i = 1; i < nv.size(); ++i) EXPECT_LT(std::abs(nv[i] - nv[i - 1]) / nv[i - 1], 0.25);
}

TEST(VolumeOperatorTest, NormEstimateOfDiagonalMatrix) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(5, 5);
    m.diagonal() << 1.0, cplx(0, -4.0), 2.0, 0.5, 3.0;
    EXPECT_NEAR(operator_norm_estimate(m, 3, 200), 4.0, 1e-6);
}

TEST(VolumeOperatorTest, DenseCapIsEnforced) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.0, 2);
    const VolumeOperator op(VolumeGrid(dom, 32), w, CoefficientField::constant(dom, w, 2.0));
    EXPECT_THROW(op.assemble_identity_minus_A(100), std::invalid_argument);
}
