#include <gtest/gtest.h>

#include "vie/scattering.hpp"

using namespace vie;

namespace {

GridField series_field(const MieDisc& mie, const VolumeGrid& g) {
    GridField ref(static_cast<Eigen::Index>(g.size()));
    for (std::size_t j = 0; j < g.size(); ++j) ref[static_cast<Eigen::Index>(j)] = mie.total(g.center(j));
    return ref;
}

}  // namespace

TEST(Gmres, IdentityConvergesInOneIteration) {
    const Eigen::VectorXcd b = Eigen::VectorXcd::LinSpaced(40, 1.0, 2.0);
    GmresOptions opt;
    opt.tol = 1e-12;
    const auto r = gmres_solve([](const Eigen::VectorXcd& x) { return x; }, b, opt);
    EXPECT_TRUE(r.converged());
    EXPECT_EQ(r.iterations, 1);
    EXPECT_LT((r.x - b).norm(), 1e-14);
}

TEST(Gmres, DiagonalSystem) {
    const auto n = 30;
    Eigen::VectorXcd d(n), b = Eigen::VectorXcd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) d[i] = cplx(1.0 + i, 0.5 * i);
    GmresOptions opt;
    opt.tol = 1e-10;
    const auto r = gmres_solve([&d](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return d.cwiseProduct(x); }, b, opt);
    EXPECT_TRUE(r.converged());
    EXPECT_LE(r.iterations, n);
    EXPECT_LT((d.cwiseProduct(r.x) - b).norm() / b.norm(), 1e-10);
    for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1] * (1 + 1e-12));
}

TEST(Gmres, ZeroRightHandSideAndBadOptions) {
    const auto r = gmres_solve([](const Eigen::VectorXcd& x) { return x; }, Eigen::VectorXcd::Zero(5), {});
    EXPECT_TRUE(r.converged());
    EXPECT_EQ(r.x.norm(), 0.0);
    GmresOptions bad;
    bad.tol = 2.0;
    EXPECT_THROW(gmres_solve([](const Eigen::VectorXcd& x) { return x; }, Eigen::VectorXcd::Ones(5), bad),
                 std::invalid_argument);
}

TEST(Incident, PlaneWaveAndPointSource) {
    const WaveParameters w(2.0, 2);
    EXPECT_LT(std::abs(plane_wave_at(w, {1, 0, 0}, {pi / 2.0, 0, 0}) + 1.0), 1e-15);

    const auto ball = DomainGeometry::ball(1.0);
    const WaveParameters w3(0.0, 3);
    const VolumeGrid g(ball, 8);
    const GridField u = incident_point_source(g, ball, w3, {2.0, 0, 0});
    for (std::size_t j = 0; j < g.size(); ++j)
        EXPECT_NEAR(u[static_cast<Eigen::Index>(j)].real(), 1.0 / (4.0 * pi * norm(g.center(j) - Vec{2.0, 0, 0})), 1e-15);
    EXPECT_THROW(incident_point_source(g, ball, w3, {0.1, 0, 0}), std::invalid_argument);
    EXPECT_THROW(incident_plane_wave(VolumeGrid(DomainGeometry::disc(1.0), 8), w, {1, 1, 0}), std::invalid_argument);
}

TEST(DiscSeries, TransmissionConditions) {
    const WaveParameters w(1.0, 2);
    const cplx a(2.0), kin(3.0);
    const MieDisc mie(1.0, w, a, kin, 0.4);
    for (double th : {0.0, 0.9, 2.5, 4.0}) {
        const Vec x{std::cos(th), std::sin(th), 0};
        EXPECT_LT(std::abs(mie.interior_value(x) - mie.exterior_value(x)), 1e-10);
        EXPECT_LT(std::abs(a * mie.radial_derivative(x, true) - mie.radial_derivative(x, false)), 1e-10);
    }
    // interior field solves a Delta u + k_in^2 u = 0
    const Vec x{0.3, 0.2, 0};
    const double h = 1e-3;
    cplx lap = -4.0 * mie.interior_value(x);
    for (const Vec& e : {Vec{h, 0, 0}, Vec{-h, 0, 0}, Vec{0, h, 0}, Vec{0, -h, 0}}) lap += mie.interior_value(x + e);
    EXPECT_LT(std::abs(a * lap / (h * h) + kin * mie.interior_value(x)), 1e-5);
}

TEST(DiscSeries, ZeroContrastIsPlaneWave) {
    // Jacobi-Anger: with a = 1 and k_in = k the series reproduces the incident wave
    const WaveParameters w(2.5, 2);
    const MieDisc mie(1.0, w, 1.0, w.k_sq(), 0.7);
    for (const Vec& x : {Vec{0.2, -0.5, 0}, Vec{0.9, 0.1, 0}, Vec{1.5, 1.0, 0}})
        EXPECT_LT(std::abs(mie.total(x) - plane_wave_at(w, {std::cos(0.7), std::sin(0.7), 0}, x)), 1e-12);
    EXPECT_THROW(MieDisc(1.0, w, 2.0, -1.0), std::invalid_argument);
}

TEST(SolveVie, ZeroContrastReturnsIncident) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.0, 2);
    const VolumeGrid g(dom, 24);
    const VolumeOperator op(g, w, CoefficientField::constant(dom, w, 1.0));
    const GridField inc = incident_plane_wave(g, w, {1, 0, 0});
    const auto s = solve_vie(op, inc);
    EXPECT_TRUE(s.iterations.converged());
    EXPECT_EQ(s.iterations.iterations, 1);
    EXPECT_LT((s.u - inc).norm() / inc.norm(), 1e-14);
}

TEST(SolveVie, DirectAgreesWithGmres) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.0, 2);
    const VolumeGrid g(dom, 16);
    const VolumeOperator op(g, w, CoefficientField::constant(dom, w, cplx(2.0, 0.5), 3.0));
    const GridField inc = incident_plane_wave(g, w, {0, 1, 0});
    VieOptions it;
    it.gmres.tol = 1e-12;
    VieOptions direct;
    direct.method = VieMethod::direct;
    const auto a = solve_vie(op, inc, it), b = solve_vie(op, inc, direct);
    EXPECT_LT((a.u - b.u).norm() / b.u.norm(), 1e-10);
    EXPECT_LT(b.residual, 1e-12);
    direct.smooth_form = true;
    EXPECT_THROW(solve_vie(op, inc, direct), std::invalid_argument);
}

TEST(SolveVie, DiscSeriesOracle) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.0, 2);
    const MieDisc mie(1.0, w, 2.0, 2.0);
    const VolumeGrid g(dom, 64);
    const VolumeOperator op(g, w, CoefficientField::constant(dom, w, 2.0, 2.0));
    const auto s = solve_vie(op, incident_plane_wave(g, w, {1, 0, 0}));
    ASSERT_TRUE(s.iterations.converged());
    const GridField ref = series_field(mie, g);
    EXPECT_LE((s.u - ref).norm() / ref.norm(), 0.02);

    // exterior extension against the series
    std::vector<Vec> targets{{1.5, 0, 0}, {0, -2.0, 0}, {-1.3, 1.1, 0}};
    std::vector<cplx> inc;
    for (const auto& x : targets) inc.push_back(mie.incident(x));
    const auto ext = extend_solution(op, dom, s.u, targets, inc);
    for (std::size_t t = 0; t < targets.size(); ++t)
        EXPECT_LT(std::abs(ext[static_cast<Eigen::Index>(t)] - mie.total(targets[t])), 0.02) << t;
}

TEST(SolveVie, SmoothFormMatchesFullOperator) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.0, 2);
    const auto cf = CoefficientField::smooth_bump(dom, w, 1.0);
    std::vector<double> gap;
    for (int n : {32, 64}) {
        const VolumeGrid g(dom, n);
        const VolumeOperator op(g, w, cf);
        const GridField inc = incident_plane_wave(g, w, {1, 0, 0});
        VieOptions smooth;
        smooth.smooth_form = true;
        const auto a = solve_vie(op, inc), b = solve_vie(op, inc, smooth);
        ASSERT_TRUE(b.iterations.converged());
        gap.push_back((a.u - b.u).norm() / a.u.norm());
    }
    EXPECT_LT(gap[1], gap[0]);
    EXPECT_LT(gap[1], 1e-2);
}
