#include <gtest/gtest.h>

#include <random>

#include <boost/rational.hpp>

#include "vie/spectral_analysis.hpp"

using namespace vie;
using Q = boost::rational<long long>;

TEST(SigmaMap, ExactRationalInverse) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<long long> num(-50, 50), den(1, 50);
    int checked = 0;
    while (checked < 20) {
        const Q sigma(num(rng), den(rng));
        if (sigma == Q(1)) continue;
        ++checked;
        const Q a = sigma_to_a(sigma);
        // hand formula: a (sigma - 1) = sigma
        EXPECT_EQ(a * (sigma - Q(1)), sigma);
        EXPECT_EQ(a_to_sigma(a), sigma);
        EXPECT_EQ(sigma_to_a(a_to_sigma(a)), a);
    }
    EXPECT_EQ(sigma_to_a(Q(1, 2)), Q(-1));
    EXPECT_EQ(sigma_to_a(Q(0)), Q(0));
    EXPECT_EQ(a_to_sigma(Q(2)), Q(2));
    EXPECT_THROW(sigma_to_a(Q(1)), std::invalid_argument);
    EXPECT_THROW(a_to_sigma(Q(1)), std::invalid_argument);
}

TEST(SigmaMap, ComplexArguments) {
    const cplx a(3.0, 1.0);
    const cplx s = a_to_sigma(a);
    EXPECT_LT(std::abs(s - a / (a - 1.0)), 1e-15);
    EXPECT_LT(std::abs(sigma_to_a(s) - a), 1e-14);
}

TEST(Eigen, TraceAndDeterminant) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    Eigen::MatrixXcd M(9, 9);
    for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = cplx(nd(rng), nd(rng));
    const EigenResult r = eigenvalues_dense(M);
    ASSERT_EQ(r.entries.size(), 9u);
    EXPECT_EQ(r.uncertified, 0u);
    cplx sum = 0.0, prod = 1.0;
    for (const auto& e : r.entries) {
        sum += e.value;
        prod *= e.value;
    }
    EXPECT_LT(std::abs(sum - M.trace()), 1e-11);
    EXPECT_LT(std::abs(prod - M.determinant()) / std::abs(M.determinant()), 1e-11);
    for (std::size_t i = 1; i < r.entries.size(); ++i) EXPECT_LE(r.entries[i - 1].value.real(), r.entries[i].value.real());
}

TEST(Clusters, ArtificialAccumulation) {
    auto make = [](int n) {
        std::vector<cplx> v;
        for (int j = 1; j <= n; ++j) {
            v.push_back(2.0 + 1.0 / j);
            v.push_back(cplx(1.5, -1.0 / j));
        }
        v.push_back(cplx(-3.0, 0.0));
        v.push_back(cplx(0.0, 4.0));
        return v;
    };
    const auto coarse = make(20), fine = make(80);
    const ClusterReport rep = detect_clusters(coarse, coarse.size(), fine, fine.size(), 0.1);
    ASSERT_EQ(rep.clusters.size(), 2u);
    EXPECT_TRUE(clusters_match(rep, {2.0, 1.5}, 0.05));
    EXPECT_FALSE(clusters_match(rep, {2.0, 1.5, 0.0}, 0.05));
    EXPECT_TRUE(rep.stable(2));
    EXPECT_EQ(rep.outside_fine, rep.outside_coarse);
    EXPECT_THROW(detect_clusters(fine, 10, coarse, 5, 0.1), std::invalid_argument);
}

TEST(Clusters, FixedPopulationIsRejected) {
    std::vector<cplx> coarse, fine;
    for (int j = 0; j < 10; ++j) coarse.push_back(cplx(1.0 + 0.001 * j, 0));
    fine = coarse;
    const ClusterReport rep = detect_clusters(coarse, 100, fine, 400, 0.1);
    EXPECT_TRUE(rep.clusters.empty());
    EXPECT_EQ(rep.rejected.size(), 1u);
}

TEST(Prediction, DiscPoints) {
    const auto p = predict_clusters({2.0}, 2.0, SigmaEstimate::smooth());
    ASSERT_EQ(p.size(), 2u);
    EXPECT_LT(std::abs(p[1] - 1.5), 1e-15);
    const cplx a(3.0, 1.0);
    const auto q = predict_clusters({a}, a, SigmaEstimate::smooth());
    EXPECT_LT(std::abs(q[1] - cplx(2.0, 0.5)), 1e-15);
}

TEST(Verdict, Disc) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.0, 2);
    const auto ok = fredholm_verdict(CoefficientField::constant(dom, w, 2.0), SigmaEstimate::smooth());
    EXPECT_TRUE(ok.fredholm());
    EXPECT_EQ(ok.strength, VerdictStrength::iff);
    EXPECT_NEAR(ok.min_distance, 3.0, 1e-12);  // |2 - (-1)|

    const auto bad = fredholm_verdict(CoefficientField::constant(dom, w, -1.0), SigmaEstimate::smooth());
    EXPECT_TRUE(bad.condition_i);
    EXPECT_FALSE(bad.condition_ii);
    EXPECT_FALSE(bad.fredholm());

    const CoefficientField linear(
        dom, w, [](const Vec& x) { return cplx(x[0]); }, [w](const Vec&) { return w.k_sq(); },
        [](const Vec&) { return CVec{1.0, 0.0, 0.0}; }, SmoothnessTag::piecewise_smooth, "x1");
    const auto lin = fredholm_verdict(linear, SigmaEstimate::smooth());
    EXPECT_FALSE(lin.condition_i);
    EXPECT_EQ(lin.strength, VerdictStrength::sufficient_only);
}

TEST(Verdict, IntervalBreakdown) {
    // Sigma = [0.25, 0.75] breaks down on [-3, -1/3]
    const auto dom = DomainGeometry::square(0.5);
    const WaveParameters w(1.0, 2);
    const auto s = SigmaEstimate::range(0.25, 0.75, 0.0);
    EXPECT_FALSE(fredholm_verdict(CoefficientField::constant(dom, w, -2.0), s).condition_ii);
    const auto v = fredholm_verdict(CoefficientField::constant(dom, w, -4.0), s);
    EXPECT_TRUE(v.condition_ii);
    EXPECT_NEAR(v.min_distance, 1.0, 1e-12);
    EXPECT_TRUE(fredholm_verdict(CoefficientField::constant(dom, w, cplx(-2.0, 0.5)), s).condition_ii);
}

TEST(SigmaEstimateTest, CircleAndSquare) {
    const auto circle = estimate_sigma(DomainGeometry::disc(1.0));
    EXPECT_FALSE(circle.interval);
    EXPECT_EQ(circle.points, std::vector<double>{0.5});

    const auto sq = estimate_sigma(DomainGeometry::square(0.5), 256);
    ASSERT_TRUE(sq.interval);
    EXPECT_LT(sq.interval->first, 0.5);
    EXPECT_GT(sq.interval->second, 0.5);
    EXPECT_GT(sq.interval->first, 0.0);
    EXPECT_LT(sq.interval->second, 1.0);
}

TEST(HalfMinusK, LaplaceCircleEigenvalues) {
    const auto r = half_minus_K_spectrum(DomainGeometry::disc(1.0), 64);
    std::size_t halves = 0, ones = 0;
    for (const auto& e : r.entries) {
        if (std::abs(e.value - 0.5) < 1e-10) ++halves;
        if (std::abs(e.value - 1.0) < 1e-10) ++ones;
    }
    EXPECT_EQ(halves, 63u);
    EXPECT_EQ(ones, 1u);
}

TEST(Conditioning, DiagonalMatrix) {
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(4, 4);
    M.diagonal() << 10.0, cplx(0, 2.0), 0.5, 1.0;
    const auto c = condition_estimate(M, 200, 3);
    EXPECT_NEAR(c.norm, 10.0, 1e-8);
    EXPECT_NEAR(c.inverse_norm, 2.0, 1e-8);
    EXPECT_NEAR(c.condition, 20.0, 1e-7);
    EXPECT_TRUE(std::isinf(condition_estimate(Eigen::MatrixXcd::Zero(3, 3)).condition));
}

TEST(Conditioning, WeightingIsSimilarity) {
    const auto dom = DomainGeometry::disc(1.0);
    const WaveParameters w(1.0, 2);
    const VolumeGrid g(dom, 10);
    const auto mesh = build_boundary_mesh(dom, 24);
    const auto s = spectral_operator(g, w, CoefficientField::constant(dom, w, 2.0), SpectralRepresentation::augmented, &mesh);
    EXPECT_EQ(s.representation, SpectralRepresentation::augmented);
    EXPECT_EQ(s.boundary_unknowns, mesh.size());
    EXPECT_LT(std::abs(s.matrix.trace() - s.weighted().trace()), 1e-10);
    // beta-only fields fall back to the volume form
    const auto b = spectral_operator(g, w, CoefficientField::beta_only(dom, w, 3.0), SpectralRepresentation::augmented, &mesh);
    EXPECT_EQ(b.representation, SpectralRepresentation::volume);
}

TEST(Conditioning, SweepGrowsTowardsBreakdown) {
    const auto pts = condition_sweep(DomainGeometry::disc(1.0), WaveParameters(1.0, 2), {-3.0, -1.4, -1.1}, 12,
                                     SpectralRepresentation::augmented, 48);
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_LT(pts[0].weighted.condition, pts[1].weighted.condition);
    EXPECT_LT(pts[1].weighted.condition, pts[2].weighted.condition);
}
