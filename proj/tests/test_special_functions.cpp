#include <gtest/gtest.h>

#include "vie/lattice_green.hpp"
#include "vie/special_functions.hpp"

using namespace vie;

namespace {

// Independent power series J_n(x) = sum (-1)^m (x/2)^{2m+n} / (m! (m+n)!), long double.
long double series_j(int n, long double x) {
    long double term = std::pow(x / 2, n) / std::tgamma(n + 1.0L), sum = 0;
    for (int m = 0; m < 60; ++m) {
        sum += term;
        term *= -(x * x / 4) / ((m + 1.0L) * (m + 1.0L + n));
    }
    return sum;
}

// Y_0 via its ascending series.
long double series_y0(long double x) {
    const long double q = x * x / 4;
    long double term = 1, j0 = 0, tail = 0, h = 0;
    for (int m = 0; m < 60; ++m) {
        if (m > 0) {
            term *= -q / (static_cast<long double>(m) * m);
            h += 1.0L / m;
            tail += term * h;
        }
        j0 += term;
    }
    const long double g = 0.577215664901532860606512090082402431L;
    return 2.0L / std::numbers::pi_v<long double> * ((std::log(x / 2) + g) * j0 - tail);
}

}  // namespace

TEST(Bessel, MatchesPowerSeries) {
    for (int n : {0, 1, 2, 5})
        for (double x : {0.1, 1.0, 2.5, 4.0})
            EXPECT_NEAR(bessel_j(n, x), static_cast<double>(series_j(n, x)), 1e-14) << n << " " << x;
    for (double x : {0.05, 0.7, 2.0, 3.5}) EXPECT_NEAR(bessel_y(0, x), static_cast<double>(series_y0(x)), 1e-13);
}

TEST(Bessel, WronskianAndDerivatives) {
    for (int n : {0, 1, 3})
        for (double x : {0.5, 2.0, 7.0}) {
            // J_n Y_n' - J_n' Y_n = 2/(pi x)
            const double yp = hankel1_prime(n, x).imag();
            const double w = bessel_j(n, x) * yp - bessel_j_prime(n, x) * bessel_y(n, x);
            EXPECT_NEAR(w, 2.0 / (pi * x), 1e-13);
            const double h = 1e-5;
            const double fd = (bessel_j(n, x + h) - bessel_j(n, x - h)) / (2 * h);
            EXPECT_NEAR(bessel_j_prime(n, x), fd, 1e-9);
        }
    EXPECT_THROW(bessel_y(0, 0.0), std::domain_error);
}

TEST(Greens, LaplaceValues) {
    EXPECT_NEAR(greens_value(WaveParameters(0.0, 3), 1.0).real(), 1.0 / (4.0 * pi), 1e-16);
    EXPECT_NEAR(greens_value(WaveParameters(0.0, 2), std::exp(1.0)).real(), -1.0 / (2.0 * pi), 1e-15);
}

TEST(Greens, HelmholtzEquationByFiniteDifferences) {
    // (Delta + k^2) G = 0 away from the source, radial form G'' + (d-1)/r G' + k^2 G
    for (int dim : {2, 3}) {
        const WaveParameters w(1.3, dim);
        const double r = 0.9, h = 1e-3;
        const cplx g0 = greens_value(w, r);
        const cplx gpp = (greens_value(w, r + h) - 2.0 * g0 + greens_value(w, r - h)) / (h * h);
        const cplx gp = greens_radial_derivative(w, r);
        const cplx res = gpp + (dim - 1.0) / r * gp + w.k_sq() * g0;
        EXPECT_LT(std::abs(res), 1e-5) << dim;
    }
}

TEST(Greens, GradientMatchesRadialDerivative) {
    const WaveParameters w(2.0, 2);
    const Vec x{0.3, -0.4, 0};
    const CVec g = greens_gradient(w, x);
    const cplx d = greens_radial_derivative(w, 0.5);
    EXPECT_LT(std::abs(g[0] - d * 0.6), 1e-15);
    EXPECT_LT(std::abs(g[1] + d * 0.8), 1e-15);
}

TEST(Greens, RemainderContinuousAtOrigin) {
    for (int dim : {2, 3}) {
        const WaveParameters w(1.7, dim);
        for (double r : {1e-3, 0.3, 1.5, 3.0}) {
            const cplx direct = greens_value(w, r) - laplace_greens(dim, r);
            EXPECT_LT(std::abs(greens_remainder(w, r) - direct), 1e-12) << dim << " " << r;
        }
        EXPECT_TRUE(std::isfinite(std::abs(greens_remainder(w, 0.0))));
    }
    // 3D limit is ik/(4 pi)
    EXPECT_LT(std::abs(greens_remainder(WaveParameters(2.0, 3), 0.0) - cplx(0, 2.0 / (4 * pi))), 1e-15);
    // 2D limit: Im = 1/4
    EXPECT_NEAR(greens_remainder(WaveParameters(1.0, 2), 0.0).imag(), 0.25, 1e-15);
}

TEST(LatticeGreen, DiscreteLaplacianIsDelta) {
    auto a = [](int i, int j) { return lattice_green_difference(i, j); };
    EXPECT_NEAR(4 * a(0, 0) - a(1, 0) - a(-1, 0) - a(0, 1) - a(0, -1), 1.0, 1e-12);
    for (auto [i, j] : std::vector<std::pair<int, int>>{{1, 0}, {2, 1}, {3, 3}, {5, 0}})
        EXPECT_NEAR(4 * a(i, j) - a(i + 1, j) - a(i - 1, j) - a(i, j + 1) - a(i, j - 1), 0.0, 1e-12);
    // closed form g(1,0) - g(0,0) = -1/4
    EXPECT_NEAR(a(1, 0), -0.25, 1e-13);
    // far-field asymptotics
    const double r = std::hypot(30.0, 40.0);
    EXPECT_NEAR(a(30, 40), -(std::log(r) + lattice_log_offset) / (2 * pi), 1e-5);
}
