#pragma once
//
// Bessel/Hankel functions and the outgoing Helmholtz fundamental solution
// G_k with (Delta + k^2) G_k = -delta, in two and three dimensions.
//

#include <boost/math/special_functions/bessel.hpp>

#include "vie/core.hpp"

namespace vie {

inline double bessel_j(int order, double x) {
    if (order < 0) throw std::domain_error("bessel_j: negative order");
    if (x < 0.0) throw std::domain_error("bessel_j: negative argument");
    return boost::math::cyl_bessel_j(order, x);
}

inline double bessel_y(int order, double x) {
    if (order < 0) throw std::domain_error("bessel_y: negative order");
    if (!(x > 0.0)) throw std::domain_error("bessel_y: argument must be positive");
    return boost::math::cyl_neumann(order, x);
}

inline cplx hankel1(int order, double x) { return {bessel_j(order, x), bessel_y(order, x)}; }

// Derivatives via the standard recurrences.
inline double bessel_j_prime(int n, double x) {
    return n == 0 ? -bessel_j(1, x) : 0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x));
}
inline cplx hankel1_prime(int n, double x) {
    return n == 0 ? -hankel1(1, x) : 0.5 * (hankel1(n - 1, x) - hankel1(n + 1, x));
}

// Exterior wavenumber and space dimension. In 2D only real k >= 0 is
// supported; k = 0 selects the Laplace kernel -log(r)/(2 pi).
struct WaveParameters {
    cplx k{1.0, 0.0};
    int dim = 2;

    WaveParameters() = default;
    WaveParameters(cplx k_, int dim_) : k(k_), dim(dim_) { validate(); }

    void validate() const {
        if (dim != 2 && dim != 3) throw std::invalid_argument("WaveParameters: dimension must be 2 or 3");
        if (k.imag() < 0.0) throw std::invalid_argument("WaveParameters: Im(k) must be >= 0");
        if (dim == 2 && (k.imag() != 0.0 || k.real() < 0.0))
            throw std::invalid_argument("WaveParameters: 2D kernels require real k >= 0");
    }
    double k_real() const { return k.real(); }
    cplx k_sq() const { return k * k; }
};

inline cplx greens_value(const WaveParameters& p, double r) {
    if (!(r > 0.0)) throw std::domain_error("greens_value: r must be positive");
    if (p.dim == 3) return std::exp(cplx(0, 1) * p.k * r) / (4.0 * pi * r);
    if (p.k_real() == 0.0) return -std::log(r) / (2.0 * pi);
    return cplx(0, 0.25) * hankel1(0, p.k_real() * r);
}

// Gradient of x -> G_k(|x|).
inline CVec greens_gradient(const WaveParameters& p, const Vec& x) {
    const double r = norm(x);
    if (!(r > 0.0)) throw std::domain_error("greens_gradient: x must be nonzero");
    cplx radial;
    if (p.dim == 3) {
        radial = (cplx(0, 1) * p.k - 1.0 / r) * greens_value(p, r);
    } else if (p.k_real() == 0.0) {
        radial = -1.0 / (2.0 * pi * r);
    } else {
        const double k = p.k_real();
        radial = cplx(0, -0.25) * k * hankel1(1, k * r);
    }
    return {radial * x[0] / r, radial * x[1] / r, radial * x[2] / r};
}

// Radial derivative dG/dr.
inline cplx greens_radial_derivative(const WaveParameters& p, double r) {
    if (!(r > 0.0)) throw std::domain_error("greens_radial_derivative: r must be positive");
    if (p.dim == 3) return (cplx(0, 1) * p.k - 1.0 / r) * greens_value(p, r);
    if (p.k_real() == 0.0) return -1.0 / (2.0 * pi * r);
    return cplx(0, -0.25) * p.k_real() * hankel1(1, p.k_real() * r);
}

// Laplace kernel G_0 in the same dimension.
inline double laplace_greens(int dim, double r) {
    return dim == 3 ? 1.0 / (4.0 * pi * r) : -std::log(r) / (2.0 * pi);
}

// Smooth remainder G_k(r) - G_0(r), continuous at r = 0.
inline cplx greens_remainder(const WaveParameters& p, double r) {
    if (r < 0.0) throw std::domain_error("greens_remainder: negative r");
    const cplx I(0, 1);
    if (p.dim == 3) {
        const cplx z = I * p.k * r;
        if (std::abs(z) < 0.5) {
            // (e^z - 1)/r = ik * sum z^n/(n+1)!
            cplx term = 1.0, sum = 1.0;
            for (int n = 1; n < 30; ++n) {
                term *= z / static_cast<double>(n + 1);
                sum += term;
            }
            return I * p.k * sum / (4.0 * pi);
        }
        return (std::exp(z) - 1.0) / (4.0 * pi * r);
    }
    const double k = p.k_real();
    if (k == 0.0) return 0.0;
    const double z = k * r;
    if (z <= 2.0) {
        // ascending series of Y_0 with the logarithm split off
        const double q = 0.25 * z * z;
        double j0 = 0.0, tail = 0.0, term = 1.0, harmonic = 0.0;
        for (int m = 0; m < 40; ++m) {
            if (m > 0) {
                term *= -q / (static_cast<double>(m) * m);
                harmonic += 1.0 / m;
                tail -= term * harmonic;  // sum (-1)^{m+1} H_m q^m/(m!)^2
            }
            j0 += term;
        }
        const double log_r_term = r > 0.0 ? std::log(r) * (j0 - 1.0) : 0.0;
        const double re = -((std::log(0.5 * k) + euler_gamma) * j0 + log_r_term + tail) / (2.0 * pi);
        return {re, 0.25 * j0};
    }
    return cplx(0, 0.25) * hankel1(0, z) + std::log(r) / (2.0 * pi);
}

}  // namespace vie
