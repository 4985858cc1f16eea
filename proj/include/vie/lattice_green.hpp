#pragma once
//
// Free-space Green's function of the 2D five-point Laplacian,
//   -(g(m+e1) + g(m-e1) + g(m+e2) + g(m-e2) - 4 g(m)) = delta_{m,0},
// normalised as a(m) = g(m) - g(0). Reducing the Fourier integral over one
// angle leaves
//   a(m) = 1/(2 pi) int_0^pi (cos(m1 t) exp(-|m2| s) - 1) / sinh(s) dt,
//   cosh(s) = 2 - cos(t).
// Far from the origin a(m) ~ -(log|m| + gamma + 3/2 log 2) / (2 pi).
//

#include <algorithm>
#include <cstdlib>
#include <mutex>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "vie/core.hpp"

namespace vie {

inline constexpr double lattice_log_offset = euler_gamma + 1.5 * 0.69314718055994530942;

inline double lattice_green_difference(int m1, int m2) {
    int p = std::abs(m1), q = std::abs(m2);
    if (p > q) std::swap(p, q);  // oscillate in the smaller index, damp in the larger
    if (p == 0 && q == 0) return 0.0;
    auto integrand = [p, q](double t) {
        const double one_minus_cos = 2.0 * std::pow(std::sin(0.5 * t), 2);
        const double sh = std::sqrt(one_minus_cos * (2.0 + one_minus_cos));
        if (sh == 0.0) return -static_cast<double>(q);
        const double s = std::log1p(one_minus_cos + sh);
        const double damp = std::exp(-q * s);
        const double num = -2.0 * std::pow(std::sin(0.5 * p * t), 2) * damp + std::expm1(-q * s);
        return num / sh;
    };
    const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, pi, 20, 1e-14);
    return val / (2.0 * pi);
}

// Thread-safe table of a(m) for 0 <= m2 <= m1 <= extent, grown on demand.
class LatticeGreenTable {
public:
    static LatticeGreenTable& instance() {
        static LatticeGreenTable t;
        return t;
    }

    // Ensures offsets up to `extent` in each axis are available and returns a
    // snapshot accessor.
    std::vector<double> table(int extent) {
        std::lock_guard<std::mutex> lock(mutex_);
        if (extent > extent_) grow(extent);
        return data_;
    }
    int extent() const { return extent_; }

    static std::size_t slot(int m1, int m2) {
        int p = std::abs(m1), q = std::abs(m2);
        if (p < q) std::swap(p, q);
        return static_cast<std::size_t>(p) * (p + 1) / 2 + q;
    }

private:
    std::mutex mutex_;
    int extent_ = -1;
    std::vector<double> data_;

    void grow(int extent) {
        data_.resize(slot(extent, extent) + 1);
        for (int p = extent_ + 1; p <= extent; ++p)
            for (int q = 0; q <= p; ++q) data_[slot(p, q)] = lattice_green_difference(p, q);
        extent_ = extent;
    }
};

}  // namespace vie
