#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "vie/core.hpp"

namespace vie {

// Gauss-Legendre nodes and weights on (0, 1), computed by Newton iteration
// on the Legendre recurrence.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre01(int m) {
    if (m < 1) throw std::invalid_argument("gauss_legendre01: need at least one node");
    std::vector<double> x(m), w(m);
    for (int i = 0; i < m; ++i) {
        double z = std::cos(pi * (i + 0.75) / (m + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= m; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (m == 1) { p1 = z; p0 = 1.0; }
            dp = m * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute derivative at converged node
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= m; ++k) {
            const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = (m == 1) ? 1.0 : m * (z * p1 - p0) / (z * z - 1.0);
        x[m - 1 - i] = 0.5 * (1.0 + z);
        w[m - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

}  // namespace vie
