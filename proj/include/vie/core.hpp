#pragma once
//
// Common types for the volume integral equation laboratory.
//

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace vie {

using cplx = std::complex<double>;

// Points are stored with three coordinates; the third is zero in 2D.
using Vec = std::array<double, 3>;
using CVec = std::array<cplx, 3>;

using GridField = Eigen::VectorXcd;        // one value per included cell
using BoundaryDensity = Eigen::VectorXcd;  // one value per boundary node

inline constexpr double pi = std::numbers::pi;
inline constexpr double euler_gamma = std::numbers::egamma;

inline constexpr char version[] = "0.1.0";

// Raised when a numerical procedure cannot deliver its contract
// (divergence, singular system, failed certification).
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }
inline Vec operator-(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec operator+(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec operator*(double s, const Vec& a) { return {s * a[0], s * a[1], s * a[2]}; }

inline double max_abs(const Eigen::VectorXcd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace vie
