#pragma once
//
// Incident fields, iterative solution of u - A u = u_inc, extension of the
// solution outside the scatterer and the separation-of-variables reference
// for a homogeneous disc.
//

#include <optional>
#include <vector>

#include "vie/gmres.hpp"
#include "vie/volume_operator.hpp"

namespace vie {

inline GridField incident_plane_wave(const VolumeGrid& grid, const WaveParameters& wave, const Vec& direction) {
    if (std::abs(norm(direction) - 1.0) > 1e-12) throw std::invalid_argument("incident_plane_wave: direction must be a unit vector");
    if (grid.dimension() == 2 && direction[2] != 0.0)
        throw std::invalid_argument("incident_plane_wave: 2D direction must have zero third component");
    GridField u(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t j = 0; j < grid.size(); ++j)
        u[static_cast<Eigen::Index>(j)] = std::exp(cplx(0, 1) * wave.k * dot(direction, grid.center(j)));
    return u;
}

inline cplx plane_wave_at(const WaveParameters& wave, const Vec& direction, const Vec& x) {
    return std::exp(cplx(0, 1) * wave.k * dot(direction, x));
}

// u_inc(x) = G_k(x - x0) for an exterior source point.
inline GridField incident_point_source(const VolumeGrid& grid, const DomainGeometry& domain, const WaveParameters& wave,
                                       const Vec& x0) {
    if (domain.contains(x0)) throw std::invalid_argument("incident_point_source: source lies inside the scatterer");
    if (domain.boundary_distance(x0) < grid.spacing())
        throw std::invalid_argument("incident_point_source: source closer than one cell to the boundary");
    GridField u(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t j = 0; j < grid.size(); ++j)
        u[static_cast<Eigen::Index>(j)] = greens_value(wave, norm(grid.center(j) - x0));
    return u;
}

// ---------------------------------------------------------------- VIE solve

enum class VieMethod { gmres, direct };

struct VieOptions {
    VieMethod method = VieMethod::gmres;
    GmresOptions gmres{};
    std::size_t dense_cap = default_dense_cap;
    // use u - A_smooth u (alpha must vanish on the boundary); GMRES only
    bool smooth_form = false;
};

struct VieSolution {
    GridField u;
    GmresResult iterations;  // empty history for the direct method
    double residual = 0.0;   // ||(I - A) u - u_inc|| / ||u_inc||
    VieMethod method = VieMethod::gmres;
};

inline VieSolution solve_vie(const VolumeOperator& op, const GridField& u_inc, const VieOptions& opt = {}) {
    VieSolution s;
    s.method = opt.method;
    if (opt.smooth_form) {
        if (opt.method != VieMethod::gmres) throw std::invalid_argument("solve_vie: smooth form is matrix-free only");
        auto apply = [&op](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return x - op.apply_smooth_form(x); };
        s.iterations = gmres_solve(apply, u_inc, opt.gmres);
        s.u = s.iterations.x;
        const double bn = u_inc.norm();
        s.residual = bn > 0.0 ? (apply(s.u) - u_inc).norm() / bn : s.u.norm();
        return s;
    }
    if (opt.method == VieMethod::direct) {
        const auto M = op.assemble_identity_minus_A(opt.dense_cap);
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M.matrix);
        s.u = lu.solve(u_inc);
        if (!s.u.allFinite()) throw numerical_error("solve_vie: dense factorisation produced non-finite values");
        s.iterations.status = GmresStatus::converged;
    } else {
        s.iterations = gmres_solve([&op](const Eigen::VectorXcd& x) { return op.apply_identity_minus(x); }, u_inc,
                                   opt.gmres);
        s.u = s.iterations.x;
    }
    const double bn = u_inc.norm();
    s.residual = bn > 0.0 ? (op.apply_identity_minus(s.u) - u_inc).norm() / bn : s.u.norm();
    return s;
}

// u(x) = u_inc(x) + (A u)(x) at exterior targets, with the same face-flux
// quadrature as the volume operator.
inline Eigen::VectorXcd extend_solution(const VolumeOperator& op, const DomainGeometry& domain, const GridField& u,
                                        const std::vector<Vec>& targets, const std::vector<cplx>& u_inc_at_targets) {
    if (targets.size() != u_inc_at_targets.size())
        throw std::invalid_argument("extend_solution: incident values do not match targets");
    if (static_cast<std::size_t>(u.size()) != op.size()) throw std::invalid_argument("extend_solution: field length mismatch");
    const auto& grid = op.grid();
    const auto& lat = op.kernel()->lattice();
    const auto& wave = op.wave();
    const double h = grid.spacing();
    const int d = grid.dimension();
    const double vol = grid.cell_volume();
    auto site_pos = [&](std::size_t site) {
        const auto c = lat.to_grid(lat.coords(site));
        return grid.center(c);
    };
    Eigen::VectorXcd out(static_cast<Eigen::Index>(targets.size()));
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const Vec& x = targets[t];
        if (domain.contains(x)) throw std::invalid_argument("extend_solution: target inside the scatterer");
        cplx acc = u_inc_at_targets[t];
        for (int e = 0; e < d; ++e)
            for (const auto& en : op.full_map().face_map(e)) {
                const Vec y = site_pos(en.site);
                Vec y2 = y;
                y2[e] += h;
                acc += vol / h * (greens_value(wave, norm(x - y)) - greens_value(wave, norm(x - y2))) * en.coeff *
                       u[static_cast<Eigen::Index>(en.unknown)];
            }
        const auto& beta = op.beta_values();
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const cplx bj = beta[static_cast<Eigen::Index>(j)];
            if (bj == cplx(0.0)) continue;
            acc += vol * greens_value(wave, norm(x - grid.center(j))) * bj * u[static_cast<Eigen::Index>(j)];
        }
        out[static_cast<Eigen::Index>(t)] = acc;
    }
    return out;
}

// ------------------------------------------------------------- disc reference

// Plane wave exp(i k d.x) on a disc of radius R with constant a_in and
// k_in^2. Interior: sum c_m J_m(k1 r) e^{i m (theta - theta_d)}, k1^2 = k_in^2/a_in;
// exterior: incident + sum b_m H_m(k r) e^{i m (theta - theta_d)}. Per mode
// u and a du/dr are continuous at r = R.
class MieDisc {
public:
    MieDisc(double radius, const WaveParameters& wave, cplx a_in, cplx k_in_sq, double direction_angle = 0.0)
        : R_(radius), k_(wave.k_real()), a_(a_in), theta_d_(direction_angle) {
        if (wave.dim != 2) throw std::invalid_argument("MieDisc: two-dimensional only");
        if (!(radius > 0.0)) throw std::invalid_argument("MieDisc: radius must be positive");
        if (a_in == cplx(0.0)) throw std::invalid_argument("MieDisc: a_in must be nonzero");
        if (!(k_ > 0.0)) throw std::invalid_argument("MieDisc: exterior wavenumber must be positive");
        const cplx k1sq = k_in_sq / a_in;
        if (std::abs(k1sq.imag()) > 1e-14 * std::abs(k1sq) || !(k1sq.real() > 0.0))
            throw std::invalid_argument("MieDisc: k_in^2 / a_in must be real and positive");
        k1_ = std::sqrt(k1sq.real());
        const int hard_cap = 200 + static_cast<int>(4.0 * std::max(k_, k1_) * R_);
        int quiet = 0;
        for (int m = 0; m <= hard_cap; ++m) {
            const cplx im = std::pow(cplx(0, 1), m);
            const double jm1 = bessel_j(m, k1_ * R_), jm1p = bessel_j_prime(m, k1_ * R_);
            const double jm = bessel_j(m, k_ * R_), jmp = bessel_j_prime(m, k_ * R_);
            const cplx hm = hankel1(m, k_ * R_), hmp = hankel1_prime(m, k_ * R_);
            // [J(k1R)  -H(kR) ] [c]   [i^m J(kR)   ]
            // [a k1 J' -k H'  ] [b] = [i^m k J'(kR)]
            const cplx A11 = jm1, A12 = -hm, A21 = a_ * k1_ * jm1p, A22 = -k_ * hmp;
            const cplx det = A11 * A22 - A12 * A21;
            if (std::abs(det) < 1e-300 || !std::isfinite(std::abs(det)))
                throw numerical_error("MieDisc: singular transmission system at mode " + std::to_string(m));
            const cplx r1 = im * jm, r2 = im * k_ * jmp;
            const cplx c = (r1 * A22 - A12 * r2) / det;
            const cplx b = (A11 * r2 - r1 * A21) / det;
            c_.push_back(c);
            b_.push_back(b);
            const double contrib = std::max(std::abs(c * jm1), std::abs(b * hm));
            if (std::isfinite(contrib) && contrib < 1e-12 && m > k_ * R_ && m > k1_ * R_) {
                if (++quiet >= 2) break;
            } else {
                quiet = 0;
            }
        }
    }

    int modes() const { return static_cast<int>(c_.size()) - 1; }
    double interior_wavenumber() const { return k1_; }
    const std::vector<cplx>& interior_coefficients() const { return c_; }
    const std::vector<cplx>& exterior_coefficients() const { return b_; }

    cplx total(const Vec& x) const {
        const double r = std::hypot(x[0], x[1]);
        if (r <= R_) return interior_sum(x, false);
        return incident(x) + scattered(x);
    }
    cplx incident(const Vec& x) const {
        return std::exp(cplx(0, 1) * k_ * (std::cos(theta_d_) * x[0] + std::sin(theta_d_) * x[1]));
    }
    // Scattered part outside the disc.
    cplx scattered(const Vec& x) const { return exterior_sum(x, false); }
    // d/dr of the total field (interior or exterior branch selected by r).
    cplx radial_derivative(const Vec& x, bool interior_branch) const {
        if (interior_branch) return interior_sum(x, true);
        const double th = std::atan2(x[1], x[0]);
        const cplx du_inc = cplx(0, 1) * k_ * std::cos(th - theta_d_) * incident(x);
        return du_inc + exterior_sum(x, true);
    }
    cplx interior_value(const Vec& x) const { return interior_sum(x, false); }
    cplx exterior_value(const Vec& x) const { return incident(x) + scattered(x); }

    // Far-field amplitude f(theta): u_s ~ f(theta) e^{ikr} / sqrt(r).
    cplx far_field(double theta) const {
        cplx s = 0.0;
        for (std::size_t m = 0; m < b_.size(); ++m) {
            const cplx term = b_[m] * std::pow(cplx(0, -1), static_cast<int>(m)) *
                              std::cos(static_cast<double>(m) * (theta - theta_d_));
            s += (m == 0 ? 1.0 : 2.0) * term;
        }
        return s * std::sqrt(2.0 / (pi * k_)) * std::exp(cplx(0, -pi / 4.0));
    }

private:
    double R_, k_, k1_ = 0.0;
    cplx a_;
    double theta_d_;
    std::vector<cplx> c_, b_;

    cplx interior_sum(const Vec& x, bool derivative) const {
        const double r = std::hypot(x[0], x[1]);
        const double th = std::atan2(x[1], x[0]) - theta_d_;
        cplx s = 0.0;
        for (std::size_t m = 0; m < c_.size(); ++m) {
            const int mi = static_cast<int>(m);
            const double f = derivative ? k1_ * bessel_j_prime(mi, k1_ * r) : bessel_j(mi, k1_ * r);
            s += (m == 0 ? 1.0 : 2.0) * c_[m] * f * std::cos(mi * th);
        }
        return s;
    }
    cplx exterior_sum(const Vec& x, bool derivative) const {
        const double r = std::hypot(x[0], x[1]);
        const double th = std::atan2(x[1], x[0]) - theta_d_;
        cplx s = 0.0;
        for (std::size_t m = 0; m < b_.size(); ++m) {
            const int mi = static_cast<int>(m);
            const cplx f = derivative ? k_ * hankel1_prime(mi, k_ * r) : hankel1(mi, k_ * r);
            s += (m == 0 ? 1.0 : 2.0) * b_[m] * f * std::cos(mi * th);
        }
        return s;
    }
};

inline MieDisc mie_reference_disc(double radius, const WaveParameters& wave, cplx a_in, cplx k_in_sq,
                                  double direction_angle = 0.0) {
    return MieDisc(radius, wave, a_in, k_in_sq, direction_angle);
}

}  // namespace vie
