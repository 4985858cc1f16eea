#pragma once
//
// Dense spectra with residual certificates, cluster detection across two
// resolutions, predicted cluster sets, Fredholm verdicts and condition
// estimates.
//

#include <algorithm>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "vie/coefficients.hpp"
#include "vie/coupled_system.hpp"
#include "vie/volume_operator.hpp"

namespace vie {

// ---------------------------------------------------------------- eigenvalues

struct EigenEntry {
    cplx value;
    double residual = 0.0;  // ||M v - lambda v|| / ||v||
    bool certified = false;
};

struct EigenResult {
    std::vector<EigenEntry> entries;
    std::size_t uncertified = 0;
    double max_residual = 0.0;

    std::vector<cplx> values() const {
        std::vector<cplx> v;
        v.reserve(entries.size());
        for (const auto& e : entries) v.push_back(e.value);
        return v;
    }
};

inline constexpr std::size_t eigen_cap = 7000;

// Complex Schur form (Hessenberg reduction + shifted QR). Every eigenpair is
// certified by its residual; failures are refined by inverse iteration and
// reported, not thrown.
inline EigenResult eigenvalues_dense(const Eigen::MatrixXcd& M, double tol = 1e-8) {
    if (M.rows() != M.cols()) throw std::invalid_argument("eigenvalues_dense: matrix must be square");
    if (static_cast<std::size_t>(M.rows()) > eigen_cap)
        throw std::invalid_argument("eigenvalues_dense: dimension exceeds " + std::to_string(eigen_cap));
    EigenResult r;
    if (M.rows() == 0) return r;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M, true);
    if (es.info() != Eigen::Success) throw numerical_error("eigenvalues_dense: QR iteration did not converge");
    const auto n = M.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        const cplx lambda = es.eigenvalues()[i];
        Eigen::VectorXcd v = es.eigenvectors().col(i);
        double res = (M * v - lambda * v).norm() / v.norm();
        if (!(res <= tol)) {
            // inverse iteration with a slightly perturbed shift
            const double scale = std::max(1.0, std::abs(lambda));
            Eigen::MatrixXcd S = M;
            S.diagonal().array() -= lambda + cplx(1e-10 * scale, 1e-10 * scale);
            Eigen::PartialPivLU<Eigen::MatrixXcd> lu(S);
            for (int it = 0; it < 3 && !(res <= tol); ++it) {
                v = lu.solve(v);
                v.normalize();
                res = (M * v - lambda * v).norm();
            }
        }
        r.entries.push_back({lambda, res, res <= tol});
        if (!(res <= tol)) ++r.uncertified;
        r.max_residual = std::max(r.max_residual, res);
    }
    std::sort(r.entries.begin(), r.entries.end(), [](const EigenEntry& a, const EigenEntry& b) {
        return a.value.real() != b.value.real() ? a.value.real() < b.value.real() : a.value.imag() < b.value.imag();
    });
    return r;
}

// ------------------------------------------------------------ sigma <-> a map

// a = sigma / (sigma - 1), the inverse of a_to_sigma; generic so exact
// rational types can be used.
template <class T>
T sigma_to_a(const T& sigma) {
    if (sigma == T(1)) throw std::invalid_argument("sigma_to_a: sigma = 1 is a pole");
    return sigma / (sigma - T(1));
}

// sigma = a / (a - 1)
template <class T>
T a_to_sigma(const T& a) {
    if (a == T(1)) throw std::invalid_argument("a_to_sigma: a = 1 is a pole");
    return a / (a - T(1));
}

// ------------------------------------------------------------- Sigma estimate

// Essential spectrum of 1/2 I - K: a point set or a closed real interval.
struct SigmaEstimate {
    std::vector<double> points;            // used when !interval
    std::optional<std::pair<double, double>> interval;
    double uncertainty = 0.0;              // numeric estimates only

    static SigmaEstimate smooth() { return {{0.5}, std::nullopt, 0.0}; }
    static SigmaEstimate range(double lo, double hi, double unc) { return {{}, std::make_pair(lo, hi), unc}; }

    std::vector<double> samples(int n = 41) const {
        if (!interval) return points;
        std::vector<double> s;
        for (int i = 0; i < n; ++i) s.push_back(interval->first + (interval->second - interval->first) * i / (n - 1));
        return s;
    }
};

// {a sampled in Omega} U {1/2 (1 + a) + (a - 1)(1/2 - sigma) : sigma in Sigma}
inline std::vector<cplx> predict_clusters(const std::vector<cplx>& a_interior, cplx a_boundary,
                                          const SigmaEstimate& sigma) {
    std::vector<cplx> out;
    auto push = [&out](cplx z) {
        for (const auto& w : out)
            if (std::abs(w - z) < 1e-14) return;
        out.push_back(z);
    };
    for (const auto& a : a_interior) push(a);
    for (double s : sigma.samples()) push(0.5 * (1.0 + a_boundary) + (a_boundary - 1.0) * (0.5 - s));
    return out;
}

// ----------------------------------------------------------- Fredholm verdict

enum class VerdictStrength { iff, sufficient_only };

inline const char* to_string(VerdictStrength s) { return s == VerdictStrength::iff ? "iff" : "sufficient-only"; }

struct FredholmVerdict {
    bool condition_i = false;   // a != 0 on the closure of Omega
    double min_abs_a = 0.0;
    bool condition_ii = false;  // a(x) != sigma/(sigma - 1) on Gamma
    double min_distance = 0.0;  // min over boundary samples of dist(a(x), breakdown set)
    Vec worst_point{};
    double worst_sigma = 0.0;
    bool inconclusive = false;  // within the Sigma uncertainty of an endpoint
    VerdictStrength strength = VerdictStrength::sufficient_only;

    bool fredholm() const { return condition_i && condition_ii; }
};

namespace detail {

// Distance from a to the breakdown set {sigma/(sigma - 1) : sigma in Sigma}.
inline std::pair<double, double> breakdown_distance(cplx a, const SigmaEstimate& s) {
    if (s.interval) {
        // sigma / (sigma - 1) is decreasing on (0, 1): [lo, hi] -> [a(hi), a(lo)]
        const double lo = sigma_to_a(s.interval->second), hi = sigma_to_a(s.interval->first);
        const double re = std::clamp(a.real(), lo, hi);
        const double sig = a_to_sigma(re);
        return {std::abs(a - cplx(re, 0.0)), sig};
    }
    double best = std::numeric_limits<double>::infinity(), bs = 0.0;
    for (double sig : s.points) {
        const double d = std::abs(a - sigma_to_a(cplx(sig)));
        if (d < best) {
            best = d;
            bs = sig;
        }
    }
    return {best, bs};
}

}  // namespace detail

inline FredholmVerdict fredholm_verdict(const CoefficientField& coeffs, const SigmaEstimate& sigma,
                                        int samples_per_axis = 101, int boundary_samples = 512,
                                        double tolerance = 1e-9) {
    const auto& dom = coeffs.domain();
    const int d = dom.dimension();
    const auto& box = dom.bounding_box();
    FredholmVerdict v;
    v.min_abs_a = std::numeric_limits<double>::infinity();
    const int ns = d == 3 ? std::max(11, samples_per_axis / 3) : samples_per_axis;
    std::array<int, 3> cnt{ns, ns, d == 3 ? ns : 1};
    for (int k = 0; k < cnt[2]; ++k)
        for (int j = 0; j < cnt[1]; ++j)
            for (int i = 0; i < cnt[0]; ++i) {
                Vec x{};
                const std::array<int, 3> idx{i, j, k};
                for (int a = 0; a < d; ++a) x[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * idx[a] / (cnt[a] - 1);
                if (!dom.contains(x)) continue;
                v.min_abs_a = std::min(v.min_abs_a, std::abs(coeffs.a_inside(x)));
            }
    const BoundaryMesh mesh = build_boundary_mesh(dom, boundary_samples);
    std::vector<Vec> bpts;
    for (const auto& nd : mesh.nodes) bpts.push_back(nd.x);
    if (const auto* p = std::get_if<Polygon>(&dom.shape()))
        for (const auto& q : p->vertices) bpts.push_back({q[0], q[1], 0.0});
    v.min_distance = std::numeric_limits<double>::infinity();
    double amin = std::numeric_limits<double>::infinity(), amax = 0.0;
    const cplx alpha0 = coeffs.alpha_inside(bpts.front());
    double alpha_dev = 0.0;
    for (const auto& x : bpts) {
        const cplx a = coeffs.a_inside(x);
        v.min_abs_a = std::min(v.min_abs_a, std::abs(a));
        alpha_dev = std::max(alpha_dev, std::abs(coeffs.alpha_inside(x) - alpha0));
        const auto [dist, sig] = detail::breakdown_distance(a, sigma);
        if (dist < v.min_distance) {
            v.min_distance = dist;
            v.worst_point = x;
            v.worst_sigma = sig;
        }
        amin = std::min(amin, std::abs(a));
        amax = std::max(amax, std::abs(a));
    }
    v.condition_i = v.min_abs_a > 1e-9;
    v.condition_ii = v.min_distance > tolerance;
    if (sigma.interval && sigma.uncertainty > 0.0) {
        // distance in sigma space to the interval endpoints
        for (const auto& x : bpts) {
            const cplx a = coeffs.a_inside(x);
            if (std::abs(a - 1.0) < 1e-14) continue;
            const cplx s = a_to_sigma(a);
            if (std::abs(s.imag()) > sigma.uncertainty) continue;
            for (double e : {sigma.interval->first, sigma.interval->second})
                if (std::abs(s.real() - e) <= sigma.uncertainty) v.inconclusive = true;
        }
    }
    v.strength = alpha_dev <= 1e-10 ? VerdictStrength::iff : VerdictStrength::sufficient_only;
    return v;
}

// ------------------------------------------------------------ clusters

struct Cluster {
    cplx center;
    std::size_t count_coarse = 0;
    std::size_t count_fine = 0;
    double radius = 0.0;      // max member distance from the centre (fine level)
    double re_lo = 0.0, re_hi = 0.0, im_lo = 0.0, im_hi = 0.0;
};

struct ClusterReport {
    double delta = 0.1;
    std::size_t n_coarse = 0, n_fine = 0;  // problem sizes of the two levels
    std::vector<Cluster> clusters;         // accepted accumulation centres
    std::vector<Cluster> rejected;         // dense groups that did not grow
    std::size_t outside_coarse = 0, outside_fine = 0;
    std::vector<cplx> members;             // fine-level members of accepted clusters

    bool stable(std::size_t allowed = 2) const {
        const auto d = outside_fine > outside_coarse ? outside_fine - outside_coarse : outside_coarse - outside_fine;
        return d <= allowed;
    }
    // max distance between two members of the accumulation set
    double diameter() const {
        double d = 0.0;
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = i + 1; j < members.size(); ++j) d = std::max(d, std::abs(members[i] - members[j]));
        return d;
    }
    bool contains(cplx z, double tol) const {
        for (const auto& m : members)
            if (std::abs(m - z) <= tol) return true;
        return false;
    }
};

namespace detail {

inline cplx componentwise_median(std::vector<cplx> v) {
    std::vector<double> re, im;
    for (const auto& z : v) {
        re.push_back(z.real());
        im.push_back(z.imag());
    }
    auto med = [](std::vector<double>& x) {
        std::sort(x.begin(), x.end());
        const std::size_t n = x.size();
        return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
    };
    return {med(re), med(im)};
}

}  // namespace detail

// Greedy density clustering. Repeatedly takes the fine-level eigenvalue with
// most unassigned neighbours within delta, centres a group on the median of
// those neighbours and accepts it when its population grows with the problem
// size: count_fine > count_coarse (N_fine/N_coarse)^(1/4). Groups smaller than
// min_members stop the search.
inline ClusterReport detect_clusters(const std::vector<cplx>& coarse, std::size_t n_coarse,
                                     const std::vector<cplx>& fine, std::size_t n_fine, double delta,
                                     std::size_t min_members = 5) {
    if (!(delta > 0.0)) throw std::invalid_argument("detect_clusters: delta must be positive");
    if (!(n_fine > n_coarse)) throw std::invalid_argument("detect_clusters: levels must be ordered n_coarse < n_fine");
    ClusterReport rep;
    rep.delta = delta;
    rep.n_coarse = n_coarse;
    rep.n_fine = n_fine;
    const double growth = std::pow(static_cast<double>(n_fine) / static_cast<double>(n_coarse), 0.25);
    std::vector<bool> used_f(fine.size(), false), used_c(coarse.size(), false);
    std::vector<cplx> centres;
    for (;;) {
        std::size_t best = fine.size(), best_count = 0;
        for (std::size_t i = 0; i < fine.size(); ++i) {
            if (used_f[i]) continue;
            std::size_t c = 0;
            for (std::size_t j = 0; j < fine.size(); ++j)
                if (!used_f[j] && std::abs(fine[j] - fine[i]) <= delta) ++c;
            if (c > best_count) {
                best_count = c;
                best = i;
            }
        }
        if (best == fine.size() || best_count < min_members) break;
        std::vector<cplx> group;
        for (std::size_t j = 0; j < fine.size(); ++j)
            if (!used_f[j] && std::abs(fine[j] - fine[best]) <= delta) group.push_back(fine[j]);
        Cluster cl;
        cl.center = detail::componentwise_median(group);
        std::vector<std::size_t> mf, mc;
        for (std::size_t j = 0; j < fine.size(); ++j)
            if (!used_f[j] && std::abs(fine[j] - cl.center) <= delta) mf.push_back(j);
        for (std::size_t j = 0; j < coarse.size(); ++j)
            if (!used_c[j] && std::abs(coarse[j] - cl.center) <= delta) mc.push_back(j);
        if (mf.empty()) mf.push_back(best);  // median fell off the group; keep the seed
        cl.count_fine = mf.size();
        cl.count_coarse = mc.size();
        cl.re_lo = cl.im_lo = std::numeric_limits<double>::infinity();
        cl.re_hi = cl.im_hi = -std::numeric_limits<double>::infinity();
        for (auto j : mf) {
            used_f[j] = true;
            cl.radius = std::max(cl.radius, std::abs(fine[j] - cl.center));
            cl.re_lo = std::min(cl.re_lo, fine[j].real());
            cl.re_hi = std::max(cl.re_hi, fine[j].real());
            cl.im_lo = std::min(cl.im_lo, fine[j].imag());
            cl.im_hi = std::max(cl.im_hi, fine[j].imag());
        }
        for (auto j : mc) used_c[j] = true;
        const bool grows = static_cast<double>(cl.count_fine) > static_cast<double>(cl.count_coarse) * growth;
        if (grows) {
            rep.clusters.push_back(cl);
            for (auto j : mf) rep.members.push_back(fine[j]);
            centres.push_back(cl.center);
        } else {
            rep.rejected.push_back(cl);
        }
    }
    auto outside = [&](const std::vector<cplx>& ev) {
        std::size_t n = 0;
        for (const auto& z : ev) {
            bool in = false;
            for (const auto& c : centres)
                if (std::abs(z - c) <= delta) {
                    in = true;
                    break;
                }
            if (!in) ++n;
        }
        return n;
    };
    rep.outside_coarse = outside(coarse);
    rep.outside_fine = outside(fine);
    return rep;
}

// Every detected centre lies within tol of a predicted point and every
// predicted point has a detected centre within tol.
inline bool clusters_match(const ClusterReport& rep, const std::vector<cplx>& predicted, double tol) {
    for (const auto& c : rep.clusters) {
        bool ok = false;
        for (const auto& p : predicted) ok = ok || std::abs(c.center - p) <= tol;
        if (!ok) return false;
    }
    for (const auto& p : predicted) {
        bool ok = false;
        for (const auto& c : rep.clusters) ok = ok || std::abs(c.center - p) <= tol;
        if (!ok) return false;
    }
    return true;
}

// Eigenvalues of 1/2 I - K (Laplace kernel in 2D) on a boundary mesh.
inline EigenResult half_minus_K_spectrum(const DomainGeometry& domain, int nodes, double grading = 1.0,
                                         WaveParameters wave = WaveParameters(0.0, 2)) {
    const BoundaryMesh mesh = build_boundary_mesh(domain, nodes, grading);
    const DenseOperator K = assemble_K(mesh, wave);
    const auto M = static_cast<Eigen::Index>(mesh.size());
    return eigenvalues_dense(0.5 * Eigen::MatrixXcd::Identity(M, M) - K.matrix);
}

// Sigma from accumulation of 1/2 I - K eigenvalues at nodes/2 and nodes:
// {1/2} for smooth curves, otherwise the real hull of the accumulated
// members with the level-to-level movement of its endpoints as uncertainty.
inline SigmaEstimate estimate_sigma(const DomainGeometry& domain, int nodes = 256, double delta = 0.1,
                                    double grading = 1.0) {
    if (domain.is_smooth()) return SigmaEstimate::smooth();
    if (domain.dimension() != 2) throw std::invalid_argument("estimate_sigma: polygons are two-dimensional");
    const auto coarse = half_minus_K_spectrum(domain, nodes / 2, grading).values();
    const auto fine = half_minus_K_spectrum(domain, nodes, grading).values();
    const ClusterReport rep = detect_clusters(coarse, static_cast<std::size_t>(nodes / 2), fine,
                                              static_cast<std::size_t>(nodes), delta);
    if (rep.members.empty()) throw numerical_error("estimate_sigma: no accumulation detected");
    auto hull = [&](const std::vector<cplx>& ev) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& z : ev)
            for (const auto& c : rep.clusters)
                if (std::abs(z - c.center) <= delta) {
                    lo = std::min(lo, z.real());
                    hi = std::max(hi, z.real());
                    break;
                }
        return std::make_pair(lo, hi);
    };
    const auto f = hull(fine);
    const auto c = hull(coarse);
    const double unc =
        std::isfinite(c.first) ? std::max(std::abs(f.first - c.first), std::abs(f.second - c.second)) : delta;
    return SigmaEstimate::range(f.first, f.second, unc);
}

// ------------------------------------------------------ spectral operators

// Discrete representation of I - A used for spectra and conditioning.
//  volume:    the discretized (I - A) matrix on the grid unknowns.
//  augmented: the boundary-domain system in (u, phi); its spectrum is that
//             of I - A together with the point a.
enum class SpectralRepresentation { volume, augmented };

inline const char* to_string(SpectralRepresentation r) {
    return r == SpectralRepresentation::volume ? "volume" : "augmented";
}

struct SpectralOperator {
    Eigen::MatrixXcd matrix;
    Eigen::VectorXd weights;  // sqrt of quadrature weights per unknown
    std::size_t volume_unknowns = 0;
    std::size_t boundary_unknowns = 0;
    SpectralRepresentation representation = SpectralRepresentation::volume;

    // W M W^-1: the matrix in the quadrature-weighted L2 norm.
    Eigen::MatrixXcd weighted() const {
        return weights.asDiagonal() * matrix * weights.cwiseInverse().asDiagonal();
    }
};

inline SpectralOperator spectral_operator(const VolumeGrid& grid, const WaveParameters& wave,
                                          const CoefficientField& coeffs, SpectralRepresentation rep,
                                          const BoundaryMesh* mesh = nullptr,
                                          BoundaryKernel kernel = BoundaryKernel::nystrom) {
    VolumeOperator vop(grid, wave, coeffs);
    SpectralOperator s;
    s.representation = rep;
    s.volume_unknowns = grid.size();
    const double wv = std::sqrt(grid.cell_volume());
    if (rep == SpectralRepresentation::volume || !coeffs.has_alpha()) {
        s.representation = SpectralRepresentation::volume;
        s.matrix = vop.assemble_identity_minus_A(eigen_cap).matrix;
        s.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid.size()), wv);
        return s;
    }
    if (!mesh) throw std::invalid_argument("spectral_operator: augmented representation needs a boundary mesh");
    const CoupledOperator c = assemble_coupled(vop, *mesh, coeffs, kernel, eigen_cap);
    s.matrix = c.op.matrix;
    s.boundary_unknowns = mesh->size();
    s.weights.resize(static_cast<Eigen::Index>(grid.size() + mesh->size()));
    s.weights.head(static_cast<Eigen::Index>(grid.size())).setConstant(wv);
    for (std::size_t j = 0; j < mesh->size(); ++j)
        s.weights[static_cast<Eigen::Index>(grid.size() + j)] = std::sqrt(mesh->nodes[j].weight);
    return s;
}

// ------------------------------------------------------------ conditioning

struct ConditionEstimate {
    double norm = 0.0;
    double inverse_norm = 0.0;
    double condition = 0.0;  // infinity when singular
};

// ||M|| ||M^-1|| by power iteration on M^H M and on (M^H M)^-1 through an LU
// factorisation; iterations x restarts, maximum over restarts.
inline ConditionEstimate condition_estimate(const Eigen::MatrixXcd& M, int iterations = 20, int restarts = 3,
                                            std::uint64_t seed = 12345) {
    ConditionEstimate c;
    c.norm = operator_norm_estimate(M, restarts, iterations, seed);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
    if (!(lu.rcond() > 0.0) || !std::isfinite(lu.rcond())) {
        c.inverse_norm = c.condition = std::numeric_limits<double>::infinity();
        return c;
    }
    c.inverse_norm = operator_norm_estimate(
        [&lu](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return lu.solve(x); },
        [&lu](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return lu.adjoint().solve(x); }, M.cols(), restarts,
        iterations, seed + 1);
    c.condition = std::isfinite(c.inverse_norm) ? c.norm * c.inverse_norm : std::numeric_limits<double>::infinity();
    return c;
}

struct ConditionPoint {
    cplx a;
    ConditionEstimate weighted;  // quadrature-weighted L2 norm
    ConditionEstimate nodal;     // plain l2 on the unknowns
};

// Condition of I - A for a piecewise-constant coefficient a on the domain,
// for each a in the sequence.
inline std::vector<ConditionPoint> condition_sweep(const DomainGeometry& domain, const WaveParameters& wave,
                                                   const std::vector<cplx>& a_values, int n_per_axis,
                                                   SpectralRepresentation rep, int boundary_nodes,
                                                   BoundaryKernel kernel = BoundaryKernel::nystrom,
                                                   std::uint64_t seed = 12345, int iterations = 20,
                                                   int restarts = 3) {
    const VolumeGrid grid(domain, n_per_axis);
    std::optional<BoundaryMesh> mesh;
    if (rep == SpectralRepresentation::augmented) mesh = build_boundary_mesh(domain, boundary_nodes);
    std::vector<ConditionPoint> out;
    for (const auto& a : a_values) {
        const auto coeffs = CoefficientField::constant(domain, wave, a);
        const SpectralOperator s = spectral_operator(grid, wave, coeffs, rep, mesh ? &*mesh : nullptr, kernel);
        ConditionPoint p;
        p.a = a;
        p.nodal = condition_estimate(s.matrix, iterations, restarts, seed);
        p.weighted = condition_estimate(s.weighted(), iterations, restarts, seed);
        out.push_back(p);
    }
    return out;
}

}  // namespace vie
