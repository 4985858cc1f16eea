#pragma once
//
// Scatterer shapes, the uniform volume grid over the scatterer and the
// boundary quadrature mesh.
//

#include <algorithm>
#include <cstddef>
#include <limits>
#include <variant>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "vie/core.hpp"
#include "vie/quadrature.hpp"

namespace vie {

struct Disc {
    double radius = 1.0;
};

struct Ellipse {
    double semi_x = 1.0;
    double semi_y = 1.0;
};

// Counterclockwise vertex sequence.
struct Polygon {
    std::vector<std::array<double, 2>> vertices;
};

struct Ball {
    double radius = 1.0;
};

struct BoundingBox {
    Vec lo{};
    Vec hi{};
};

enum class Location { inside, outside };

class DomainGeometry {
public:
    using Shape = std::variant<Disc, Ellipse, Polygon, Ball>;

    DomainGeometry(Shape shape, double margin = 0.0) : shape_(std::move(shape)) {
        if (margin < 0.0) throw std::invalid_argument("DomainGeometry: negative bounding-box margin");
        std::visit([this](const auto& s) { validate(s); }, shape_);
        box_ = std::visit([](const auto& s) { return extents(s); }, shape_);
        for (int i = 0; i < dimension(); ++i) {
            box_.lo[i] -= margin;
            box_.hi[i] += margin;
        }
    }

    static DomainGeometry disc(double radius) { return DomainGeometry(Disc{radius}); }
    static DomainGeometry ellipse(double ax, double ay) { return DomainGeometry(Ellipse{ax, ay}); }
    static DomainGeometry polygon(std::vector<std::array<double, 2>> v) { return DomainGeometry(Polygon{std::move(v)}); }
    static DomainGeometry ball(double radius) { return DomainGeometry(Ball{radius}); }
    static DomainGeometry square(double half_side) {
        const double s = half_side;
        return polygon({{-s, -s}, {s, -s}, {s, s}, {-s, s}});
    }

    int dimension() const { return std::holds_alternative<Ball>(shape_) ? 3 : 2; }
    const Shape& shape() const { return shape_; }
    const BoundingBox& bounding_box() const { return box_; }
    bool is_polygon() const { return std::holds_alternative<Polygon>(shape_); }
    bool is_smooth() const { return !is_polygon(); }

    double diameter() const {
        double d2 = 0.0;
        for (int i = 0; i < dimension(); ++i) d2 += std::pow(box_.hi[i] - box_.lo[i], 2);
        return std::sqrt(d2);
    }

    // Points on the boundary (within 1e-14) are classified as inside.
    Location classify(const Vec& x) const {
        return std::visit([&x](const auto& s) { return classify_impl(s, x); }, shape_);
    }
    bool contains(const Vec& x) const { return classify(x) == Location::inside; }

    // Euclidean distance from x to the boundary.
    double boundary_distance(const Vec& x) const {
        return std::visit([&x](const auto& s) { return boundary_distance_impl(s, x); }, shape_);
    }

private:
    Shape shape_;
    BoundingBox box_;

    static void validate(const Disc& d) {
        if (!(d.radius > 0.0)) throw std::invalid_argument("disc: radius must be positive");
    }
    static void validate(const Ball& b) {
        if (!(b.radius > 0.0)) throw std::invalid_argument("ball: radius must be positive");
    }
    static void validate(const Ellipse& e) {
        if (!(e.semi_x > 0.0 && e.semi_y > 0.0)) throw std::invalid_argument("ellipse: semi-axes must be positive");
    }
    static void validate(const Polygon& p) {
        const auto& v = p.vertices;
        const std::size_t n = v.size();
        if (n < 3) throw std::invalid_argument("polygon: need at least three vertices");
        double area2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = v[i];
            const auto& b = v[(i + 1) % n];
            const auto& c = v[(i + 2) % n];
            if (a == b) throw std::invalid_argument("polygon: repeated vertex");
            const double cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if (std::abs(cross) < 1e-14) throw std::invalid_argument("polygon: collinear consecutive vertices");
            area2 += a[0] * b[1] - b[0] * a[1];
        }
        if (!(area2 > 0.0)) throw std::invalid_argument("polygon: vertices must be counterclockwise");
    }

    static BoundingBox extents(const Disc& d) { return {{-d.radius, -d.radius, 0}, {d.radius, d.radius, 0}}; }
    static BoundingBox extents(const Ball& b) {
        return {{-b.radius, -b.radius, -b.radius}, {b.radius, b.radius, b.radius}};
    }
    static BoundingBox extents(const Ellipse& e) { return {{-e.semi_x, -e.semi_y, 0}, {e.semi_x, e.semi_y, 0}}; }
    static BoundingBox extents(const Polygon& p) {
        BoundingBox b{{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(), 0},
                      {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(), 0}};
        for (const auto& v : p.vertices)
            for (int i = 0; i < 2; ++i) {
                b.lo[i] = std::min(b.lo[i], v[i]);
                b.hi[i] = std::max(b.hi[i], v[i]);
            }
        return b;
    }

    static double boundary_distance_impl(const Disc& d, const Vec& x) {
        return std::abs(std::hypot(x[0], x[1]) - d.radius);
    }
    static double boundary_distance_impl(const Ball& b, const Vec& x) { return std::abs(norm(x) - b.radius); }
    static double boundary_distance_impl(const Ellipse& e, const Vec& x) {
        // Newton on the foot-point condition, started from the polar angle
        double best = std::numeric_limits<double>::infinity();
        for (int start = 0; start < 8; ++start) {
            double t = std::atan2(x[1] / e.semi_y, x[0] / e.semi_x) + start * pi / 4.0;
            for (int it = 0; it < 60; ++it) {
                const double c = std::cos(t), s = std::sin(t);
                const double dx = e.semi_x * c - x[0], dy = e.semi_y * s - x[1];
                const double g = -dx * e.semi_x * s + dy * e.semi_y * c;
                const double gp = std::pow(e.semi_x * s, 2) + std::pow(e.semi_y * c, 2) - dx * e.semi_x * c -
                                  dy * e.semi_y * s;
                if (gp <= 0.0) break;
                const double step = g / gp;
                t -= step;
                if (std::abs(step) < 1e-15) break;
            }
            best = std::min(best, std::hypot(e.semi_x * std::cos(t) - x[0], e.semi_y * std::sin(t) - x[1]));
        }
        return best;
    }
    static double boundary_distance_impl(const Polygon& p, const Vec& x) {
        const auto& v = p.vertices;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& a = v[i];
            const auto& b = v[(i + 1) % v.size()];
            const double ex = b[0] - a[0], ey = b[1] - a[1];
            const double t = std::clamp(((x[0] - a[0]) * ex + (x[1] - a[1]) * ey) / (ex * ex + ey * ey), 0.0, 1.0);
            best = std::min(best, std::hypot(a[0] + t * ex - x[0], a[1] + t * ey - x[1]));
        }
        return best;
    }

    static Location classify_impl(const Disc& d, const Vec& x) {
        return x[0] * x[0] + x[1] * x[1] <= d.radius * d.radius * (1.0 + 1e-14) ? Location::inside : Location::outside;
    }
    static Location classify_impl(const Ball& b, const Vec& x) {
        return dot(x, x) <= b.radius * b.radius * (1.0 + 1e-14) ? Location::inside : Location::outside;
    }
    static Location classify_impl(const Ellipse& e, const Vec& x) {
        const double q = std::pow(x[0] / e.semi_x, 2) + std::pow(x[1] / e.semi_y, 2);
        return q <= 1.0 + 1e-14 ? Location::inside : Location::outside;
    }
    static Location classify_impl(const Polygon& p, const Vec& x) {
        const auto& v = p.vertices;
        const std::size_t n = v.size();
        // boundary tie-break
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = v[i];
            const auto& b = v[(i + 1) % n];
            const double ex = b[0] - a[0], ey = b[1] - a[1];
            const double len2 = ex * ex + ey * ey;
            double t = ((x[0] - a[0]) * ex + (x[1] - a[1]) * ey) / len2;
            t = std::clamp(t, 0.0, 1.0);
            const double dx = a[0] + t * ex - x[0], dy = a[1] + t * ey - x[1];
            if (dx * dx + dy * dy <= 1e-28) return Location::inside;
        }
        bool in = false;
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const auto& a = v[i];
            const auto& b = v[j];
            if ((a[1] > x[1]) != (b[1] > x[1])) {
                const double xc = (b[0] - a[0]) * (x[1] - a[1]) / (b[1] - a[1]) + a[0];
                if (x[0] < xc) in = !in;
            }
        }
        return in ? Location::inside : Location::outside;
    }
};

inline Location classify_point(const DomainGeometry& domain, const Vec& x) { return domain.classify(x); }

// Uniform cell-centred grid over the bounding box. A cell is included when
// its centre lies in the closed domain.
class VolumeGrid {
public:
    VolumeGrid(const DomainGeometry& domain, int n_per_axis) : dim_(domain.dimension()) {
        if (n_per_axis < 4) throw std::invalid_argument("build_volume_grid: n_per_axis must be >= 4");
        const auto& box = domain.bounding_box();
        double longest = 0.0;
        for (int i = 0; i < dim_; ++i) longest = std::max(longest, box.hi[i] - box.lo[i]);
        h_ = longest / n_per_axis;
        for (int i = 0; i < 3; ++i) {
            if (i < dim_) {
                const double ext = box.hi[i] - box.lo[i];
                dims_[i] = std::max(1, static_cast<int>(std::ceil(ext / h_ - 1e-9)));
                origin_[i] = 0.5 * (box.lo[i] + box.hi[i]) - 0.5 * dims_[i] * h_;
            } else {
                dims_[i] = 1;
                origin_[i] = -0.5 * h_;
            }
        }
        const std::size_t total = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
        index_of_.assign(total, -1);
        for (int k = 0; k < dims_[2]; ++k)
            for (int j = 0; j < dims_[1]; ++j)
                for (int i = 0; i < dims_[0]; ++i) {
                    const std::array<int, 3> c{i, j, k};
                    const Vec x = center(c);
                    if (domain.contains(x)) {
                        index_of_[linear(c)] = static_cast<long>(cells_.size());
                        cells_.push_back(c);
                        centers_.push_back(x);
                    }
                }
        if (cells_.empty()) throw std::invalid_argument("build_volume_grid: no cell centre lies inside the domain");
    }

    int dimension() const { return dim_; }
    double spacing() const { return h_; }
    double cell_volume() const { return std::pow(h_, dim_); }
    const std::array<int, 3>& dims() const { return dims_; }
    const Vec& origin() const { return origin_; }
    std::size_t size() const { return cells_.size(); }
    std::size_t total_cells() const { return index_of_.size(); }

    Vec center(const std::array<int, 3>& c) const {
        Vec x{};
        for (int i = 0; i < 3; ++i) x[i] = (i < dim_) ? origin_[i] + (c[i] + 0.5) * h_ : 0.0;
        return x;
    }
    const Vec& center(std::size_t n) const { return centers_[n]; }
    const std::vector<Vec>& centers() const { return centers_; }
    const std::array<int, 3>& cell(std::size_t n) const { return cells_[n]; }

    bool in_grid(const std::array<int, 3>& c) const {
        for (int i = 0; i < 3; ++i)
            if (c[i] < 0 || c[i] >= dims_[i]) return false;
        return true;
    }
    // Unknown index of grid cell c, or -1 if excluded / outside the grid.
    long index(const std::array<int, 3>& c) const { return in_grid(c) ? index_of_[linear(c)] : -1; }
    bool included(const std::array<int, 3>& c) const { return index(c) >= 0; }

private:
    int dim_;
    double h_ = 0.0;
    std::array<int, 3> dims_{1, 1, 1};
    Vec origin_{};
    std::vector<std::array<int, 3>> cells_;
    std::vector<Vec> centers_;
    std::vector<long> index_of_;

    std::size_t linear(const std::array<int, 3>& c) const {
        return (static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
    }
};

inline VolumeGrid build_volume_grid(const DomainGeometry& domain, int n_per_axis) {
    return VolumeGrid(domain, n_per_axis);
}

struct BoundaryNode {
    Vec x{};
    Vec normal{};
    double weight = 0.0;
    double curvature = 0.0;  // signed, positive for convex smooth curves; 0 on polygon edges
    int edge = -1;           // polygon edge index, -1 for smooth shapes
    double corner_distance = std::numeric_limits<double>::infinity();
    bool corner_adjacent = false;  // first or last node of a polygon edge
};

struct BoundaryMesh {
    int dimension = 2;
    bool smooth = true;
    double grading = 1.0;
    std::vector<BoundaryNode> nodes;
    // For smooth closed curves nodes are equispaced in this parameter on [0, 2pi).
    bool periodic_parameterization = false;
    // ellipse semi-axes of a smooth closed curve (x = semi_x cos t, y = semi_y sin t)
    double semi_x = 0.0;
    double semi_y = 0.0;

    std::size_t size() const { return nodes.size(); }
    double measure() const {
        double s = 0.0;
        for (const auto& n : nodes) s += n.weight;
        return s;
    }
    double mean_spacing() const { return measure() / static_cast<double>(nodes.size()); }
};

namespace detail {

inline BoundaryMesh smooth_curve_mesh(double ax, double ay, int n) {
    BoundaryMesh m;
    m.smooth = true;
    m.periodic_parameterization = true;
    m.semi_x = ax;
    m.semi_y = ay;
    m.nodes.resize(n);
    for (int j = 0; j < n; ++j) {
        const double t = 2.0 * pi * j / n;
        const double c = std::cos(t), s = std::sin(t);
        const double speed = std::hypot(ax * s, ay * c);
        auto& nd = m.nodes[j];
        nd.x = {ax * c, ay * s, 0.0};
        nd.normal = {ay * c / speed, ax * s / speed, 0.0};
        nd.weight = speed * 2.0 * pi / n;
        nd.curvature = ax * ay / (speed * speed * speed);
    }
    return m;
}

inline BoundaryMesh polygon_mesh(const Polygon& p, int n, double grading) {
    const auto& v = p.vertices;
    const std::size_t ne = v.size();
    std::vector<double> len(ne);
    double perim = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& a = v[e];
        const auto& b = v[(e + 1) % ne];
        len[e] = std::hypot(b[0] - a[0], b[1] - a[1]);
        perim += len[e];
    }
    // distribute nodes proportionally to edge length, at least 3 per edge
    std::vector<int> count(ne);
    int assigned = 0;
    for (std::size_t e = 0; e < ne; ++e) {
        count[e] = std::max(3, static_cast<int>(std::floor(n * len[e] / perim)));
        assigned += count[e];
    }
    for (std::size_t e = 0; assigned < n; e = (e + 1) % ne, ++assigned) ++count[e];

    BoundaryMesh m;
    m.smooth = false;
    m.grading = grading;
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& a = v[e];
        const auto& b = v[(e + 1) % ne];
        const double ex = (b[0] - a[0]) / len[e], ey = (b[1] - a[1]) / len[e];
        const auto [t, g] = gauss_legendre01(count[e]);
        for (int j = 0; j < count[e]; ++j) {
            // graded map: regularised incomplete beta I_t(q, q) clusters toward both ends
            double s = t[j], ds = 1.0;
            if (grading != 1.0) {
                s = boost::math::ibeta(grading, grading, t[j]);
                ds = boost::math::ibeta_derivative(grading, grading, t[j]);
            }
            BoundaryNode nd;
            nd.x = {a[0] + s * len[e] * ex, a[1] + s * len[e] * ey, 0.0};
            nd.normal = {ey, -ex, 0.0};
            nd.weight = len[e] * ds * g[j];
            nd.edge = static_cast<int>(e);
            nd.corner_distance = len[e] * std::min(s, 1.0 - s);
            nd.corner_adjacent = (j == 0 || j == count[e] - 1);
            m.nodes.push_back(nd);
        }
    }
    return m;
}

inline BoundaryMesh sphere_mesh(double r, int n) {
    const int nt = std::max(4, static_cast<int>(std::lround(std::sqrt(n / 2.0))));
    const int np = 2 * nt;
    const auto [t, g] = gauss_legendre01(nt);
    BoundaryMesh m;
    m.dimension = 3;
    m.smooth = true;
    for (int i = 0; i < nt; ++i) {
        const double ct = 2.0 * t[i] - 1.0, st = std::sqrt(1.0 - ct * ct);
        for (int j = 0; j < np; ++j) {
            const double ph = 2.0 * pi * j / np;
            BoundaryNode nd;
            nd.normal = {st * std::cos(ph), st * std::sin(ph), ct};
            nd.x = r * nd.normal;
            nd.weight = r * r * 2.0 * g[i] * 2.0 * pi / np;
            nd.curvature = 1.0 / r;
            m.nodes.push_back(nd);
        }
    }
    return m;
}

}  // namespace detail

// Smooth curves: equispaced parameter nodes with trapezoidal weights.
// Polygons: per-edge Gauss-Legendre nodes pushed through a graded map, so no
// node sits on a vertex. Ball: Gauss-Legendre in cos(theta) x trapezoid in phi.
inline BoundaryMesh build_boundary_mesh(const DomainGeometry& domain, int n_nodes, double grading = 1.0) {
    if (n_nodes < 8) throw std::invalid_argument("build_boundary_mesh: need at least 8 nodes");
    if (!(grading >= 1.0)) throw std::invalid_argument("build_boundary_mesh: grading must be >= 1");
    return std::visit(
        [&](const auto& s) -> BoundaryMesh {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Disc>) return detail::smooth_curve_mesh(s.radius, s.radius, n_nodes);
            else if constexpr (std::is_same_v<T, Ellipse>) return detail::smooth_curve_mesh(s.semi_x, s.semi_y, n_nodes);
            else if constexpr (std::is_same_v<T, Polygon>) return detail::polygon_mesh(s, n_nodes, grading);
            else return detail::sphere_mesh(s.radius, n_nodes);
        },
        domain.shape());
}

}  // namespace vie
