#pragma once
//
// The volume integral operator
//   A u = div int_Omega G_k(x-y) alpha(y) grad u(y) dy + int_Omega G_k(x-y) beta(y) u(y) dy
// collocated at cell centres, its smooth-coefficient rewriting
//   (I - A) u = a u + A1 u,
//   A1 u = k^2 G*(alpha u) + div G*(grad(alpha) u) - G*(beta u),
// and the Newton potential G*v.
//
// Discretisation. Gradients live on cell faces (forward differences), the
// divergence acts on the potential by backward differences, so that on the
// infinite lattice div_h G_h grad_h = G_h Delta_h. In 2D the Laplace part of
// the sampled kernel is the five-point lattice Green's function, which makes
// div_h G_h grad_h = -I - k^2 G_h hold up to the smooth-remainder sampling
// error; the remainder G_k - G_0 is sampled pointwise. In 3D the self cell
// uses the equivalent-ball integral of the 1/(4 pi r) singularity.
//
// A boundary face (one side outside the mask) carries half weight and a
// one-sided interior difference, so the face fluxes tile the staircase
// union of included cells.
//

#include <algorithm>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <vector>

#include "vie/coefficients.hpp"
#include "vie/fft.hpp"
#include "vie/geometry.hpp"
#include "vie/lattice_green.hpp"
#include "vie/special_functions.hpp"

namespace vie {

// Square matrix; rows/columns [0, volume_unknowns) follow the VolumeGrid
// order, the trailing boundary_unknowns follow the BoundaryMesh order.
struct DenseOperator {
    Eigen::MatrixXcd matrix;
    std::size_t volume_unknowns = 0;
    std::size_t boundary_unknowns = 0;

    std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
};

inline constexpr std::size_t default_dense_cap = 6000;

// Work lattice: the grid plus one margin cell on each side of every active axis.
struct WorkLattice {
    int dim = 2;
    std::array<int, 3> dims{1, 1, 1};
    std::array<int, 3> shift{0, 0, 0};

    explicit WorkLattice(const VolumeGrid& g) : dim(g.dimension()) {
        for (int i = 0; i < dim; ++i) {
            dims[i] = g.dims()[i] + 2;
            shift[i] = 1;
        }
    }
    std::size_t size() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
    std::size_t linear(const std::array<int, 3>& p) const {
        return (static_cast<std::size_t>(p[2]) * dims[1] + p[1]) * dims[0] + p[0];
    }
    std::array<int, 3> coords(std::size_t s) const {
        std::array<int, 3> p{};
        p[0] = static_cast<int>(s % dims[0]);
        s /= dims[0];
        p[1] = static_cast<int>(s % dims[1]);
        p[2] = static_cast<int>(s / dims[1]);
        return p;
    }
    std::array<int, 3> from_grid(const std::array<int, 3>& c) const {
        return {c[0] + shift[0], c[1] + shift[1], c[2] + shift[2]};
    }
    std::array<int, 3> to_grid(const std::array<int, 3>& p) const {
        return {p[0] - shift[0], p[1] - shift[1], p[2] - shift[2]};
    }
};

// Sampled kernel on integer offsets, G_h(m) ~ G_k(|m| h), including the
// self-cell value at m = 0.
inline cplx sampled_kernel(const WaveParameters& wave, double h, const std::array<int, 3>& m,
                           const std::vector<double>* lattice_table) {
    const double r = h * std::sqrt(static_cast<double>(m[0]) * m[0] + static_cast<double>(m[1]) * m[1] +
                                   static_cast<double>(m[2]) * m[2]);
    if (wave.dim == 2) {
        const double lap = (*lattice_table)[LatticeGreenTable::slot(m[0], m[1])] +
                           (lattice_log_offset - std::log(h)) / (2.0 * pi);
        return lap + greens_remainder(wave, r);
    }
    if (r == 0.0) return 0.5 * std::pow(3.0 / (4.0 * pi), 2.0 / 3.0) / h + greens_remainder(wave, 0.0);
    return greens_value(wave, r);
}

// Integral over a cell of G_k(x - y) for a target at distance rho from the
// cell centre, with the cell replaced by its equivalent disc/ball.
inline cplx equivalent_cell_integral(const WaveParameters& wave, double h, double rho) {
    if (wave.dim == 2) {
        const double R = h / std::sqrt(pi);
        const double lap = rho < R ? -0.5 * R * R * std::log(R) + 0.25 * (R * R - rho * rho)
                                   : -0.5 * R * R * std::log(rho);
        return lap + h * h * greens_remainder(wave, rho);
    }
    const double R = h * std::cbrt(3.0 / (4.0 * pi));
    const double lap = rho < R ? (3.0 * R * R - rho * rho) / 6.0 : R * R * R / (3.0 * rho);
    return lap + h * h * h * greens_remainder(wave, rho);
}

// Kernel tables and their spectra on the zero-padded FFT lattice.
class VolumeKernel {
public:
    VolumeKernel(const VolumeGrid& grid, const WaveParameters& wave)
        : lattice_(grid), wave_(wave), h_(grid.spacing()), dim_(grid.dimension()) {
        if (grid.dimension() != wave.dim) throw std::invalid_argument("VolumeKernel: dimension mismatch");
        std::vector<double> table;
        if (dim_ == 2) table = LatticeGreenTable::instance().table(std::max(lattice_.dims[0], lattice_.dims[1]) + 1);
        for (int i = 0; i < 3; ++i) {
            reach_[i] = i < dim_ ? lattice_.dims[i] : 0;
            span_[i] = 2 * reach_[i] + 1;
        }
        const std::size_t total = static_cast<std::size_t>(span_[0]) * span_[1] * span_[2];
        green_.resize(total);
        for (int k = -reach_[2]; k <= reach_[2]; ++k)
            for (int j = -reach_[1]; j <= reach_[1]; ++j)
                for (int i = -reach_[0]; i <= reach_[0]; ++i)
                    green_[offset_index({i, j, k})] = sampled_kernel(wave_, h_, {i, j, k}, &table);
        const double vol = std::pow(h_, dim_);
        weighted_.resize(total);
        for (std::size_t s = 0; s < total; ++s) weighted_[s] = vol * green_[s];
        for (int e = 0; e < dim_; ++e) {
            diff_[e].assign(total, cplx(0.0));
            for (int k = -reach_[2]; k <= reach_[2]; ++k)
                for (int j = -reach_[1]; j <= reach_[1]; ++j)
                    for (int i = -reach_[0]; i <= reach_[0]; ++i) {
                        std::array<int, 3> m{i, j, k}, mm = m;
                        mm[e] -= 1;
                        if (!in_reach(mm)) continue;
                        diff_[e][offset_index(m)] = vol / h_ * (green_[offset_index(m)] - green_[offset_index(mm)]);
                    }
        }
    }

    const WorkLattice& lattice() const { return lattice_; }
    const WaveParameters& wave() const { return wave_; }
    double spacing() const { return h_; }
    int dimension() const { return dim_; }

    // h^d G_h(m)
    cplx weighted_green(const std::array<int, 3>& m) const { return weighted_[offset_index(m)]; }
    // h^(d-1) (G_h(m) - G_h(m - e_axis))
    cplx difference(int axis, const std::array<int, 3>& m) const { return diff_[axis][offset_index(m)]; }
    cplx green(const std::array<int, 3>& m) const { return green_[offset_index(m)]; }

    bool in_reach(const std::array<int, 3>& m) const {
        for (int i = 0; i < 3; ++i)
            if (m[i] < -reach_[i] || m[i] > reach_[i]) return false;
        return true;
    }

    // FFT machinery, built on first use.
    struct Spectra {
        std::unique_ptr<FftBuffer> buffer;
        std::vector<cplx> accumulator;
        std::vector<cplx> weighted;
        std::array<std::vector<cplx>, 3> diff;
    };
    Spectra& spectra() const {
        std::call_once(fft_once_, [this] { build_spectra(); });
        return *spectra_;
    }
    std::array<int, 3> fft_shape() const {
        std::array<int, 3> s{1, 1, 1};
        for (int i = 0; i < dim_; ++i) s[i] = fft_friendly_size(2 * lattice_.dims[i] - 1);
        return s;
    }

private:
    WorkLattice lattice_;
    WaveParameters wave_;
    double h_;
    int dim_;
    std::array<int, 3> reach_{};
    std::array<int, 3> span_{};
    std::vector<cplx> green_, weighted_;
    std::array<std::vector<cplx>, 3> diff_;
    mutable std::once_flag fft_once_;
    mutable std::unique_ptr<Spectra> spectra_;

    std::size_t offset_index(const std::array<int, 3>& m) const {
        return (static_cast<std::size_t>(m[2] + reach_[2]) * span_[1] + (m[1] + reach_[1])) * span_[0] +
               (m[0] + reach_[0]);
    }

    void build_spectra() const {
        auto sp = std::make_unique<Spectra>();
        const auto shape = fft_shape();
        sp->buffer = std::make_unique<FftBuffer>(dim_, shape);
        sp->accumulator.assign(sp->buffer->size(), cplx(0.0));
        auto transform = [&](const std::vector<cplx>& table) {
            auto& b = *sp->buffer;
            b.zero();
            const auto& L = lattice_.dims;
            for (int k = -(L[2] - 1); k <= L[2] - 1; ++k)
                for (int j = -(L[1] - 1); j <= L[1] - 1; ++j)
                    for (int i = -(L[0] - 1); i <= L[0] - 1; ++i) {
                        const int ii = (i + shape[0]) % shape[0], jj = (j + shape[1]) % shape[1],
                                  kk = (k + shape[2]) % shape[2];
                        b.data()[b.linear(ii, jj, kk)] = table[offset_index({i, j, k})];
                    }
            b.forward();
            return std::vector<cplx>(b.data(), b.data() + b.size());
        };
        sp->weighted = transform(weighted_);
        for (int e = 0; e < dim_; ++e) sp->diff[e] = transform(diff_[e]);
        spectra_ = std::move(sp);
    }
};

// Linear map u -> sum_e D_e * (F_e u) + W * (diag(c) u), evaluated at the
// included cells, where D_e are the difference kernels, W the weighted
// Green's kernel and F_e sparse maps from unknowns to lattice face sites.
class StaggeredConvolution {
public:
    struct Entry {
        std::size_t site;
        std::size_t unknown;
        cplx coeff;
    };

    StaggeredConvolution(std::shared_ptr<const VolumeKernel> kernel, const VolumeGrid& grid)
        : kernel_(std::move(kernel)), n_(grid.size()) {
        const auto& lat = kernel_->lattice();
        cell_site_.resize(n_);
        cell_coords_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            cell_coords_[j] = lat.from_grid(grid.cell(j));
            cell_site_[j] = lat.linear(cell_coords_[j]);
        }
        diagonal_ = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n_));
    }

    std::size_t size() const { return n_; }
    Eigen::VectorXcd& diagonal() { return diagonal_; }
    const Eigen::VectorXcd& diagonal() const { return diagonal_; }
    std::vector<Entry>& face_map(int axis) { return maps_[axis]; }
    const std::vector<Entry>& face_map(int axis) const { return maps_[axis]; }
    const VolumeKernel& kernel() const { return *kernel_; }

    // Direct summation.
    GridField apply(const GridField& u) const {
        check(u);
        const auto& lat = kernel_->lattice();
        const int d = kernel_->dimension();
        GridField out = GridField::Zero(static_cast<Eigen::Index>(n_));
        std::vector<cplx> field(lat.size());
        for (int e = 0; e < d; ++e) {
            if (maps_[e].empty()) continue;
            std::fill(field.begin(), field.end(), cplx(0.0));
            std::vector<std::size_t> sites;
            for (const auto& en : maps_[e]) {
                if (field[en.site] == cplx(0.0)) sites.push_back(en.site);
                field[en.site] += en.coeff * u[static_cast<Eigen::Index>(en.unknown)];
            }
            std::sort(sites.begin(), sites.end());
            sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
            std::vector<std::array<int, 3>> pos(sites.size());
            for (std::size_t s = 0; s < sites.size(); ++s) pos[s] = lat.coords(sites[s]);
            for (std::size_t t = 0; t < n_; ++t) {
                const auto& pt = cell_coords_[t];
                cplx acc = 0.0;
                for (std::size_t s = 0; s < sites.size(); ++s) {
                    const auto& ps = pos[s];
                    acc += kernel_->difference(e, {pt[0] - ps[0], pt[1] - ps[1], pt[2] - ps[2]}) * field[sites[s]];
                }
                out[static_cast<Eigen::Index>(t)] += acc;
            }
        }
        if (diagonal_.cwiseAbs().maxCoeff() > 0.0) {
            const GridField src = diagonal_.cwiseProduct(u);
            for (std::size_t t = 0; t < n_; ++t) {
                const auto& pt = cell_coords_[t];
                cplx acc = 0.0;
                for (std::size_t s = 0; s < n_; ++s) {
                    const auto& ps = cell_coords_[s];
                    acc += kernel_->weighted_green({pt[0] - ps[0], pt[1] - ps[1], pt[2] - ps[2]}) *
                           src[static_cast<Eigen::Index>(s)];
                }
                out[static_cast<Eigen::Index>(t)] += acc;
            }
        }
        return out;
    }

    // Zero-padded circular convolution; d + 1 forward transforms, one inverse.
    GridField apply_fft(const GridField& u) const { return fft_impl(u, false); }
    GridField apply_adjoint_fft(const GridField& u) const { return fft_impl(u, true); }

    // Dense matrix of the map (not I minus it).
    Eigen::MatrixXcd dense() const {
        const auto& lat = kernel_->lattice();
        const auto N = static_cast<Eigen::Index>(n_);
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(N, N);
        for (int e = 0; e < kernel_->dimension(); ++e)
            for (const auto& en : maps_[e]) {
                const auto ps = lat.coords(en.site);
                const auto col = static_cast<Eigen::Index>(en.unknown);
                for (std::size_t t = 0; t < n_; ++t) {
                    const auto& pt = cell_coords_[t];
                    m(static_cast<Eigen::Index>(t), col) +=
                        kernel_->difference(e, {pt[0] - ps[0], pt[1] - ps[1], pt[2] - ps[2]}) * en.coeff;
                }
            }
        for (std::size_t s = 0; s < n_; ++s) {
            const cplx c = diagonal_[static_cast<Eigen::Index>(s)];
            if (c == cplx(0.0)) continue;
            const auto& ps = cell_coords_[s];
            for (std::size_t t = 0; t < n_; ++t) {
                const auto& pt = cell_coords_[t];
                m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) +=
                    kernel_->weighted_green({pt[0] - ps[0], pt[1] - ps[1], pt[2] - ps[2]}) * c;
            }
        }
        return m;
    }

private:
    std::shared_ptr<const VolumeKernel> kernel_;
    std::size_t n_;
    std::vector<std::size_t> cell_site_;
    std::vector<std::array<int, 3>> cell_coords_;
    std::array<std::vector<Entry>, 3> maps_;
    Eigen::VectorXcd diagonal_;

    void check(const GridField& u) const {
        if (static_cast<std::size_t>(u.size()) != n_) throw std::invalid_argument("grid field length mismatch");
    }

    std::size_t fft_site(const FftBuffer& b, std::size_t lattice_site) const {
        const auto p = kernel_->lattice().coords(lattice_site);
        return b.linear(p[0], p[1], p[2]);
    }

    GridField fft_impl(const GridField& u, bool adjoint) const {
        check(u);
        auto& sp = kernel_->spectra();
        auto& b = *sp.buffer;
        std::fill(sp.accumulator.begin(), sp.accumulator.end(), cplx(0.0));
        GridField out = GridField::Zero(static_cast<Eigen::Index>(n_));
        const int d = kernel_->dimension();
        auto accumulate = [&](const std::vector<cplx>& spectrum) {
            b.forward();
            if (adjoint)
                for (std::size_t i = 0; i < b.size(); ++i) sp.accumulator[i] += std::conj(spectrum[i]) * b.data()[i];
            else
                for (std::size_t i = 0; i < b.size(); ++i) sp.accumulator[i] += spectrum[i] * b.data()[i];
        };
        const double scale = 1.0 / static_cast<double>(b.size());
        if (!adjoint) {
            for (int e = 0; e < d; ++e) {
                if (maps_[e].empty()) continue;
                b.zero();
                for (const auto& en : maps_[e])
                    b.data()[fft_site(b, en.site)] += en.coeff * u[static_cast<Eigen::Index>(en.unknown)];
                accumulate(sp.diff[e]);
            }
            b.zero();
            for (std::size_t j = 0; j < n_; ++j)
                b.data()[fft_site(b, cell_site_[j])] =
                    diagonal_[static_cast<Eigen::Index>(j)] * u[static_cast<Eigen::Index>(j)];
            accumulate(sp.weighted);
            std::copy(sp.accumulator.begin(), sp.accumulator.end(), b.data());
            b.backward();
            for (std::size_t j = 0; j < n_; ++j)
                out[static_cast<Eigen::Index>(j)] = scale * b.data()[fft_site(b, cell_site_[j])];
            return out;
        }
        // Adjoint: correlate with each kernel separately, then gather.
        auto correlate = [&](const std::vector<cplx>& spectrum) {
            b.zero();
            for (std::size_t j = 0; j < n_; ++j)
                b.data()[fft_site(b, cell_site_[j])] = u[static_cast<Eigen::Index>(j)];
            b.forward();
            for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] *= std::conj(spectrum[i]) * scale;
            b.backward();
        };
        for (int e = 0; e < d; ++e) {
            if (maps_[e].empty()) continue;
            correlate(sp.diff[e]);
            for (const auto& en : maps_[e])
                out[static_cast<Eigen::Index>(en.unknown)] += std::conj(en.coeff) * b.data()[fft_site(b, en.site)];
        }
        correlate(sp.weighted);
        for (std::size_t j = 0; j < n_; ++j)
            out[static_cast<Eigen::Index>(j)] +=
                std::conj(diagonal_[static_cast<Eigen::Index>(j)]) * b.data()[fft_site(b, cell_site_[j])];
        return out;
    }
};

namespace detail {

// Visits every lattice face (p, p + e) touching at least one included cell.
template <class F>
void for_each_face(const VolumeGrid& grid, const WorkLattice& lat, F&& f) {
    const int d = grid.dimension();
    for (int e = 0; e < d; ++e)
        for (int k = 0; k < lat.dims[2]; ++k)
            for (int j = 0; j < lat.dims[1]; ++j)
                for (int i = 0; i < lat.dims[0]; ++i) {
                    std::array<int, 3> p{i, j, k}, q = p;
                    q[e] += 1;
                    if (q[e] >= lat.dims[e]) continue;
                    const long ip = grid.index(lat.to_grid(p));
                    const long iq = grid.index(lat.to_grid(q));
                    if (ip < 0 && iq < 0) continue;
                    f(e, p, q, ip, iq);
                }
}

}  // namespace detail

// Volume integral operator A for one grid, wave and coefficient field.
class VolumeOperator {
public:
    VolumeOperator(const VolumeGrid& grid, const WaveParameters& wave, const CoefficientField& coeffs)
        : grid_(grid), wave_(wave), kernel_(std::make_shared<VolumeKernel>(grid, wave)),
          full_(kernel_, grid), a1_(kernel_, grid), tag_(coeffs.tag()) {
        if (coeffs.wave().dim != wave.dim || coeffs.wave().k != wave.k)
            throw std::invalid_argument("VolumeOperator: coefficient field built for a different wave");
        const auto N = static_cast<Eigen::Index>(grid.size());
        a_.resize(N);
        alpha_.resize(N);
        beta_.resize(N);
        grad_alpha_.resize(grid.size());
        for (Eigen::Index j = 0; j < N; ++j) {
            const Vec& x = grid.center(static_cast<std::size_t>(j));
            a_[j] = coeffs.a(x);
            alpha_[j] = a_[j] - 1.0;
            beta_[j] = coeffs.beta(x);
            grad_alpha_[static_cast<std::size_t>(j)] = coeffs.grad_alpha(x);
        }
        build_maps();
    }

    const VolumeGrid& grid() const { return grid_; }
    const WaveParameters& wave() const { return wave_; }
    std::shared_ptr<const VolumeKernel> kernel() const { return kernel_; }
    std::size_t size() const { return grid_.size(); }
    const Eigen::VectorXcd& a_values() const { return a_; }
    const Eigen::VectorXcd& alpha_values() const { return alpha_; }
    const Eigen::VectorXcd& beta_values() const { return beta_; }
    SmoothnessTag tag() const { return tag_; }

    // A u by direct summation.
    GridField apply(const GridField& u) const { return full_.apply(u); }
    GridField apply_fft(const GridField& u) const { return full_.apply_fft(u); }
    GridField apply_adjoint_fft(const GridField& u) const { return full_.apply_adjoint_fft(u); }

    // (I - A) u, the operator of the integral equation u - A u = u_inc.
    GridField apply_identity_minus(const GridField& u) const { return u - full_.apply_fft(u); }

    // A1 u (weakly singular terms only).
    GridField apply_A1(const GridField& u) const { return a1_.apply_fft(u); }
    GridField apply_A1_direct(const GridField& u) const { return a1_.apply(u); }

    // A through the smooth rewriting: u - (a u + A1 u). Valid when alpha
    // vanishes on the boundary; the boundary double-layer term is absent.
    GridField apply_smooth_form(const GridField& u) const {
        if (tag_ == SmoothnessTag::piecewise_smooth || tag_ == SmoothnessTag::piecewise_constant)
            throw std::invalid_argument("apply_smooth_form: coefficient has a jump across the boundary");
        return -alpha_.cwiseProduct(u) - a1_.apply_fft(u);
    }

    DenseOperator assemble_identity_minus_A(std::size_t cap = default_dense_cap) const {
        check_cap(cap);
        DenseOperator op;
        op.matrix = Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size())) -
                    full_.dense();
        op.volume_unknowns = size();
        return op;
    }
    DenseOperator assemble_A1(std::size_t cap = default_dense_cap) const {
        check_cap(cap);
        DenseOperator op;
        op.matrix = a1_.dense();
        op.volume_unknowns = size();
        return op;
    }

    const StaggeredConvolution& full_map() const { return full_; }
    const StaggeredConvolution& a1_map() const { return a1_; }

private:
    VolumeGrid grid_;
    WaveParameters wave_;
    std::shared_ptr<VolumeKernel> kernel_;
    StaggeredConvolution full_;
    StaggeredConvolution a1_;
    SmoothnessTag tag_;
    Eigen::VectorXcd a_, alpha_, beta_;
    std::vector<CVec> grad_alpha_;

    void check_cap(std::size_t cap) const {
        if (size() > cap)
            throw std::invalid_argument("dense assembly: " + std::to_string(size()) + " unknowns exceed cap " +
                                        std::to_string(cap));
    }

    void build_maps() {
        const auto& lat = kernel_->lattice();
        const double h = grid_.spacing();
        const cplx k2 = wave_.k_sq();
        auto idx = [](long i) { return static_cast<Eigen::Index>(i); };
        auto unknown = [this, &lat](std::array<int, 3> p, int e, int step) {
            p[e] += step;
            return grid_.index(lat.to_grid(p));
        };
        detail::for_each_face(grid_, lat, [&](int e, const auto& p, const auto& q, long ip, long iq) {
            const std::size_t site = lat.linear(p);
            auto& flux = full_.face_map(e);
            auto& src = a1_.face_map(e);
            if (ip >= 0 && iq >= 0) {
                const cplx af = 0.5 * (alpha_[idx(ip)] + alpha_[idx(iq)]);
                if (af != cplx(0.0)) {
                    flux.push_back({site, static_cast<std::size_t>(iq), af / h});
                    flux.push_back({site, static_cast<std::size_t>(ip), -af / h});
                }
                const cplx g = 0.5 * (grad_alpha_[static_cast<std::size_t>(ip)][e] +
                                      grad_alpha_[static_cast<std::size_t>(iq)][e]);
                if (g != cplx(0.0)) {
                    src.push_back({site, static_cast<std::size_t>(ip), 0.5 * g});
                    src.push_back({site, static_cast<std::size_t>(iq), 0.5 * g});
                }
                return;
            }
            // boundary face: half weight, one-sided difference from the inside
            const long in = ip >= 0 ? ip : iq;
            const long inner = ip >= 0 ? unknown(p, e, -1) : unknown(q, e, +1);
            const cplx ac = alpha_[idx(in)];
            if (inner >= 0 && ac != cplx(0.0)) {
                const double sgn = ip >= 0 ? 1.0 : -1.0;  // (u_in - u_inner) or (u_inner - u_in)
                flux.push_back({site, static_cast<std::size_t>(in), sgn * 0.5 * ac / h});
                flux.push_back({site, static_cast<std::size_t>(inner), -sgn * 0.5 * ac / h});
            }
            const cplx g = grad_alpha_[static_cast<std::size_t>(in)][e];
            if (g != cplx(0.0)) src.push_back({site, static_cast<std::size_t>(in), 0.5 * g});
        });
        full_.diagonal() = beta_;
        a1_.diagonal() = k2 * alpha_ - beta_;
    }
};

// Newton potential sum_j h^d G_k(x - y_j) v_j at arbitrary targets. Targets
// on lattice points use the same kernel table as the volume operator; other
// targets within half a cell of a source use the equivalent-cell integral.
inline Eigen::VectorXcd newton_potential(const VolumeGrid& grid, const WaveParameters& wave, const GridField& v,
                                         const std::vector<Vec>& targets) {
    if (static_cast<std::size_t>(v.size()) != grid.size())
        throw std::invalid_argument("newton_potential: field length mismatch");
    const double h = grid.spacing();
    const int d = grid.dimension();
    const double vol = grid.cell_volume();
    std::vector<double> table;
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(targets.size()));
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const Vec& x = targets[t];
        std::array<double, 3> frac{};
        bool on_lattice = true;
        std::array<int, 3> tc{};
        for (int i = 0; i < d; ++i) {
            frac[i] = (x[i] - grid.origin()[i]) / h - 0.5;
            tc[i] = static_cast<int>(std::lround(frac[i]));
            if (std::abs(frac[i] - tc[i]) > 1e-9) on_lattice = false;
        }
        cplx acc = 0.0;
        if (on_lattice && d == 2) {
            int reach = 0;
            for (std::size_t j = 0; j < grid.size(); ++j)
                for (int i = 0; i < d; ++i) reach = std::max(reach, std::abs(tc[i] - grid.cell(j)[i]));
            if (static_cast<int>(table.size()) <= static_cast<int>(LatticeGreenTable::slot(reach, reach)))
                table = LatticeGreenTable::instance().table(reach);
        }
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const cplx vj = v[static_cast<Eigen::Index>(j)];
            if (vj == cplx(0.0)) continue;
            if (on_lattice) {
                const auto& c = grid.cell(j);
                acc += vol * sampled_kernel(wave, h, {tc[0] - c[0], tc[1] - c[1], d == 3 ? tc[2] - c[2] : 0}, &table) * vj;
                continue;
            }
            const double r = norm(x - grid.center(j));
            if (r < 0.5 * h) acc += equivalent_cell_integral(wave, h, r) * vj;
            else acc += vol * greens_value(wave, r) * vj;
        }
        out[static_cast<Eigen::Index>(t)] = acc;
    }
    return out;
}

struct NewtonResidual {
    double max_residual = 0.0;  // max |(Delta_h + k^2) N + v| / max |v|
    std::size_t cells = 0;      // cells whose 2d neighbours are all included
};

// Applies the 2d+1 point Laplacian plus k^2 to N = G_h * v (FFT
// convolution) and compares with -v on the interior cells.
inline NewtonResidual newton_residual(const VolumeGrid& grid, const WaveParameters& wave, const GridField& v) {
    if (static_cast<std::size_t>(v.size()) != grid.size())
        throw std::invalid_argument("newton_residual: field length mismatch");
    auto kernel = std::make_shared<VolumeKernel>(grid, wave);
    StaggeredConvolution conv(kernel, grid);
    conv.diagonal().setOnes();
    const GridField N = conv.apply_fft(v);
    const double h = grid.spacing();
    const int d = grid.dimension();
    const cplx k2 = wave.k_sq();
    const double vmax = max_abs(v);
    if (vmax == 0.0) throw std::invalid_argument("newton_residual: v vanishes");
    NewtonResidual r;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const auto c = grid.cell(j);
        cplx lap = -2.0 * d * N[static_cast<Eigen::Index>(j)];
        bool interior = true;
        for (int e = 0; e < d && interior; ++e)
            for (int s : {-1, 1}) {
                auto nb = c;
                nb[e] += s;
                const long i = grid.index(nb);
                if (i < 0) {
                    interior = false;
                    break;
                }
                lap += N[static_cast<Eigen::Index>(i)];
            }
        if (!interior) continue;
        const auto J = static_cast<Eigen::Index>(j);
        r.max_residual = std::max(r.max_residual, std::abs(lap / (h * h) + k2 * N[J] + v[J]) / vmax);
        ++r.cells;
    }
    return r;
}

// Largest singular value by power iteration on A^H A, maximised over trials.
inline double operator_norm_estimate(const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& apply,
                                     const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& apply_adjoint,
                                     Eigen::Index dim, int trials = 3, int iterations = 20,
                                     std::uint64_t seed = 12345) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    double best = 0.0;
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXcd x(dim);
        for (Eigen::Index i = 0; i < dim; ++i) x[i] = cplx(nd(rng), nd(rng));
        x.normalize();
        double est = 0.0;
        for (int it = 0; it < iterations; ++it) {
            const Eigen::VectorXcd y = apply(x);
            est = y.norm();
            if (est == 0.0) break;
            x = apply_adjoint(y);
            const double nx = x.norm();
            if (nx == 0.0) break;
            x /= nx;
        }
        best = std::max(best, est);
    }
    return best;
}

inline double operator_norm_estimate(const Eigen::MatrixXcd& m, int trials = 3, int iterations = 20,
                                     std::uint64_t seed = 12345) {
    return operator_norm_estimate([&m](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return m * x; },
                                  [&m](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return m.adjoint() * x; },
                                  m.cols(), trials, iterations, seed);
}

}  // namespace vie
