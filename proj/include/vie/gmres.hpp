#pragma once
//
// Restarted GMRES for complex matrix-free operators. Arnoldi with modified
// Gram-Schmidt (one reorthogonalisation pass), least squares by Givens
// rotations.
//

#include <functional>
#include <vector>

#include "vie/core.hpp"

namespace vie {

enum class GmresStatus { converged, stagnated, max_iterations };

inline const char* to_string(GmresStatus s) {
    switch (s) {
    case GmresStatus::converged: return "converged";
    case GmresStatus::stagnated: return "stagnated";
    case GmresStatus::max_iterations: return "max-iterations";
    }
    return "unknown";
}

struct GmresResult {
    Eigen::VectorXcd x;
    std::vector<double> history;  // relative residual, one entry per inner iteration (first entry: initial)
    GmresStatus status = GmresStatus::max_iterations;
    int iterations = 0;

    bool converged() const { return status == GmresStatus::converged; }
    double final_residual() const { return history.empty() ? 0.0 : history.back(); }
};

struct GmresOptions {
    double tol = 1e-8;
    int restart = 50;
    int max_iterations = 1000;
    // a restart cycle that reduces the residual by less than this factor counts as flat
    double stagnation_factor = 1.0 - 1e-6;
};

using LinearMap = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;

inline GmresResult gmres_solve(const LinearMap& apply, const Eigen::VectorXcd& rhs, const GmresOptions& opt,
                               const Eigen::VectorXcd* x0 = nullptr) {
    if (!(opt.tol > 0.0 && opt.tol < 1.0)) throw std::invalid_argument("gmres: tol must lie in (0, 1)");
    if (opt.restart < 10) throw std::invalid_argument("gmres: restart must be >= 10");
    if (opt.max_iterations < 1) throw std::invalid_argument("gmres: max_iterations must be positive");
    const auto n = rhs.size();
    GmresResult res;
    res.x = x0 ? *x0 : Eigen::VectorXcd::Zero(n);
    const double bnorm = rhs.norm();
    if (bnorm == 0.0) {
        res.x.setZero();
        res.history.push_back(0.0);
        res.status = GmresStatus::converged;
        return res;
    }
    Eigen::VectorXcd r = rhs - apply(res.x);
    double rel = r.norm() / bnorm;
    res.history.push_back(rel);
    if (rel <= opt.tol) {
        res.status = GmresStatus::converged;
        return res;
    }
    const int m = opt.restart;
    Eigen::MatrixXcd V(n, m + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    std::vector<cplx> cs(m), sn(m);
    Eigen::VectorXcd g(m + 1);
    while (res.iterations < opt.max_iterations) {
        const double cycle_start = rel;
        const double beta = r.norm();
        V.col(0) = r / beta;
        g.setZero();
        g[0] = beta;
        H.setZero();
        int j = 0;
        for (; j < m && res.iterations < opt.max_iterations; ++j) {
            Eigen::VectorXcd w = apply(V.col(j));
            for (int pass = 0; pass < 2; ++pass)
                for (int i = 0; i <= j; ++i) {
                    const cplx hij = V.col(i).dot(w);
                    H(i, j) += hij;
                    w -= hij * V.col(i);
                }
            const double hn = w.norm();
            H(j + 1, j) = hn;
            if (hn > 0.0) V.col(j + 1) = w / hn;
            for (int i = 0; i < j; ++i) {
                const cplx t = std::conj(cs[i]) * H(i, j) + std::conj(sn[i]) * H(i + 1, j);
                H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
                H(i, j) = t;
            }
            const cplx a = H(j, j), b = H(j + 1, j);
            const double d = std::sqrt(std::norm(a) + std::norm(b));
            if (d == 0.0) {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = a / d;
                sn[j] = b / d;
            }
            H(j, j) = d;
            H(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = std::conj(cs[j]) * g[j];
            ++res.iterations;
            rel = std::abs(g[j + 1]) / bnorm;
            res.history.push_back(rel);
            if (rel <= opt.tol || hn == 0.0) {
                ++j;
                break;
            }
        }
        // update x with the j-dimensional correction
        Eigen::VectorXcd y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
        res.x += V.leftCols(j) * y;
        r = rhs - apply(res.x);
        rel = r.norm() / bnorm;
        res.history.back() = rel;
        if (rel <= opt.tol) {
            res.status = GmresStatus::converged;
            return res;
        }
        if (j == m && rel >= opt.stagnation_factor * cycle_start) {
            res.status = GmresStatus::stagnated;
            return res;
        }
    }
    res.status = GmresStatus::max_iterations;
    return res;
}

}  // namespace vie
