#pragma once
//
// Material coefficients a(x), k(x)^2 and the derived contrasts
//   alpha = a - 1,  beta = k(x)^2 - k^2,
// which vanish outside the scatterer.
//

#include <functional>
#include <string>
#include <utility>

#include "vie/geometry.hpp"
#include "vie/special_functions.hpp"

namespace vie {

enum class SmoothnessTag { laplace_case, globally_smooth, piecewise_smooth, piecewise_constant };

inline const char* to_string(SmoothnessTag t) {
    switch (t) {
    case SmoothnessTag::laplace_case: return "laplace-case";
    case SmoothnessTag::globally_smooth: return "globally-smooth";
    case SmoothnessTag::piecewise_smooth: return "piecewise-smooth";
    case SmoothnessTag::piecewise_constant: return "piecewise-constant";
    }
    return "unknown";
}

class CoefficientField {
public:
    using ScalarFn = std::function<cplx(const Vec&)>;
    using GradFn = std::function<CVec(const Vec&)>;

    // The evaluators describe the interior; outside the domain a = 1 and
    // k(x)^2 = k^2 are enforced here.
    CoefficientField(DomainGeometry domain, WaveParameters wave, ScalarFn a_inside, ScalarFn k_sq_inside,
                     GradFn grad_alpha_inside, SmoothnessTag tag, std::string name = "custom")
        : domain_(std::move(domain)), wave_(wave), a_in_(std::move(a_inside)), k_sq_in_(std::move(k_sq_inside)),
          grad_alpha_in_(std::move(grad_alpha_inside)), tag_(tag), name_(std::move(name)) {
        if (domain_.dimension() != wave_.dim)
            throw std::invalid_argument("CoefficientField: domain and wave dimension differ");
    }

    // Piecewise-constant a and k^2 inside the domain.
    static CoefficientField constant(const DomainGeometry& domain, WaveParameters wave, cplx a_in, cplx k_in_sq) {
        const auto tag = a_in == cplx(1.0) ? SmoothnessTag::laplace_case : SmoothnessTag::piecewise_constant;
        return CoefficientField(
            domain, wave, [a_in](const Vec&) { return a_in; }, [k_in_sq](const Vec&) { return k_in_sq; },
            [](const Vec&) { return CVec{}; }, tag, "constant-a");
    }
    // Piecewise-constant a with k(x) = k everywhere (beta = 0).
    static CoefficientField constant(const DomainGeometry& domain, WaveParameters wave, cplx a_in) {
        return constant(domain, wave, a_in, wave.k_sq());
    }

    // a(x) = 1 + amplitude (1 - |x|^2/R^2)^2 on a disc or ball of radius R;
    // alpha and its gradient vanish on the boundary.
    static CoefficientField smooth_bump(const DomainGeometry& domain, WaveParameters wave, double amplitude) {
        const double r = radius_of(domain, "smooth_bump");
        const double r2 = r * r;
        auto a = [amplitude, r2](const Vec& x) {
            const double t = 1.0 - dot(x, x) / r2;
            return cplx(1.0 + amplitude * t * t);
        };
        auto grad = [amplitude, r2](const Vec& x) {
            const double t = 1.0 - dot(x, x) / r2;
            const double c = -4.0 * amplitude * t / r2;
            return CVec{c * x[0], c * x[1], c * x[2]};
        };
        const cplx ksq = wave.k_sq();
        return CoefficientField(
            domain, wave, a, [ksq](const Vec&) { return ksq; }, grad, SmoothnessTag::globally_smooth,
            "smooth-bump-a");
    }

    // alpha = 0 and beta = beta0 * S(|x|) where S is 1 for |x| <= R - ramp and
    // falls to 0 at |x| = R with a C^1 smoothstep.
    static CoefficientField beta_only(const DomainGeometry& domain, WaveParameters wave, double beta0,
                                      double ramp = 0.2) {
        const double r = radius_of(domain, "beta_only");
        if (!(ramp > 0.0 && ramp < r)) throw std::invalid_argument("beta_only: ramp must lie in (0, R)");
        const cplx ksq = wave.k_sq();
        auto ksq_in = [=](const Vec& x) {
            const double d = (r - norm(x)) / ramp;
            const double s = d >= 1.0 ? 1.0 : (d <= 0.0 ? 0.0 : d * d * (3.0 - 2.0 * d));
            return ksq + beta0 * s;
        };
        return CoefficientField(
            domain, wave, [](const Vec&) { return cplx(1.0); }, ksq_in, [](const Vec&) { return CVec{}; },
            SmoothnessTag::laplace_case, "beta-only");
    }

    cplx a(const Vec& x) const { return domain_.contains(x) ? a_in_(x) : cplx(1.0); }
    cplx k_sq(const Vec& x) const { return domain_.contains(x) ? k_sq_in_(x) : wave_.k_sq(); }
    cplx alpha(const Vec& x) const { return a(x) - 1.0; }
    cplx beta(const Vec& x) const { return k_sq(x) - wave_.k_sq(); }
    CVec grad_alpha(const Vec& x) const { return domain_.contains(x) ? grad_alpha_in_(x) : CVec{}; }

    // Interior evaluators, also valid on the boundary itself.
    cplx a_inside(const Vec& x) const { return a_in_(x); }
    cplx alpha_inside(const Vec& x) const { return a_in_(x) - 1.0; }

    const DomainGeometry& domain() const { return domain_; }
    const WaveParameters& wave() const { return wave_; }
    SmoothnessTag tag() const { return tag_; }
    const std::string& name() const { return name_; }
    bool has_alpha() const { return tag_ != SmoothnessTag::laplace_case; }

private:
    DomainGeometry domain_;
    WaveParameters wave_;
    ScalarFn a_in_;
    ScalarFn k_sq_in_;
    GradFn grad_alpha_in_;
    SmoothnessTag tag_;
    std::string name_;

    static double radius_of(const DomainGeometry& d, const char* who) {
        if (const auto* s = std::get_if<Disc>(&d.shape())) return s->radius;
        if (const auto* s = std::get_if<Ball>(&d.shape())) return s->radius;
        throw std::invalid_argument(std::string(who) + ": requires a disc or ball");
    }
};

}  // namespace vie
