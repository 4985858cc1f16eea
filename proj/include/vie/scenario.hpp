#pragma once
//
// Scenario files for the command-line harness: parsing and validation, the
// four tasks (solve, spectrum, verify, sweep) and deterministic CSV/JSON
// output. Report keys are listed in README.md.
//

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "json.hpp"
#include "vie/boundary_operator.hpp"
#include "vie/coupled_system.hpp"
#include "vie/scattering.hpp"
#include "vie/spectral_analysis.hpp"

namespace vie {

using json = nlohmann::json;

enum ExitCode : int { exit_ok = 0, exit_validation = 2, exit_numerical = 3 };

class validation_error : public std::runtime_error {
public:
    explicit validation_error(std::vector<std::string> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
    const std::vector<std::string>& issues() const { return issues_; }

private:
    std::vector<std::string> issues_;
    static std::string join(const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : "; ") + x;
        return s;
    }
};

// Numerical failure that still carries the results gathered so far.
class task_failure : public numerical_error {
public:
    task_failure(const std::string& what, json partial) : numerical_error(what), partial_(std::move(partial)) {}
    const json& partial() const { return partial_; }

private:
    json partial_;
};

enum class Task { solve, spectrum, verify, sweep };

inline const char* to_string(Task t) {
    switch (t) {
    case Task::solve: return "solve";
    case Task::spectrum: return "spectrum";
    case Task::verify: return "verify";
    case Task::sweep: return "sweep";
    }
    return "unknown";
}

inline std::optional<Task> task_from_string(const std::string& s) {
    for (Task t : {Task::solve, Task::spectrum, Task::verify, Task::sweep})
        if (s == to_string(t)) return t;
    return std::nullopt;
}

struct GeometrySpec {
    std::string shape = "disc";  // disc | ellipse | square | polygon | ball
    double radius = 1.0;
    double semi_x = 1.0, semi_y = 0.5;
    double half_side = 1.0;
    std::vector<std::array<double, 2>> vertices;
};

struct CoefficientSpec {
    std::string name = "constant-a";  // constant-a | polygon-constant-a | smooth-bump-a | beta-only
    cplx a{2.0, 0.0};
    std::optional<cplx> k_in_sq;  // constant-a: defaults to k^2
    double amplitude = 2.0;       // smooth-bump-a
    double beta0 = 3.0;           // beta-only
    double ramp = 0.2;            // beta-only
};

struct DiscretizationSpec {
    int n_per_axis = 32;
    std::vector<int> levels;      // spectrum: two refinement levels
    int boundary_nodes = 128;
    double boundary_factor = 4.0;  // boundary nodes per level = factor * n
    double grading = 1.0;
    BoundaryKernel kernel = BoundaryKernel::nystrom;
    SpectralRepresentation representation = SpectralRepresentation::augmented;
};

struct SolveSpec {
    VieMethod method = VieMethod::gmres;
    double tol = 1e-8;
    int restart = 50;
    int max_iterations = 1000;
    bool smooth_form = false;
    std::string incident = "plane-wave";  // plane-wave | point-source
    double angle = 0.0;
    Vec source{3.0, 0.0, 0.0};
};

struct SpectrumSpec {
    std::string op = "identity-minus-A";  // identity-minus-A | A | half-minus-K
    double delta = 0.1;
    double threshold = 0.05;
    int min_members = 5;
    double match_tol = 0.1;
    int allowed_change = 2;
};

struct SweepSpec {
    std::vector<cplx> a_values;
    std::optional<cplx> reference_a;
    double min_ratio = 10.0;
    int iterations = 20;
    int restarts = 3;
};

struct VerifySpec {
    std::vector<std::string> checks;  // empty: all
    std::vector<int> levels{32, 64, 128};
    std::vector<int> norm_levels{24, 48, 96};
    std::vector<int> spectral_levels{24, 40};
    std::vector<int> oracle_levels{64, 128};
    std::vector<double> oracle_tolerances{0.02, 0.01};
    int jump_nodes = 256;
    double jump_tol = 1e-3;
    double harmonic_tol = 1e-10;
    double equivalence_tol = 1e-8;
    double perturbation_floor = 1e-3;
    double fft_tol = 1e-10;
    double norm_variation = 0.25;
    double threshold = 0.05;
    int sigma_points = 20;
};

struct Scenario {
    std::string name = "unnamed";
    Task task = Task::solve;
    GeometrySpec geometry;
    int dim = 2;
    double k = 1.0;
    CoefficientSpec coefficient;
    DiscretizationSpec discretization;
    SolveSpec solve;
    SpectrumSpec spectrum;
    SweepSpec sweep;
    VerifySpec verify;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    json raw;

    WaveParameters wave() const { return WaveParameters(k, dim); }
};

inline const std::vector<std::string>& verify_check_names() {
    static const std::vector<std::string> names{"newton_residual", "smooth_form",      "operator_norm",
                                                "cluster_at_zero", "jump_relation",    "coupled_equivalence",
                                                "transmission_oracle", "fft_consistency", "sigma_map"};
    return names;
}

// ------------------------------------------------------------------ parsing

namespace detail {

class Reader {
public:
    explicit Reader(std::vector<std::string>& issues) : issues_(issues) {}

    void keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
        if (!obj.is_object()) {
            issue(where + ": expected an object");
            return;
        }
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }) ==
                allowed.end())
                issue(where + "." + it.key() + ": unknown key");
    }
    const json* find(const json& obj, const char* key) {
        if (!obj.is_object()) return nullptr;
        auto it = obj.find(key);
        return it == obj.end() ? nullptr : &*it;
    }
    void number(const json& obj, const char* key, const std::string& where, double& out) {
        if (const json* v = find(obj, key)) {
            if (v->is_number()) out = v->get<double>();
            else issue(where + "." + key + ": expected a number");
        }
    }
    void integer(const json& obj, const char* key, const std::string& where, int& out) {
        if (const json* v = find(obj, key)) {
            if (v->is_number_integer()) out = v->get<int>();
            else issue(where + "." + key + ": expected an integer");
        }
    }
    void boolean(const json& obj, const char* key, const std::string& where, bool& out) {
        if (const json* v = find(obj, key)) {
            if (v->is_boolean()) out = v->get<bool>();
            else issue(where + "." + key + ": expected true or false");
        }
    }
    void string(const json& obj, const char* key, const std::string& where, std::string& out) {
        if (const json* v = find(obj, key)) {
            if (v->is_string()) out = v->get<std::string>();
            else issue(where + "." + key + ": expected a string");
        }
    }
    std::optional<cplx> complex_value(const json& v, const std::string& where) {
        if (v.is_number()) return cplx(v.get<double>(), 0.0);
        if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
            return cplx(v[0].get<double>(), v[1].get<double>());
        issue(where + ": expected a number or [re, im]");
        return std::nullopt;
    }
    void complex(const json& obj, const char* key, const std::string& where, cplx& out) {
        if (const json* v = find(obj, key))
            if (auto c = complex_value(*v, where + "." + key)) out = *c;
    }
    void int_list(const json& obj, const char* key, const std::string& where, std::vector<int>& out) {
        if (const json* v = find(obj, key)) {
            if (!v->is_array()) {
                issue(where + "." + key + ": expected a list of integers");
                return;
            }
            out.clear();
            for (const auto& x : *v) {
                if (!x.is_number_integer()) {
                    issue(where + "." + key + ": expected a list of integers");
                    return;
                }
                out.push_back(x.get<int>());
            }
        }
    }
    void number_list(const json& obj, const char* key, const std::string& where, std::vector<double>& out) {
        if (const json* v = find(obj, key)) {
            if (!v->is_array()) {
                issue(where + "." + key + ": expected a list of numbers");
                return;
            }
            out.clear();
            for (const auto& x : *v) {
                if (!x.is_number()) {
                    issue(where + "." + key + ": expected a list of numbers");
                    return;
                }
                out.push_back(x.get<double>());
            }
        }
    }
    void complex_list(const json& obj, const char* key, const std::string& where, std::vector<cplx>& out) {
        if (const json* v = find(obj, key)) {
            if (!v->is_array()) {
                issue(where + "." + key + ": expected a list");
                return;
            }
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i)
                if (auto c = complex_value((*v)[i], where + "." + key + "[" + std::to_string(i) + "]")) out.push_back(*c);
        }
    }
    void string_list(const json& obj, const char* key, const std::string& where, std::vector<std::string>& out) {
        if (const json* v = find(obj, key)) {
            out.clear();
            if (!v->is_array()) {
                issue(where + "." + key + ": expected a list of strings");
                return;
            }
            for (const auto& x : *v) {
                if (!x.is_string()) {
                    issue(where + "." + key + ": expected a list of strings");
                    return;
                }
                out.push_back(x.get<std::string>());
            }
        }
    }
    void positive(double v, const std::string& what) {
        if (!(v > 0.0) || !std::isfinite(v)) issue(what + ": must be positive");
    }
    void issue(std::string s) { issues_.push_back(std::move(s)); }

private:
    std::vector<std::string>& issues_;
};

}  // namespace detail

inline DomainGeometry make_domain(const GeometrySpec& g) {
    if (g.shape == "disc") return DomainGeometry::disc(g.radius);
    if (g.shape == "ellipse") return DomainGeometry::ellipse(g.semi_x, g.semi_y);
    if (g.shape == "square") return DomainGeometry::square(g.half_side);
    if (g.shape == "polygon") return DomainGeometry::polygon(g.vertices);
    if (g.shape == "ball") return DomainGeometry::ball(g.radius);
    throw std::invalid_argument("unknown shape '" + g.shape + "'");
}

inline CoefficientField make_coefficients(const CoefficientSpec& c, const DomainGeometry& domain,
                                          const WaveParameters& wave) {
    if (c.name == "constant-a" || c.name == "polygon-constant-a") {
        if (c.name == "polygon-constant-a" && !domain.is_polygon())
            throw std::invalid_argument("polygon-constant-a requires a polygon or square");
        return CoefficientField::constant(domain, wave, c.a, c.k_in_sq.value_or(wave.k_sq()));
    }
    if (c.name == "smooth-bump-a") return CoefficientField::smooth_bump(domain, wave, c.amplitude);
    if (c.name == "beta-only") return CoefficientField::beta_only(domain, wave, c.beta0, c.ramp);
    throw std::invalid_argument("unknown coefficient registry name '" + c.name + "'");
}

// Parses and validates a scenario. `task` is the command-line subcommand; a
// "task" entry in the file, when present, must agree with it.
inline Scenario parse_scenario(const json& j, Task task) {
    std::vector<std::string> issues;
    detail::Reader r(issues);
    Scenario s;
    s.task = task;
    s.raw = j;
    r.keys(j, "config",
           {"name", "task", "geometry", "wave", "coefficient", "discretization", "solve", "spectrum", "sweep", "verify",
            "out", "seed"});
    if (!j.is_object()) throw validation_error(issues);
    r.string(j, "name", "config", s.name);
    if (const json* t = r.find(j, "task")) {
        if (!t->is_string() || !task_from_string(t->get<std::string>()))
            r.issue("config.task: expected one of solve, spectrum, verify, sweep");
        else if (*task_from_string(t->get<std::string>()) != task)
            r.issue("config.task: file declares '" + t->get<std::string>() + "' but the command is '" +
                    to_string(task) + "'");
    }
    r.string(j, "out", "config", s.out_dir);
    if (const json* v = r.find(j, "seed")) {
        if (v->is_number_unsigned()) s.seed = v->get<std::uint64_t>();
        else if (v->is_number_integer() && v->get<std::int64_t>() >= 0) s.seed = static_cast<std::uint64_t>(v->get<std::int64_t>());
        else r.issue("config.seed: expected a non-negative integer");
    }

    const json empty = json::object();
    const json& g = r.find(j, "geometry") ? j["geometry"] : empty;
    r.keys(g, "geometry", {"shape", "radius", "semi_axes", "half_side", "vertices"});
    r.string(g, "shape", "geometry", s.geometry.shape);
    r.number(g, "radius", "geometry", s.geometry.radius);
    r.number(g, "half_side", "geometry", s.geometry.half_side);
    std::vector<double> axes;
    r.number_list(g, "semi_axes", "geometry", axes);
    if (!axes.empty()) {
        if (axes.size() != 2) r.issue("geometry.semi_axes: expected two numbers");
        else {
            s.geometry.semi_x = axes[0];
            s.geometry.semi_y = axes[1];
        }
    }
    if (const json* v = r.find(g, "vertices")) {
        bool ok = v->is_array();
        if (ok)
            for (const auto& p : *v) {
                if (!(p.is_array() && p.size() == 2 && p[0].is_number() && p[1].is_number())) {
                    ok = false;
                    break;
                }
                s.geometry.vertices.push_back({p[0].get<double>(), p[1].get<double>()});
            }
        if (!ok) r.issue("geometry.vertices: expected a list of [x, y] pairs");
    }

    const json& w = r.find(j, "wave") ? j["wave"] : empty;
    r.keys(w, "wave", {"k", "dim"});
    r.number(w, "k", "wave", s.k);
    r.integer(w, "dim", "wave", s.dim);
    if (s.dim != 2 && s.dim != 3) r.issue("wave.dim: must be 2 or 3");
    if (!(s.k >= 0.0) || !std::isfinite(s.k)) r.issue("wave.k: must be a non-negative number");

    const json& c = r.find(j, "coefficient") ? j["coefficient"] : empty;
    r.keys(c, "coefficient", {"name", "a", "k_in_sq", "amplitude", "beta0", "ramp"});
    r.string(c, "name", "coefficient", s.coefficient.name);
    r.complex(c, "a", "coefficient", s.coefficient.a);
    if (const json* v = r.find(c, "k_in_sq")) s.coefficient.k_in_sq = r.complex_value(*v, "coefficient.k_in_sq");
    r.number(c, "amplitude", "coefficient", s.coefficient.amplitude);
    r.number(c, "beta0", "coefficient", s.coefficient.beta0);
    r.number(c, "ramp", "coefficient", s.coefficient.ramp);
    if (s.coefficient.name != "constant-a" && s.coefficient.name != "polygon-constant-a" &&
        s.coefficient.name != "smooth-bump-a" && s.coefficient.name != "beta-only")
        r.issue("coefficient.name: unknown registry name '" + s.coefficient.name + "'");

    auto& dz = s.discretization;
    const json& d = r.find(j, "discretization") ? j["discretization"] : empty;
    r.keys(d, "discretization",
           {"n_per_axis", "levels", "boundary_nodes", "boundary_factor", "grading", "boundary_kernel",
            "representation"});
    r.integer(d, "n_per_axis", "discretization", dz.n_per_axis);
    r.int_list(d, "levels", "discretization", dz.levels);
    r.integer(d, "boundary_nodes", "discretization", dz.boundary_nodes);
    r.number(d, "boundary_factor", "discretization", dz.boundary_factor);
    r.number(d, "grading", "discretization", dz.grading);
    std::string kern = to_string(dz.kernel), rep = to_string(dz.representation);
    r.string(d, "boundary_kernel", "discretization", kern);
    r.string(d, "representation", "discretization", rep);
    if (kern == "nystrom") dz.kernel = BoundaryKernel::nystrom;
    else if (kern == "trace-consistent") dz.kernel = BoundaryKernel::trace_consistent;
    else r.issue("discretization.boundary_kernel: expected nystrom or trace-consistent");
    if (rep == "volume") dz.representation = SpectralRepresentation::volume;
    else if (rep == "augmented") dz.representation = SpectralRepresentation::augmented;
    else r.issue("discretization.representation: expected volume or augmented");
    if (dz.n_per_axis < 2) r.issue("discretization.n_per_axis: must be >= 2");
    if (dz.boundary_nodes < 8) r.issue("discretization.boundary_nodes: must be >= 8");
    r.positive(dz.boundary_factor, "discretization.boundary_factor");
    if (!(dz.grading >= 1.0)) r.issue("discretization.grading: must be >= 1");

    const json& so = r.find(j, "solve") ? j["solve"] : empty;
    r.keys(so, "solve", {"method", "tol", "restart", "max_iterations", "smooth_form", "incident", "angle", "source"});
    std::string method = "gmres";
    r.string(so, "method", "solve", method);
    if (method == "gmres") s.solve.method = VieMethod::gmres;
    else if (method == "direct") s.solve.method = VieMethod::direct;
    else r.issue("solve.method: expected gmres or direct");
    r.number(so, "tol", "solve", s.solve.tol);
    r.integer(so, "restart", "solve", s.solve.restart);
    r.integer(so, "max_iterations", "solve", s.solve.max_iterations);
    r.boolean(so, "smooth_form", "solve", s.solve.smooth_form);
    r.string(so, "incident", "solve", s.solve.incident);
    r.number(so, "angle", "solve", s.solve.angle);
    std::vector<double> src;
    r.number_list(so, "source", "solve", src);
    if (!src.empty()) {
        if (src.size() != 2 && src.size() != 3) r.issue("solve.source: expected 2 or 3 coordinates");
        else s.solve.source = {src[0], src[1], src.size() == 3 ? src[2] : 0.0};
    }
    r.positive(s.solve.tol, "solve.tol");
    if (!(s.solve.tol < 1.0)) r.issue("solve.tol: must be < 1");
    if (s.solve.restart < 10) r.issue("solve.restart: must be >= 10");
    if (s.solve.max_iterations < 1) r.issue("solve.max_iterations: must be positive");
    if (s.solve.incident != "plane-wave" && s.solve.incident != "point-source")
        r.issue("solve.incident: expected plane-wave or point-source");
    if (s.solve.smooth_form && s.solve.method != VieMethod::gmres)
        r.issue("solve.smooth_form: requires the gmres method");

    const json& sp = r.find(j, "spectrum") ? j["spectrum"] : empty;
    r.keys(sp, "spectrum", {"operator", "delta", "threshold", "min_members", "match_tol", "allowed_change"});
    r.string(sp, "operator", "spectrum", s.spectrum.op);
    r.number(sp, "delta", "spectrum", s.spectrum.delta);
    r.number(sp, "threshold", "spectrum", s.spectrum.threshold);
    r.integer(sp, "min_members", "spectrum", s.spectrum.min_members);
    r.number(sp, "match_tol", "spectrum", s.spectrum.match_tol);
    r.integer(sp, "allowed_change", "spectrum", s.spectrum.allowed_change);
    if (s.spectrum.op != "identity-minus-A" && s.spectrum.op != "A" && s.spectrum.op != "half-minus-K")
        r.issue("spectrum.operator: expected identity-minus-A, A or half-minus-K");
    r.positive(s.spectrum.delta, "spectrum.delta");
    r.positive(s.spectrum.threshold, "spectrum.threshold");
    r.positive(s.spectrum.match_tol, "spectrum.match_tol");
    if (s.spectrum.min_members < 1) r.issue("spectrum.min_members: must be positive");
    if (s.spectrum.allowed_change < 0) r.issue("spectrum.allowed_change: must be >= 0");

    const json& sw = r.find(j, "sweep") ? j["sweep"] : empty;
    r.keys(sw, "sweep", {"a_values", "reference_a", "min_ratio", "iterations", "restarts"});
    r.complex_list(sw, "a_values", "sweep", s.sweep.a_values);
    if (const json* v = r.find(sw, "reference_a")) s.sweep.reference_a = r.complex_value(*v, "sweep.reference_a");
    r.number(sw, "min_ratio", "sweep", s.sweep.min_ratio);
    r.integer(sw, "iterations", "sweep", s.sweep.iterations);
    r.integer(sw, "restarts", "sweep", s.sweep.restarts);
    r.positive(s.sweep.min_ratio, "sweep.min_ratio");
    if (s.sweep.iterations < 1 || s.sweep.restarts < 1) r.issue("sweep.iterations/restarts: must be positive");

    auto& vf = s.verify;
    const json& v = r.find(j, "verify") ? j["verify"] : empty;
    r.keys(v, "verify",
           {"checks", "levels", "norm_levels", "spectral_levels", "oracle_levels", "oracle_tolerances", "jump_nodes",
            "jump_tol", "harmonic_tol", "equivalence_tol", "perturbation_floor", "fft_tol", "norm_variation",
            "threshold", "sigma_points"});
    r.string_list(v, "checks", "verify", vf.checks);
    for (const auto& name : vf.checks)
        if (std::find(verify_check_names().begin(), verify_check_names().end(), name) == verify_check_names().end())
            r.issue("verify.checks: unknown check '" + name + "'");
    r.int_list(v, "levels", "verify", vf.levels);
    r.int_list(v, "norm_levels", "verify", vf.norm_levels);
    r.int_list(v, "spectral_levels", "verify", vf.spectral_levels);
    r.int_list(v, "oracle_levels", "verify", vf.oracle_levels);
    r.number_list(v, "oracle_tolerances", "verify", vf.oracle_tolerances);
    r.integer(v, "jump_nodes", "verify", vf.jump_nodes);
    r.number(v, "jump_tol", "verify", vf.jump_tol);
    r.number(v, "harmonic_tol", "verify", vf.harmonic_tol);
    r.number(v, "equivalence_tol", "verify", vf.equivalence_tol);
    r.number(v, "perturbation_floor", "verify", vf.perturbation_floor);
    r.number(v, "fft_tol", "verify", vf.fft_tol);
    r.number(v, "norm_variation", "verify", vf.norm_variation);
    r.number(v, "threshold", "verify", vf.threshold);
    r.integer(v, "sigma_points", "verify", vf.sigma_points);
    for (auto [x, what] : {std::pair{vf.jump_tol, "verify.jump_tol"}, {vf.harmonic_tol, "verify.harmonic_tol"},
                           {vf.equivalence_tol, "verify.equivalence_tol"},
                           {vf.perturbation_floor, "verify.perturbation_floor"}, {vf.fft_tol, "verify.fft_tol"},
                           {vf.norm_variation, "verify.norm_variation"}, {vf.threshold, "verify.threshold"}})
        r.positive(x, what);
    for (double t : vf.oracle_tolerances) r.positive(t, "verify.oracle_tolerances");
    if (vf.oracle_levels.size() != vf.oracle_tolerances.size())
        r.issue("verify.oracle_levels/oracle_tolerances: lengths differ");
    if (vf.jump_nodes < 8) r.issue("verify.jump_nodes: must be >= 8");
    if (vf.sigma_points < 1) r.issue("verify.sigma_points: must be positive");
    auto ascending = [&](const std::vector<int>& l, const std::string& what, std::size_t min_size) {
        if (l.size() < min_size) r.issue(what + ": needs at least " + std::to_string(min_size) + " entries");
        for (std::size_t i = 0; i < l.size(); ++i) {
            if (l[i] < 2) r.issue(what + ": entries must be >= 2");
            if (i && l[i] <= l[i - 1]) r.issue(what + ": must be strictly increasing");
        }
    };
    ascending(vf.levels, "verify.levels", 2);
    ascending(vf.norm_levels, "verify.norm_levels", 2);
    ascending(vf.spectral_levels, "verify.spectral_levels", 2);
    ascending(vf.oracle_levels, "verify.oracle_levels", 0);

    if (task == Task::spectrum) {
        if (dz.levels.empty()) dz.levels = s.spectrum.op == "half-minus-K" ? std::vector<int>{128, 256} : std::vector<int>{24, 40};
        if (dz.levels.size() != 2) r.issue("discretization.levels: spectrum needs exactly two levels");
        ascending(dz.levels, "discretization.levels", 2);
    }
    if (task == Task::sweep && s.sweep.a_values.empty()) r.issue("sweep.a_values: must not be empty");

    // Build the model once so that shape, coefficient and size errors are
    // reported here, before any output is written.
    if (issues.empty()) {
        try {
            const DomainGeometry dom = make_domain(s.geometry);
            if (dom.dimension() != s.dim) r.issue("wave.dim: does not match the geometry dimension");
            else {
                const WaveParameters wave = s.wave();
                const CoefficientField cf = make_coefficients(s.coefficient, dom, wave);
                auto dense_size = [&](int n) {
                    std::size_t N = VolumeGrid(dom, n).size();
                    return N;
                };
                const std::size_t cap = default_dense_cap;
                if (task == Task::spectrum) {
                    if (s.spectrum.op == "half-minus-K") {
                        if (s.dim != 2) r.issue("spectrum.operator: half-minus-K is two-dimensional only");
                        for (int n : dz.levels)
                            if (static_cast<std::size_t>(n) > eigen_cap) r.issue("discretization.levels: too many boundary nodes");
                    } else {
                        for (int n : dz.levels) {
                            std::size_t N = dense_size(n);
                            if (s.spectrum.op == "identity-minus-A" &&
                                dz.representation == SpectralRepresentation::augmented && cf.has_alpha())
                                N += static_cast<std::size_t>(std::lround(dz.boundary_factor * n));
                            if (N > cap)
                                r.issue("discretization.levels: " + std::to_string(N) + " unknowns at n=" +
                                        std::to_string(n) + " exceed the dense limit " + std::to_string(cap));
                        }
                    }
                }
                if (task == Task::sweep) {
                    std::size_t N = dense_size(dz.n_per_axis);
                    if (dz.representation == SpectralRepresentation::augmented) N += static_cast<std::size_t>(dz.boundary_nodes);
                    if (N > cap) r.issue("discretization.n_per_axis: sweep exceeds the dense limit");
                    for (const auto& a : s.sweep.a_values)
                        if (a == cplx(0.0) || a == cplx(1.0)) r.issue("sweep.a_values: a = 0 and a = 1 are excluded");
                }
                if (task == Task::solve) {
                    if (s.solve.method == VieMethod::direct && dense_size(dz.n_per_axis) > cap)
                        r.issue("solve.method: direct solve exceeds the dense limit");
                    if (s.solve.smooth_form && (cf.tag() == SmoothnessTag::piecewise_constant ||
                                                cf.tag() == SmoothnessTag::piecewise_smooth))
                        r.issue("solve.smooth_form: coefficient jumps across the boundary");
                    if (s.solve.incident == "point-source" && dom.contains(s.solve.source))
                        r.issue("solve.source: lies inside the scatterer");
                }
                if (task == Task::verify) {
                    if (dense_size(dz.n_per_axis) > cap) r.issue("discretization.n_per_axis: verify exceeds the dense limit");
                    for (int n : vf.spectral_levels)
                        if (dense_size(n) > cap) r.issue("verify.spectral_levels: exceeds the dense limit");
                }
            }
        } catch (const std::invalid_argument& e) {
            r.issue(std::string("model: ") + e.what());
        }
    }
    if (!issues.empty()) throw validation_error(issues);
    return s;
}

// ------------------------------------------------------------------ output

// FNV-1a over the canonical (sorted-key) dump of the configuration with the
// effective seed and without the output directory.
inline std::string config_hash(const json& raw, std::uint64_t seed) {
    json c = raw.is_object() ? raw : json::object();
    c.erase("out");
    c["seed"] = seed;
    const std::string s = c.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// JSON value for a real that may be non-finite.
inline json num(double x) {
    if (std::isfinite(x)) return x;
    return format_number(x);
}
inline json cnum(cplx z) { return json::array({num(z.real()), num(z.imag())}); }

namespace detail {

inline void emit_json(std::string& out, const json& j, int depth) {
    const std::string pad(2 * static_cast<std::size_t>(depth + 1), ' '), close(2 * static_cast<std::size_t>(depth), ' ');
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ",\n";
            first = false;
            out += pad + json(it.key()).dump() + ": ";
            emit_json(out, it.value(), depth + 1);
        }
        out += "\n" + close + "}";
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        const bool flat = std::all_of(j.begin(), j.end(), [](const json& x) { return x.is_primitive(); });
        if (flat) {
            out += "[";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ", ";
                emit_json(out, j[i], depth + 1);
            }
            out += "]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += pad;
            emit_json(out, j[i], depth + 1);
        }
        out += "\n" + close + "]";
        return;
    }
    case json::value_t::number_float: out += format_number(j.get<double>()); return;
    default: out += j.dump(); return;
    }
}

}  // namespace detail

inline std::string to_json_text(const json& j) {
    std::string s;
    detail::emit_json(s, j, 0);
    s += "\n";
    return s;
}

class OutputSink {
public:
    OutputSink(std::filesystem::path dir, std::string hash) : dir_(std::move(dir)), hash_(std::move(hash)) {}

    const std::string& hash() const { return hash_; }
    const std::vector<std::string>& files() const { return files_; }

    void csv(const std::string& name, const std::vector<std::string>& columns,
             const std::vector<std::vector<double>>& rows) {
        std::string s = "# vie " + std::string(version) + " config_hash=" + hash_ + "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
        s += "\n";
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + format_number(row[i]);
            s += "\n";
        }
        write(name, s);
    }
    void report(const std::string& name, const json& j) { write(name, to_json_text(j)); }

private:
    std::filesystem::path dir_;
    std::string hash_;
    std::vector<std::string> files_;

    void write(const std::string& name, const std::string& text) {
        std::filesystem::create_directories(dir_);
        std::ofstream f(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
        f << text;
        if (!f) throw std::runtime_error("write failed for " + (dir_ / name).string());
        files_.push_back(name);
    }
};

// ------------------------------------------------------------------ helpers

namespace detail {

inline json eigen_summary(const EigenResult& r) {
    return {{"count", r.entries.size()}, {"uncertified", r.uncertified}, {"max_residual", num(r.max_residual)}};
}

inline json cluster_json(const Cluster& c) {
    return {{"center", cnum(c.center)},
            {"count_coarse", c.count_coarse},
            {"count_fine", c.count_fine},
            {"radius", num(c.radius)},
            {"re_range", json::array({num(c.re_lo), num(c.re_hi)})},
            {"im_range", json::array({num(c.im_lo), num(c.im_hi)})}};
}

inline json cluster_report_json(const ClusterReport& rep, int allowed) {
    json cl = json::array(), rj = json::array();
    for (const auto& c : rep.clusters) cl.push_back(cluster_json(c));
    for (const auto& c : rep.rejected) rj.push_back(cluster_json(c));
    return {{"delta", num(rep.delta)},
            {"unknowns", json::array({rep.n_coarse, rep.n_fine})},
            {"clusters", cl},
            {"rejected", rj},
            {"outside_counts", json::array({rep.outside_coarse, rep.outside_fine})},
            {"outside_stable", rep.stable(static_cast<std::size_t>(allowed))},
            {"diameter", num(rep.diameter())}};
}

inline json sigma_json(const SigmaEstimate& s) {
    if (s.interval)
        return {{"interval", json::array({num(s.interval->first), num(s.interval->second)})},
                {"uncertainty", num(s.uncertainty)}};
    json p = json::array();
    for (double x : s.points) p.push_back(num(x));
    return {{"points", p}};
}

inline json verdict_json(const FredholmVerdict& v) {
    return {{"fredholm", v.fredholm()},
            {"a_nonzero", v.condition_i},
            {"min_abs_a", num(v.min_abs_a)},
            {"boundary_condition", v.condition_ii},
            {"min_breakdown_distance", num(v.min_distance)},
            {"worst_sigma", num(v.worst_sigma)},
            {"inconclusive", v.inconclusive},
            {"strength", to_string(v.strength)}};
}

inline void write_eigenvalues(OutputSink& sink, const std::string& name, const EigenResult& r) {
    std::vector<std::vector<double>> rows;
    rows.reserve(r.entries.size());
    for (const auto& e : r.entries) rows.push_back({e.value.real(), e.value.imag(), e.residual});
    sink.csv(name, {"re", "im", "residual"}, rows);
}

inline Vec incident_direction(const Scenario& s) { return {std::cos(s.solve.angle), std::sin(s.solve.angle), 0.0}; }

inline GridField random_field(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    GridField u(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = cplx(nd(rng), nd(rng));
    return u;
}

inline bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

inline std::optional<double> disc_radius(const DomainGeometry& d) {
    if (const auto* s = std::get_if<Disc>(&d.shape())) return s->radius;
    return std::nullopt;
}

}  // namespace detail

// ------------------------------------------------------------------ tasks

inline json run_solve(const Scenario& s, OutputSink& sink) {
    const DomainGeometry dom = make_domain(s.geometry);
    const WaveParameters wave = s.wave();
    const CoefficientField cf = make_coefficients(s.coefficient, dom, wave);
    const VolumeGrid grid(dom, s.discretization.n_per_axis);
    const VolumeOperator op(grid, wave, cf);
    const bool plane = s.solve.incident == "plane-wave";
    const GridField u_inc = plane ? incident_plane_wave(grid, wave, detail::incident_direction(s))
                                  : incident_point_source(grid, dom, wave, s.solve.source);
    VieOptions opt;
    opt.method = s.solve.method;
    opt.smooth_form = s.solve.smooth_form;
    opt.gmres.tol = s.solve.tol;
    opt.gmres.restart = s.solve.restart;
    opt.gmres.max_iterations = s.solve.max_iterations;
    const VieSolution sol = solve_vie(op, u_inc, opt);

    std::vector<std::vector<double>> rows;
    std::vector<std::string> cols{"x", "y"};
    if (grid.dimension() == 3) cols.push_back("z");
    cols.push_back("re");
    cols.push_back("im");
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const Vec& x = grid.center(j);
        std::vector<double> row{x[0], x[1]};
        if (grid.dimension() == 3) row.push_back(x[2]);
        const cplx u = sol.u[static_cast<Eigen::Index>(j)];
        row.push_back(u.real());
        row.push_back(u.imag());
        rows.push_back(std::move(row));
    }
    sink.csv("field.csv", cols, rows);

    json hist = json::array();
    for (double r : sol.iterations.history) hist.push_back(num(r));
    json res{{"unknowns", grid.size()},
             {"spacing", num(grid.spacing())},
             {"method", s.solve.method == VieMethod::gmres ? "gmres" : "direct"},
             {"smooth_form", s.solve.smooth_form},
             {"incident", s.solve.incident},
             {"gmres_status", to_string(sol.iterations.status)},
             {"gmres_iterations", sol.iterations.iterations},
             {"residual_history", hist},
             {"relative_residual", num(sol.residual)},
             {"reference", nullptr}};
    if (const auto R = detail::disc_radius(dom); R && plane && s.dim == 2 && wave.k_real() > 0.0 &&
                                               (s.coefficient.name == "constant-a")) {
        const cplx kin = s.coefficient.k_in_sq.value_or(wave.k_sq());
        const MieDisc mie(*R, wave, s.coefficient.a, kin, s.solve.angle);
        GridField ref(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t j = 0; j < grid.size(); ++j) ref[static_cast<Eigen::Index>(j)] = mie.total(grid.center(j));
        res["reference"] = {{"type", "disc-series"},
                            {"modes", mie.modes()},
                            {"relative_l2_error", num((sol.u - ref).norm() / ref.norm())}};
    }
    if (s.solve.method == VieMethod::gmres && !sol.iterations.converged())
        throw task_failure(std::string("GMRES ") + to_string(sol.iterations.status) + " after " +
                               std::to_string(sol.iterations.iterations) + " iterations, relative residual " +
                               format_number(sol.iterations.final_residual()),
                           res);
    return res;
}

inline json run_spectrum(const Scenario& s, OutputSink& sink) {
    const DomainGeometry dom = make_domain(s.geometry);
    const WaveParameters wave = s.wave();
    const CoefficientField cf = make_coefficients(s.coefficient, dom, wave);
    const auto& sp = s.spectrum;
    const auto& dz = s.discretization;
    std::vector<std::vector<cplx>> values;
    std::vector<std::size_t> sizes;
    json levels = json::array();
    for (int n : dz.levels) {
        EigenResult er;
        json lv{{"n", n}};
        std::string file;
        if (sp.op == "half-minus-K") {
            er = half_minus_K_spectrum(dom, n, dz.grading, wave);
            sizes.push_back(static_cast<std::size_t>(n));
            file = "eigenvalues_m" + std::to_string(n) + ".csv";
        } else {
            const VolumeGrid grid(dom, n);
            std::optional<BoundaryMesh> mesh;
            SpectralRepresentation rep = sp.op == "A" ? SpectralRepresentation::volume : dz.representation;
            if (rep == SpectralRepresentation::augmented && cf.has_alpha())
                mesh = build_boundary_mesh(dom, static_cast<int>(std::lround(dz.boundary_factor * n)), dz.grading);
            const SpectralOperator so = spectral_operator(grid, wave, cf, rep, mesh ? &*mesh : nullptr, dz.kernel);
            Eigen::MatrixXcd M = so.matrix;
            if (sp.op == "A") M = Eigen::MatrixXcd::Identity(M.rows(), M.cols()) - M;
            er = eigenvalues_dense(M);
            sizes.push_back(static_cast<std::size_t>(M.rows()));
            lv["representation"] = to_string(so.representation);
            lv["volume_unknowns"] = so.volume_unknowns;
            lv["boundary_unknowns"] = so.boundary_unknowns;
            file = "eigenvalues_n" + std::to_string(n) + ".csv";
        }
        detail::write_eigenvalues(sink, file, er);
        std::size_t above = 0;
        for (const auto& e : er.entries)
            if (std::abs(e.value) > sp.threshold) ++above;
        lv["unknowns"] = sizes.back();
        lv["eigenvalues"] = detail::eigen_summary(er);
        lv["count_above_threshold"] = above;
        lv["file"] = file;
        levels.push_back(lv);
        values.push_back(er.values());
    }
    const ClusterReport rep = detect_clusters(values[0], sizes[0], values[1], sizes[1], sp.delta,
                                              static_cast<std::size_t>(sp.min_members));
    json res{{"operator", sp.op}, {"levels", levels}, {"clusters", detail::cluster_report_json(rep, sp.allowed_change)}};
    const auto c0 = levels[0]["count_above_threshold"].get<std::size_t>();
    const auto c1 = levels[1]["count_above_threshold"].get<std::size_t>();
    res["threshold"] = num(sp.threshold);
    res["count_change"] = c1 > c0 ? c1 - c0 : c0 - c1;
    res["unknown_ratio"] = num(static_cast<double>(sizes[1]) / static_cast<double>(sizes[0]));

    std::vector<cplx> predicted;
    std::optional<SigmaEstimate> sigma;
    if (sp.op == "half-minus-K") {
        sigma = estimate_sigma(dom, dz.levels[1], sp.delta, dz.grading);
        res["contains_half"] = rep.contains(0.5, sp.delta);
        for (double x : sigma->samples()) predicted.push_back(x);
    } else if (sp.op == "A") {
        predicted = {0.0};
    } else if (!cf.has_alpha()) {
        predicted = {1.0};
    } else if (cf.tag() == SmoothnessTag::piecewise_constant) {
        sigma = estimate_sigma(dom, 256, sp.delta, dz.grading);
        predicted = predict_clusters({s.coefficient.a}, s.coefficient.a, *sigma);
        res["fredholm_verdict"] = detail::verdict_json(fredholm_verdict(cf, *sigma));
    }
    if (sigma) res["sigma"] = detail::sigma_json(*sigma);
    if (!predicted.empty()) {
        json pj = json::array();
        for (const auto& p : predicted) pj.push_back(cnum(p));
        res["predicted"] = pj;
        if (!sigma || !sigma->interval) res["clusters_match_prediction"] = clusters_match(rep, predicted, sp.match_tol);
    }
    return res;
}

inline json run_sweep(const Scenario& s, OutputSink& sink) {
    const DomainGeometry dom = make_domain(s.geometry);
    const WaveParameters wave = s.wave();
    const auto& dz = s.discretization;
    std::vector<cplx> all = s.sweep.a_values;
    if (s.sweep.reference_a) all.push_back(*s.sweep.reference_a);
    const auto pts = condition_sweep(dom, wave, all, dz.n_per_axis, dz.representation, dz.boundary_nodes, dz.kernel,
                                     s.seed, s.sweep.iterations, s.sweep.restarts);
    const SigmaEstimate sigma = estimate_sigma(dom);
    std::vector<std::vector<double>> rows;
    json pj = json::array();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        rows.push_back({p.a.real(), p.a.imag(), p.weighted.condition, p.weighted.norm, p.weighted.inverse_norm,
                        p.nodal.condition});
        const auto v = fredholm_verdict(CoefficientField::constant(dom, wave, p.a), sigma);
        pj.push_back({{"a", cnum(p.a)},
                      {"sigma", cnum(a_to_sigma(p.a))},
                      {"condition_weighted", num(p.weighted.condition)},
                      {"condition_nodal", num(p.nodal.condition)},
                      {"reference", s.sweep.reference_a && i + 1 == pts.size()},
                      {"fredholm", v.fredholm()},
                      {"breakdown_distance", num(v.min_distance)}});
    }
    sink.csv("sweep.csv",
             {"a_re", "a_im", "condition_weighted", "norm_weighted", "inverse_norm_weighted", "condition_nodal"}, rows);
    const std::size_t m = s.sweep.a_values.size();
    bool mono_w = true, mono_n = true;
    for (std::size_t i = 1; i < m; ++i) {
        mono_w = mono_w && pts[i].weighted.condition > pts[i - 1].weighted.condition;
        mono_n = mono_n && pts[i].nodal.condition > pts[i - 1].nodal.condition;
    }
    json res{{"unknowns", VolumeGrid(dom, dz.n_per_axis).size()},
             {"representation", to_string(dz.representation)},
             {"boundary_kernel", to_string(dz.kernel)},
             {"points", pj},
             {"monotone_weighted", mono_w},
             {"monotone_nodal", mono_n}};
    if (s.sweep.reference_a) {
        const double rw = pts[m - 1].weighted.condition / pts.back().weighted.condition;
        const double rn = pts[m - 1].nodal.condition / pts.back().nodal.condition;
        res["ratio_last_to_reference_weighted"] = num(rw);
        res["ratio_last_to_reference_nodal"] = num(rn);
        res["ratio_ok"] = rw >= s.sweep.min_ratio;
    }
    return res;
}

// ------------------------------------------------------------------ verify

struct CheckResult {
    explicit CheckResult(std::string n) : name(std::move(n)) {}
    std::string name;
    std::string status = "fail";  // pass | fail | not-applicable | observable
    json measured = json::object();
    std::string note;
};

namespace detail {

inline CheckResult check_newton_residual(const Scenario& s, const DomainGeometry& dom, const WaveParameters& wave) {
    CheckResult c{"newton_residual"};
    const auto& box = dom.bounding_box();
    Vec ctr{};
    for (int i = 0; i < dom.dimension(); ++i) ctr[i] = 0.5 * (box.lo[i] + box.hi[i]);
    if (!dom.contains(ctr)) {
        c.status = "not-applicable";
        c.note = "bounding-box centre lies outside the domain";
        return c;
    }
    const double rho = dom.boundary_distance(ctr);
    std::vector<double> res;
    json per = json::array();
    for (int n : s.verify.levels) {
        const VolumeGrid grid(dom, n);
        GridField v(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const Vec d = grid.center(j) - ctr;
            const double t = dot(d, d) / (rho * rho);
            v[static_cast<Eigen::Index>(j)] = t < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t)) : 0.0;
        }
        const NewtonResidual r = newton_residual(grid, wave, v);
        res.push_back(r.max_residual);
        per.push_back({{"n", n}, {"relative_max_residual", num(r.max_residual)}, {"cells", r.cells}});
    }
    c.measured = {{"levels", per}};
    c.status = strictly_decreasing(res) ? "pass" : "fail";
    return c;
}

inline CheckResult check_smooth_form(const Scenario& s, const DomainGeometry& dom, const WaveParameters& wave,
                                     const CoefficientField& cf, std::mt19937_64& rng) {
    CheckResult c{"smooth_form"};
    if (cf.tag() != SmoothnessTag::globally_smooth) {
        c.status = "not-applicable";
        c.note = std::string("requires alpha = 0 on the boundary; coefficient is ") + to_string(cf.tag());
        return c;
    }
    std::vector<double> d;
    json per = json::array();
    for (int n : s.verify.levels) {
        const VolumeGrid grid(dom, n);
        const VolumeOperator op(grid, wave, cf);
        const GridField u = random_field(grid.size(), rng);
        d.push_back((op.apply_fft(u) - op.apply_smooth_form(u)).norm() / u.norm());
        per.push_back({{"n", n}, {"relative_difference", num(d.back())}});
    }
    c.measured = {{"levels", per}};
    c.status = strictly_decreasing(d) ? "pass" : "fail";
    return c;
}

inline CheckResult check_operator_norm(const Scenario& s, const DomainGeometry& dom, const WaveParameters& wave,
                                       const CoefficientField& cf) {
    CheckResult c{"operator_norm"};
    std::vector<double> nv;
    json per = json::array();
    for (std::size_t i = 0; i < s.verify.norm_levels.size(); ++i) {
        const int n = s.verify.norm_levels[i];
        const VolumeGrid grid(dom, n);
        const VolumeOperator op(grid, wave, cf);
        nv.push_back(operator_norm_estimate([&op](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return op.apply_fft(x); },
                                            [&op](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
                                                return op.apply_adjoint_fft(x);
                                            },
                                            static_cast<Eigen::Index>(grid.size()), 3, 20, s.seed + i));
        per.push_back({{"n", n}, {"norm", num(nv.back())}});
    }
    double worst = 0.0;
    for (std::size_t i = 1; i < nv.size(); ++i) worst = std::max(worst, std::abs(nv[i] - nv[i - 1]) / nv[i - 1]);
    c.measured = {{"levels", per}, {"max_relative_variation", num(worst)}};
    if (cf.tag() == SmoothnessTag::piecewise_constant || cf.tag() == SmoothnessTag::piecewise_smooth) {
        c.status = "observable";
        c.note = "boundedness needs a bounded gradient of alpha; recorded only";
    } else {
        c.status = worst < s.verify.norm_variation ? "pass" : "fail";
    }
    return c;
}

inline CheckResult check_cluster_at_zero(const Scenario& s, const DomainGeometry& dom, const WaveParameters& wave,
                                         const CoefficientField& cf) {
    CheckResult c{"cluster_at_zero"};
    if (cf.has_alpha()) {
        c.status = "not-applicable";
        c.note = "alpha does not vanish";
        return c;
    }
    std::vector<std::vector<cplx>> ev;
    std::vector<std::size_t> N, above;
    json per = json::array();
    for (std::size_t l = 0; l < 2; ++l) {
        const int n = s.verify.spectral_levels[l];
        const VolumeGrid grid(dom, n);
        const VolumeOperator op(grid, wave, cf);
        const Eigen::MatrixXcd A =
            Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(grid.size())) -
            op.assemble_identity_minus_A().matrix;
        const EigenResult er = eigenvalues_dense(A);
        std::size_t cnt = 0;
        for (const auto& e : er.entries)
            if (std::abs(e.value) > s.verify.threshold) ++cnt;
        ev.push_back(er.values());
        N.push_back(grid.size());
        above.push_back(cnt);
        per.push_back({{"n", n}, {"unknowns", grid.size()}, {"count_above_threshold", cnt},
                       {"eigenvalues", eigen_summary(er)}});
    }
    const auto change = above[1] > above[0] ? above[1] - above[0] : above[0] - above[1];
    const ClusterReport rep = detect_clusters(ev[0], N[0], ev[1], N[1], s.verify.threshold);
    const bool at_zero = clusters_match(rep, {0.0}, s.verify.threshold);
    c.measured = {{"levels", per}, {"count_change", change}, {"cluster_at_zero", at_zero}};
    c.status = change <= 2 && at_zero ? "pass" : "fail";
    return c;
}

inline CheckResult check_jump_relation(const Scenario& s, const DomainGeometry& dom, const WaveParameters& wave,
                                       const CoefficientField& cf) {
    CheckResult c{"jump_relation"};
    if (!cf.has_alpha()) {
        c.status = "not-applicable";
        c.note = "alpha = 0: no boundary term";
        return c;
    }
    if (dom.dimension() != 2) {
        c.status = "not-applicable";
        c.note = "boundary checks are two-dimensional";
        return c;
    }
    const BoundaryMesh mesh = build_boundary_mesh(dom, s.verify.jump_nodes, s.discretization.grading);
    const auto& box = dom.bounding_box();
    const double cx = 0.5 * (box.lo[0] + box.hi[0]), cy = 0.5 * (box.lo[1] + box.hi[1]);
    double worst = 0.0;
    json per = json::array();
    for (int m : {0, 1, 3}) {
        BoundaryDensity phi(static_cast<Eigen::Index>(mesh.size()));
        for (std::size_t i = 0; i < mesh.size(); ++i) {
            const double th = std::atan2(mesh.nodes[i].x[1] - cy, mesh.nodes[i].x[0] - cx);
            phi[static_cast<Eigen::Index>(i)] = std::exp(cplx(0.0, m * th));
        }
        const double e = jump_relation_check(mesh, wave, phi);
        worst = std::max(worst, e);
        per.push_back({{"mode", m}, {"max_discrepancy", num(e)}});
    }
    c.measured = {{"nodes", mesh.size()}, {"modes", per}, {"max_discrepancy", num(worst)}};
    bool ok = worst <= s.verify.jump_tol;
    const auto R = disc_radius(dom);
    if (R) {
        const DenseOperator K0 = assemble_K(mesh, WaveParameters(0.0, 2));
        const auto M = static_cast<Eigen::Index>(mesh.size());
        const Eigen::VectorXcd one = Eigen::VectorXcd::Ones(M);
        const Eigen::VectorXcd k1 = K0.matrix * one;
        const cplx eig = k1.mean();
        const double const_err = max_abs(k1 + 0.5 * one);
        double mode_err = 0.0;
        for (int m = 1; m <= 8; ++m) {
            Eigen::VectorXcd phi(M);
            for (Eigen::Index i = 0; i < M; ++i) {
                const auto& x = mesh.nodes[static_cast<std::size_t>(i)].x;
                phi[i] = std::exp(cplx(0.0, m * std::atan2(x[1], x[0])));
            }
            mode_err = std::max(mode_err, max_abs(K0.matrix * phi));
        }
        c.measured["harmonic_constant_eigenvalue"] = cnum(eig);
        c.measured["harmonic_constant_error"] = num(const_err);
        c.measured["harmonic_modes_1_8_max"] = num(mode_err);
        ok = ok && const_err <= s.verify.harmonic_tol && mode_err <= s.verify.harmonic_tol;
    }
    c.status = ok ? "pass" : "fail";
    return c;
}

inline CheckResult check_coupled_equivalence(const Scenario& s, const DomainGeometry& dom, const WaveParameters& wave,
                                             const CoefficientField& cf) {
    CheckResult c{"coupled_equivalence"};
    if (!cf.has_alpha()) {
        c.status = "not-applicable";
        c.note = "alpha = 0: no boundary term";
        return c;
    }
    if (dom.dimension() != 2) {
        c.status = "not-applicable";
        c.note = "boundary checks are two-dimensional";
        return c;
    }
    const VolumeGrid grid(dom, s.discretization.n_per_axis);
    const BoundaryMesh mesh = build_boundary_mesh(dom, s.discretization.boundary_nodes, s.discretization.grading);
    const VolumeOperator op(grid, wave, cf);
    const GridField u_inc = incident_plane_wave(grid, wave, incident_direction(s));
    const TraceOperator T(grid, mesh);
    const BoundaryDensity psi = T.apply(u_inc);
    auto measure = [&](BoundaryKernel kern, const BoundaryDensity& p) {
        const CoupledOperator sys = assemble_coupled(op, mesh, cf, kern);
        const CoupledSolution sol = solve_coupled(sys, u_inc, p);
        if (sol.near_singular) throw numerical_error("coupled system is numerically singular");
        return check_equivalence(sol.u, sol.phi, mesh, grid) / max_abs(sol.phi);
    };
    const double exact = measure(BoundaryKernel::trace_consistent, psi);
    const BoundaryDensity shifted = (psi.array() + 1.0).matrix();
    const double broken = measure(BoundaryKernel::trace_consistent, shifted);
    const double nys = measure(BoundaryKernel::nystrom, psi);
    c.measured = {{"n", s.discretization.n_per_axis},
                  {"boundary_nodes", mesh.size()},
                  {"relative_mismatch", num(exact)},
                  {"relative_mismatch_perturbed", num(broken)},
                  {"relative_mismatch_nystrom", num(nys)}};
    if (cf.tag() != SmoothnessTag::piecewise_constant) {
        // the discrete trace of a u equals a times the trace of u only when a
        // is constant on the trace stencil
        c.status = "observable";
        c.note = "exact discrete equivalence needs a constant near the boundary";
        return c;
    }
    c.status = exact <= s.verify.equivalence_tol && broken > s.verify.perturbation_floor ? "pass" : "fail";
    return c;
}

inline CheckResult check_transmission_oracle(const Scenario& s, const DomainGeometry& dom, const WaveParameters& wave,
                                             const CoefficientField& cf) {
    CheckResult c{"transmission_oracle"};
    const auto R = disc_radius(dom);
    if (!R || s.coefficient.name != "constant-a" || !(wave.k_real() > 0.0)) {
        c.status = "not-applicable";
        c.note = "needs a disc with constant a and k > 0";
        return c;
    }
    const cplx kin = s.coefficient.k_in_sq.value_or(wave.k_sq());
    const MieDisc mie(*R, wave, s.coefficient.a, kin, s.solve.angle);
    bool ok = true;
    json per = json::array();
    for (std::size_t i = 0; i < s.verify.oracle_levels.size(); ++i) {
        const int n = s.verify.oracle_levels[i];
        const VolumeGrid grid(dom, n);
        const VolumeOperator op(grid, wave, cf);
        VieOptions opt;
        opt.gmres.tol = s.solve.tol;
        opt.gmres.restart = s.solve.restart;
        opt.gmres.max_iterations = s.solve.max_iterations;
        const VieSolution sol = solve_vie(op, incident_plane_wave(grid, wave, incident_direction(s)), opt);
        if (!sol.iterations.converged()) throw numerical_error("GMRES did not converge in the oracle check");
        GridField ref(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t j = 0; j < grid.size(); ++j) ref[static_cast<Eigen::Index>(j)] = mie.total(grid.center(j));
        const double e = (sol.u - ref).norm() / ref.norm();
        ok = ok && e <= s.verify.oracle_tolerances[i];
        per.push_back({{"n", n},
                       {"relative_l2_error", num(e)},
                       {"tolerance", num(s.verify.oracle_tolerances[i])},
                       {"gmres_iterations", sol.iterations.iterations}});
    }
    c.measured = {{"levels", per}, {"series_modes", mie.modes()}};
    c.status = ok ? "pass" : "fail";
    return c;
}

inline CheckResult check_fft_consistency(const Scenario& s, const DomainGeometry& dom, const WaveParameters& wave,
                                         const CoefficientField& cf, std::mt19937_64& rng) {
    CheckResult c{"fft_consistency"};
    const VolumeGrid grid(dom, s.discretization.n_per_axis);
    const VolumeOperator op(grid, wave, cf);
    const GridField u = random_field(grid.size(), rng), w = random_field(grid.size(), rng);
    const GridField direct = op.apply(u);
    const double e = (direct - op.apply_fft(u)).norm() / direct.norm();
    const cplx lhs = w.dot(op.apply_fft(u)), rhs = op.apply_adjoint_fft(w).dot(u);
    const double adj = std::abs(lhs - rhs) / std::abs(lhs);
    const double e1 = (op.apply_A1_direct(u) - op.apply_A1(u)).norm() / std::max(op.apply_A1_direct(u).norm(), 1e-300);
    c.measured = {{"n", s.discretization.n_per_axis},
                  {"unknowns", grid.size()},
                  {"relative_difference", num(e)},
                  {"relative_difference_A1", num(e1)},
                  {"adjoint_mismatch", num(adj)}};
    c.status = e <= s.verify.fft_tol && e1 <= s.verify.fft_tol && adj <= s.verify.fft_tol ? "pass" : "fail";
    return c;
}

inline CheckResult check_sigma_map(const Scenario& s, std::mt19937_64& rng) {
    CheckResult c{"sigma_map"};
    using Q = boost::rational<long long>;
    std::uniform_int_distribution<long long> num_d(-97, 97), den_d(1, 97);
    int exact = 0, tried = 0;
    while (tried < s.verify.sigma_points) {
        const Q sigma(num_d(rng), den_d(rng));
        if (sigma == Q(0) || sigma == Q(1)) continue;
        ++tried;
        const Q a = sigma_to_a(sigma);
        if (a_to_sigma(a) == sigma && sigma_to_a(a_to_sigma(a)) == a) ++exact;
    }
    const Q half_image = sigma_to_a(Q(1, 2));
    c.measured = {{"points", tried},
                  {"exact_round_trips", exact},
                  {"a_at_sigma_half", std::to_string(half_image.numerator()) + "/" + std::to_string(half_image.denominator())}};
    c.status = exact == tried && half_image == Q(-1) ? "pass" : "fail";
    return c;
}

}  // namespace detail

// Runs the selected (default: all) acceptance checks. A throwing check is
// recorded as that check's failure.
inline std::vector<CheckResult> verify_suite(const Scenario& s) {
    const DomainGeometry dom = make_domain(s.geometry);
    const WaveParameters wave = s.wave();
    const CoefficientField cf = make_coefficients(s.coefficient, dom, wave);
    std::mt19937_64 rng(s.seed);
    const auto& names = s.verify.checks.empty() ? verify_check_names() : s.verify.checks;
    std::vector<CheckResult> out;
    for (const auto& name : names) {
        try {
            if (name == "newton_residual") out.push_back(detail::check_newton_residual(s, dom, wave));
            else if (name == "smooth_form") out.push_back(detail::check_smooth_form(s, dom, wave, cf, rng));
            else if (name == "operator_norm") out.push_back(detail::check_operator_norm(s, dom, wave, cf));
            else if (name == "cluster_at_zero") out.push_back(detail::check_cluster_at_zero(s, dom, wave, cf));
            else if (name == "jump_relation") out.push_back(detail::check_jump_relation(s, dom, wave, cf));
            else if (name == "coupled_equivalence") out.push_back(detail::check_coupled_equivalence(s, dom, wave, cf));
            else if (name == "transmission_oracle") out.push_back(detail::check_transmission_oracle(s, dom, wave, cf));
            else if (name == "fft_consistency") out.push_back(detail::check_fft_consistency(s, dom, wave, cf, rng));
            else if (name == "sigma_map") out.push_back(detail::check_sigma_map(s, rng));
            else throw std::invalid_argument("unknown check");
        } catch (const std::exception& e) {
            CheckResult c{name};
            c.status = "fail";
            c.note = std::string("error: ") + e.what();
            out.push_back(c);
        }
    }
    return out;
}

inline json run_verify(const Scenario& s, OutputSink&, bool& all_passed) {
    const auto checks = verify_suite(s);
    json arr = json::array();
    std::size_t passed = 0, failed = 0, na = 0;
    for (const auto& c : checks) {
        json j{{"name", c.name}, {"status", c.status}, {"measured", c.measured}};
        if (!c.note.empty()) j["note"] = c.note;
        arr.push_back(j);
        if (c.status == "pass") ++passed;
        else if (c.status == "fail") ++failed;
        else ++na;
    }
    all_passed = failed == 0;
    return {{"checks", arr}, {"all_passed", all_passed}, {"passed", passed}, {"failed", failed}, {"skipped", na}};
}

// ------------------------------------------------------------------ driver

struct RunOutcome {
    int exit_code = exit_ok;
    std::vector<std::string> files;
    std::string message;
};

inline RunOutcome run_scenario(const Scenario& s, const std::filesystem::path& out_dir) {
    OutputSink sink(out_dir, config_hash(s.raw, s.seed));
    json report{{"artifact", "vie"},
                {"version", version},
                {"config_hash", sink.hash()},
                {"scenario", s.name},
                {"task", to_string(s.task)},
                {"seed", s.seed}};
    RunOutcome out;
    try {
        bool ok = true;
        json results;
        switch (s.task) {
        case Task::solve: results = run_solve(s, sink); break;
        case Task::spectrum: results = run_spectrum(s, sink); break;
        case Task::sweep: results = run_sweep(s, sink); break;
        case Task::verify: results = run_verify(s, sink, ok); break;
        }
        report["results"] = results;
        report["complete"] = true;
        report["status"] = ok ? "ok" : "checks-failed";
        if (!ok) {
            out.exit_code = exit_numerical;
            out.message = "one or more checks failed";
        }
    } catch (const task_failure& e) {
        report["results"] = e.partial();
        report["complete"] = false;
        report["status"] = "numerical-failure";
        report["error"] = e.what();
        out.exit_code = exit_numerical;
        out.message = e.what();
    } catch (const std::exception& e) {
        report["complete"] = false;
        report["status"] = "numerical-failure";
        report["error"] = e.what();
        out.exit_code = exit_numerical;
        out.message = e.what();
    }
    report["files"] = sink.files();
    sink.report("report.json", report);
    out.files = sink.files();
    return out;
}

}  // namespace vie
