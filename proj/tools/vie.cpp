// vie solve|spectrum|verify|sweep --config <path> [--out <dir>] [--seed <u64>]

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "vie/scenario.hpp"

namespace {

int run(vie::Task task, const std::string& config, const std::string& out, const std::optional<std::uint64_t>& seed) {
    std::ifstream f(config, std::ios::binary);
    if (!f) {
        std::cerr << "vie: cannot open config " << config << "\n";
        return vie::exit_validation;
    }
    vie::json j;
    try {
        j = vie::json::parse(f);
    } catch (const vie::json::parse_error& e) {
        std::cerr << "vie: " << config << ": " << e.what() << "\n";
        return vie::exit_validation;
    }
    vie::Scenario s;
    try {
        s = vie::parse_scenario(j, task);
    } catch (const vie::validation_error& e) {
        for (const auto& i : e.issues()) std::cerr << "vie: invalid config: " << i << "\n";
        return vie::exit_validation;
    }
    if (seed) s.seed = *seed;
    if (!out.empty()) s.out_dir = out;
    const auto r = vie::run_scenario(s, s.out_dir);
    for (const auto& file : r.files) std::cout << (std::filesystem::path(s.out_dir) / file).string() << "\n";
    if (r.exit_code != vie::exit_ok) std::cerr << "vie: " << r.message << "\n";
    return r.exit_code;
}

const char* describe(vie::Task t) {
    switch (t) {
    case vie::Task::solve: return "solve the volume integral equation for one incident field";
    case vie::Task::spectrum: return "eigenvalues at two refinement levels and their accumulation points";
    case vie::Task::verify: return "run the acceptance checks";
    case vie::Task::sweep: return "condition numbers over a list of contrasts";
    }
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volume integral equation laboratory"};
    app.set_version_flag("--version", std::string(vie::version));
    app.require_subcommand(1);
    std::string config, out;
    std::optional<std::uint64_t> seed;
    for (vie::Task t : {vie::Task::solve, vie::Task::spectrum, vie::Task::verify, vie::Task::sweep}) {
        auto* sub = app.add_subcommand(vie::to_string(t), describe(t));
        sub->add_option("--config", config, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory (overrides the file)");
        sub->add_option("--seed", seed, "random seed (overrides the file)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : vie::exit_validation;
    }
    for (vie::Task t : {vie::Task::solve, vie::Task::spectrum, vie::Task::verify, vie::Task::sweep})
        if (app.got_subcommand(vie::to_string(t))) return run(t, config, out, seed);
    return vie::exit_validation;
}
