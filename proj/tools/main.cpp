// Command line front end: configure the rig, run sweeps, estimate Floquet
// multipliers along branches, run escape and perturbation experiments, fit
// surfaces. Exit code 0 on success, 1 on any recorded failure, 2 on a
// configuration error.
#include <CLI11.hpp>
#include <iostream>

#include "cbc/commands.hpp"
#include "cbc/errors.hpp"
#include "cbc/io.hpp"

int main(int argc, char** argv) {
    CLI::App app{"cbclab: control-based continuation desk laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1;
    app.add_option("--config", config_path, "configuration file (INI)");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--seed", seed, "master seed (overrides the config)")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--jobs", jobs, "worker threads for frequency/repeat parallelism")
        ->check(CLI::PositiveNumber);

    auto* init = app.add_subcommand("init-config", "write a documented reference config");
    std::string init_path = "cbclab.ini";
    init->add_option("path", init_path, "destination file");

    auto* sweep = app.add_subcommand("sweep", "continuation sweeps over the frequency list");

    std::vector<std::string> sweep_files;
    auto* floquet = app.add_subcommand("floquet", "stability-annotate a swept branch");
    floquet->add_option("--runs", sweep_files, "sweep JSON sidecars")->required();

    std::string run_file;
    auto* oracle = app.add_subcommand("oracle", "variational/brute-force oracle on a run");
    oracle->add_option("--run", run_file, "run JSON sidecar")->required();

    std::string branch_file;
    auto* escape = app.add_subcommand("escape", "open-loop escapes from an unstable orbit");
    escape->add_option("--branch", branch_file, "stability-annotated run JSON")->required();

    std::string study_branch;
    auto* study = app.add_subcommand("perturbation-study",
                                     "multiplier estimates against perturbation size");
    study->add_option("--branch", study_branch, "stability-annotated run JSON")->required();

    std::vector<std::string> surface_files;
    auto* surface = app.add_subcommand("surface", "GP surface, fold curve and slices");
    surface->add_option("--runs", surface_files, "sweep JSON sidecars")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (init->parsed()) {
            cbc::write_text(cbc::reference_config_text(), init_path);
            std::cout << "wrote " << init_path << "\n";
            return 0;
        }

        cbc::CommandContext ctx;
        ctx.config = config_path.empty() ? cbc::default_config() : cbc::load_config(config_path);
        if (seed_set) ctx.config.master_seed = seed;
        ctx.out_dir = out_dir.empty() ? ctx.config.output_dir : out_dir;
        ctx.jobs = jobs;

        const auto to_paths = [](const std::vector<std::string>& v) {
            return std::vector<std::filesystem::path>(v.begin(), v.end());
        };
        if (sweep->parsed()) return cbc::cmd_sweep(ctx);
        if (floquet->parsed()) return cbc::cmd_floquet(ctx, to_paths(sweep_files));
        if (oracle->parsed()) return cbc::cmd_oracle(ctx, run_file);
        if (escape->parsed()) return cbc::cmd_escape(ctx, branch_file);
        if (study->parsed()) return cbc::cmd_perturbation_study(ctx, study_branch);
        if (surface->parsed()) return cbc::cmd_surface(ctx, to_paths(surface_files));
    } catch (const cbc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
