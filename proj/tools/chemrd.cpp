#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "chemrd/commands.hpp"
#include "chemrd/config.hpp"
#include "chemrd/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"chemrd: four-species treatment simulator and injection-schedule optimizer"};
    app.require_subcommand(1);

    std::string config_path, out_dir;

    CLI::App* sim = app.add_subcommand("simulate", "integrate the system and write trajectory CSVs");
    sim->add_option("--config", config_path, "JSON configuration file")->required();
    sim->add_option("--out", out_dir, "output directory")->required();

    CLI::App* opt = app.add_subcommand("optimize", "run the injection-schedule optimizer");
    opt->add_option("--config", config_path, "JSON configuration file")->required();
    opt->add_option("--out", out_dir, "output directory")->required();

    CLI::App* val = app.add_subcommand("validate", "run the invariant battery on a configuration");
    val->add_option("--config", config_path, "JSON configuration file")->required();

    CLI::App* jeff = app.add_subcommand("jeff", "run the periodic on/off growth-rate scenario");
    jeff->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return chemrd::exit_config_error;
    }

    try {
        if (jeff->parsed()) return chemrd::run_jeff(out_dir);
        const chemrd::RunConfig cfg = chemrd::parse_config(config_path);
        if (sim->parsed()) return chemrd::run_simulate(cfg, out_dir);
        if (opt->parsed()) return chemrd::run_optimize(cfg, out_dir);
        return chemrd::run_validate(cfg);
    } catch (const chemrd::config_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return chemrd::exit_config_error;
    } catch (const chemrd::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return chemrd::exit_validation_failure;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return chemrd::exit_validation_failure;
    }
}
