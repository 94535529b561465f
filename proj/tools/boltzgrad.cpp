// boltzgrad: experiment runner for the kinetic-theory laboratory.
//
//   boltzgrad run <config>       run an experiment, write CSVs and a manifest
//   boltzgrad validate <config>  parse and check a configuration
//   boltzgrad plot <manifest>    write a gnuplot script for the headline figure
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical error, 4 budget error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "boltzgrad/boltzgrad.hpp"

namespace {

int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const boltzgrad::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const boltzgrad::BudgetError& e) {
        std::cerr << "budget error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale kinetic-theory laboratory"};
    app.require_subcommand(1);

    std::string config_path, manifest_path;

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_path, "configuration file")->required();

    auto* validate = app.add_subcommand("validate", "check a config file");
    validate->add_option("config", config_path, "configuration file")->required();

    auto* plot = app.add_subcommand("plot", "emit a gnuplot script from a manifest");
    plot->add_option("manifest", manifest_path, "manifest file")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        return guarded([&] {
            const auto cfg = boltzgrad::lab::ConfigFile::parse_file(config_path);
            const auto exp = boltzgrad::lab::load_experiment(cfg);
            boltzgrad::lab::run_experiment(exp);
            std::cout << "wrote " << exp.output_dir << "/manifest.txt\n";
        });
    }
    if (validate->parsed()) {
        return guarded([&] {
            const auto cfg = boltzgrad::lab::ConfigFile::parse_file(config_path);
            const auto exp = boltzgrad::lab::load_experiment(cfg);
            std::cout << "ok: experiment '" << exp.name << "', N =";
            for (long n : exp.n_list) std::cout << ' ' << n;
            std::cout << ", t0 = " << exp.t0() << '\n';
        });
    }
    return guarded([&] {
        const auto script = boltzgrad::lab::emit_plot_script(manifest_path);
        const auto out =
            std::filesystem::path(manifest_path).parent_path() / "plot.gnuplot";
        std::ofstream os(out);
        os << script;
        std::cout << "wrote " << out.string() << '\n';
    });
}
