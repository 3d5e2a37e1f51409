#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "dilo/commands.hpp"
#include "dilo/errors.hpp"

namespace {

int dispatch(const CLI::App& app, const std::string& config, const std::string& ckpt,
             const std::string& data) {
    if (app.got_subcommand("gen-data")) return dilo::run_gen_data(config);
    if (app.got_subcommand("train")) return dilo::run_train(config);
    if (app.got_subcommand("eval")) return dilo::run_eval(config, ckpt);
    if (app.got_subcommand("oracle-check")) return dilo::run_oracle_check(config);
    if (app.got_subcommand("diagnose")) return dilo::run_diagnose(ckpt, data);
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dilo: offline imitation from observation-only expert data"};
    app.require_subcommand(1);
    app.footer(
        "Exit codes: 0 success, 1 internal or numeric failure, 2 invalid configuration,\n"
        "3 missing file or I/O failure, 4 malformed data, 5 training divergence abort.\n"
        "Set DILO_OUTPUT_ROOT to prefix relative output directories.");

    std::string config, ckpt, data;

    CLI::App* gen = app.add_subcommand("gen-data", "Generate expert and offline datasets");
    gen->add_option("--config", config, "Run config JSON")->required();

    CLI::App* train = app.add_subcommand("train", "Train the value function, extract a policy");
    train->add_option("--config", config, "Run config JSON")->required();

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a policy checkpoint");
    eval->add_option("--config", config, "Run config JSON")->required();
    eval->add_option("--ckpt", ckpt, "Policy checkpoint")->required();

    CLI::App* oracle = app.add_subcommand("oracle-check", "Certify the dual solver against the primal oracle");
    oracle->add_option("--config", config, "Run config JSON")->required();

    CLI::App* diag = app.add_subcommand("diagnose", "Per-triple ratio/reward diagnostics");
    diag->add_option("--ckpt", ckpt, "Value checkpoint")->required();
    diag->add_option("--data", data, "Dataset (line-delimited JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        return dispatch(app, config, ckpt, data);
    } catch (const dilo::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const dilo::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const dilo::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const dilo::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
