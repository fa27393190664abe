#include <CLI11.hpp>
#include <iostream>

#include "gpctc/experiment.hpp"

namespace {

gpctc::cfg::Config load_config(const std::string& path, long seed_override) {
    auto c = gpctc::cfg::Config::parse(gpctc::io::read_file(path));
    if (seed_override >= 0) {
        c.set("training", "seed", std::to_string(seed_override));
        c.set("simulation", "seed", std::to_string(seed_override));
    }
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-process computed-torque control toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", mode = "radius", target;
    long seed = -1;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", out_dir, "output directory");
    };

    auto* train = app.add_subcommand("train", "generate training data and fit hyperparameters");
    add_common(train, true);

    auto* simulate = app.add_subcommand("simulate", "run a closed-loop simulation");
    add_common(simulate, true);

    auto* bounds = app.add_subcommand("bounds", "compute the tracking-error bound report");
    add_common(bounds, true);
    bounds->add_option("--mode", mode,
                       "radius | accuracy_for_radius | gains_for_radius");

    auto* reproduce =
        app.add_subcommand("reproduce", "run a bundled benchmark: table1 | fig3 | bound_coverage");
    reproduce->add_option("which", target, "table1 | fig3 | bound_coverage")->required();
    add_common(reproduce, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return gpctc::exp::cmd_train(load_config(config_path, seed), out_dir, std::cout);
        if (simulate->parsed())
            return gpctc::exp::cmd_simulate(load_config(config_path, seed), out_dir, std::cout);
        if (bounds->parsed())
            return gpctc::exp::cmd_bounds(load_config(config_path, seed), out_dir, mode,
                                          std::cout);
        if (reproduce->parsed())
            return gpctc::exp::cmd_reproduce(target, out_dir, seed, std::cout);
    } catch (const gpctc::cfg::config_error& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return gpctc::exp::exit_config;
    } catch (const gpctc::numerical_error& ex) {
        std::cerr << "numerical error: " << ex.what() << "\n";
        return gpctc::exp::exit_numerical;
    } catch (const gpctc::infeasibility_error& ex) {
        std::cerr << "infeasible: " << ex.what() << "\n";
        return gpctc::exp::exit_numerical;
    } catch (const gpctc::dynamics_error& ex) {
        std::cerr << "dynamics error: " << ex.what() << "\n";
        return gpctc::exp::exit_numerical;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return gpctc::exp::exit_usage;
    }
    return gpctc::exp::exit_usage;
}
