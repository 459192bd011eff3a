// Experiment runner: binds the path, derivative, simulation and verification
// modules behind reproducible subcommands. Configuration comes from an
// optional key-value file plus command-line flags (flags win); every run
// writes a JSON verdict and a CSV table stamped with the config hash.

#include <cstdio>
#include <exception>
#include <map>
#include <string>

#include <CLI11.hpp>  // vendored single-header CLI11

#include "itolab/experiment.hpp"

namespace {

using Overlay = std::map<std::string, std::string>;

void bind_option(CLI::App* sub, Overlay& overlay, const std::string& flag,
                 const std::string& key, const std::string& desc) {
    sub->add_option_function<std::string>(
        flag, [&overlay, key](const std::string& v) { overlay[key] = v; }, desc);
}

void bind_common(CLI::App* sub, Overlay& overlay, std::string& config_file) {
    sub->add_option("--config", config_file, "key = value config file; flags override it");
    bind_option(sub, overlay, "--out", "out", "JSON report path (default <command>.json)");
    bind_option(sub, overlay, "--csv", "csv", "CSV table path (default: out with .csv)");
    bind_option(sub, overlay, "--threads", "threads", "worker pool size for seed ensembles");
    bind_option(sub, overlay, "--tol", "tol", "pass threshold on the final metric");
    bind_option(sub, overlay, "--horizon", "horizon", "time horizon (default 1)");
}

void bind_generator(CLI::App* sub, Overlay& overlay) {
    bind_option(sub, overlay, "--gen", "gen.kind", "path generator: bm or jumpdiff");
    bind_option(sub, overlay, "--drift", "gen.drift", "drift of the finite-variation part");
    bind_option(sub, overlay, "--lambda", "gen.lambda", "jump intensity");
    bind_option(sub, overlay, "--law", "gen.law", "jump law: rademacher, uniform or normal");
    bind_option(sub, overlay, "--lo", "gen.lo", "uniform law lower endpoint");
    bind_option(sub, overlay, "--hi", "gen.hi", "uniform law upper endpoint");
    bind_option(sub, overlay, "--mu", "gen.mu", "normal law mean");
    bind_option(sub, overlay, "--sigma", "gen.sigma", "normal law standard deviation");
    sub->add_flag_callback(
        "--compensated", [&overlay] { overlay["gen.compensated"] = "true"; },
        "put jumps in the martingale part, compensator in the drift");
}

void print_outcome(const itolab::ExperimentOutcome& oc) {
    const auto& rep = oc.report;
    if (rep.levels.size() <= 16) std::fputs(itolab::detail::levels_csv(rep.levels).c_str(), stdout);
    std::printf("slope = %s\n", itolab::format_double(rep.slope).c_str());
    std::printf("pass = %s\n", rep.pass ? "true" : "false");
    for (const auto& [k, v] : rep.extras)
        std::printf("%s = %s\n", k.c_str(), itolab::format_double(v).c_str());
    std::printf("hash = %s\n", rep.hash.c_str());
    std::printf("report = %s\n", oc.paths.json.c_str());
    std::printf("table = %s\n", oc.paths.csv.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical toolkit for path-dependent functional calculus"};
    app.require_subcommand(1);

    Overlay overlay;
    std::string config_file;

    CLI::App* simulate = app.add_subcommand("simulate", "sample one path, write it as CSV");
    bind_common(simulate, overlay, config_file);
    bind_generator(simulate, overlay);
    bind_option(simulate, overlay, "--grid", "grid", "number of grid steps");
    bind_option(simulate, overlay, "--seed", "seed", "generator seed");

    CLI::App* differentiate =
        app.add_subcommand("differentiate", "derivative estimate with its step table");
    bind_common(differentiate, overlay, config_file);
    bind_generator(differentiate, overlay);
    bind_option(differentiate, overlay, "--functional", "functional", "catalog id");
    bind_option(differentiate, overlay, "--path", "path", "input path CSV (time,cont,jump)");
    bind_option(differentiate, overlay, "--t", "t", "evaluation time");
    bind_option(differentiate, overlay, "--estimator", "estimator",
                "horizontal, dupire, dupire2, chit, chit2, def4t or def4x");
    bind_option(differentiate, overlay, "--grid", "grid", "grid steps when sampling a path");
    bind_option(differentiate, overlay, "--seed", "seed", "generator seed");

    CLI::App* verify = app.add_subcommand(
        "verify-ito", "change-of-variable residual over grid refinement, median across seeds");
    bind_common(verify, overlay, config_file);
    bind_generator(verify, overlay);
    bind_option(verify, overlay, "--functional", "functional", "catalog id");
    bind_option(verify, overlay, "--levels", "levels", "log2 grid sizes, e.g. 8,10,12");
    bind_option(verify, overlay, "--seeds", "seeds", "ensemble size");

    CLI::App* wz = app.add_subcommand(
        "wong-zakai", "ordinary-integral approximation error across smoothing levels");
    bind_common(wz, overlay, config_file);
    bind_generator(wz, overlay);
    bind_option(wz, overlay, "--functional", "functional", "catalog id");
    bind_option(wz, overlay, "--n", "n", "smoothing levels, e.g. 4,16,64,256");
    bind_option(wz, overlay, "--grid", "grid", "base grid steps");
    bind_option(wz, overlay, "--seeds", "seeds", "ensemble size");

    CLI::App* smoother =
        app.add_subcommand("smoother", "sup-error of the exponential smoother per level");
    bind_common(smoother, overlay, config_file);
    bind_generator(smoother, overlay);
    bind_option(smoother, overlay, "--grid", "grid", "grid steps");
    bind_option(smoother, overlay, "--seed", "seed", "generator seed");
    bind_option(smoother, overlay, "--n", "n", "smoothing levels, e.g. 4,16,64,256");

    CLI::App* props =
        app.add_subcommand("props", "derivative-identity checks against catalog oracles");
    bind_common(props, overlay, config_file);
    bind_generator(props, overlay);
    bind_option(props, overlay, "--functional", "functional", "catalog id");
    bind_option(props, overlay, "--grid", "grid", "grid steps per sample");
    bind_option(props, overlay, "--seeds", "seeds", "number of samples");

    CLI::App* runcmd = app.add_subcommand("run", "run the command named in a config file");
    runcmd->add_option("--config", config_file, "config file with a 'command' key")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        itolab::ExperimentConfig cfg;
        if (!config_file.empty()) cfg = itolab::parse_config_file(config_file);
        for (const auto& [k, v] : overlay) cfg.entries[k] = v;
        CLI::App* sub = app.get_subcommands().front();
        if (sub->get_name() == "run") {
            if (!cfg.has("command"))
                throw itolab::ConfigError("run needs a 'command' key in the config file");
        } else {
            cfg.entries["command"] = sub->get_name();
        }
        itolab::ExperimentOutcome oc = itolab::run_and_write(cfg);
        print_outcome(oc);
        return oc.report.pass ? 0 : 1;
    } catch (const itolab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const itolab::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
