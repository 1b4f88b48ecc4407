// mpsts: simulate, fit, bin and reproduce multiphoton-subtracted thermal
// light statistics from the command line.

#include "CLI11.hpp"

#include <chrono>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "commands.hpp"

using namespace mpsts::cli;

namespace {

void add_theory_flags(CLI::App* app, TheoryFlags& t) {
    app->add_option("--mu0", t.mu0, "mean photon number per mode")->check(CLI::PositiveNumber);
    app->add_option("--m", t.m, "observed modes")->check(CLI::PositiveNumber);
    app->add_option("--M", t.M, "total modes")->check(CLI::PositiveNumber);
    app->add_option("--K", t.K, "subtracted photons")->check(CLI::NonNegativeNumber);
}

void add_dark_flag(CLI::App* app, bool& dark) {
    app->add_flag("--dark,!--no-dark", dark, "convolve dark counts of 0.0015 per mode (default on)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Photon statistics of multiphoton-subtracted multimode thermal light"};
    app.require_subcommand(1);
    app.fallthrough();
    bool timing = false;
    app.add_flag("--timing", timing, "include wall-clock seconds in the report");

    std::vector<std::string> args(argv + 1, argv + argc);

    // simulate
    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "draw samples and write a v1 data file");
    simulate->add_option("kind", sim.kind, "photocount | quadrature | trace | oracle")
        ->required()
        ->check(CLI::IsMember({"photocount", "quadrature", "trace", "oracle"}));
    add_theory_flags(simulate, sim.theory);
    simulate->add_option("--n", sim.n, "sample size")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim.seed, "RNG seed");
    simulate->add_option("--out", sim.out, "output file")->required();
    add_dark_flag(simulate, sim.dark);
    simulate->add_option("--tcoh", sim.trace.t_coh, "trace: coherence time [s]")->check(CLI::PositiveNumber);
    simulate->add_option("--duration", sim.trace.duration, "trace: length [s]")->check(CLI::PositiveNumber);
    simulate->add_option("--tap", sim.trace.tap_ratio, "trace: subtraction tap ratio")->check(CLI::Range(0.0, 1.0));
    simulate->add_option("--tau", sim.trace.bin_width, "trace: field slot width [s]")->check(CLI::PositiveNumber);
    simulate->add_flag("!--no-homodyne", sim.trace.homodyne, "trace: omit homodyne readings");

    // fit
    FitOptions fit;
    auto* fitcmd = app.add_subcommand("fit", "estimate parameters from a histogram or quadrature file");
    fitcmd->add_option("kind", fit.kind, "photocount | quadrature")
        ->required()
        ->check(CLI::IsMember({"photocount", "quadrature"}));
    fitcmd->add_option("data", fit.data, "input data file")->required()->check(CLI::ExistingFile);
    fitcmd->add_option("--prior", fit.prior, "none | fixed:<param=value,...> | bayes");
    add_theory_flags(fitcmd, fit.theory);
    add_dark_flag(fitcmd, fit.dark);
    fitcmd->add_option("--grid-nodes", fit.nodes, "nodes per continuous axis")->check(CLI::Range(1, 1001));
    fitcmd->add_option("--kmax", fit.kmax, "largest K in free-K grids")->check(CLI::NonNegativeNumber);
    fitcmd->add_option("--mu0-range", fit.ranges["mu0"], "grid override lo:hi");
    fitcmd->add_option("--m-range", fit.ranges["m"], "grid override lo:hi");
    fitcmd->add_option("--M-range", fit.ranges["M"], "grid override lo:hi");
    fitcmd->add_option("--K-range", fit.ranges["K"], "grid override lo:hi");
    fitcmd->add_option("--dump-grid", fit.dump_grid, "write every grid node to this file");
    fitcmd->add_flag("--allow-boundary", fit.allow_boundary, "do not fail when the maximum is on a grid edge");

    // pipeline
    PipelineOptions pipe;
    auto* pipecmd = app.add_subcommand("pipeline", "bin, thin and group a detector trace");
    pipecmd->add_option("trace", pipe.trace, "trace file")->required()->check(CLI::ExistingFile);
    pipecmd->add_option("--tau", pipe.config.tau, "bin width [s]")->check(CLI::PositiveNumber);
    pipecmd->add_option("--period", pipe.config.period, "thinning period [s]")->check(CLI::PositiveNumber);
    pipecmd->add_option("--tcoh", pipe.config.t_coh, "coherence time [s]")->check(CLI::PositiveNumber);
    pipecmd->add_option("--M", pipe.M, "bins per group")->check(CLI::PositiveNumber);
    pipecmd->add_option("--m", pipe.m, "counted bins per group")->check(CLI::PositiveNumber);
    pipecmd->add_option("--out", pipe.out, "output directory")->required();

    // reproduce
    ReproduceOptions rep;
    auto* repcmd = app.add_subcommand("reproduce", "regenerate table and figure data");
    repcmd->add_option("target", rep.target, "table1 | fig4a | fig4b | fig5 | fig6 | fig7 | fig8 | fig9")
        ->required()
        ->check(CLI::IsMember({"table1", "fig4a", "fig4b", "fig5", "fig6", "fig7", "fig8", "fig9"}));
    repcmd->add_option("--seed", rep.seed, "RNG seed");
    repcmd->add_option("--out", rep.out, "output directory")->required();
    repcmd->add_option("--grid-nodes", rep.nodes, "nodes per continuous axis")->check(CLI::Range(3, 1001));
    repcmd->add_option("--seeds", rep.seeds, "table1: simulated data sets per sample size")->check(CLI::PositiveNumber);
    repcmd->add_option("--kmax", rep.kmax, "largest K considered")->check(CLI::NonNegativeNumber);
    repcmd->add_flag("--quick", rep.quick, "table1: skip the Bayesian bisection");
    add_dark_flag(repcmd, rep.dark);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    if (simulate->parsed() && sim.kind != "trace" && sim.n == 0) {
        std::cerr << "simulate: --n is required and must be positive\n";
        return 2;
    }

    const auto start = std::chrono::steady_clock::now();
    std::optional<RunReport> report;
    try {
        if (simulate->parsed()) report = run_simulate(sim, args);
        else if (fitcmd->parsed()) report = run_fit(fit, args);
        else if (pipecmd->parsed()) report = run_pipeline(pipe, args);
        else report = run_reproduce(rep, args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (timing) report->doc["wall_clock_seconds"] = elapsed;
    for (const auto& w : report->warnings) std::cerr << "warning: " << w << '\n';
    std::cerr << "elapsed " << elapsed << " s\n";
    std::cout << report->dump() << '\n';
    return report->escalate ? kExitWarning : 0;
}
