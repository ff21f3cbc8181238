// dpsnn: build | run | analyze | meanfield | bench

#include "dpsnn/errors.hpp"
#include "dpsnn/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

dpsnn::SimConfig resolve(const std::string& path, const std::vector<std::string>& sets)
{
    dpsnn::SimConfig cfg = path.empty() ? dpsnn::SimConfig{} : dpsnn::load_config(path);
    for (const auto& s : sets) dpsnn::apply_setting(cfg, s);
    return cfg;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Distributed mixed time/event-driven spiking network simulator"};
    app.require_subcommand(1);

    std::string config;
    std::vector<std::string> sets;
    const auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config, "key = value configuration file")->check(CLI::ExistingFile);
        sub->add_option("-s,--set", sets, "override, e.g. --set grid=4x4 --set preset=SW-3.1Hz");
    };

    auto* build = app.add_subcommand("build", "construct the synaptic matrix and report sizes");
    common(build);
    bool dry_run = false;
    build->add_flag("--dry-run", dry_run, "count synapses without storing them");

    auto* run = app.add_subcommand("run", "simulate and write spikes plus metrics");
    common(run);

    auto* analyze = app.add_subcommand("analyze", "rates, spectra, log-MUA, waves from a spike log");
    std::string spikes, analysis_out = "dpsnn-analysis";
    dpsnn::AnalysisOptions aopt;
    analyze->add_option("spikes", spikes, "spike log (binary or csv)")->required()->check(CLI::ExistingFile);
    common(analyze);
    analyze->add_option("-o,--output", analysis_out, "output directory");
    analyze->add_option("--bin-ms", aopt.bin_ms, "rate bin width")->check(CLI::PositiveNumber);
    analyze->add_option("--t0", aopt.t0_ms, "window start (ms)");
    analyze->add_option("--t1", aopt.t1_ms, "window end (ms), negative = whole log");
    analyze->add_option("--segment", aopt.psd_segment, "Welch segment length (bins)");
    analyze->add_option("--wave-window", aopt.transitions.window_ms, "wave segmentation window (ms)");
    analyze->add_option("--mua-seed", aopt.mua.seed, "seed of the log-MUA noise");

    auto* mf = app.add_subcommand("meanfield", "fixed points, nullclines and trajectories of the rate model");
    common(mf);
    double tau_E = 20.0, tau_I = 10.0, traj_ms = 0.0;
    mf->add_option("--tau-e", tau_E, "excitatory rate time constant (ms)")->check(CLI::PositiveNumber);
    mf->add_option("--tau-i", tau_I, "inhibitory rate time constant (ms)")->check(CLI::PositiveNumber);
    mf->add_option("--trajectory", traj_ms, "also integrate this many ms from a perturbed fixed point");

    auto* bench = app.add_subcommand("bench", "scaling sweep over rank counts and grid sizes");
    common(bench);
    std::vector<unsigned> ranks, grids;
    bench->add_option("--ranks", ranks, "rank counts, e.g. --ranks 1 2 4");
    bench->add_option("--grids", grids, "square grid sides, e.g. --grids 4 8");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build) return dpsnn::cmd_build(resolve(config, sets), dry_run, std::cout);
        if (*run) return dpsnn::cmd_run(resolve(config, sets), std::cout);
        if (*analyze) {
            const bool override = !config.empty() || !sets.empty();
            if (!override) return dpsnn::cmd_analyze(spikes, nullptr, aopt, analysis_out, std::cout);
            const auto cfg = resolve(config, sets);
            return dpsnn::cmd_analyze(spikes, &cfg, aopt, analysis_out, std::cout);
        }
        if (*mf) return dpsnn::cmd_meanfield(resolve(config, sets), tau_E, tau_I, traj_ms, std::cout);
        if (*bench) return dpsnn::cmd_bench(resolve(config, sets), ranks, grids, std::cout);
    } catch (const dpsnn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
