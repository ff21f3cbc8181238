#pragma once

// Run configuration, metrics and the drivers behind the command line tool.

#include "dpsnn/analysis.hpp"
#include "dpsnn/comm.hpp"
#include "dpsnn/connectivity.hpp"
#include "dpsnn/engine.hpp"
#include "dpsnn/meanfield.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dpsnn {

/// Flat key = value configuration; every key has a default.
struct SimConfig {
    unsigned width = 2;
    unsigned height = 2;
    double module_scale = 1.0;
    std::string preset = "AW-8.8Hz";
    double lambda = 0.4;
    unsigned max_delay = 1;
    unsigned ranks = 1;
    TransportKind transport = TransportKind::Loopback;
    double duration_ms = 1000.0;
    double transient_ms = 500.0;
    std::uint64_t seed = 1;
    bool j_rescale = false;
    double imd_mm = 0.4;
    std::string output_dir = "dpsnn-out";
    bool csv_spikes = false;
    bool trace_traffic = false;

    /// Throws ConfigError on anything inconsistent (before any allocation).
    void validate() const;
    /// Canonical text; parse(serialize()) round-trips exactly.
    std::string serialize() const;
    NetworkSpec network() const;
    SimulationOptions options() const;
};

/// Applies one `key=value` assignment.
void apply_setting(SimConfig& cfg, std::string_view assignment);
/// Reads a config text: `key = value` lines, '#' comments, blank lines.
SimConfig parse_config(std::string_view text, SimConfig base = {});
SimConfig load_config(const std::string& path);

struct RunMetrics {
    double init_seconds = 0.0;
    double sim_seconds = 0.0;
    std::uint64_t neurons = 0;
    std::uint64_t spikes = 0;
    std::uint64_t recurrent_events = 0;
    std::uint64_t external_events = 0;
    std::uint64_t recurrent_synapses = 0;
    double synapses_per_neuron = 0.0;  // recurrent + external
    double equivalent_events_per_s = 0.0;
    double exact_events_per_s = 0.0;
    std::uint64_t peak_records = 0;
    double bytes_per_synapse = 0.0;  // count based: 12 * peak records / recurrent synapses
    double mean_rate_hz = 0.0;
};

struct MetricInputs {
    double wall_seconds = 0.0;
    std::uint64_t neurons = 0;
    std::uint64_t spikes = 0;
    std::uint64_t recurrent_events = 0;
    std::uint64_t external_events = 0;
    std::uint64_t recurrent_synapses = 0;
    std::uint64_t external_synapses = 0;  // external inputs over all neurons
    std::uint64_t peak_records = 0;
};

/// Throughput and memory metrics; wall_seconds must be positive.
RunMetrics bench_metrics(const MetricInputs& in);

/// Metrics of a finished run (zero throughput when nothing was timed).
RunMetrics run_metrics(const SimConfig& cfg, const RunResult& r);

std::string metrics_json(const SimConfig& cfg, const RunMetrics& m);

struct AnalysisOptions {
    double bin_ms = 5.0;
    double t0_ms = 0.0;       // analysis window start
    double t1_ms = -1.0;      // end; negative means last spike / duration
    std::size_t psd_segment = 512;
    LogMuaOptions mua;
    TransitionOptions transitions;  // threshold ignored: taken from the log-MUA modes
    double imd_mm = 0.4;
};

struct AnalysisSummary {
    std::array<double, 3> mean_rate_hz{};  // F, B, I over the window
    RateSeries population;
    Spectrum f_spectrum;
    double peak_hz = 0.0;
    double low_fraction_4hz = 0.0;
    Bimodality mua;
    std::vector<TransitionField> waves;
    std::vector<WaveSpeed> speeds;
    double mean_speed_imd_per_s = 0.0;  // average over waves with a defined speed
    double mean_speed_mm_per_s = 0.0;
    std::vector<double> log_mua_field;  // [column * bins + k]
    std::size_t bins = 0;
};

AnalysisSummary analyze(const SpikeLog& log, const GridSpec& grid, const AnalysisOptions& opt);

// Subcommands; each returns a process exit status and writes artifacts
// under cfg.output_dir.
int cmd_build(const SimConfig& cfg, bool dry_run, std::ostream& out);
int cmd_run(const SimConfig& cfg, std::ostream& out);
int cmd_analyze(const std::string& spike_log, const SimConfig* override_cfg, AnalysisOptions opt,
                const std::string& output_dir, std::ostream& out);
int cmd_meanfield(const SimConfig& cfg, double tau_E, double tau_I, double trajectory_ms,
                  std::ostream& out);
int cmd_bench(const SimConfig& cfg, const std::vector<unsigned>& ranks,
              const std::vector<unsigned>& grid_sizes, std::ostream& out);

}  // namespace dpsnn
