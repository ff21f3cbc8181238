#include "dpsnn/errors.hpp"
#include "dpsnn/harness.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dpsnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("dpsnn_harness_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

SimConfig small_config(const fs::path& dir)
{
    SimConfig c;
    c.width = c.height = 2;
    c.module_scale = 0.1;
    c.max_delay = 4;
    c.duration_ms = 150.0;
    c.transient_ms = 50.0;
    c.seed = 17;
    c.output_dir = dir.string();
    return c;
}

}  // namespace

TEST(Config, RoundTripsThroughText)
{
    SimConfig c;
    c.width = 7;
    c.height = 3;
    c.module_scale = 0.1 + 1e-12;
    c.preset = "SW-3.1Hz";
    c.lambda = 0.55;
    c.max_delay = 12;
    c.ranks = 3;
    c.transport = TransportKind::Threads;
    c.duration_ms = 1234.5;
    c.transient_ms = 1.0 / 3.0;
    c.seed = 1ull << 40;
    c.j_rescale = true;
    c.imd_mm = 0.25;
    c.output_dir = "some/where";
    c.csv_spikes = true;
    c.trace_traffic = true;
    const auto back = parse_config(c.serialize());
    EXPECT_EQ(back.serialize(), c.serialize());
    EXPECT_EQ(back.module_scale, c.module_scale);
    EXPECT_EQ(back.transient_ms, c.transient_ms);
    EXPECT_EQ(back.seed, c.seed);
    EXPECT_EQ(back.transport, TransportKind::Threads);
}

TEST(Config, CommentsBlanksAndOverrides)
{
    const auto c = parse_config("# header\n\ngrid = 3x5   # trailing\n  lambda=0.7\n");
    EXPECT_EQ(c.width, 3u);
    EXPECT_EQ(c.height, 5u);
    EXPECT_EQ(c.lambda, 0.7);
    SimConfig d = c;
    apply_setting(d, "seed=9");
    EXPECT_EQ(d.seed, 9u);
    EXPECT_EQ(SimConfig{}.transient_ms, 500.0);
}

TEST(Config, RejectsUnknownKeysAndBadValues)
{
    try {
        parse_config("grid = 2x2\nspeed = 3\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("speed"), std::string::npos);
    }
    SimConfig c;
    EXPECT_THROW(apply_setting(c, "lambda=abc"), ConfigError);
    EXPECT_THROW(apply_setting(c, "ranks=-1"), ConfigError);
    EXPECT_THROW(apply_setting(c, "grid=4"), ConfigError);
    EXPECT_THROW(apply_setting(c, "j_rescale=maybe"), ConfigError);
    EXPECT_THROW(apply_setting(c, "transport=mpi"), ConfigError);
    EXPECT_THROW(apply_setting(c, "no_equals_sign"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/dpsnn.cfg"), IoError);
}

TEST(Config, ValidationBeforeAllocation)
{
    SimConfig c;
    EXPECT_NO_THROW(c.validate());
    auto bad = c;
    bad.module_scale = 0.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.max_delay = 300;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.preset = "REM";
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.width = 5;
    bad.height = 5;
    bad.ranks = 7;
    EXPECT_THROW(bad.validate(), TopologyError);
    bad = c;
    bad.width = 2000;
    bad.height = 2000;  // 5e9 neurons: rejected before anything is allocated
    EXPECT_THROW(bad.validate(), Error);
}

TEST(Config, NetworkRescalesEfficacies)
{
    SimConfig c;
    c.module_scale = 0.25;
    EXPECT_EQ(c.network().j_scale, 1.0);
    c.j_rescale = true;
    EXPECT_EQ(c.network().j_scale, 4.0);
    EXPECT_EQ(c.network().grid.sizes.total(), 63u + 188u + 63u);
}

TEST(Metrics, EquivalentEventRate)
{
    MetricInputs in;
    in.wall_seconds = 10.0;
    in.neurons = 1000;
    in.spikes = 100000;
    in.recurrent_synapses = 1125000;
    in.external_synapses = 400000;
    in.recurrent_events = 7;
    in.external_events = 3;
    in.peak_records = 1125000;
    const auto m = bench_metrics(in);
    EXPECT_DOUBLE_EQ(m.synapses_per_neuron, 1525.0);
    EXPECT_DOUBLE_EQ(m.equivalent_events_per_s, 1.525e7);
    EXPECT_DOUBLE_EQ(m.exact_events_per_s, 1.0);
    EXPECT_DOUBLE_EQ(m.bytes_per_synapse, 12.0);
    in.peak_records = 2 * in.recurrent_synapses;
    EXPECT_GE(bench_metrics(in).bytes_per_synapse, 24.0);
    in.spikes = 0;
    EXPECT_EQ(bench_metrics(in).equivalent_events_per_s, 0.0);
    in.wall_seconds = 0.0;
    EXPECT_THROW(bench_metrics(in), ConfigError);
}

TEST(Commands, ZeroDurationRunWritesValidArtifacts)
{
    const auto dir = scratch("zero");
    auto cfg = small_config(dir);
    cfg.duration_ms = 0.0;
    cfg.transient_ms = 0.0;
    std::ostringstream out;
    EXPECT_EQ(cmd_run(cfg, out), 0);
    const auto log = load_spike_log((dir / "spikes.bin").string());
    EXPECT_TRUE(log.spikes.empty());
    EXPECT_EQ(parse_config(log.provenance).serialize(), cfg.serialize());
    const auto j = nlohmann::json::parse(slurp(dir / "metrics.json"));
    EXPECT_EQ(j["spikes"], 0);
    EXPECT_EQ(j["equivalent_events_per_s"], 0.0);
    EXPECT_EQ(slurp(dir / "config.txt"), cfg.serialize());
    fs::remove_all(dir);
}

TEST(Commands, EmbeddedConfigReproducesTheRun)
{
    const auto dir = scratch("repro");
    auto cfg = small_config(dir);
    cfg.trace_traffic = true;
    cfg.ranks = 2;
    std::ostringstream out;
    ASSERT_EQ(cmd_run(cfg, out), 0);
    const auto first = load_spike_log((dir / "spikes.bin").string());
    ASSERT_FALSE(first.spikes.empty());
    EXPECT_TRUE(fs::exists(dir / "traffic.csv"));

    auto again = parse_config(first.provenance);
    again.output_dir = (dir / "again").string();
    ASSERT_EQ(cmd_run(again, out), 0);
    const auto second = load_spike_log((dir / "again" / "spikes.bin").string());
    EXPECT_EQ(second.spikes, first.spikes);

    // Analysis of the saved log writes its tables.
    AnalysisOptions opt;
    opt.psd_segment = 16;
    ASSERT_EQ(cmd_analyze((dir / "spikes.bin").string(), nullptr, opt, (dir / "an").string(), out), 0);
    for (const char* f : {"rates.csv", "psd.csv", "analysis.json"}) EXPECT_TRUE(fs::exists(dir / "an" / f)) << f;
    fs::remove_all(dir);
}

TEST(Commands, DryRunCountsWhatTheBuildStores)
{
    const auto dir = scratch("dry");
    auto cfg = small_config(dir);
    cfg.width = cfg.height = 3;
    std::ostringstream a, b;
    ASSERT_EQ(cmd_build(cfg, true, a), 0);
    const auto dry = nlohmann::json::parse(slurp(dir / "build.json"));
    ASSERT_EQ(cmd_build(cfg, false, b), 0);
    const auto full = nlohmann::json::parse(slurp(dir / "build.json"));
    EXPECT_EQ(dry["recurrent_synapses"], full["recurrent_synapses"]);
    EXPECT_EQ(dry["total_synapses"], full["total_synapses"]);
    EXPECT_EQ(full["bytes_per_synapse"], 12.0);
    fs::remove_all(dir);
}

TEST(Commands, MeanFieldWritesCurves)
{
    const auto dir = scratch("mf");
    SimConfig cfg;
    cfg.output_dir = dir.string();
    std::ostringstream out;
    ASSERT_EQ(cmd_meanfield(cfg, 20.0, 10.0, 200.0, out), 0);
    for (const char* f : {"nu_nullcline.csv", "c_nullcline.csv", "fixed_points.csv", "trajectory.csv"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_NE(out.str().find("stable"), std::string::npos);
    fs::remove_all(dir);
}
