#include "dpsnn/harness.hpp"

#include "dpsnn/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dpsnn {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::logic_error&) {
        throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    }
}

std::uint64_t to_uint(const std::string& key, const std::string& v)
{
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
    return out;
}

unsigned to_unsigned(const std::string& key, const std::string& v)
{
    const auto u = to_uint(key, v);
    if (u > 0xffffffffu) throw ConfigError("'" + key + "' is out of range");
    return static_cast<unsigned>(u);
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("'" + key + "' expects true/false, got '" + v + "'");
}

std::string fmt(double d)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot write " + p.string());
    os << text;
    if (!os) throw IoError("failed writing " + p.string());
}

fs::path ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    return fs::path(dir);
}

}  // namespace

void apply_setting(SimConfig& c, std::string_view assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
    const std::string key = trim(assignment.substr(0, eq));
    const std::string v = trim(assignment.substr(eq + 1));
    if (key == "grid") {
        const auto x = v.find('x');
        if (x == std::string::npos) throw ConfigError("grid expects WxH, got '" + v + "'");
        c.width = to_unsigned(key, v.substr(0, x));
        c.height = to_unsigned(key, v.substr(x + 1));
    } else if (key == "module_scale") c.module_scale = to_double(key, v);
    else if (key == "preset") c.preset = v;
    else if (key == "lambda") c.lambda = to_double(key, v);
    else if (key == "max_delay") c.max_delay = to_unsigned(key, v);
    else if (key == "ranks") c.ranks = to_unsigned(key, v);
    else if (key == "transport") {
        try {
            c.transport = parse_transport(v);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    } else if (key == "duration_ms") c.duration_ms = to_double(key, v);
    else if (key == "transient_ms") c.transient_ms = to_double(key, v);
    else if (key == "seed") c.seed = to_uint(key, v);
    else if (key == "j_rescale") c.j_rescale = to_bool(key, v);
    else if (key == "imd_mm") c.imd_mm = to_double(key, v);
    else if (key == "output_dir") c.output_dir = v;
    else if (key == "spike_format") {
        if (v != "binary" && v != "csv") throw ConfigError("spike_format must be binary or csv");
        c.csv_spikes = v == "csv";
    } else if (key == "trace_traffic") c.trace_traffic = to_bool(key, v);
    else
        throw ConfigError("unknown configuration key '" + key + "'");
}

SimConfig parse_config(std::string_view text, SimConfig base)
{
    std::istringstream in{std::string(text)};
    unsigned lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        try {
            apply_setting(base, line);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

SimConfig load_config(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::string SimConfig::serialize() const
{
    std::ostringstream os;
    os << "grid = " << width << "x" << height << "\n"
       << "module_scale = " << fmt(module_scale) << "\n"
       << "preset = " << preset << "\n"
       << "lambda = " << fmt(lambda) << "\n"
       << "max_delay = " << max_delay << "\n"
       << "ranks = " << ranks << "\n"
       << "transport = " << transport_name(transport) << "\n"
       << "duration_ms = " << fmt(duration_ms) << "\n"
       << "transient_ms = " << fmt(transient_ms) << "\n"
       << "seed = " << seed << "\n"
       << "j_rescale = " << (j_rescale ? "true" : "false") << "\n"
       << "imd_mm = " << fmt(imd_mm) << "\n"
       << "output_dir = " << output_dir << "\n"
       << "spike_format = " << (csv_spikes ? "csv" : "binary") << "\n"
       << "trace_traffic = " << (trace_traffic ? "true" : "false") << "\n";
    return os.str();
}

void SimConfig::validate() const
{
    if (width == 0 || height == 0) throw ConfigError("grid dimensions must be at least 1x1");
    if (!(module_scale > 0.0 && module_scale <= 1.0)) throw ConfigError("module_scale must lie in (0, 1]");
    (void)dpsnn::preset(preset);  // throws with the list of known presets
    if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
    if (max_delay < 1 || max_delay > 255) throw ConfigError("max_delay must lie in [1, 255] ms");
    if (ranks == 0) throw ConfigError("ranks must be at least 1");
    if (!(duration_ms >= 0.0)) throw ConfigError("duration_ms must be >= 0");
    if (!(transient_ms >= 0.0)) throw ConfigError("transient_ms must be >= 0");
    if (!(imd_mm >= 0.0)) throw ConfigError("imd_mm must be >= 0");
    const NetworkSpec net = network();
    net.grid.validate();
    (void)partition(net.grid, ranks);
}

NetworkSpec SimConfig::network() const
{
    NetworkSpec net;
    net.grid.width = width;
    net.grid.height = height;
    net.grid.sizes = PopulationSizes::scaled(module_scale);
    net.grid.imd_mm = imd_mm;
    net.state = dpsnn::preset(preset);
    net.connectivity.lambda = lambda;
    net.connectivity.delays.max_delay = max_delay;
    net.j_scale = j_rescale ? 1.0 / module_scale : 1.0;
    net.seed = seed;
    return net;
}

SimulationOptions SimConfig::options() const
{
    return {transport, ranks, trace_traffic};
}

// ---------------------------------------------------------------------------

RunMetrics bench_metrics(const MetricInputs& in)
{
    if (!(in.wall_seconds > 0.0)) throw ConfigError("metrics need a positive wall time");
    RunMetrics m;
    m.sim_seconds = in.wall_seconds;
    m.neurons = in.neurons;
    m.spikes = in.spikes;
    m.recurrent_events = in.recurrent_events;
    m.external_events = in.external_events;
    m.recurrent_synapses = in.recurrent_synapses;
    m.peak_records = in.peak_records;
    if (in.neurons > 0)
        m.synapses_per_neuron =
            static_cast<double>(in.recurrent_synapses + in.external_synapses) / in.neurons;
    m.equivalent_events_per_s = m.synapses_per_neuron * in.spikes / in.wall_seconds;
    m.exact_events_per_s = static_cast<double>(in.recurrent_events + in.external_events) / in.wall_seconds;
    if (in.recurrent_synapses > 0)
        m.bytes_per_synapse = static_cast<double>(kSynapseRecordBytes) * in.peak_records / in.recurrent_synapses;
    return m;
}

RunMetrics run_metrics(const SimConfig& cfg, const RunResult& r)
{
    const NetworkSpec net = cfg.network();
    std::uint64_t ext = 0;
    const unsigned cols = net.grid.column_count();
    for (auto p : kPopulations) ext += std::uint64_t{net.state.synapses.external[index(p)].N} * net.grid.sizes[p] * cols;
    MetricInputs in{r.sim_seconds, r.neurons, r.window.spikes, r.window.recurrent_events,
                    r.window.external_events, r.recurrent_synapses, ext, r.peak_records};
    RunMetrics m;
    if (r.sim_seconds > 0.0) {
        m = bench_metrics(in);
    } else {
        in.wall_seconds = 1.0;
        m = bench_metrics(in);
        m.sim_seconds = 0.0;
        m.equivalent_events_per_s = m.exact_events_per_s = 0.0;
    }
    m.init_seconds = r.init_seconds;
    m.mean_rate_hz = r.mean_rate_hz();
    return m;
}

std::string metrics_json(const SimConfig& cfg, const RunMetrics& m)
{
    nlohmann::ordered_json j;
    j["init_seconds"] = m.init_seconds;
    j["sim_seconds"] = m.sim_seconds;
    j["neurons"] = m.neurons;
    j["spikes"] = m.spikes;
    j["mean_rate_hz"] = m.mean_rate_hz;
    j["recurrent_events"] = m.recurrent_events;
    j["external_events"] = m.external_events;
    j["recurrent_synapses"] = m.recurrent_synapses;
    j["synapses_per_neuron"] = m.synapses_per_neuron;
    j["equivalent_events_per_s"] = m.equivalent_events_per_s;
    j["exact_events_per_s"] = m.exact_events_per_s;
    j["peak_records"] = m.peak_records;
    j["bytes_per_synapse"] = m.bytes_per_synapse;
    j["bytes_per_synapse_note"] =
        "count based: 12 bytes x peak live synapse records / recurrent synapses; "
        "allocator and transport overheads excluded";
    j["config"] = cfg.serialize();
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

AnalysisSummary analyze(const SpikeLog& log, const GridSpec& grid, const AnalysisOptions& opt)
{
    AnalysisSummary s;
    double t1 = opt.t1_ms;
    if (t1 < 0.0) {
        t1 = opt.t0_ms;
        for (const auto& sp : log.spikes) t1 = std::max(t1, sp.time_ms);
        t1 = std::ceil(t1 / opt.bin_ms) * opt.bin_ms;
    }
    s.population = rates(log, grid, opt.bin_ms, Grouping::Population, opt.t0_ms, t1);
    s.bins = s.population.bins;
    for (unsigned g = 0; g < 3; ++g) {
        const auto series = s.population.series(g);
        double sum = 0.0;
        for (double v : series) sum += v;
        s.mean_rate_hz[g] = series.empty() ? 0.0 : sum / series.size();
    }
    const double fs = 1000.0 / opt.bin_ms;
    if (s.bins >= opt.psd_segment) {
        s.f_spectrum = psd_welch(s.population.series(0), fs, opt.psd_segment);
        s.peak_hz = dominant_frequency(s.f_spectrum, 0.0);
        s.low_fraction_4hz = low_frequency_fraction(s.f_spectrum, 4.0);
    }
    if (s.bins == 0) return s;

    const auto cols = column_rates(log, grid, opt.bin_ms, Population::F, opt.t0_ms, t1);
    s.log_mua_field.reserve(cols.rate.size());
    for (unsigned c = 0; c < cols.groups(); ++c) {
        const auto series = cols.series(c);
        if (std::all_of(series.begin(), series.end(), [](double v) { return v == 0.0; })) {
            // A silent column: no Down-state reference, leave it below any threshold.
            s.log_mua_field.insert(s.log_mua_field.end(), series.size(), -1e9);
            continue;
        }
        const auto l = log_mua(series, c, opt.mua);
        s.log_mua_field.insert(s.log_mua_field.end(), l.begin(), l.end());
    }
    std::vector<double> finite;
    for (double v : s.log_mua_field)
        if (v > -1e8) finite.push_back(v);
    s.mua = bimodality(finite);
    if (!s.mua.bimodal || grid.width < 3 || grid.height < 3) return s;

    s.waves = transitions(s.log_mua_field, grid.width, grid.height, s.bins, opt.bin_ms, opt.t0_ms,
                          s.mua, opt.transitions);
    double sum_imd = 0.0;
    std::size_t n = 0;
    for (const auto& w : s.waves) {
        try {
            s.speeds.push_back(wave_speed(w, opt.imd_mm));
        } catch (const AnalysisError&) {
            continue;
        }
        sum_imd += s.speeds.back().mean_imd_per_s;
        ++n;
    }
    if (n > 0) {
        s.mean_speed_imd_per_s = sum_imd / n;
        s.mean_speed_mm_per_s = s.mean_speed_imd_per_s * opt.imd_mm;
    }
    return s;
}

// ---------------------------------------------------------------------------

int cmd_build(const SimConfig& cfg, bool dry_run, std::ostream& out)
{
    cfg.validate();
    const NetworkSpec net = cfg.network();
    const auto dir = ensure_dir(cfg.output_dir);
    nlohmann::ordered_json j;
    std::uint64_t ext = 0;
    for (auto p : kPopulations)
        ext += std::uint64_t{net.state.synapses.external[index(p)].N} * net.grid.sizes[p] *
               net.grid.column_count();
    j["neurons"] = net.grid.neuron_count();
    j["external_synapses"] = ext;
    if (dry_run) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto n = count_network(net, cfg.ranks);
        j["mode"] = "count-only";
        j["recurrent_synapses"] = n;
        j["total_synapses"] = n + ext;
        j["count_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } else {
        const auto t0 = std::chrono::steady_clock::now();
        Simulation sim(net, cfg.options());
        sim.build();
        const double init_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto& b = sim.built_network();
        MetricInputs in{1.0, net.grid.neuron_count(), 0, 0, 0, b.recurrent_synapses, ext, b.peak_records};
        const auto m = bench_metrics(in);
        j["mode"] = "build";
        j["init_seconds"] = init_s;
        j["recurrent_synapses"] = b.recurrent_synapses;
        j["total_synapses"] = b.recurrent_synapses + ext;
        j["peak_records"] = b.peak_records;
        j["bytes_per_synapse"] = m.bytes_per_synapse;
        j["construction_messages"] = b.construction_messages;
        j["partition"] = b.partition.dump();
    }
    j["config"] = cfg.serialize();
    write_file(dir / "build.json", j.dump(2) + "\n");
    out << j.dump(2) << "\n";
    return 0;
}

int cmd_run(const SimConfig& cfg, std::ostream& out)
{
    cfg.validate();
    const auto dir = ensure_dir(cfg.output_dir);
    Simulation sim(cfg.network(), cfg.options());
    sim.build();
    RunResult r = sim.run(cfg.duration_ms, cfg.transient_ms);
    r.spikes.provenance = cfg.serialize();
    const auto spikes_path = dir / (cfg.csv_spikes ? "spikes.csv" : "spikes.bin");
    save_spike_log(spikes_path.string(), r.spikes, cfg.csv_spikes);
    write_file(dir / "config.txt", cfg.serialize());
    const auto m = run_metrics(cfg, r);
    write_file(dir / "metrics.json", metrics_json(cfg, m));
    if (cfg.trace_traffic) {
        std::ostringstream os;
        os << "step,src,dst,counter,bytes\n";
        for (const auto& row : r.traffic)
            os << row.step << ',' << row.src << ',' << row.dst << ',' << row.counter << ',' << row.bytes << '\n';
        write_file(dir / "traffic.csv", os.str());
    }
    char line[256];
    std::snprintf(line, sizeof line,
                  "neurons %llu  synapses %llu  spikes %llu  rate %.3f Hz  init %.3f s  sim %.3f s\n",
                  static_cast<unsigned long long>(r.neurons),
                  static_cast<unsigned long long>(r.recurrent_synapses),
                  static_cast<unsigned long long>(r.spikes.spikes.size()), m.mean_rate_hz,
                  m.init_seconds, m.sim_seconds);
    out << line << "spike log: " << spikes_path.string() << "\n";
    return 0;
}

int cmd_analyze(const std::string& spike_log, const SimConfig* override_cfg, AnalysisOptions opt,
                const std::string& output_dir, std::ostream& out)
{
    const SpikeLog log = load_spike_log(spike_log);
    SimConfig cfg = override_cfg ? *override_cfg : parse_config(log.provenance);
    cfg.validate();
    const NetworkSpec net = cfg.network();
    if (opt.t1_ms < 0.0 && cfg.duration_ms > 0.0) opt.t1_ms = cfg.duration_ms;
    if (opt.t0_ms == 0.0) opt.t0_ms = std::min(cfg.transient_ms, std::max(0.0, opt.t1_ms));
    opt.imd_mm = cfg.imd_mm;
    const auto s = analyze(log, net.grid, opt);
    const auto dir = ensure_dir(output_dir);

    std::ostringstream rates_csv;
    rates_csv << "t_ms,F_hz,B_hz,I_hz\n";
    for (std::size_t k = 0; k < s.bins; ++k)
        rates_csv << s.population.bin_center_ms(k) << ',' << s.population.series(0)[k] << ','
                  << s.population.series(1)[k] << ',' << s.population.series(2)[k] << '\n';
    write_file(dir / "rates.csv", rates_csv.str());

    std::ostringstream psd;
    psd << "freq_hz,power\n";
    for (std::size_t k = 0; k < s.f_spectrum.power.size(); ++k)
        psd << s.f_spectrum.freq_hz[k] << ',' << s.f_spectrum.power[k] << '\n';
    write_file(dir / "psd.csv", psd.str());

    std::ostringstream tf, vf;
    tf << "wave,x,y,T_ms\n";
    vf << "wave,x,y,V_imd_per_s\n";
    for (std::size_t w = 0; w < s.waves.size(); ++w)
        for (unsigned y = 0; y < net.grid.height; ++y)
            for (unsigned x = 0; x < net.grid.width; ++x) {
                tf << w << ',' << x << ',' << y << ',' << s.waves[w].at(x, y) << '\n';
                if (w < s.speeds.size())
                    vf << w << ',' << x << ',' << y << ',' << s.speeds[w].V[std::size_t{y} * net.grid.width + x] << '\n';
            }
    write_file(dir / "transitions.csv", tf.str());
    write_file(dir / "speeds.csv", vf.str());

    nlohmann::ordered_json j;
    j["window_ms"] = {opt.t0_ms, opt.t1_ms};
    j["mean_rate_hz"] = {{"F", s.mean_rate_hz[0]}, {"B", s.mean_rate_hz[1]}, {"I", s.mean_rate_hz[2]}};
    j["psd_peak_hz"] = s.peak_hz;
    j["low_frequency_fraction_4hz"] = s.low_fraction_4hz;
    j["log_mua"] = {{"bimodal", s.mua.bimodal},
                    {"ashman_d", s.mua.separation},
                    {"low_mode", s.mua.low_mode},
                    {"high_mode", s.mua.high_mode},
                    {"threshold", s.mua.threshold}};
    j["waves"] = s.waves.size();
    j["mean_speed_imd_per_s"] = s.mean_speed_imd_per_s;
    j["mean_speed_mm_per_s"] = s.mean_speed_mm_per_s;
    if (!s.mua.bimodal) j["note"] = "no SW structure detected: transitions and speeds skipped";
    j["config"] = cfg.serialize();
    write_file(dir / "analysis.json", j.dump(2) + "\n");
    out << j.dump(2) << "\n";
    return 0;
}

int cmd_meanfield(const SimConfig& cfg, double tau_E, double tau_I, double trajectory_ms, std::ostream& out)
{
    MeanFieldSystem sys = MeanFieldSystem::from_preset(preset(cfg.preset));
    sys.sizes = PopulationSizes::scaled(cfg.module_scale);
    sys.j_scale = cfg.j_rescale ? 1.0 / cfg.module_scale : 1.0;
    sys.tau_E = tau_E;
    sys.tau_I = tau_I;
    const auto dir = ensure_dir(cfg.output_dir);

    const auto fps = fixed_points(sys);
    double c_max = 1.0;
    for (const auto& f : fps) c_max = std::max(c_max, 3.0 * f.state.c[0]);
    std::vector<double> cs;
    for (int k = 0; k <= 60; ++k) cs.push_back(c_max * k / 60.0);
    const auto nc = nu_nullcline(sys, cs);

    std::ostringstream ncsv, ccsv, fcsv;
    ncsv << "c,nu_F_hz,branch\n";
    for (const auto& p : nc) ncsv << p.c << ',' << p.nu_F << ',' << p.branch << '\n';
    ccsv << "nu_F_hz,c\n";
    const NeuronParams& exc = sys.preset.excitatory;
    const double nu_top = exc.adaptation ? c_max * 1000.0 / (exc.adaptation->alpha_c * exc.adaptation->tau_c) : 50.0;
    for (int k = 0; k <= 60; ++k) {
        const double nu = nu_top * k / 60.0;
        ccsv << nu << ',' << c_nullcline(exc, nu) << '\n';
    }
    fcsv << "nu_F_hz,nu_B_hz,nu_I_hz,c_F,c_B,stability,residual,eigenvalues\n";
    for (const auto& f : fps) {
        fcsv << f.state.nu[0] << ',' << f.state.nu[1] << ',' << f.state.nu[2] << ',' << f.state.c[0]
             << ',' << f.state.c[1] << ',' << stability_name(f.stability) << ',' << f.residual << ',';
        for (std::size_t i = 0; i < f.eigenvalues.size(); ++i)
            fcsv << (i ? ";" : "") << f.eigenvalues[i].real() << (f.eigenvalues[i].imag() >= 0 ? "+" : "")
                 << f.eigenvalues[i].imag() << "i";
        fcsv << '\n';
        out << "fixed point nu=(" << f.state.nu[0] << ", " << f.state.nu[1] << ", " << f.state.nu[2]
            << ") Hz  c=(" << f.state.c[0] << ", " << f.state.c[1] << ")  " << stability_name(f.stability)
            << "\n";
    }
    write_file(dir / "nu_nullcline.csv", ncsv.str());
    write_file(dir / "c_nullcline.csv", ccsv.str());
    write_file(dir / "fixed_points.csv", fcsv.str());

    if (trajectory_ms > 0.0) {
        MeanFieldState start;
        if (!fps.empty()) {
            start = fps.front().state;
            for (auto& v : start.nu) v *= 1.5;
        }
        const auto traj = integrate_mf(sys, start, trajectory_ms, 0.1, 10);
        std::ostringstream t;
        t << "t_ms,nu_F,nu_B,nu_I,c_F,c_B\n";
        for (const auto& p : traj)
            t << p.t_ms << ',' << p.state.nu[0] << ',' << p.state.nu[1] << ',' << p.state.nu[2] << ','
              << p.state.c[0] << ',' << p.state.c[1] << '\n';
        write_file(dir / "trajectory.csv", t.str());
    }
    if (fps.empty()) out << "no fixed point found\n";
    return 0;
}

int cmd_bench(const SimConfig& cfg, const std::vector<unsigned>& ranks,
              const std::vector<unsigned>& grid_sizes, std::ostream& out)
{
    const auto dir = ensure_dir(cfg.output_dir);
    std::vector<std::pair<unsigned, unsigned>> grids;
    if (grid_sizes.empty()) grids.push_back({cfg.width, cfg.height});
    for (unsigned g : grid_sizes) grids.push_back({g, g});
    std::vector<unsigned> rs = ranks.empty() ? std::vector<unsigned>{cfg.ranks} : ranks;

    std::ostringstream csv;
    csv << "grid,ranks,transport,neurons,recurrent_synapses,init_s,sim_s,spikes,"
           "equivalent_events_per_s,exact_events_per_s,bytes_per_synapse\n";
    out << csv.str();
    for (const auto& [w, h] : grids)
        for (unsigned r : rs) {
            SimConfig c = cfg;
            c.width = w;
            c.height = h;
            c.ranks = r;
            c.validate();
            Simulation sim(c.network(), c.options());
            sim.build();
            const RunResult res = sim.run(c.duration_ms, c.transient_ms);
            const auto m = run_metrics(c, res);
            std::ostringstream row;
            row << w << 'x' << h << ',' << r << ',' << transport_name(c.transport) << ',' << m.neurons << ','
                << m.recurrent_synapses << ',' << m.init_seconds << ',' << m.sim_seconds << ',' << m.spikes
                << ',' << m.equivalent_events_per_s << ',' << m.exact_events_per_s << ','
                << m.bytes_per_synapse << '\n';
            csv << row.str();
            out << row.str() << std::flush;
        }
    write_file(dir / "scaling.csv", csv.str());
    return 0;
}

}  // namespace dpsnn
