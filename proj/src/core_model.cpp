#include "dpsnn/core_model.hpp"

#include "dpsnn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace dpsnn {

NeuronId encode_neuron_id(unsigned rank, unsigned local_index, unsigned bits_for_local)
{
    if (bits_for_local == 0 || bits_for_local >= 32)
        throw EncodingError("bits_for_local must be in [1, 31], got " +
                            std::to_string(bits_for_local));
    const std::uint64_t local_limit = std::uint64_t{1} << bits_for_local;
    const std::uint64_t rank_limit = std::uint64_t{1} << (32 - bits_for_local);
    if (local_index >= local_limit)
        throw EncodingError("local index " + std::to_string(local_index) +
                            " does not fit in " + std::to_string(bits_for_local) + " bits");
    if (rank >= rank_limit)
        throw EncodingError("rank " + std::to_string(rank) + " does not fit in " +
                            std::to_string(32 - bits_for_local) + " bits");
    return NeuronId{static_cast<std::uint32_t>((std::uint64_t{rank} << bits_for_local) |
                                               local_index)};
}

DecodedNeuronId decode_neuron_id(NeuronId id, unsigned bits_for_local)
{
    const std::uint32_t mask = (std::uint32_t{1} << bits_for_local) - 1;
    return {id.value >> bits_for_local, id.value & mask};
}

std::string_view population_name(Population p)
{
    switch (p) {
        case Population::F: return "F";
        case Population::B: return "B";
        case Population::I: return "I";
    }
    return "?";
}

PopulationSizes PopulationSizes::scaled(double module_scale)
{
    if (!(module_scale > 0.0) || module_scale > 1.0)
        throw ConfigError("module_scale must lie in (0, 1], got " + std::to_string(module_scale));
    const auto scale = [module_scale](unsigned k) {
        return std::max(1u, static_cast<unsigned>(std::lround(k * module_scale)));
    };
    const PopulationSizes full;
    return {scale(full.f), scale(full.b), scale(full.i)};
}

std::int16_t quantize_weight(double weight_mv)
{
    if (!std::isfinite(weight_mv) || std::fabs(weight_mv) >= 128.0)
        throw EncodingError("weight out of range (|w| < 128 mV): " + std::to_string(weight_mv));
    const long code = std::lround(weight_mv * kWeightScale);
    if (code > 32767 || code < -32768)
        throw EncodingError("weight code overflow for " + std::to_string(weight_mv));
    return static_cast<std::int16_t>(code);
}

namespace {

void put_u32(std::uint8_t* p, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* p)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{p[i]} << (8 * i);
    return v;
}

}  // namespace

void serialize_record(const SynapseRecord& r, std::span<std::uint8_t, kSynapseRecordBytes> out)
{
    put_u32(out.data(), r.source.value);
    put_u32(out.data() + 4, r.target.value);
    const auto w = static_cast<std::uint16_t>(r.weight);
    out[8] = static_cast<std::uint8_t>(w & 0xff);
    out[9] = static_cast<std::uint8_t>(w >> 8);
    out[10] = r.delay;
    out[11] = r.kind;
}

SynapseRecord deserialize_record(std::span<const std::uint8_t, kSynapseRecordBytes> in)
{
    SynapseRecord r;
    r.source = NeuronId{get_u32(in.data())};
    r.target = NeuronId{get_u32(in.data() + 4)};
    r.weight = static_cast<std::int16_t>(static_cast<std::uint16_t>(in[8] | (in[9] << 8)));
    r.delay = in[10];
    r.kind = in[11];
    return r;
}

void write_records(std::ostream& os, std::span<const SynapseRecord> records)
{
    std::array<std::uint8_t, kSynapseRecordBytes> buf{};
    for (const auto& r : records) {
        serialize_record(r, buf);
        os.write(reinterpret_cast<const char*>(buf.data()), buf.size());
    }
    if (!os) throw IoError("failed writing synapse records");
}

std::vector<SynapseRecord> read_records(std::istream& is)
{
    std::vector<SynapseRecord> out;
    std::array<std::uint8_t, kSynapseRecordBytes> buf{};
    while (is.read(reinterpret_cast<char*>(buf.data()), buf.size())) out.push_back(deserialize_record(buf));
    if (is.gcount() != 0)
        throw IoError("truncated synapse record stream (" + std::to_string(is.gcount()) +
                      " trailing bytes)");
    return out;
}

double SynapticParams::applied(Population target, Population source) const
{
    const double j = mean(target, source);
    return source == Population::I ? -std::fabs(j) : j;
}

double SynapticParams::spread(Population target, Population source) const
{
    return relative_spread * std::fabs(mean(target, source));
}

double SynapticParams::external_spread(Population target) const
{
    return relative_spread * std::fabs(external[index(target)].J);
}

namespace {

NeuronParams excitatory_neuron()
{
    NeuronParams p;
    p.tau_m = 20.0;
    p.C_m = 1.0;
    p.E = 0.0;
    p.V_theta = 20.0;
    p.V_r = 15.0;
    p.tau_arp = 2.0;
    p.adaptation = Adaptation{1.0, 1000.0, 0.02};
    return p;
}

NeuronParams inhibitory_neuron()
{
    NeuronParams p;
    p.tau_m = 10.0;
    p.C_m = 1.0;
    p.E = 0.0;
    p.V_theta = 20.0;
    p.V_r = 15.0;
    p.tau_arp = 1.0;
    return p;
}

// Row order: J_{F,F} J_{B,F} J_{I,F} J_{F,B} J_{B,B} J_{I,B} J_{F,I} J_{B,I} J_{I,I}
struct TableRow {
    const char* name;
    std::array<double, 9> recurrent;
    std::array<double, 3> j_ext;
    std::array<double, 3> nu_ext;
    std::array<unsigned, 3> n_ext;
};

constexpr std::array<TableRow, 3> kTable{{
    {"SW-3.1Hz",
     {0.600, 0.382, 0.560, 0.382, 0.429, 0.560, 3.17, 3.17, 3.0},
     {0.832, 0.858, 1.120},
     {3.17, 3.17, 3.0},
     {400, 400, 400}},
    {"AW-2.8Hz",
     {0.515, 0.412, 0.560, 0.412, 0.429, 0.560, -1.5, -1.5, -1.5},
     {0.858, 0.858, 1.120},
     {3.17, 3.17, 3.0},
     {400, 400, 400}},
    {"AW-8.8Hz",
     {0.515, 0.412, 0.560, 0.412, 0.429, 0.560, -1.5, -1.5, -1.5},
     {1.416, 1.416, 1.120},
     {3.17, 3.17, 3.0},
     {400, 400, 400}},
}};

}  // namespace

std::vector<std::string> preset_names()
{
    std::vector<std::string> names;
    for (const auto& row : kTable) names.emplace_back(row.name);
    return names;
}

StatePreset preset(std::string_view name)
{
    for (const auto& row : kTable) {
        if (name != row.name) continue;
        StatePreset p;
        p.name = row.name;
        p.excitatory = excitatory_neuron();
        p.inhibitory = inhibitory_neuron();
        // Columns of the table iterate the target fastest within each source.
        for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t t = 0; t < 3; ++t) p.synapses.J[t][s] = row.recurrent[3 * s + t];
        for (std::size_t t = 0; t < 3; ++t)
            p.synapses.external[t] = ExternalDrive{row.j_ext[t], row.nu_ext[t], row.n_ext[t]};
        return p;
    }
    std::string msg = "unknown preset '" + std::string(name) + "'; available:";
    for (const auto& n : preset_names()) msg += " " + n;
    throw ConfigError(msg);
}

std::string format_preset(const StatePreset& p)
{
    std::ostringstream os;
    char buf[64];
    const auto num = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.3f", v);
        return std::string(buf);
    };
    os << "preset " << p.name << "\n";
    for (auto t : kPopulations)
        for (auto s : kPopulations)
            os << "J " << population_name(t) << " " << population_name(s) << " "
               << num(p.synapses.mean(t, s)) << "\n";
    for (auto t : kPopulations) {
        const auto& e = p.synapses.external[index(t)];
        os << "ext " << population_name(t) << " J=" << num(e.J) << " nu=" << num(e.nu)
           << " N=" << e.N << "\n";
    }
    os << "spread " << num(p.synapses.relative_spread) << "\n";
    for (auto [label, n] : {std::pair{"exc", &p.excitatory}, std::pair{"inh", &p.inhibitory}}) {
        os << "neuron " << label << " tau_m=" << num(n->tau_m) << " C_m=" << num(n->C_m)
           << " E=" << num(n->E) << " V_theta=" << num(n->V_theta) << " V_r=" << num(n->V_r)
           << " tau_arp=" << num(n->tau_arp);
        if (n->adaptation)
            os << " alpha_c=" << num(n->adaptation->alpha_c)
               << " tau_c=" << num(n->adaptation->tau_c) << " g_c=" << num(n->adaptation->g_c);
        os << "\n";
    }
    return os.str();
}

}  // namespace dpsnn
