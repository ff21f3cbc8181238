#include "dpsnn/spike_log.hpp"

#include "dpsnn/errors.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dpsnn {

namespace {

constexpr std::string_view kMagic = "DPSNN-SPIKES 1";

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

void put_f64(std::uint8_t* p, double d)
{
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

double get_f64(const std::uint8_t* p)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{p[i]} << (8 * i);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

void write_provenance(std::ostream& os, const std::string& prov)
{
    std::istringstream in(prov);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) os << "# " << line << '\n';
}

}  // namespace

void SpikeLog::sort()
{
    std::sort(spikes.begin(), spikes.end(), [](const SpikeRecord& a, const SpikeRecord& b) {
        return a.time_ms != b.time_ms ? a.time_ms < b.time_ms : a.neuron < b.neuron;
    });
}

void write_spike_log_binary(std::ostream& os, const SpikeLog& log)
{
    os << kMagic << '\n';
    write_provenance(os, log.provenance);
    os << "records " << log.spikes.size() << '\n';
    std::array<std::uint8_t, kSpikeRecordBytes> buf{};
    for (const auto& s : log.spikes) {
        put_u32(buf.data(), s.neuron);
        put_f64(buf.data() + 4, s.time_ms);
        os.write(reinterpret_cast<const char*>(buf.data()), buf.size());
    }
    if (!os) throw IoError("failed writing spike log");
}

void write_spike_log_csv(std::ostream& os, const SpikeLog& log)
{
    write_provenance(os, log.provenance);
    os << "neuron,time_ms\n";
    char line[64];
    for (const auto& s : log.spikes) {
        std::snprintf(line, sizeof line, "%u,%.17g\n", s.neuron, s.time_ms);
        os << line;
    }
    if (!os) throw IoError("failed writing spike log");
}

SpikeLog read_spike_log(std::istream& is)
{
    SpikeLog log;
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty spike log");
    if (line == kMagic) {
        std::size_t n = 0;
        bool have_count = false;
        while (std::getline(is, line)) {
            if (line.rfind("# ", 0) == 0) {
                log.provenance += line.substr(2) + '\n';
            } else if (line.rfind("records ", 0) == 0) {
                n = std::stoull(line.substr(8));
                have_count = true;
                break;
            } else {
                throw IoError("malformed spike log header line: " + line);
            }
        }
        if (!have_count) throw IoError("spike log header has no record count");
        log.spikes.resize(n);
        std::array<std::uint8_t, kSpikeRecordBytes> buf{};
        for (auto& s : log.spikes) {
            if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size()))
                throw IoError("truncated spike log");
            s.neuron = get_u32(buf.data());
            s.time_ms = get_f64(buf.data() + 4);
        }
        return log;
    }
    // CSV
    bool header_seen = false;
    do {
        if (line.empty()) continue;
        if (line[0] == '#') {
            log.provenance += line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1) + '\n';
            continue;
        }
        if (!header_seen) {
            if (line != "neuron,time_ms") throw IoError("unexpected spike CSV header: " + line);
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw IoError("malformed spike CSV row: " + line);
        try {
            log.spikes.push_back({static_cast<std::uint32_t>(std::stoul(line.substr(0, comma))),
                                  std::stod(line.substr(comma + 1))});
        } catch (const std::logic_error&) {
            throw IoError("malformed spike CSV row: " + line);
        }
    } while (std::getline(is, line));
    if (!header_seen) throw IoError("spike CSV has no header");
    return log;
}

void save_spike_log(const std::string& path, const SpikeLog& log, bool csv)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    if (csv)
        write_spike_log_csv(os, log);
    else
        write_spike_log_binary(os, log);
}

SpikeLog load_spike_log(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    return read_spike_log(is);
}

}  // namespace dpsnn
