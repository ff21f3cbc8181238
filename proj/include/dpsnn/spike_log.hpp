#pragma once

// SpikeLog files: a short text header carrying the producing configuration,
// followed by little-endian (u32 global neuron id, f64 time ms) records. A
// CSV rendering with '#'-prefixed header lines is also supported.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dpsnn {

struct SpikeRecord {
    std::uint32_t neuron = 0;  // global id
    double time_ms = 0.0;
    friend bool operator==(const SpikeRecord&, const SpikeRecord&) = default;
};

struct SpikeLog {
    std::vector<SpikeRecord> spikes;
    std::string provenance;  // key=value lines of the producing configuration

    /// Sort by time, then neuron id.
    void sort();
};

inline constexpr std::size_t kSpikeRecordBytes = 12;

void write_spike_log_binary(std::ostream& os, const SpikeLog& log);
void write_spike_log_csv(std::ostream& os, const SpikeLog& log);
/// Reads either format (detected from the first bytes).
SpikeLog read_spike_log(std::istream& is);

void save_spike_log(const std::string& path, const SpikeLog& log, bool csv);
SpikeLog load_spike_log(const std::string& path);

}  // namespace dpsnn
