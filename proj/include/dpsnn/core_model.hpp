#pragma once

// Domain types shared by every stage of the simulator: neuron identifiers,
// the packed static synapse, neuron/synapse parameter sets and the three
// dynamic-state presets.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dpsnn {

// ---------------------------------------------------------------------------
// Neuron identifiers
// ---------------------------------------------------------------------------

/// Packed 32-bit neuron identifier: the hosting rank lives in the high bits,
/// the rank-local index in the low `bits_for_local` bits. Ordering by the
/// packed value equals lexicographic (rank, local) ordering.
struct NeuronId {
    std::uint32_t value = 0;

    friend constexpr auto operator<=>(NeuronId, NeuronId) = default;
};

NeuronId encode_neuron_id(unsigned rank, unsigned local_index, unsigned bits_for_local);

struct DecodedNeuronId {
    unsigned rank;
    unsigned local_index;
    friend bool operator==(const DecodedNeuronId&, const DecodedNeuronId&) = default;
};

DecodedNeuronId decode_neuron_id(NeuronId id, unsigned bits_for_local);

// ---------------------------------------------------------------------------
// Populations
// ---------------------------------------------------------------------------

enum class Population : std::uint8_t { F = 0, B = 1, I = 2 };

inline constexpr std::array<Population, 3> kPopulations{Population::F, Population::B,
                                                        Population::I};
inline constexpr std::size_t kPopulationCount = 3;

constexpr std::size_t index(Population p) { return static_cast<std::size_t>(p); }
constexpr bool is_excitatory(Population p) { return p != Population::I; }
std::string_view population_name(Population p);

/// Per-column population sizes. Full scale is 250/750/250.
struct PopulationSizes {
    unsigned f = 250;
    unsigned b = 750;
    unsigned i = 250;

    unsigned operator[](Population p) const {
        switch (p) {
            case Population::F: return f;
            case Population::B: return b;
            case Population::I: return i;
        }
        return 0;
    }
    unsigned total() const { return f + b + i; }
    /// Offset of the first neuron of `p` inside a column (F block, B block, I block).
    unsigned offset(Population p) const {
        switch (p) {
            case Population::F: return 0;
            case Population::B: return f;
            case Population::I: return f + b;
        }
        return 0;
    }

    static PopulationSizes full_scale() { return {}; }
    /// Multiplies every size by `module_scale` (rounded, at least 1).
    static PopulationSizes scaled(double module_scale);

    friend bool operator==(const PopulationSizes&, const PopulationSizes&) = default;
};

// ---------------------------------------------------------------------------
// Synapse record (12 bytes) and weight fixed point
// ---------------------------------------------------------------------------

/// Fixed-point weight scale: 1/256 mV per LSB.
inline constexpr double kWeightScale = 256.0;

std::int16_t quantize_weight(double weight_mv);
constexpr double dequantize_weight(std::int16_t code) { return code / kWeightScale; }

/// Static synapse, laid out field by field as it is serialized: source id,
/// target id, weight code, delay (ms), kind tag.
struct SynapseRecord {
    NeuronId source;
    NeuronId target;
    std::int16_t weight = 0;
    std::uint8_t delay = 1;
    std::uint8_t kind = 0;

    double weight_mv() const { return dequantize_weight(weight); }
    friend bool operator==(const SynapseRecord&, const SynapseRecord&) = default;
};
static_assert(sizeof(SynapseRecord) == 12);

/// Optional plastic extension (last spike time, derivative); never allocated
/// by the simulator, present so that the 20-byte plastic layout is expressible.
struct PlasticExtension {
    float last_spike_ms = 0.0f;
    float derivative = 0.0f;
};
static_assert(sizeof(PlasticExtension) == 8);

inline constexpr std::size_t kSynapseRecordBytes = 12;

void serialize_record(const SynapseRecord& r, std::span<std::uint8_t, kSynapseRecordBytes> out);
SynapseRecord deserialize_record(std::span<const std::uint8_t, kSynapseRecordBytes> in);

void write_records(std::ostream& os, std::span<const SynapseRecord> records);
std::vector<SynapseRecord> read_records(std::istream& is);

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct Adaptation {
    double alpha_c = 1.0;   // fatigue increment per spike
    double tau_c = 1000.0;  // ms
    double g_c = 0.02;      // nS
};

struct NeuronParams {
    double tau_m = 20.0;     // ms
    double C_m = 1.0;        // pF
    double E = 0.0;          // mV
    double V_theta = 20.0;   // mV
    double V_r = 15.0;       // mV
    double tau_arp = 2.0;    // ms
    std::optional<Adaptation> adaptation;

    /// g_c / C_m, zero without adaptation.
    double adaptation_drive() const {
        return adaptation ? adaptation->g_c / C_m : 0.0;
    }
};

struct ExternalDrive {
    double J = 0.0;   // mV
    double nu = 0.0;  // Hz
    unsigned N = 0;
};

struct SynapticParams {
    /// Mean efficacy J[target][source] in mV, as listed in the preset tables.
    std::array<std::array<double, 3>, 3> J{};
    double relative_spread = 0.25;
    std::array<ExternalDrive, 3> external{};

    double mean(Population target, Population source) const {
        return J[index(target)][index(source)];
    }
    /// Efficacy actually applied to the membrane: inhibitory sources always
    /// hyperpolarize by |J| whatever sign the table carries.
    double applied(Population target, Population source) const;
    double spread(Population target, Population source) const;
    double external_spread(Population target) const;
};

struct StatePreset {
    std::string name;
    NeuronParams excitatory;
    NeuronParams inhibitory;
    SynapticParams synapses;

    const NeuronParams& neuron(Population p) const {
        return is_excitatory(p) ? excitatory : inhibitory;
    }
};

std::vector<std::string> preset_names();
StatePreset preset(std::string_view name);

/// Canonical text rendering of a preset, compared byte-for-byte against the
/// checked-in golden tables.
std::string format_preset(const StatePreset& p);

}  // namespace dpsnn
