#pragma once

// Exponential-kernel network generation (source-driven, per rank), the
// construction handshake and the double-ordered synaptic matrix.

#include "dpsnn/comm.hpp"
#include "dpsnn/core_model.hpp"
#include "dpsnn/grid_topology.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dpsnn {

struct DelaySpec {
    /// Delays are uniform integers in [1, max_delay] ms; 1 means all 1 ms.
    unsigned max_delay = 1;
};

struct ConnectivityParams {
    double lambda = 0.4;                 // imd
    double in_degree_fraction = 0.9;     // M_s = fraction * K_s
    double inhibitory_probability = 0.9; // within-column only
    DelaySpec delays;
    /// Column pairs whose kernel value exp(-d/lambda) falls below this are
    /// never connected; the normalization uses the same support.
    double kernel_floor = 1e-9;
};

/// Everything needed to generate one network deterministically.
struct NetworkSpec {
    GridSpec grid;
    StatePreset state;
    ConnectivityParams connectivity;
    /// Divides every J by module_scale (input moments matched to full scale).
    double j_scale = 1.0;
    std::uint64_t seed = 1;
};

/// C0 * exp(-d / lambda), clamped to [0, 1] (a warning goes to std::clog).
double kernel_prob(double d, double lambda, double c0);

/// C0 for a target column so that the kernel-weighted sum over all source
/// columns of the (open-boundary) grid equals `fraction`.
double normalize_c0(const GridSpec& grid, double lambda, Column target, double fraction = 0.9,
                    double kernel_floor = 1e-9);

/// Precomputed kernel support and per-target-column C0 for one grid.
class ConnectivityKernel {
public:
    ConnectivityKernel(const GridSpec& grid, const ConnectivityParams& params);

    double c0(unsigned target_column) const { return c0_.at(target_column); }
    /// Connection probability from any excitatory neuron of `source` to any
    /// neuron of `target`.
    double probability(Column source, Column target) const;
    /// Target columns reachable from `source` (ascending column index).
    std::vector<unsigned> reachable(Column source) const;
    /// Columns other than `source` where one excitatory neuron of `source`
    /// is expected to make at least `threshold` synapses.
    unsigned reach_count(Column source, double threshold) const;

    double support_radius() const { return radius_; }

private:
    GridSpec grid_;
    ConnectivityParams params_;
    double radius_;
    std::vector<double> c0_;
};

/// Synapses generated by one rank, grouped by the rank hosting the target.
struct OutgoingSynapses {
    std::vector<std::vector<SynapseRecord>> by_target_rank;
    /// CSR of target ranks per local source neuron (ascending, no duplicates).
    std::vector<std::uint32_t> target_rank_offsets;
    std::vector<std::uint32_t> target_ranks;

    std::span<const std::uint32_t> targets_of(unsigned local) const
    {
        return {target_ranks.data() + target_rank_offsets[local],
                target_ranks.data() + target_rank_offsets[local + 1]};
    }
    std::uint64_t record_count() const;
};

/// Source-driven generation for every neuron hosted on `rank`.
///
/// For each source neuron and reachable (target column, target population)
/// pair a keyed stream (seed, "conn", source global id, column, population)
/// draws count ~ Binomial(K_t, p) and then that many distinct targets; an
/// autapse draw is replaced by another unchosen neuron (count capped at
/// K_t - 1). Weights ~ Gaussian(J, 0.25|J|) truncated at zero so that no synapse
/// changes sign; inhibitory sources are always negative.
OutgoingSynapses generate_outgoing(unsigned rank, const NetworkSpec& net, const PartitionMap& part,
                                   const ConnectivityKernel& kernel);

/// Draws only the synapse counts of generate_outgoing (same streams, same
/// caps) and returns them per target rank; nothing is stored.
std::vector<std::uint64_t> count_outgoing(unsigned rank, const NetworkSpec& net,
                                          const PartitionMap& part,
                                          const ConnectivityKernel& kernel);

/// Double-ordered incoming synapse list of one rank: grouped by delay, then
/// sorted by presynaptic id (then target) inside each group.
class SynapticMatrix {
public:
    struct DelayGroup {
        unsigned delay;
        std::size_t begin;
        std::size_t end;
    };

    SynapticMatrix() = default;
    /// Takes ownership of `records`; every target must live on `rank`.
    SynapticMatrix(std::vector<SynapseRecord> records, unsigned rank, unsigned bits_for_local);

    std::span<const SynapseRecord> records() const { return records_; }
    std::span<const DelayGroup> groups() const { return groups_; }
    std::span<const SynapseRecord> group(const DelayGroup& g) const
    {
        return std::span(records_).subspan(g.begin, g.end - g.begin);
    }
    std::size_t size() const { return records_.size(); }
    unsigned max_delay() const { return groups_.empty() ? 0 : groups_.back().delay; }

    /// Synapses of `source` within the delay group (binary search).
    std::span<const SynapseRecord> find(const DelayGroup& g, NeuronId source) const;

private:
    std::vector<SynapseRecord> records_;
    std::vector<DelayGroup> groups_;
};

SynapticMatrix build_matrix(std::vector<SynapseRecord> records, unsigned rank,
                            unsigned bits_for_local);

/// Result of the construction phase on every rank.
struct BuiltNetwork {
    PartitionMap partition;
    std::vector<SynapticMatrix> matrices;           // per rank
    std::vector<OutgoingSynapses> axons;            // per rank; records released
    std::vector<RankSubsets> subsets;               // per rank
    std::vector<std::vector<std::uint64_t>> incoming_counts;  // [dst][src]
    std::uint64_t recurrent_synapses = 0;
    std::uint64_t peak_records = 0;
    std::uint64_t construction_messages = 0;
};

/// Generate, exchange counts, exchange records and build every rank's
/// matrix. A single rank moves its records in memory (no messages).
BuiltNetwork build_network(const NetworkSpec& net, Transport& transport);

/// Count-only dry run: total recurrent synapses without storing any.
std::uint64_t count_network(const NetworkSpec& net, unsigned ranks);

}  // namespace dpsnn
