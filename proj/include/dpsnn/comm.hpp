#pragma once

// AER spike packing and the two-step (counter, then payload) delivery
// protocol, plus the construction-time collectives.
//
// Ranks execute bulk-synchronous phases. A Transport runs a list of phases
// for every rank with a rendezvous between consecutive phases; all message
// passing goes through per-pair mailbox slots that are written only by the
// sending rank and read only by the receiving rank between two rendezvous.

#include "dpsnn/core_model.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dpsnn {

// ---------------------------------------------------------------------------
// Transports
// ---------------------------------------------------------------------------

enum class TransportKind { Loopback, Threads };

TransportKind parse_transport(std::string_view name);
std::string_view transport_name(TransportKind kind);

using Phase = std::function<void(unsigned rank)>;

class Transport {
public:
    explicit Transport(unsigned ranks) : ranks_(ranks) {}
    virtual ~Transport() = default;
    Transport(const Transport&) = delete;
    Transport& operator=(const Transport&) = delete;

    unsigned size() const { return ranks_; }
    virtual TransportKind kind() const = 0;

    /// Runs every phase on every rank. No rank starts phase k+1 before all
    /// ranks finished phase k. The first exception raised by any rank is
    /// rethrown after the remaining ranks have reached the end.
    virtual void run_phases(std::span<const Phase> phases) = 0;

private:
    unsigned ranks_;
};

std::unique_ptr<Transport> make_transport(TransportKind kind, unsigned ranks);

// ---------------------------------------------------------------------------
// Construction collectives
// ---------------------------------------------------------------------------

/// Count-based bookkeeping of live SynapseRecords (source and target copies).
class RecordLedger {
public:
    void add(std::uint64_t n);
    void release(std::uint64_t n);
    std::uint64_t live() const { return live_.load(); }
    std::uint64_t peak() const { return peak_.load(); }

private:
    std::atomic<std::uint64_t> live_{0};
    std::atomic<std::uint64_t> peak_{0};
};

/// Single-word all-to-all followed by the variable-size record exchange.
/// The source side keeps ownership of its outgoing vectors until every rank
/// has copied its incoming payload.
class ConstructionExchange {
public:
    explicit ConstructionExchange(unsigned ranks);

    // Phase A (source side): announce per-target counts and expose payloads.
    void post(unsigned src, std::span<const std::vector<SynapseRecord>> by_target);
    // Phase B (target side): incoming counts per source rank.
    std::vector<std::uint64_t> incoming_counts(unsigned dst) const;
    // Phase B (target side): copy every incoming payload into one buffer of
    // exactly sum(incoming_counts) records, in source-rank order.
    std::vector<SynapseRecord> receive(unsigned dst) const;
    std::uint64_t messages() const { return messages_.load(); }

private:
    unsigned ranks_;
    std::vector<std::uint64_t> counts_;                        // [src * R + dst]
    std::vector<std::span<const SynapseRecord>> payloads_;     // [src * R + dst]
    mutable std::atomic<std::uint64_t> messages_{0};
};

// ---------------------------------------------------------------------------
// Spike delivery
// ---------------------------------------------------------------------------

/// One AER entry: spiking neuron and its emission time.
struct AerSpike {
    NeuronId source;
    double time_ms = 0.0;
    friend bool operator==(const AerSpike&, const AerSpike&) = default;
};

struct AxonalSpikeBatch {
    unsigned source_rank = 0;
    unsigned target_rank = 0;
    std::uint64_t step = 0;
    std::vector<AerSpike> spikes;
};

/// Per-rank connectivity subsets: ranks this rank sends synapses/spikes to and
/// ranks it receives from. Self may appear; delivery skips it (local fast path).
struct RankSubsets {
    std::vector<unsigned> outgoing;
    std::vector<unsigned> incoming;
};

/// Groups this step's spikes by target rank. `targets_of(local)` yields the
/// ranks hosting at least one synapse of that neuron. Spikes for `self` go
/// to `local` (the same-rank fast path) instead of a batch.
struct PackedSpikes {
    std::vector<AxonalSpikeBatch> batches;  // only non-empty, ascending target rank
    std::vector<AerSpike> local;
};

PackedSpikes pack(unsigned self, std::uint64_t step, std::span<const AerSpike> spikes,
                  unsigned bits_for_local,
                  const std::function<std::span<const std::uint32_t>(unsigned local)>& targets_of,
                  unsigned ranks);

struct TrafficRow {
    std::uint64_t step;
    unsigned src, dst;
    std::uint64_t counter;
    std::uint64_t bytes;
};

struct ProtocolStats {
    std::uint64_t counters_sent = 0;
    std::uint64_t payloads_sent = 0;
    std::uint64_t spikes_sent = 0;
    std::uint64_t spikes_received = 0;
    std::uint64_t local_spikes = 0;
};

/// Bytes of one AER entry on the wire (u32 id + f64 time).
inline constexpr std::size_t kAerBytes = 12;

/// The two-step spike delivery of one communication step:
///   phase 1  post_counters   single-word counter to every rank of the
///                            outgoing subset (zero counters included)
///   phase 2  post_payloads   read incoming counters, send payloads only to
///                            pairs with a non-zero counter
///   phase 3  collect         read payloads, check them against counters
/// Every slot carries the step tag; a mismatch is a ProtocolError.
class SpikeDelivery {
public:
    SpikeDelivery(std::vector<RankSubsets> subsets, bool trace = false);

    unsigned size() const { return static_cast<unsigned>(subsets_.size()); }
    const RankSubsets& subsets(unsigned rank) const { return subsets_.at(rank); }

    void post_counters(unsigned src, std::uint64_t step, std::vector<AxonalSpikeBatch>&& batches);
    void post_payloads(unsigned rank, std::uint64_t step);
    std::vector<AxonalSpikeBatch> collect(unsigned dst, std::uint64_t step);

    /// Spikes sent and received by `rank` at `step` (remote traffic only).
    const std::vector<std::uint64_t>& sent_per_step(unsigned rank) const { return sent_.at(rank); }
    const std::vector<std::uint64_t>& received_per_step(unsigned rank) const
    {
        return received_.at(rank);
    }
    ProtocolStats stats(unsigned rank) const { return stats_.at(rank); }
    void note_local(unsigned rank, std::uint64_t n) { stats_.at(rank).local_spikes += n; }

    /// Rows of the per-step traffic trace (empty unless tracing is on).
    std::vector<TrafficRow> traffic() const;

private:
    struct Slot {
        std::uint64_t counter_tag = ~std::uint64_t{0};
        std::uint64_t counter = 0;
        bool has_counter = false;
        std::uint64_t payload_tag = ~std::uint64_t{0};
        std::vector<AerSpike> payload;
        bool has_payload = false;
    };
    Slot& slot(unsigned src, unsigned dst) { return slots_[std::size_t{src} * size() + dst]; }
    static void record(std::vector<std::uint64_t>& v, std::uint64_t step, std::uint64_t n);

    std::vector<RankSubsets> subsets_;
    std::vector<std::vector<bool>> is_outgoing_;
    std::vector<Slot> slots_;
    std::vector<std::vector<AxonalSpikeBatch>> pending_;  // per source rank, until phase 2
    std::vector<std::vector<std::uint64_t>> announced_;   // per dst: counter from each src
    std::vector<std::vector<std::uint64_t>> sent_;
    std::vector<std::vector<std::uint64_t>> received_;
    std::vector<ProtocolStats> stats_;
    bool trace_;
    std::vector<std::vector<TrafficRow>> traffic_;
};

}  // namespace dpsnn
