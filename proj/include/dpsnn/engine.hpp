#pragma once

// Mixed time/event-driven simulation: ranks exchange spikes every 1 ms
// communication step, while each neuron integrates its LIF+SFA dynamics
// exactly from one input event to the next.

#include "dpsnn/comm.hpp"
#include "dpsnn/connectivity.hpp"
#include "dpsnn/core_model.hpp"
#include "dpsnn/grid_topology.hpp"
#include "dpsnn/spike_log.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace dpsnn {

/// Communication step in ms; also the minimum synaptic delay.
inline constexpr double kCommStepMs = 1.0;

struct NeuronState {
    double V = 0.0;
    double c = 0.0;
    double last_update = 0.0;
    double refractory_until = -std::numeric_limits<double>::infinity();
};

/// Closed-form free evolution over dt >= 0 (the neuron must not be refractory).
void evolve_free(NeuronState& s, const NeuronParams& p, double dt);

/// Brings the state to time t, holding V at V_r until the refractory period ends.
void advance_to(NeuronState& s, const NeuronParams& p, double t);

struct EventOutcome {
    bool spiked = false;
    bool discarded = false;  // arrived during the refractory period
};

/// Advance to t, add the jump, emit a spike above threshold.
EventOutcome apply_event(NeuronState& s, const NeuronParams& p, double amplitude, double t);

/// A synaptic event queued on one neuron. Events are applied in key order:
/// time, then recurrent before external, then source global id, then amplitude.
struct SynapticEvent {
    double time = 0.0;
    double amplitude = 0.0;
    std::uint32_t source = 0;  // global id, or sequence number for external events
    std::uint32_t external = 0;

    friend bool operator<(const SynapticEvent& a, const SynapticEvent& b)
    {
        if (a.time != b.time) return a.time < b.time;
        if (a.external != b.external) return a.external < b.external;
        if (a.source != b.source) return a.source < b.source;
        return a.amplitude < b.amplitude;
    }
};

/// Poisson external input of one neuron during [step, step + 1) ms:
/// count ~ Poisson(N * nu * T), uniform times, Gaussian amplitudes.
std::vector<SynapticEvent> external_events(std::uint32_t global_id, std::uint64_t step,
                                           const ExternalDrive& drive, double relative_spread,
                                           std::uint64_t seed);

/// A spike waiting in the delay queues, with its global id for ordering.
struct QueuedSpike {
    NeuronId source;
    std::uint32_t global_id = 0;
    double time_ms = 0.0;
};

/// Co-traverses spikes (sorted by source) and one delay group (sorted by
/// source), calling emit(record, spike) for every matching pair.
template <class Spike, class Emit>
void demux(std::span<const Spike> spikes, std::span<const SynapseRecord> group, Emit&& emit)
{
    std::size_t pos = 0;
    const std::size_t n = group.size();
    for (const auto& spike : spikes) {
        // Gallop forward from the previous position, then binary search.
        std::size_t step = 1;
        std::size_t lo = pos, hi = pos;
        while (hi < n && group[hi].source < spike.source) {
            lo = hi;
            hi = pos + step;
            step *= 2;
        }
        if (hi > n) hi = n;
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo) / 2;
            if (group[mid].source < spike.source)
                lo = mid + 1;
            else
                hi = mid;
        }
        pos = lo;
        for (std::size_t k = pos; k < n && group[k].source == spike.source; ++k) emit(group[k], spike);
    }
}

/// Ring of per-emission-step spike lists; a spike emitted at step e with
/// delay d is demultiplexed at step e + d.
class DelayQueues {
public:
    explicit DelayQueues(unsigned max_delay) : slots_(max_delay + 1) {}
    void store(std::uint64_t emission_step, std::vector<QueuedSpike> spikes)
    {
        slots_[emission_step % slots_.size()] = std::move(spikes);
    }
    std::span<const QueuedSpike> emitted_at(std::uint64_t emission_step) const
    {
        return slots_[emission_step % slots_.size()];
    }
    unsigned max_delay() const { return static_cast<unsigned>(slots_.size() - 1); }

private:
    std::vector<std::vector<QueuedSpike>> slots_;
};

struct RankCounters {
    std::uint64_t spikes = 0;
    std::uint64_t recurrent_events = 0;
    std::uint64_t external_events = 0;
    std::uint64_t discarded_events = 0;
};

/// One rank: its neurons, incoming matrix, axon target lists and queues.
class RankEngine {
public:
    RankEngine(unsigned rank, const NetworkSpec& net, const PartitionMap& part,
               SynapticMatrix matrix, OutgoingSynapses axons);

    unsigned rank() const { return rank_; }
    std::size_t neuron_count() const { return state_.size(); }
    const NeuronState& state(unsigned local) const { return state_.at(local); }
    NeuronState& state(unsigned local) { return state_.at(local); }
    const SynapticMatrix& matrix() const { return matrix_; }

    /// Spikes that reached this rank after the previous step (local fast
    /// path and remote batches). Must be called before compute(step).
    void ingest(std::uint64_t step, std::vector<AerSpike> local,
                std::vector<AxonalSpikeBatch> remote);

    /// Demux matured buckets, generate external input, integrate every
    /// neuron over [step, step + 1) and pack the emitted spikes.
    PackedSpikes compute(std::uint64_t step);

    /// Extra events for tests (e.g. forcing a neuron to fire).
    void inject(unsigned local, SynapticEvent e) { queues_.at(local).push_back(e); }

    const std::vector<SpikeRecord>& log() const { return log_; }
    std::vector<SpikeRecord> take_log() { return std::exchange(log_, {}); }
    const RankCounters& counters() const { return counters_; }

private:
    unsigned rank_;
    const NetworkSpec& net_;
    const PartitionMap& part_;
    SynapticMatrix matrix_;
    OutgoingSynapses axons_;
    DelayQueues delays_;
    std::vector<NeuronState> state_;
    std::vector<std::uint32_t> gid_;
    std::vector<Population> population_;
    std::vector<std::vector<SynapticEvent>> queues_;
    std::vector<SpikeRecord> log_;
    RankCounters counters_;
};

struct SimulationOptions {
    TransportKind transport = TransportKind::Loopback;
    unsigned ranks = 1;
    bool trace_traffic = false;
};

struct RunResult {
    SpikeLog spikes;
    double init_seconds = 0.0;
    double sim_seconds = 0.0;     // wall time of the measured (post-transient) window
    double window_ms = 0.0;       // simulated time in the measured window
    RankCounters window;          // counts inside the measured window
    RankCounters total;
    std::uint64_t recurrent_synapses = 0;
    std::uint64_t peak_records = 0;
    std::uint64_t neurons = 0;
    std::uint64_t remote_spikes_sent = 0;
    std::uint64_t remote_spikes_received = 0;
    std::uint64_t construction_messages = 0;
    std::vector<TrafficRow> traffic;

    double mean_rate_hz() const;
};

/// Builds the network on `ranks` ranks and runs it step by step.
class Simulation {
public:
    Simulation(NetworkSpec net, SimulationOptions options);
    ~Simulation();
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    /// Construction phase (timed separately from the dynamics).
    void build();
    bool built() const { return built_; }

    /// Runs `duration_ms` communication steps from the current time. Steps
    /// before `transient_ms` are excluded from the window metrics.
    RunResult run(double duration_ms, double transient_ms = 0.0);

    const NetworkSpec& network() const { return net_; }
    const PartitionMap& partition() const { return network_.partition; }
    const BuiltNetwork& built_network() const { return network_; }
    RankEngine& rank(unsigned r) { return *engines_.at(r); }
    std::uint64_t current_step() const { return step_; }

private:
    NetworkSpec net_;
    SimulationOptions options_;
    std::unique_ptr<Transport> transport_;
    BuiltNetwork network_;
    std::vector<std::unique_ptr<RankEngine>> engines_;
    std::unique_ptr<SpikeDelivery> delivery_;
    std::vector<std::vector<AerSpike>> local_inbox_;
    std::vector<std::vector<AxonalSpikeBatch>> remote_inbox_;
    double init_seconds_ = 0.0;
    std::uint64_t step_ = 0;
    bool built_ = false;
};

}  // namespace dpsnn
