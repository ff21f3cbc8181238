#include "dpsnn/comm.hpp"

#include "dpsnn/errors.hpp"

#include <algorithm>
#include <barrier>
#include <exception>
#include <mutex>
#include <thread>
#include <tuple>

namespace dpsnn {

TransportKind parse_transport(std::string_view name)
{
    if (name == "loopback") return TransportKind::Loopback;
    if (name == "threads") return TransportKind::Threads;
    throw ConfigError("unknown transport '" + std::string(name) + "' (loopback|threads)");
}

std::string_view transport_name(TransportKind kind)
{
    return kind == TransportKind::Loopback ? "loopback" : "threads";
}

namespace {

/// Single worker, ranks visited round-robin inside each phase.
class LoopbackTransport final : public Transport {
public:
    using Transport::Transport;
    TransportKind kind() const override { return TransportKind::Loopback; }

    void run_phases(std::span<const Phase> phases) override
    {
        for (const auto& phase : phases)
            for (unsigned r = 0; r < size(); ++r) phase(r);
    }
};

/// One persistent worker thread per rank; std::barrier rendezvous between phases.
class ThreadTransport final : public Transport {
public:
    explicit ThreadTransport(unsigned ranks)
        : Transport(ranks), gate_(ranks + 1), phase_barrier_(ranks)
    {
        workers_.reserve(ranks);
        for (unsigned r = 0; r < ranks; ++r) workers_.emplace_back([this, r] { work(r); });
    }

    ~ThreadTransport() override
    {
        stop_ = true;
        gate_.arrive_and_wait();
        for (auto& w : workers_) w.join();
    }

    TransportKind kind() const override { return TransportKind::Threads; }

    void run_phases(std::span<const Phase> phases) override
    {
        phases_ = phases;
        failed_ = false;
        error_ = nullptr;
        gate_.arrive_and_wait();  // start
        gate_.arrive_and_wait();  // done
        if (error_) std::rethrow_exception(error_);
    }

private:
    void work(unsigned rank)
    {
        for (;;) {
            gate_.arrive_and_wait();
            if (stop_) return;
            for (std::size_t i = 0; i < phases_.size(); ++i) {
                if (i > 0) phase_barrier_.arrive_and_wait();
                if (failed_.load()) continue;
                try {
                    phases_[i](rank);
                } catch (...) {
                    std::lock_guard lock(error_mutex_);
                    if (!error_) error_ = std::current_exception();
                    failed_ = true;
                }
            }
            gate_.arrive_and_wait();
        }
    }

    std::barrier<> gate_;
    std::barrier<> phase_barrier_;
    std::span<const Phase> phases_;
    std::atomic<bool> stop_{false};
    std::atomic<bool> failed_{false};
    std::mutex error_mutex_;
    std::exception_ptr error_;
    std::vector<std::thread> workers_;
};

}  // namespace

std::unique_ptr<Transport> make_transport(TransportKind kind, unsigned ranks)
{
    if (ranks == 0) throw ConfigError("transport needs at least one rank");
    if (kind == TransportKind::Threads) return std::make_unique<ThreadTransport>(ranks);
    return std::make_unique<LoopbackTransport>(ranks);
}

// ---------------------------------------------------------------------------

void RecordLedger::add(std::uint64_t n)
{
    const std::uint64_t now = live_.fetch_add(n) + n;
    std::uint64_t prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
}

void RecordLedger::release(std::uint64_t n)
{
    live_.fetch_sub(n);
}

ConstructionExchange::ConstructionExchange(unsigned ranks)
    : ranks_(ranks),
      counts_(std::size_t{ranks} * ranks, 0),
      payloads_(std::size_t{ranks} * ranks)
{
}

void ConstructionExchange::post(unsigned src, std::span<const std::vector<SynapseRecord>> by_target)
{
    if (by_target.size() != ranks_)
        throw ProtocolError("construction exchange: expected one buffer per rank");
    for (unsigned dst = 0; dst < ranks_; ++dst) {
        counts_[std::size_t{src} * ranks_ + dst] = by_target[dst].size();
        payloads_[std::size_t{src} * ranks_ + dst] = by_target[dst];
    }
}

std::vector<std::uint64_t> ConstructionExchange::incoming_counts(unsigned dst) const
{
    std::vector<std::uint64_t> in(ranks_);
    for (unsigned src = 0; src < ranks_; ++src) in[src] = counts_[std::size_t{src} * ranks_ + dst];
    return in;
}

std::vector<SynapseRecord> ConstructionExchange::receive(unsigned dst) const
{
    const auto counts = incoming_counts(dst);
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    std::vector<SynapseRecord> buffer;
    buffer.reserve(total);
    for (unsigned src = 0; src < ranks_; ++src) {
        const auto payload = payloads_[std::size_t{src} * ranks_ + dst];
        if (payload.size() != counts[src])
            throw ProtocolError("construction exchange: payload from rank " + std::to_string(src) +
                                " does not match its announced count");
        if (payload.empty()) continue;
        buffer.insert(buffer.end(), payload.begin(), payload.end());
        if (src != dst) messages_.fetch_add(1);
    }
    return buffer;
}

// ---------------------------------------------------------------------------

PackedSpikes pack(unsigned self, std::uint64_t step, std::span<const AerSpike> spikes,
                  unsigned bits_for_local,
                  const std::function<std::span<const std::uint32_t>(unsigned local)>& targets_of,
                  unsigned ranks)
{
    PackedSpikes out;
    if (spikes.empty()) return out;
    std::vector<std::vector<AerSpike>> by_rank(ranks);
    for (const auto& s : spikes) {
        const auto id = decode_neuron_id(s.source, bits_for_local);
        for (const std::uint32_t r : targets_of(id.local_index)) {
            if (r == self)
                out.local.push_back(s);
            else
                by_rank[r].push_back(s);
        }
    }
    for (unsigned r = 0; r < ranks; ++r) {
        if (by_rank[r].empty()) continue;
        out.batches.push_back(AxonalSpikeBatch{self, r, step, std::move(by_rank[r])});
    }
    return out;
}

SpikeDelivery::SpikeDelivery(std::vector<RankSubsets> subsets, bool trace)
    : subsets_(std::move(subsets)), trace_(trace)
{
    const unsigned n = size();
    is_outgoing_.assign(n, std::vector<bool>(n, false));
    for (unsigned r = 0; r < n; ++r)
        for (unsigned dst : subsets_[r].outgoing) {
            if (dst >= n) throw ProtocolError("invalid outgoing subset entry");
            is_outgoing_[r][dst] = true;
        }
    slots_.resize(std::size_t{n} * n);
    pending_.resize(n);
    announced_.assign(n, std::vector<std::uint64_t>(n, 0));
    sent_.resize(n);
    received_.resize(n);
    stats_.resize(n);
    traffic_.resize(n);
}

void SpikeDelivery::record(std::vector<std::uint64_t>& v, std::uint64_t step, std::uint64_t n)
{
    if (v.size() <= step) v.resize(step + 1, 0);
    v[step] += n;
}

void SpikeDelivery::post_counters(unsigned src, std::uint64_t step,
                                  std::vector<AxonalSpikeBatch>&& batches)
{
    std::vector<std::uint64_t> counts(size(), 0);
    for (const auto& b : batches) {
        if (b.source_rank != src || b.step != step)
            throw ProtocolError("batch header does not match sender/step");
        if (b.target_rank >= size() || b.target_rank == src || !is_outgoing_[src][b.target_rank])
            throw ProtocolError("rank " + std::to_string(src) + " attempted to send spikes to rank " +
                                std::to_string(b.target_rank) +
                                " outside its connectivity subset");
        counts[b.target_rank] += b.spikes.size();
    }
    std::uint64_t total = 0;
    for (unsigned dst : subsets_[src].outgoing) {
        if (dst == src) continue;
        Slot& s = slot(src, dst);
        s.counter_tag = step;
        s.counter = counts[dst];
        s.has_counter = true;
        total += counts[dst];
        ++stats_[src].counters_sent;
    }
    record(sent_[src], step, total);
    stats_[src].spikes_sent += total;
    pending_[src] = std::move(batches);
}

void SpikeDelivery::post_payloads(unsigned rank, std::uint64_t step)
{
    // Incoming counters first; they size the payloads this rank will accept.
    for (unsigned src : subsets_[rank].incoming) {
        if (src == rank) continue;
        Slot& s = slot(src, rank);
        if (!s.has_counter || s.counter_tag != step)
            throw ProtocolError("rank " + std::to_string(rank) + " missing step-" +
                                std::to_string(step) + " counter from rank " + std::to_string(src));
        announced_[rank][src] = s.counter;
        s.has_counter = false;
        if (trace_ && s.counter > 0)
            traffic_[rank].push_back({step, src, rank, s.counter, s.counter * kAerBytes});
    }
    for (auto& b : pending_[rank]) {
        if (b.spikes.empty()) continue;
        Slot& s = slot(rank, b.target_rank);
        s.payload_tag = step;
        s.payload = std::move(b.spikes);
        s.has_payload = true;
        ++stats_[rank].payloads_sent;
    }
    pending_[rank].clear();
}

std::vector<AxonalSpikeBatch> SpikeDelivery::collect(unsigned dst, std::uint64_t step)
{
    std::vector<AxonalSpikeBatch> out;
    std::uint64_t total = 0;
    for (unsigned src : subsets_[dst].incoming) {
        if (src == dst) continue;
        const std::uint64_t expected = announced_[dst][src];
        Slot& s = slot(src, dst);
        if (expected == 0) {
            if (s.has_payload && s.payload_tag == step)
                throw ProtocolError("payload without announced counter");
            continue;
        }
        if (!s.has_payload || s.payload_tag != step)
            throw ProtocolError("rank " + std::to_string(dst) + " missing step-" +
                                std::to_string(step) + " payload from rank " + std::to_string(src));
        if (s.payload.size() != expected)
            throw ProtocolError("payload from rank " + std::to_string(src) + " carries " +
                                std::to_string(s.payload.size()) + " spikes, counter announced " +
                                std::to_string(expected));
        total += expected;
        out.push_back(AxonalSpikeBatch{src, dst, step, std::move(s.payload)});
        s.payload.clear();
        s.has_payload = false;
        announced_[dst][src] = 0;
    }
    record(received_[dst], step, total);
    stats_[dst].spikes_received += total;
    return out;
}

std::vector<TrafficRow> SpikeDelivery::traffic() const
{
    std::vector<TrafficRow> rows;
    for (const auto& per_rank : traffic_) rows.insert(rows.end(), per_rank.begin(), per_rank.end());
    std::sort(rows.begin(), rows.end(), [](const TrafficRow& a, const TrafficRow& b) {
        return std::tie(a.step, a.src, a.dst) < std::tie(b.step, b.src, b.dst);
    });
    return rows;
}

}  // namespace dpsnn
