#include "dpsnn/connectivity.hpp"

#include "dpsnn/errors.hpp"
#include "dpsnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <tuple>

namespace dpsnn {

double kernel_prob(double d, double lambda, double c0)
{
    if (!(lambda > 0.0)) throw ConfigError("kernel length lambda must be > 0");
    if (d < 0.0) throw ConfigError("kernel distance must be >= 0");
    if (c0 < 0.0 || c0 > 1.0) throw ConfigError("kernel base probability must lie in [0, 1]");
    const double p = c0 * std::exp(-d / lambda);
    if (p > 1.0) {
        std::clog << "warning: kernel probability " << p << " clamped to 1\n";
        return 1.0;
    }
    return p;
}

namespace {

double kernel_radius(double lambda, double floor)
{
    return lambda * std::log(1.0 / floor);
}

double kernel_sum(const GridSpec& grid, double lambda, Column target, double radius)
{
    double sum = 0.0;
    for (unsigned y = 0; y < grid.height; ++y)
        for (unsigned x = 0; x < grid.width; ++x) {
            const double d = distance({x, y}, target);
            if (d <= radius) sum += std::exp(-d / lambda);
        }
    return sum;
}

}  // namespace

double normalize_c0(const GridSpec& grid, double lambda, Column target, double fraction,
                    double kernel_floor)
{
    if (!(lambda > 0.0)) throw ConfigError("kernel length lambda must be > 0");
    if (target.x >= grid.width || target.y >= grid.height)
        throw TopologyError("target column outside grid");
    const double c0 = fraction / kernel_sum(grid, lambda, target, kernel_radius(lambda, kernel_floor));
    if (c0 > 1.0)
        throw ConfigError("normalized C0 = " + std::to_string(c0) +
                          " exceeds 1; grid too small for the requested in-degree");
    return c0;
}

ConnectivityKernel::ConnectivityKernel(const GridSpec& grid, const ConnectivityParams& params)
    : grid_(grid), params_(params),
      radius_(kernel_radius(params.lambda, params.kernel_floor))
{
    if (!(params.lambda > 0.0)) throw ConfigError("kernel length lambda must be > 0");
    if (params.delays.max_delay < 1 || params.delays.max_delay > 255)
        throw ConfigError("max delay must lie in [1, 255] ms");
    c0_.resize(grid.column_count());
    for (unsigned c = 0; c < grid.column_count(); ++c)
        c0_[c] = normalize_c0(grid, params.lambda, grid.column_at(c), params.in_degree_fraction,
                              params.kernel_floor);
}

double ConnectivityKernel::probability(Column source, Column target) const
{
    const double d = distance(source, target);
    if (d > radius_) return 0.0;
    return kernel_prob(d, params_.lambda, c0_[grid_.column_index(target)]);
}

std::vector<unsigned> ConnectivityKernel::reachable(Column source) const
{
    std::vector<unsigned> out;
    const int r = static_cast<int>(std::floor(radius_));
    const int y_lo = std::max(0, static_cast<int>(source.y) - r);
    const int y_hi = std::min(static_cast<int>(grid_.height) - 1, static_cast<int>(source.y) + r);
    const int x_lo = std::max(0, static_cast<int>(source.x) - r);
    const int x_hi = std::min(static_cast<int>(grid_.width) - 1, static_cast<int>(source.x) + r);
    for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
            const Column c{static_cast<unsigned>(x), static_cast<unsigned>(y)};
            if (distance(source, c) <= radius_) out.push_back(grid_.column_index(c));
        }
    return out;
}

unsigned ConnectivityKernel::reach_count(Column source, double threshold) const
{
    unsigned n = 0;
    const unsigned k = grid_.sizes.total();
    for (unsigned c : reachable(source)) {
        const Column target = grid_.column_at(c);
        if (target == source) continue;
        if (k * probability(source, target) >= threshold) ++n;
    }
    return n;
}

std::uint64_t OutgoingSynapses::record_count() const
{
    std::uint64_t n = 0;
    for (const auto& v : by_target_rank) n += v.size();
    return n;
}

namespace {

/// Cached binomial parameters of one source column.
struct ColumnPlan {
    struct Target {
        unsigned column;
        Population population;
        unsigned size;
        std::binomial_distribution<unsigned>::param_type binomial;
    };
    unsigned source_column = ~0u;
    Population source_population = Population::F;
    std::vector<Target> targets;
};

using Binomial = std::binomial_distribution<unsigned>::param_type;

void plan_column(ColumnPlan& plan, const NetworkSpec& net, const ConnectivityKernel& kernel,
                 unsigned source_column, Population s)
{
    if (plan.source_column == source_column && plan.source_population == s) return;
    plan.source_column = source_column;
    plan.source_population = s;
    plan.targets.clear();
    const GridSpec& grid = net.grid;
    const Column src = grid.column_at(source_column);
    if (is_excitatory(s)) {
        for (unsigned c : kernel.reachable(src)) {
            const double p = kernel.probability(src, grid.column_at(c));
            for (auto t : kPopulations) plan.targets.push_back({c, t, grid.sizes[t], Binomial(grid.sizes[t], p)});
        }
    } else {
        const double p = net.connectivity.inhibitory_probability;
        for (auto t : kPopulations)
            plan.targets.push_back({source_column, t, grid.sizes[t], Binomial(grid.sizes[t], p)});
    }
}

/// Walks every synapse decision of one rank. The sink decides whether the
/// targets of a (column, population) pair have to be drawn at all.
template <class Sink>
void visit_rank(unsigned rank, const NetworkSpec& net, const PartitionMap& part,
                const ConnectivityKernel& kernel, Sink& sink)
{
    const GridSpec& grid = net.grid;
    const unsigned k_total = grid.sizes.total();
    const unsigned local_count = part.tile(rank).neuron_count;
    const unsigned max_delay = net.connectivity.delays.max_delay;

    ColumnPlan plan;
    std::vector<std::uint8_t> marked(k_total, 0);
    std::vector<unsigned> chosen;
    chosen.reserve(k_total);

    for (unsigned local = 0; local < local_count; ++local) {
        const std::uint32_t gid = part.global_id_of(rank, local);
        const NeuronLocation loc = locate(gid, grid);
        const unsigned src_column = gid / k_total;
        plan_column(plan, net, kernel, src_column, loc.population);
        sink.begin_source(local);

        for (const auto& tgt : plan.targets) {
            KeyedStream rng(net.seed, StreamDomain::Connectivity, gid, tgt.column,
                            static_cast<std::uint32_t>(index(tgt.population)));
            std::binomial_distribution<unsigned> binomial;
            unsigned count = binomial(rng, tgt.binomial);
            const bool self_in_pool =
                tgt.column == src_column && tgt.population == loc.population;
            if (self_in_pool) count = std::min(count, tgt.size - 1);
            if (count == 0) continue;
            if (!sink.wants_targets(tgt.column)) {
                sink.count(tgt.column, count);
                continue;
            }

            // Floyd's algorithm: `count` distinct indices out of tgt.size.
            chosen.clear();
            for (unsigned j = tgt.size - count; j < tgt.size; ++j) {
                std::uniform_int_distribution<unsigned> pick(0, j);
                unsigned t = pick(rng);
                if (marked[t]) t = j;
                marked[t] = 1;
                chosen.push_back(t);
            }
            if (self_in_pool && marked[loc.index]) {
                std::uniform_int_distribution<unsigned> pick(0, tgt.size - 1);
                unsigned replacement;
                do {
                    replacement = pick(rng);
                } while (marked[replacement] || replacement == loc.index);
                marked[loc.index] = 0;
                marked[replacement] = 1;
                std::replace(chosen.begin(), chosen.end(), loc.index, replacement);
            }

            const double mean = net.state.synapses.applied(tgt.population, loc.population) * net.j_scale;
            const double spread = net.state.synapses.spread(tgt.population, loc.population) * net.j_scale;
            std::normal_distribution<double> weight(mean, spread);
            std::uniform_int_distribution<unsigned> delay(1, max_delay);
            const Column target_column = grid.column_at(tgt.column);
            for (unsigned idx : chosen) {
                marked[idx] = 0;
                const std::uint32_t target_gid = global_id(grid, target_column, tgt.population, idx);
                SynapseRecord r;
                r.source = part.neuron_id(gid);
                r.target = part.neuron_id(target_gid);
                double w = weight(rng);
                while (w * mean < 0.0) w = weight(rng);  // no synapse changes sign
                r.weight = quantize_weight(w);
                r.delay = static_cast<std::uint8_t>(max_delay > 1 ? delay(rng) : 1);
                r.kind = static_cast<std::uint8_t>(3 * index(loc.population) + index(tgt.population));
                sink.synapse(part.rank_of(target_gid), r);
            }
        }
        sink.end_source(local);
    }
}

struct CountSink {
    const PartitionMap& part;
    std::vector<std::uint64_t> per_rank;

    void begin_source(unsigned) {}
    void end_source(unsigned) {}
    bool wants_targets(unsigned) const { return part.split() > 1; }
    void count(unsigned column, unsigned n)
    {
        per_rank[part.rank_of(part.grid().column_at(column), 0)] += n;
    }
    void synapse(unsigned target_rank, const SynapseRecord&) { ++per_rank[target_rank]; }
};

struct StoreSink {
    OutgoingSynapses& out;
    std::vector<std::uint32_t> stamp;  // last source (local + 1) that marked a rank
    std::vector<std::uint32_t> ranks;
    std::uint32_t current = 0;

    void begin_source(unsigned local)
    {
        ranks.clear();
        current = local + 1;
    }
    void end_source(unsigned local)
    {
        std::sort(ranks.begin(), ranks.end());
        out.target_ranks.insert(out.target_ranks.end(), ranks.begin(), ranks.end());
        out.target_rank_offsets[local + 1] = static_cast<std::uint32_t>(out.target_ranks.size());
    }
    bool wants_targets(unsigned) const { return true; }
    void count(unsigned, unsigned) {}
    void synapse(unsigned target_rank, const SynapseRecord& r)
    {
        out.by_target_rank[target_rank].push_back(r);
        if (stamp[target_rank] != current) {
            stamp[target_rank] = current;
            ranks.push_back(target_rank);
        }
    }
};

}  // namespace

std::vector<std::uint64_t> count_outgoing(unsigned rank, const NetworkSpec& net,
                                          const PartitionMap& part,
                                          const ConnectivityKernel& kernel)
{
    CountSink sink{part, std::vector<std::uint64_t>(part.rank_count(), 0)};
    visit_rank(rank, net, part, kernel, sink);
    return sink.per_rank;
}

OutgoingSynapses generate_outgoing(unsigned rank, const NetworkSpec& net, const PartitionMap& part,
                                   const ConnectivityKernel& kernel)
{
    const auto counts = count_outgoing(rank, net, part, kernel);
    OutgoingSynapses out;
    out.by_target_rank.resize(part.rank_count());
    for (unsigned r = 0; r < part.rank_count(); ++r) out.by_target_rank[r].reserve(counts[r]);
    const unsigned local_count = part.tile(rank).neuron_count;
    out.target_rank_offsets.assign(local_count + 1, 0);
    StoreSink sink{out, std::vector<std::uint32_t>(part.rank_count(), 0), {}};
    visit_rank(rank, net, part, kernel, sink);
    for (unsigned r = 0; r < part.rank_count(); ++r)
        if (out.by_target_rank[r].size() != counts[r])
            throw ProtocolError("dry-run count disagrees with generated synapses");
    return out;
}

// ---------------------------------------------------------------------------

SynapticMatrix::SynapticMatrix(std::vector<SynapseRecord> records, unsigned rank,
                               unsigned bits_for_local)
    : records_(std::move(records))
{
    for (const auto& r : records_) {
        if (r.delay < 1) throw TopologyError("synapse with zero delay");
        if (decode_neuron_id(r.target, bits_for_local).rank != rank)
            throw TopologyError("synapse targets neuron " + std::to_string(r.target.value) +
                                " which is not hosted on rank " + std::to_string(rank));
    }
    std::sort(records_.begin(), records_.end(), [](const SynapseRecord& a, const SynapseRecord& b) {
        return std::tie(a.delay, a.source.value, a.target.value, a.weight, a.kind) <
               std::tie(b.delay, b.source.value, b.target.value, b.weight, b.kind);
    });
    std::size_t begin = 0;
    while (begin < records_.size()) {
        std::size_t end = begin;
        while (end < records_.size() && records_[end].delay == records_[begin].delay) ++end;
        groups_.push_back({records_[begin].delay, begin, end});
        begin = end;
    }
}

std::span<const SynapseRecord> SynapticMatrix::find(const DelayGroup& g, NeuronId source) const
{
    const auto all = group(g);
    const auto lo = std::lower_bound(all.begin(), all.end(), source,
                                     [](const SynapseRecord& r, NeuronId s) { return r.source < s; });
    auto hi = lo;
    while (hi != all.end() && hi->source == source) ++hi;
    return {lo, hi};
}

SynapticMatrix build_matrix(std::vector<SynapseRecord> records, unsigned rank,
                            unsigned bits_for_local)
{
    return SynapticMatrix(std::move(records), rank, bits_for_local);
}

// ---------------------------------------------------------------------------

BuiltNetwork build_network(const NetworkSpec& net, Transport& transport)
{
    const unsigned ranks = transport.size();
    BuiltNetwork built;
    built.partition = partition(net.grid, ranks);
    const ConnectivityKernel kernel(net.grid, net.connectivity);
    const PartitionMap& part = built.partition;

    built.matrices.resize(ranks);
    built.axons.resize(ranks);
    built.subsets.resize(ranks);
    built.incoming_counts.resize(ranks);
    RecordLedger ledger;

    if (ranks == 1) {
        built.axons[0] = generate_outgoing(0, net, part, kernel);
        auto& records = built.axons[0].by_target_rank[0];
        ledger.add(records.size());
        built.incoming_counts[0] = {records.size()};
        if (!records.empty()) built.subsets[0] = {{0}, {0}};
        built.recurrent_synapses = records.size();
        built.matrices[0] = build_matrix(std::move(records), 0, part.bits_for_local());
        built.axons[0].by_target_rank.assign(1, {});
        built.peak_records = ledger.peak();
        return built;
    }

    ConstructionExchange exchange(ranks);
    std::vector<std::vector<SynapseRecord>> received(ranks);

    const std::vector<Phase> phases{
        // fan-out: generate at the source and announce counts + payloads
        [&](unsigned r) {
            built.axons[r] = generate_outgoing(r, net, part, kernel);
            ledger.add(built.axons[r].record_count());
            exchange.post(r, built.axons[r].by_target_rank);
        },
        // fan-in: learn incoming counts, receive the records
        [&](unsigned r) {
            built.incoming_counts[r] = exchange.incoming_counts(r);
            received[r] = exchange.receive(r);
            ledger.add(received[r].size());
            RankSubsets& sub = built.subsets[r];
            for (unsigned q = 0; q < ranks; ++q) {
                if (built.incoming_counts[r][q] > 0) sub.incoming.push_back(q);
                if (!built.axons[r].by_target_rank[q].empty()) sub.outgoing.push_back(q);
            }
        },
        // release the source-side copies, then order the incoming list
        [&](unsigned r) {
            const std::uint64_t sent = built.axons[r].record_count();
            built.axons[r].by_target_rank.assign(ranks, {});
            ledger.release(sent);
            built.matrices[r] = build_matrix(std::move(received[r]), r, part.bits_for_local());
        },
    };
    transport.run_phases(phases);

    for (const auto& m : built.matrices) built.recurrent_synapses += m.size();
    built.peak_records = ledger.peak();
    built.construction_messages = exchange.messages();
    return built;
}

std::uint64_t count_network(const NetworkSpec& net, unsigned ranks)
{
    const PartitionMap part = partition(net.grid, ranks);
    const ConnectivityKernel kernel(net.grid, net.connectivity);
    std::uint64_t total = 0;
    for (unsigned r = 0; r < ranks; ++r)
        for (auto c : count_outgoing(r, net, part, kernel)) total += c;
    return total;
}

}  // namespace dpsnn
