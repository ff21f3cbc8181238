#include "dpsnn/comm.hpp"
#include "dpsnn/connectivity.hpp"
#include "dpsnn/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

using namespace dpsnn;

namespace {

NetworkSpec spec(unsigned w, unsigned h, double scale, double lambda, std::uint64_t seed = 1)
{
    NetworkSpec n;
    n.grid.width = w;
    n.grid.height = h;
    n.grid.sizes = PopulationSizes::scaled(scale);
    n.state = preset("AW-8.8Hz");
    n.connectivity.lambda = lambda;
    n.seed = seed;
    return n;
}

BuiltNetwork build(const NetworkSpec& n, unsigned ranks, TransportKind kind = TransportKind::Loopback)
{
    auto t = make_transport(kind, ranks);
    return build_network(n, *t);
}

// All records of a build as (source gid, target gid, weight, delay), sorted.
std::vector<std::tuple<std::uint32_t, std::uint32_t, std::int16_t, std::uint8_t>> canonical(
    const BuiltNetwork& b)
{
    std::vector<std::tuple<std::uint32_t, std::uint32_t, std::int16_t, std::uint8_t>> out;
    for (const auto& m : b.matrices)
        for (const auto& r : m.records())
            out.emplace_back(b.partition.global_id(r.source), b.partition.global_id(r.target), r.weight, r.delay);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(Kernel, ClosedFormValues)
{
    EXPECT_DOUBLE_EQ(kernel_prob(0.0, 0.4, 0.3), 0.3);
    EXPECT_NEAR(kernel_prob(1.0, 0.5, 0.5), 0.5 * std::exp(-2.0), 1e-15);
    EXPECT_NEAR(kernel_prob(1.0, 0.5, 0.5), 0.06767, 5e-6);
    EXPECT_NEAR(kernel_prob(2.0, 0.4, 0.2), 0.0013476, 5e-8);
}

TEST(Kernel, NormalizationSingleColumn)
{
    GridSpec g;
    for (double lambda : {0.1, 0.4, 2.0}) EXPECT_DOUBLE_EQ(normalize_c0(g, lambda, {0, 0}), 0.9);
}

TEST(Kernel, NormalizationThreeByThreeCenter)
{
    GridSpec g;
    g.width = g.height = 3;
    const double expect = 0.9 / (1 + 4 * std::exp(-2.0) + 4 * std::exp(-2 * std::sqrt(2.0)));
    EXPECT_NEAR(normalize_c0(g, 0.5, {1, 1}), expect, 1e-12);
    EXPECT_NEAR(expect, 0.50625, 1e-5);
}

TEST(Kernel, EveryTargetColumnSumsToFraction)
{
    const auto n = spec(7, 5, 0.1, 0.6);
    const ConnectivityKernel k(n.grid, n.connectivity);
    for (unsigned t = 0; t < n.grid.column_count(); ++t) {
        double sum = 0.0;
        for (unsigned s = 0; s < n.grid.column_count(); ++s)
            sum += k.probability(n.grid.column_at(s), n.grid.column_at(t));
        EXPECT_NEAR(sum, 0.9, 1e-9) << "target column " << t;
    }
}

TEST(Kernel, ReachCountGrowsWithLambda)
{
    // Columns where one excitatory neuron expects at least one synapse.
    GridSpec g;
    g.width = g.height = 48;
    ConnectivityParams p;
    p.lambda = 0.4;
    const unsigned narrow = ConnectivityKernel(g, p).reach_count({24, 24}, 1.0);
    p.lambda = 0.6;
    const unsigned wide = ConnectivityKernel(g, p).reach_count({24, 24}, 1.0);
    EXPECT_LT(narrow, wide);
    EXPECT_NEAR(narrow, 44.0, 0.25 * 44.0);
    EXPECT_NEAR(wide, 78.0, 0.25 * 78.0);
}

TEST(Matrix, DoubleOrdering)
{
    std::vector<SynapseRecord> recs{{NeuronId{9}, NeuronId{0}, 10, 2, 0},
                                    {NeuronId{7}, NeuronId{1}, 10, 1, 0},
                                    {NeuronId{3}, NeuronId{0}, 10, 1, 0}};
    SynapticMatrix m(recs, 0, 8);
    ASSERT_EQ(m.groups().size(), 2u);
    const auto g1 = m.group(m.groups()[0]);
    const auto g2 = m.group(m.groups()[1]);
    EXPECT_EQ(m.groups()[0].delay, 1u);
    ASSERT_EQ(g1.size(), 2u);
    EXPECT_EQ(g1[0].source.value, 3u);
    EXPECT_EQ(g1[1].source.value, 7u);
    EXPECT_EQ(m.groups()[1].delay, 2u);
    ASSERT_EQ(g2.size(), 1u);
    EXPECT_EQ(g2[0].source.value, 9u);
    EXPECT_EQ(m.find(m.groups()[0], NeuronId{7}).size(), 1u);
    EXPECT_TRUE(m.find(m.groups()[0], NeuronId{9}).empty());
}

TEST(Matrix, EmptyAndMultapses)
{
    SynapticMatrix empty({}, 0, 8);
    EXPECT_EQ(empty.size(), 0u);
    EXPECT_TRUE(empty.groups().empty());

    std::vector<SynapseRecord> recs(3, SynapseRecord{NeuronId{4}, NeuronId{2}, 5, 1, 0});
    SynapticMatrix m(recs, 0, 8);
    EXPECT_EQ(m.size(), 3u);
    EXPECT_EQ(m.find(m.groups()[0], NeuronId{4}).size(), 3u);
}

TEST(Matrix, RejectsForeignTargets)
{
    std::vector<SynapseRecord> recs{{NeuronId{1}, encode_neuron_id(1, 0, 8), 1, 1, 0}};
    EXPECT_ANY_THROW(SynapticMatrix(recs, 0, 8));
}

TEST(Generation, InhibitoryStayInOwnColumnAndExcitatoryCollapseForTinyLambda)
{
    const auto n = spec(4, 4, 0.1, 1e-6);
    const auto b = build(n, 1);
    for (const auto& r : b.matrices[0].records()) {
        const auto s = locate(b.partition.global_id(r.source), n.grid);
        const auto t = locate(b.partition.global_id(r.target), n.grid);
        EXPECT_EQ(s.column, t.column);
    }
    const auto wide = spec(4, 4, 0.1, 0.8);
    const auto bw = build(wide, 1);
    for (const auto& r : bw.matrices[0].records()) {
        const auto s = locate(bw.partition.global_id(r.source), wide.grid);
        if (s.population == Population::I)
            EXPECT_EQ(s.column, locate(bw.partition.global_id(r.target), wide.grid).column);
        EXPECT_NE(r.source, r.target);  // no autapses
    }
}

TEST(Generation, WeightsAndDelays)
{
    auto n = spec(3, 3, 0.2, 0.5);
    n.connectivity.delays.max_delay = 4;
    const auto b = build(n, 1);
    std::map<unsigned, unsigned> delays;
    double sum_ff = 0.0;
    unsigned count_ff = 0;
    for (const auto& r : b.matrices[0].records()) {
        ++delays[r.delay];
        const auto s = locate(b.partition.global_id(r.source), n.grid).population;
        const auto t = locate(b.partition.global_id(r.target), n.grid).population;
        // Signs never flip; tiny excitatory draws may quantize to zero.
        if (s == Population::I)
            EXPECT_LT(r.weight, 0);
        else
            EXPECT_GE(r.weight, 0);
        if (s == Population::F && t == Population::F) {
            sum_ff += r.weight_mv();
            ++count_ff;
        }
    }
    EXPECT_EQ(delays.size(), 4u);
    for (const auto& [d, c] : delays) {
        EXPECT_GE(d, 1u);
        EXPECT_LE(d, 4u);
        EXPECT_NEAR(c, b.recurrent_synapses / 4.0, 5 * std::sqrt(b.recurrent_synapses / 4.0));
    }
    ASSERT_GT(count_ff, 1000u);
    EXPECT_NEAR(sum_ff / count_ff, 0.515, 0.01);
}

TEST(Generation, MeanInDegreeMatchesTarget)
{
    const auto n = spec(8, 8, 0.1, 0.5);
    const auto b = build(n, 1);
    // [target pop][source pop] summed in-degree
    std::array<std::array<double, 3>, 3> indeg{};
    for (const auto& r : b.matrices[0].records()) {
        const auto s = locate(b.partition.global_id(r.source), n.grid).population;
        const auto t = locate(b.partition.global_id(r.target), n.grid).population;
        indeg[index(t)][index(s)] += 1.0;
    }
    for (auto t : kPopulations)
        for (auto s : kPopulations) {
            const double targets = double(n.grid.sizes[t]) * n.grid.column_count();
            // Autapse exclusion removes at most a 1/K share on the diagonal.
            const double lo = s == t ? 0.9 * (n.grid.sizes[s] - 1) : 0.9 * n.grid.sizes[s];
            const double hi = 0.9 * n.grid.sizes[s];
            EXPECT_GE(indeg[index(t)][index(s)] / targets, 0.97 * lo) << population_name(t) << "<-" << population_name(s);
            EXPECT_LE(indeg[index(t)][index(s)] / targets, 1.03 * hi) << population_name(t) << "<-" << population_name(s);
        }
}

TEST(Generation, BinomialMeanForTwoNeuronPopulation)
{
    // K_I = 2 in a single column: each inhibitory source draws Binomial(2, 0.9)
    // targets among the F neurons, so the I->F in-degree has mean 1.8. On the
    // I->I diagonal the source itself is excluded, capping the draw at one target.
    double i_to_f = 0.0, i_to_i = 0.0;
    std::uint64_t f_targets = 0, i_targets = 0;
    for (std::uint64_t seed = 1; seed <= 5000; ++seed) {
        auto n = spec(1, 1, 0.008, 0.4, seed);
        ASSERT_EQ(n.grid.sizes.i, 2u);
        ASSERT_EQ(n.grid.sizes.f, 2u);
        const auto part = partition(n.grid, 1);
        const ConnectivityKernel k(n.grid, n.connectivity);
        const auto out = generate_outgoing(0, n, part, k);
        for (const auto& r : out.by_target_rank[0]) {
            const auto s = locate(part.global_id(r.source), n.grid).population;
            const auto t = locate(part.global_id(r.target), n.grid).population;
            if (s != Population::I) continue;
            if (t == Population::F) i_to_f += 1;
            if (t == Population::I) i_to_i += 1;
        }
        f_targets += 2;
        i_targets += 2;
    }
    const double mean_f = i_to_f / f_targets;
    // Var of the in-degree of one target: 2 * 0.9 * 0.1.
    EXPECT_NEAR(mean_f, 1.8, 3 * std::sqrt(0.18 / f_targets));
    const double mean_i = i_to_i / i_targets;
    EXPECT_NEAR(mean_i, 1.0 - 0.01, 3 * std::sqrt(0.0099 / i_targets));
}

TEST(Generation, PartitionInvariantRecords)
{
    auto n = spec(4, 4, 0.1, 0.5, 11);
    n.connectivity.delays.max_delay = 4;
    const auto one = canonical(build(n, 1));
    for (unsigned r : {2u, 4u, 16u, 32u}) {
        const auto many = canonical(build(n, r));
        EXPECT_EQ(one, many) << r << " ranks";
    }
    EXPECT_EQ(one, canonical(build(n, 4, TransportKind::Threads)));
}

TEST(Generation, LambdaBarelyChangesTotals)
{
    const auto a = count_network(spec(12, 12, 0.1, 0.4), 1);
    const auto b = count_network(spec(12, 12, 0.1, 0.6), 1);
    EXPECT_NEAR(double(a) / double(b), 1.0, 0.01);
}

TEST(Construction, DryRunCountEqualsBuild)
{
    const auto n = spec(6, 6, 0.1, 0.5, 5);
    for (unsigned r : {1u, 4u, 9u}) {
        const auto b = build(n, r);
        EXPECT_EQ(count_network(n, r), b.recurrent_synapses);
        EXPECT_EQ(count_network(n, 1), b.recurrent_synapses);
    }
}

TEST(Construction, SingleRankMovesInMemory)
{
    const auto b = build(spec(3, 3, 0.1, 0.5), 1);
    EXPECT_EQ(b.construction_messages, 0u);
    ASSERT_EQ(b.subsets.size(), 1u);
    EXPECT_EQ(b.subsets[0].outgoing, std::vector<unsigned>{0});
    EXPECT_EQ(b.subsets[0].incoming, std::vector<unsigned>{0});
}

TEST(Construction, SubsetsAndConservation)
{
    const auto n = spec(2, 2, 0.1, 0.4);
    const auto b = build(n, 4);
    for (unsigned r = 0; r < 4; ++r) {
        EXPECT_EQ(b.subsets[r].outgoing, (std::vector<unsigned>{0, 1, 2, 3}));
        EXPECT_EQ(b.subsets[r].incoming, (std::vector<unsigned>{0, 1, 2, 3}));
    }
    std::uint64_t announced = 0, held = 0;
    for (unsigned r = 0; r < 4; ++r) {
        for (auto c : b.incoming_counts[r]) announced += c;
        held += b.matrices[r].size();
    }
    EXPECT_EQ(announced, held);
    EXPECT_EQ(held, b.recurrent_synapses);
    EXPECT_GT(b.construction_messages, 0u);
}

TEST(Construction, PeakHoldsSourceAndTargetCopies)
{
    const auto b = build(spec(4, 4, 0.1, 0.5), 4);
    EXPECT_GE(b.peak_records, 2 * b.recurrent_synapses);
}

TEST(Construction, FarApartTilesDoNotTalk)
{
    // 8x1 columns on 8 ranks with a short kernel: only nearby ranks connect.
    auto n = spec(8, 1, 0.1, 0.2);
    n.connectivity.kernel_floor = 1e-3;
    const auto b = build(n, 8);
    EXPECT_LT(b.subsets[0].outgoing.size(), 8u);
    for (unsigned r = 0; r < 8; ++r)
        for (unsigned q : b.subsets[r].outgoing)
            EXPECT_NE(std::find(b.subsets[q].incoming.begin(), b.subsets[q].incoming.end(), r),
                      b.subsets[q].incoming.end());
}
