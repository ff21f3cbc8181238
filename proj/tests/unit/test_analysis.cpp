#include "dpsnn/analysis.hpp"
#include "dpsnn/errors.hpp"
#include "dpsnn/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace dpsnn;

namespace {

GridSpec grid(unsigned w, unsigned h, PopulationSizes sizes = {100, 300, 100})
{
    GridSpec g;
    g.width = w;
    g.height = h;
    g.sizes = sizes;
    return g;
}

double variance(std::span<const double> x)
{
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double v = 0.0;
    for (double a : x) v += (a - m) * (a - m);
    return v / x.size();
}

double integrate(const Spectrum& s)
{
    double total = 0.0;
    for (double p : s.power) total += p * s.df;
    return total;
}

// log-MUA field of a planar wave moving along x: column (x, y) jumps from the
// Down level to the Up level at T = t_first + x / v_imd_per_ms.
std::vector<double> planar_field(unsigned W, unsigned H, std::size_t bins, double bin_ms, double t_first,
                                 double v_imd_per_ms)
{
    std::vector<double> f(std::size_t{W} * H * bins, 0.0);
    for (unsigned y = 0; y < H; ++y)
        for (unsigned x = 0; x < W; ++x)
            for (std::size_t k = 0; k < bins; ++k) {
                const double t = (k + 0.5) * bin_ms;
                f[(std::size_t{y} * W + x) * bins + k] = t >= t_first + x / v_imd_per_ms ? 3.0 : 0.0;
            }
    return f;
}

}  // namespace

TEST(Rates, TenSpikesInOneBin)
{
    const auto g = grid(1, 1);
    SpikeLog log;
    for (std::uint32_t n = 0; n < 10; ++n) log.spikes.push_back({n, 1.0 + 0.1 * n});
    const auto r = rates(log, g, 5.0, Grouping::Population, 0.0, 20.0);
    ASSERT_EQ(r.bins, 4u);
    EXPECT_DOUBLE_EQ(r.series(0)[0], 20.0);
    EXPECT_DOUBLE_EQ(r.series(0)[1], 0.0);
    EXPECT_DOUBLE_EQ(r.series(1)[0], 0.0);
}

TEST(Rates, EmptyLogGivesZeros)
{
    const auto r = rates(SpikeLog{}, grid(2, 2), 5.0, Grouping::ColumnPopulation, 0.0, 100.0);
    EXPECT_EQ(r.groups(), 12u);
    EXPECT_EQ(r.bins, 20u);
    for (double v : r.rate) EXPECT_EQ(v, 0.0);
}

TEST(Rates, ConserveSpikeCount)
{
    const auto g = grid(3, 2);
    KeyedStream rng(1, StreamDomain::Test, 3);
    SpikeLog log;
    for (int k = 0; k < 5000; ++k)
        log.spikes.push_back({static_cast<std::uint32_t>(rng() % g.neuron_count()), 1000.0 * rng.uniform()});
    log.sort();
    for (auto grouping : {Grouping::Global, Grouping::Population, Grouping::Column, Grouping::ColumnPopulation}) {
        const auto r = rates(log, g, 5.0, grouping, 0.0, 1000.0);
        double total = 0.0;
        for (unsigned gr = 0; gr < r.groups(); ++gr)
            for (double v : r.series(gr)) total += v * r.group_size[gr] * r.bin_ms / 1000.0;
        EXPECT_NEAR(total, 5000.0, 1e-6);
    }
    const auto f = column_rates(log, g, 5.0, Population::F, 0.0, 1000.0);
    double fsum = 0.0;
    for (unsigned gr = 0; gr < f.groups(); ++gr)
        for (double v : f.series(gr)) fsum += v * f.group_size[gr] * f.bin_ms / 1000.0;
    std::size_t fcount = 0;
    for (const auto& s : log.spikes) fcount += locate(s.neuron, g).population == Population::F;
    EXPECT_NEAR(fsum, double(fcount), 1e-6);
}

TEST(Rates, WindowBoundsAreHalfOpen)
{
    const auto g = grid(1, 1);
    SpikeLog log;
    log.spikes = {{0, 10.0}, {0, 20.0}};
    const auto r = rates(log, g, 5.0, Grouping::Global, 10.0, 20.0);
    EXPECT_DOUBLE_EQ(r.series(0)[0] * g.neuron_count() * 0.005, 1.0);
    EXPECT_DOUBLE_EQ(r.series(0)[1], 0.0);
    EXPECT_THROW(rates(log, g, 0.0, Grouping::Global, 0.0, 1.0), AnalysisError);
}

TEST(Welch, SinePeaksAtItsFrequency)
{
    std::vector<double> x(4000);
    for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2 * std::numbers::pi * 10.0 * n / 200.0);
    const auto s = psd_welch(x, 200.0, 400);
    EXPECT_DOUBLE_EQ(s.df, 0.5);
    EXPECT_DOUBLE_EQ(dominant_frequency(s), 10.0);
    EXPECT_EQ(s.segments, 19u);
    EXPECT_NEAR(integrate(s), variance(x), 0.01 * variance(x));
}

TEST(Welch, ParsevalOnNoiseAndMixtures)
{
    KeyedStream rng(2, StreamDomain::Test, 1);
    std::normal_distribution<double> g(0.0, 2.0);
    std::vector<double> x(1 << 16);
    for (std::size_t n = 0; n < x.size(); ++n) x[n] = 5.0 + g(rng) + 3.0 * std::cos(0.3 * n);
    const auto s = psd_welch(x, 1000.0, 1024);
    EXPECT_NEAR(integrate(s), variance(x), 0.01 * variance(x));
}

TEST(Welch, WhiteNoiseIsFlat)
{
    KeyedStream rng(4, StreamDomain::Test, 2);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(1 << 17);
    for (auto& v : x) v = g(rng);
    const double fs = 100.0;
    const auto s = psd_welch(x, fs, 256);
    // Expected density 2 sigma^2 / fs; each bin averages ~1000 segments (about
    // half independent), so a 5-sigma band is roughly +-25%.
    const double expect = 2.0 / fs;
    for (std::size_t k = 2; k + 1 < s.power.size(); ++k) EXPECT_NEAR(s.power[k], expect, 0.25 * expect) << k;
    EXPECT_NEAR(low_frequency_fraction(s, fs / 4), 0.5, 0.05);
}

TEST(Welch, RejectsShortSeries)
{
    std::vector<double> x(100, 1.0);
    EXPECT_THROW(psd_welch(x, 200.0, 128), AnalysisError);
    EXPECT_THROW(psd_welch(x, 200.0, 64, 1.0), AnalysisError);
}

TEST(LogMua, ReferenceLevels)
{
    LogMuaOptions quiet;
    quiet.noise_variance = 0.0;
    std::vector<double> flat(50, 4.0);
    for (double v : log_mua(flat, 0, quiet)) EXPECT_NEAR(v, 0.0, 1e-12);
    // Down bins at 2 Hz (more than a decile), the rest at e * 2 Hz.
    std::vector<double> two(100, 2.0 * std::numbers::e);
    for (int k = 0; k < 20; ++k) two[k] = 2.0;
    const auto out = log_mua(two, 0, quiet);
    EXPECT_NEAR(out[0], 0.0, 1e-12);
    EXPECT_NEAR(out[50], 1.0, 1e-12);
}

TEST(LogMua, NoiseHasRequestedVariance)
{
    std::vector<double> flat(20000, 4.0);
    const auto out = log_mua(flat, 7);
    EXPECT_NEAR(variance(out), 0.5, 0.03);
    EXPECT_NE(log_mua(flat, 8)[0], out[0]);
    EXPECT_EQ(log_mua(flat, 7), out);
}

TEST(LogMua, AllZeroIsAnError)
{
    std::vector<double> zero(30, 0.0);
    EXPECT_THROW(log_mua(zero, 0), AnalysisError);
}

TEST(Bimodality, SeparatesTwoGaussians)
{
    KeyedStream rng(9, StreamDomain::Test, 4);
    std::normal_distribution<double> down(0.0, 0.7), up(4.0, 0.7);
    std::vector<double> x;
    for (int k = 0; k < 3000; ++k) x.push_back(k % 3 == 0 ? up(rng) : down(rng));
    const auto b = bimodality(x);
    EXPECT_TRUE(b.bimodal);
    EXPECT_NEAR(b.low_mode, 0.0, 0.1);
    EXPECT_NEAR(b.high_mode, 4.0, 0.1);
    EXPECT_NEAR(b.threshold, 2.0, 0.1);
    EXPECT_NEAR(b.low_weight, 2.0 / 3.0, 0.03);
}

TEST(Bimodality, SingleGaussianIsUnimodal)
{
    KeyedStream rng(10, StreamDomain::Test, 4);
    std::normal_distribution<double> g(1.0, 0.7);
    std::vector<double> x(3000);
    for (auto& v : x) v = g(rng);
    EXPECT_FALSE(bimodality(x).bimodal);
    EXPECT_FALSE(bimodality(std::vector<double>(100, 2.0)).bimodal);
}

TEST(Transitions, PlanarWaveRecoveredWithinOneBin)
{
    const unsigned W = 6, H = 4;
    const double bin = 5.0, v = 0.1;  // imd per ms
    const std::size_t bins = 400;
    const auto f = planar_field(W, H, bins, bin, 300.0, v);
    TransitionOptions opt;
    opt.threshold = 1.5;
    const auto waves = transitions(f, W, H, bins, bin, 0.0, opt);
    ASSERT_EQ(waves.size(), 1u);
    for (unsigned y = 0; y < H; ++y)
        for (unsigned x = 0; x < W; ++x) EXPECT_NEAR(waves[0].at(x, y), 300.0 + x / v, bin) << x << "," << y;
}

TEST(Transitions, MissingColumnMarkedNaN)
{
    const unsigned W = 5, H = 5;
    const std::size_t bins = 200;
    auto f = planar_field(W, H, bins, 5.0, 100.0, 0.2);
    for (std::size_t k = 0; k < bins; ++k) f[(2 * W + 2) * bins + k] = 0.0;  // centre never goes Up
    TransitionOptions opt;
    opt.threshold = 1.5;
    const auto waves = transitions(f, W, H, bins, 5.0, 0.0, opt);
    ASSERT_EQ(waves.size(), 1u);
    EXPECT_TRUE(std::isnan(waves[0].at(2, 2)));
    const auto speed = wave_speed(waves[0]);
    EXPECT_TRUE(std::isnan(speed.V[2 * W + 2]));
    EXPECT_EQ(speed.valid, W * H - 1);
    EXPECT_NEAR(speed.mean_imd_per_s, 200.0, 200.0 * 0.05);
}

TEST(Transitions, GlobalJumpGivesEqualTimes)
{
    const unsigned W = 4, H = 3;
    const std::size_t bins = 100;
    const auto f = planar_field(W, H, bins, 5.0, 200.0, 1e12);
    TransitionOptions opt;
    opt.threshold = 1.5;
    const auto waves = transitions(f, W, H, bins, 5.0, 0.0, opt);
    ASSERT_EQ(waves.size(), 1u);
    for (double t : waves[0].T) EXPECT_DOUBLE_EQ(t, waves[0].T[0]);
}

TEST(Transitions, ShortFlickersAreNotWaves)
{
    std::vector<double> x(100, 0.0);
    x[20] = 3.0;  // one bin above threshold
    for (int k = 50; k < 80; ++k) x[k] = 3.0;
    TransitionOptions opt;
    opt.threshold = 1.5;
    const auto t = upward_crossings(x, 5.0, 0.0, opt);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_NEAR(t[0], 250.0, 5.0);
}

TEST(Transitions, UnimodalDataIsRejected)
{
    const auto f = planar_field(3, 3, 50, 5.0, 100.0, 1.0);
    Bimodality flat;
    try {
        transitions(f, 3, 3, 50, 5.0, 0.0, flat, {});
        FAIL();
    } catch (const AnalysisError& e) {
        EXPECT_NE(std::string(e.what()).find("no SW structure detected"), std::string::npos);
    }
}

TEST(WaveSpeed, LinearFieldsAreExact)
{
    const unsigned W = 7, H = 5;
    TransitionField T{W, H, std::vector<double>(W * H)};
    const double v = 0.04;  // imd per ms
    for (unsigned y = 0; y < H; ++y)
        for (unsigned x = 0; x < W; ++x) T.T[y * W + x] = x / v;
    auto s = wave_speed(T, 0.4);
    for (double val : s.V) EXPECT_NEAR(val, 1000.0 * v, 1e-6 * 1000.0 * v);
    EXPECT_NEAR(s.mean_mm_per_s, 40.0 * 0.4, 1e-9);

    for (unsigned y = 0; y < H; ++y)
        for (unsigned x = 0; x < W; ++x) T.T[y * W + x] = double(x) + double(y);
    s = wave_speed(T);
    for (double val : s.V) EXPECT_NEAR(val, 1000.0 / std::sqrt(2.0), 1e-6);
    EXPECT_EQ(s.mean_mm_per_s, 0.0);
}

TEST(WaveSpeed, NeedsEnoughValidPoints)
{
    const double nan = std::numeric_limits<double>::quiet_NaN();
    TransitionField T{3, 3, std::vector<double>(9, nan)};
    T.T[0] = 0.0;
    T.T[1] = 1.0;
    T.T[3] = 1.0;
    EXPECT_THROW(wave_speed(T), AnalysisError);
    TransitionField flat{3, 3, std::vector<double>(9, 5.0)};
    EXPECT_THROW(wave_speed(flat), AnalysisError);
    TransitionField small{2, 2, std::vector<double>(4, 1.0)};
    EXPECT_THROW(wave_speed(small), AnalysisError);
}
