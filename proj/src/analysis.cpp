#include "dpsnn/analysis.hpp"

#include "dpsnn/errors.hpp"
#include "dpsnn/rng.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace dpsnn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t bin_count(double t0, double t1, double bin_ms)
{
    if (!(bin_ms > 0.0)) throw AnalysisError("bin width must be > 0");
    if (t1 < t0) throw AnalysisError("analysis window ends before it starts");
    return static_cast<std::size_t>(std::ceil((t1 - t0) / bin_ms - 1e-9));
}

template <class GroupOf>
RateSeries histogram(const SpikeLog& log, double bin_ms, double t0, double t1, Grouping grouping,
                     std::vector<unsigned> sizes, GroupOf&& group_of)
{
    RateSeries r;
    r.bin_ms = bin_ms;
    r.t0_ms = t0;
    r.bins = bin_count(t0, t1, bin_ms);
    r.grouping = grouping;
    r.group_size = std::move(sizes);
    r.rate.assign(r.group_size.size() * r.bins, 0.0);
    for (const auto& s : log.spikes) {
        if (s.time_ms < t0 || s.time_ms >= t1) continue;
        const auto k = std::min(r.bins - 1, static_cast<std::size_t>((s.time_ms - t0) / bin_ms));
        const long g = group_of(s.neuron);
        if (g < 0) continue;
        r.rate[static_cast<std::size_t>(g) * r.bins + k] += 1.0;
    }
    for (unsigned g = 0; g < r.groups(); ++g) {
        const double norm = r.group_size[g] * bin_ms / 1000.0;
        for (std::size_t k = 0; k < r.bins; ++k) r.rate[std::size_t{g} * r.bins + k] /= norm;
    }
    return r;
}

}  // namespace

RateSeries rates(const SpikeLog& log, const GridSpec& grid, double bin_ms, Grouping grouping,
                 double t0_ms, double t1_ms)
{
    const unsigned cols = grid.column_count();
    std::vector<unsigned> sizes;
    switch (grouping) {
        case Grouping::Global: sizes = {static_cast<unsigned>(grid.neuron_count())}; break;
        case Grouping::Population:
            for (auto p : kPopulations) sizes.push_back(grid.sizes[p] * cols);
            break;
        case Grouping::Column: sizes.assign(cols, grid.sizes.total()); break;
        case Grouping::ColumnPopulation:
            for (unsigned c = 0; c < cols; ++c)
                for (auto p : kPopulations) sizes.push_back(grid.sizes[p]);
            break;
    }
    return histogram(log, bin_ms, t0_ms, t1_ms, grouping, std::move(sizes), [&](std::uint32_t n) -> long {
        const auto loc = locate(n, grid);
        const unsigned c = grid.column_index(loc.column);
        switch (grouping) {
            case Grouping::Global: return 0;
            case Grouping::Population: return static_cast<long>(index(loc.population));
            case Grouping::Column: return c;
            case Grouping::ColumnPopulation: return 3L * c + static_cast<long>(index(loc.population));
        }
        return -1;
    });
}

RateSeries column_rates(const SpikeLog& log, const GridSpec& grid, double bin_ms, Population pop,
                        double t0_ms, double t1_ms)
{
    std::vector<unsigned> sizes(grid.column_count(), grid.sizes[pop]);
    return histogram(log, bin_ms, t0_ms, t1_ms, Grouping::Column, std::move(sizes),
                     [&](std::uint32_t n) -> long {
                         const auto loc = locate(n, grid);
                         return loc.population == pop ? static_cast<long>(grid.column_index(loc.column)) : -1;
                     });
}

// ---------------------------------------------------------------------------

Spectrum psd_welch(std::span<const double> x, double fs_hz, std::size_t segment, double overlap)
{
    if (segment < 4) throw AnalysisError("Welch segment must hold at least 4 samples");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw AnalysisError("overlap must lie in [0, 1)");
    if (x.size() < segment) throw AnalysisError("series shorter than one Welch segment");
    const std::size_t hop = std::max<std::size_t>(1, static_cast<std::size_t>(segment * (1.0 - overlap)));

    std::vector<double> w(segment);
    double w2 = 0.0;
    for (std::size_t n = 0; n < segment; ++n) {
        w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / segment);  // periodic Hann
        w2 += w[n] * w[n];
    }

    const std::size_t nf = segment / 2 + 1;
    double* in = fftw_alloc_real(segment);
    fftw_complex* out = fftw_alloc_complex(nf);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(segment), in, out, FFTW_ESTIMATE);

    Spectrum s;
    s.df = fs_hz / segment;
    s.freq_hz.resize(nf);
    s.power.assign(nf, 0.0);
    for (std::size_t k = 0; k < nf; ++k) s.freq_hz[k] = k * s.df;
    for (std::size_t start = 0; start + segment <= x.size(); start += hop) {
        const double mean = std::accumulate(x.begin() + start, x.begin() + start + segment, 0.0) / segment;
        for (std::size_t n = 0; n < segment; ++n) in[n] = (x[start + n] - mean) * w[n];
        fftw_execute(plan);
        for (std::size_t k = 0; k < nf; ++k) {
            double p = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) / (fs_hz * w2);
            const bool edge = k == 0 || (segment % 2 == 0 && k == nf - 1);
            if (!edge) p *= 2.0;
            s.power[k] += p;
        }
        ++s.segments;
    }
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
    for (auto& p : s.power) p /= static_cast<double>(s.segments);
    return s;
}

double dominant_frequency(const Spectrum& s, double f_min_hz)
{
    double best = -1.0, f = kNaN;
    for (std::size_t k = 1; k < s.power.size(); ++k) {
        if (s.freq_hz[k] < f_min_hz) continue;
        if (s.power[k] > best) {
            best = s.power[k];
            f = s.freq_hz[k];
        }
    }
    return f;
}

double low_frequency_fraction(const Spectrum& s, double f_hz)
{
    double low = 0.0, total = 0.0;
    for (std::size_t k = 1; k < s.power.size(); ++k) {
        total += s.power[k];
        if (s.freq_hz[k] <= f_hz) low += s.power[k];
    }
    return total > 0.0 ? low / total : 0.0;
}

// ---------------------------------------------------------------------------

std::vector<double> log_mua(std::span<const double> mua, std::uint32_t stream, const LogMuaOptions& opt)
{
    if (mua.empty()) throw AnalysisError("empty MUA series");
    if (std::all_of(mua.begin(), mua.end(), [](double v) { return v == 0.0; }))
        throw AnalysisError("all-zero MUA series: no Down state can be estimated");
    std::vector<double> sorted(mua.begin(), mua.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n_low = std::max<std::size_t>(1, static_cast<std::size_t>(opt.down_quantile * sorted.size()));
    const double down = std::max(
        opt.epsilon_hz, std::accumulate(sorted.begin(), sorted.begin() + n_low, 0.0) / n_low);

    std::vector<double> out(mua.size());
    KeyedStream rng(opt.seed, StreamDomain::MuaNoise, stream);
    std::normal_distribution<double> noise(0.0, std::sqrt(opt.noise_variance));
    for (std::size_t k = 0; k < mua.size(); ++k) {
        out[k] = std::log(std::max(mua[k], opt.epsilon_hz) / down);
        if (opt.noise_variance > 0.0) out[k] += noise(rng);
    }
    return out;
}

Bimodality bimodality(std::span<const double> values, double min_weight)
{
    Bimodality b;
    const std::size_t n = values.size();
    if (n < 10) return b;
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    // Start from the lower and upper quartiles.
    double m1 = v[n / 4], m2 = v[(3 * n) / 4];
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= n;
    if (var <= 0.0) return b;
    double s1 = var, s2 = var, w1 = 0.5;
    std::vector<double> r(n);
    for (int it = 0; it < 500; ++it) {
        double sw = 0.0, a1 = 0.0, a2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p1 = w1 * std::exp(-0.5 * (v[i] - m1) * (v[i] - m1) / s1) / std::sqrt(s1);
            const double p2 = (1 - w1) * std::exp(-0.5 * (v[i] - m2) * (v[i] - m2) / s2) / std::sqrt(s2);
            r[i] = p1 + p2 > 0.0 ? p1 / (p1 + p2) : (std::abs(v[i] - m1) < std::abs(v[i] - m2) ? 1.0 : 0.0);
            sw += r[i];
            a1 += r[i] * v[i];
            a2 += (1 - r[i]) * v[i];
        }
        if (sw < 1e-9 || n - sw < 1e-9) break;
        const double nm1 = a1 / sw, nm2 = a2 / (n - sw);
        double q1 = 0.0, q2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            q1 += r[i] * (v[i] - nm1) * (v[i] - nm1);
            q2 += (1 - r[i]) * (v[i] - nm2) * (v[i] - nm2);
        }
        const double floor = 1e-6 * var;
        const double ns1 = std::max(floor, q1 / sw), ns2 = std::max(floor, q2 / (n - sw));
        const double nw1 = sw / n;
        const bool done = std::abs(nm1 - m1) + std::abs(nm2 - m2) < 1e-10 * (1 + std::abs(m1) + std::abs(m2));
        m1 = nm1, m2 = nm2, s1 = ns1, s2 = ns2, w1 = nw1;
        if (done) break;
    }
    if (m1 > m2) {
        std::swap(m1, m2);
        std::swap(s1, s2);
        w1 = 1 - w1;
    }
    b.low_mode = m1;
    b.high_mode = m2;
    b.threshold = 0.5 * (m1 + m2);
    b.separation = std::sqrt(2.0) * std::abs(m2 - m1) / std::sqrt(s1 + s2);
    b.low_weight = w1;
    b.bimodal = b.separation > 2.0 && std::min(w1, 1 - w1) >= min_weight;
    return b;
}

// ---------------------------------------------------------------------------

std::vector<double> upward_crossings(std::span<const double> x, double bin_ms, double t0_ms,
                                     const TransitionOptions& opt)
{
    std::vector<double> out;
    const std::size_t m = std::max(1u, opt.min_up_bins);
    const double thr = opt.threshold;
    auto window_mean = [&](std::size_t k) {
        const std::size_t end = std::min(x.size(), k + m);
        double s = 0.0;
        for (std::size_t j = k; j < end; ++j) s += x[j];
        return s / static_cast<double>(end - k);
    };
    bool up = !x.empty() && window_mean(0) >= thr;
    for (std::size_t k = 1; k < x.size(); ++k) {
        if (!up) {
            if (x[k] >= thr && x[k - 1] < thr && k + m <= x.size() && window_mean(k) >= thr) {
                const double frac = (thr - x[k - 1]) / (x[k] - x[k - 1]);
                out.push_back(t0_ms + (k - 1 + 0.5 + frac) * bin_ms);
                up = true;
            }
        } else if (x[k] < thr && window_mean(k) < thr) {
            up = false;
        }
    }
    return out;
}

std::vector<TransitionField> transitions(std::span<const double> field, unsigned width,
                                         unsigned height, std::size_t bins, double bin_ms,
                                         double t0_ms, const TransitionOptions& opt)
{
    const std::size_t cols = std::size_t{width} * height;
    if (field.size() != cols * bins) throw AnalysisError("log-MUA field size does not match the grid");
    struct Crossing {
        double t;
        unsigned column;
        bool used;
    };
    std::vector<Crossing> events;
    for (unsigned c = 0; c < cols; ++c)
        for (double t : upward_crossings(field.subspan(std::size_t{c} * bins, bins), bin_ms, t0_ms, opt))
            events.push_back({t, c, false});
    std::sort(events.begin(), events.end(), [](const Crossing& a, const Crossing& b) {
        return a.t != b.t ? a.t < b.t : a.column < b.column;
    });

    std::vector<TransitionField> waves;
    const auto needed = static_cast<std::size_t>(std::ceil(opt.coverage * cols - 1e-9));
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].used) continue;
        const double start = events[i].t;
        std::vector<std::size_t> pick(cols, SIZE_MAX);
        std::size_t got = 0;
        for (std::size_t j = i; j < events.size() && events[j].t < start + opt.window_ms; ++j) {
            if (events[j].used || pick[events[j].column] != SIZE_MAX) continue;
            pick[events[j].column] = j;
            ++got;
        }
        if (got < needed) continue;
        TransitionField f{width, height, std::vector<double>(cols, kNaN)};
        for (unsigned c = 0; c < cols; ++c)
            if (pick[c] != SIZE_MAX) {
                f.T[c] = events[pick[c]].t;
                events[pick[c]].used = true;
            }
        waves.push_back(std::move(f));
    }
    return waves;
}

std::vector<TransitionField> transitions(std::span<const double> field, unsigned width,
                                         unsigned height, std::size_t bins, double bin_ms,
                                         double t0_ms, const Bimodality& modes,
                                         TransitionOptions opt)
{
    if (!modes.bimodal) throw AnalysisError("no SW structure detected (log-MUA is unimodal)");
    opt.threshold = modes.threshold;
    return transitions(field, width, height, bins, bin_ms, t0_ms, opt);
}

WaveSpeed wave_speed(const TransitionField& T, double imd_mm, double eps_grad)
{
    const unsigned W = T.width, H = T.height;
    if (W < 3 || H < 3) throw AnalysisError("wave speed needs at least a 3x3 transition field");
    auto valid = [&](long x, long y) {
        return x >= 0 && y >= 0 && x < long(W) && y < long(H) && std::isfinite(T.at(x, y));
    };
    auto deriv = [&](long x, long y, long dx, long dy, double& out) {
        const bool p = valid(x + dx, y + dy), m = valid(x - dx, y - dy);
        const double c = T.at(x, y);
        if (p && m) out = (T.at(x + dx, y + dy) - T.at(x - dx, y - dy)) / 2.0;
        else if (p) out = T.at(x + dx, y + dy) - c;
        else if (m) out = c - T.at(x - dx, y - dy);
        else return false;
        return true;
    };
    WaveSpeed ws;
    ws.V.assign(std::size_t{W} * H, kNaN);
    std::vector<double> good;
    for (unsigned y = 0; y < H; ++y)
        for (unsigned x = 0; x < W; ++x) {
            if (!valid(x, y)) continue;
            double gx, gy;
            if (!deriv(x, y, 1, 0, gx) || !deriv(x, y, 0, 1, gy)) continue;
            const double g = std::hypot(gx, gy);  // ms per imd
            if (g < eps_grad) continue;
            const double v = 1000.0 / g;  // imd per s
            ws.V[std::size_t{y} * W + x] = v;
            good.push_back(v);
        }
    ws.valid = good.size();
    if (good.size() < 4) throw AnalysisError("fewer than 4 positions with a defined wave speed");
    ws.mean_imd_per_s = std::accumulate(good.begin(), good.end(), 0.0) / good.size();
    std::nth_element(good.begin(), good.begin() + good.size() / 2, good.end());
    ws.median_imd_per_s = good[good.size() / 2];
    ws.mean_mm_per_s = imd_mm > 0.0 ? ws.mean_imd_per_s * imd_mm : 0.0;
    return ws;
}

}  // namespace dpsnn
