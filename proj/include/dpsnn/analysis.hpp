#pragma once

// Post-processing of spike logs: binned rates, Welch spectra, the log-MUA
// proxy, Down-to-Up transition fields and wavefront speeds.

#include "dpsnn/grid_topology.hpp"
#include "dpsnn/spike_log.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dpsnn {

enum class Grouping { Global, Population, Column, ColumnPopulation };

/// rate[g * bins + k] is the mean rate (Hz per neuron) of group g in bin k.
struct RateSeries {
    double bin_ms = 5.0;
    double t0_ms = 0.0;
    std::size_t bins = 0;
    Grouping grouping = Grouping::Global;
    std::vector<unsigned> group_size;  // neurons per group
    std::vector<double> rate;

    unsigned groups() const { return static_cast<unsigned>(group_size.size()); }
    std::span<const double> series(unsigned g) const
    {
        return std::span(rate).subspan(std::size_t{g} * bins, bins);
    }
    double bin_center_ms(std::size_t k) const { return t0_ms + (k + 0.5) * bin_ms; }
};

/// Groups: Global 1; Population F,B,I; Column row-major; ColumnPopulation
/// column-major with 3 entries per column. Only spikes in [t0, t1) count.
RateSeries rates(const SpikeLog& log, const GridSpec& grid, double bin_ms, Grouping grouping,
                 double t0_ms, double t1_ms);

/// Population-restricted per-column rates (e.g. F only).
RateSeries column_rates(const SpikeLog& log, const GridSpec& grid, double bin_ms, Population pop,
                        double t0_ms, double t1_ms);

struct Spectrum {
    std::vector<double> freq_hz;
    std::vector<double> power;  // one-sided density, (unit^2)/Hz
    double df = 0.0;
    std::size_t segments = 0;
};

/// Welch: Hann window, `overlap` fraction between segments, each segment
/// mean-removed, one-sided density (integrates to the signal variance).
Spectrum psd_welch(std::span<const double> x, double fs_hz, std::size_t segment, double overlap = 0.5);

/// Frequency of the largest PSD value with f >= f_min.
double dominant_frequency(const Spectrum& s, double f_min_hz = 0.0);
/// Fraction of power (f > 0) at frequencies <= f_hz.
double low_frequency_fraction(const Spectrum& s, double f_hz);

struct LogMuaOptions {
    double noise_variance = 0.5;
    double epsilon_hz = 0.1;   // floor before taking the log
    double down_quantile = 0.1;  // MUA_down = mean of the lowest bins
    std::uint64_t seed = 1;
};

/// log(MUA / MUA_down) + Gaussian noise; `stream` distinguishes columns.
std::vector<double> log_mua(std::span<const double> mua, std::uint32_t stream,
                            const LogMuaOptions& opt = {});

struct Bimodality {
    bool bimodal = false;
    double low_mode = 0.0;
    double high_mode = 0.0;
    double threshold = 0.0;   // midpoint of the two modes
    double separation = 0.0;  // Ashman's D of a two-Gaussian fit
    double low_weight = 0.0;
};

/// Two-component Gaussian mixture fit (EM). Bimodal when Ashman's D > 2 and
/// the lighter component holds at least `min_weight` of the samples.
Bimodality bimodality(std::span<const double> values, double min_weight = 0.05);

struct TransitionOptions {
    double threshold = 0.0;
    unsigned min_up_bins = 3;  // mean over this many bins must stay above threshold
    double window_ms = 500.0;
    double coverage = 0.8;
};

/// T field of one wave; NaN marks columns without a crossing.
struct TransitionField {
    unsigned width = 0, height = 0;
    std::vector<double> T;  // ms, row-major
    double at(unsigned x, unsigned y) const { return T[std::size_t{y} * width + x]; }
};

/// Upward crossing times of one column series (bin-center linear interpolation).
std::vector<double> upward_crossings(std::span<const double> x, double bin_ms, double t0_ms,
                                     const TransitionOptions& opt);

/// field[c * bins + k]: log-MUA of column c. Waves need coverage*columns
/// columns crossing within window_ms of the first crossing.
std::vector<TransitionField> transitions(std::span<const double> field, unsigned width,
                                         unsigned height, std::size_t bins, double bin_ms,
                                         double t0_ms, const TransitionOptions& opt);

/// Same, but refuses data without Up/Down structure.
std::vector<TransitionField> transitions(std::span<const double> field, unsigned width,
                                         unsigned height, std::size_t bins, double bin_ms,
                                         double t0_ms, const Bimodality& modes,
                                         TransitionOptions opt);

struct WaveSpeed {
    std::vector<double> V;  // imd/s per column, NaN where undefined
    double mean_imd_per_s = 0.0;
    double median_imd_per_s = 0.0;
    double mean_mm_per_s = 0.0;  // 0 when no physical scale is given
    std::size_t valid = 0;
};

/// 1 / |grad T| from central differences (one-sided next to edges and holes).
WaveSpeed wave_speed(const TransitionField& T, double imd_mm = 0.0, double eps_grad = 1e-6);

}  // namespace dpsnn
