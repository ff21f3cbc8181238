#pragma once

// Population rate dynamics of one column in the diffusion approximation:
// Ricciardi's first-passage-time gain function, the input moments it is fed
// with, nullclines, fixed points with their stability and RK4 trajectories.
//
// Rates are in Hz at this interface; moments are per ms.

#include "dpsnn/core_model.hpp"

#include <array>
#include <complex>
#include <vector>

namespace dpsnn {

/// exp(x^2) erfc(x) without overflow.
double erfcx(double x);

/// Stationary LIF rate (Hz) for drift mu (mV/ms) and diffusion sigma2 (mV^2/ms).
/// Adaptation, when present, must already be folded into mu.
double gain_phi(double mu, double sigma2, const NeuronParams& p);

struct Moments {
    double mu = 0.0;
    double sigma2 = 0.0;
};

struct MeanFieldSystem {
    StatePreset preset;
    PopulationSizes sizes;
    double in_degree_fraction = 0.9;
    double j_scale = 1.0;
    double tau_E = 20.0;  // ms
    double tau_I = 10.0;  // ms

    static MeanFieldSystem from_preset(const StatePreset& p) { return {p, {}}; }
    double in_degree(Population s) const { return in_degree_fraction * sizes[s]; }
};

using Rates = std::array<double, 3>;  // F, B, I (Hz)

/// Mean and variance of the input to population t. c_t is its fatigue
/// (ignored for the inhibitory population).
Moments input_moments(const MeanFieldSystem& sys, const Rates& nu, double c_t, Population t);

/// phi_t(nu, c_t) in Hz.
double population_gain(const MeanFieldSystem& sys, const Rates& nu, double c_t, Population t);

/// Full state of the column: rates and the two excitatory fatigues.
struct MeanFieldState {
    Rates nu{};
    std::array<double, 2> c{};  // F, B

    std::array<double, 5> as_array() const { return {nu[0], nu[1], nu[2], c[0], c[1]}; }
    static MeanFieldState from_array(const std::array<double, 5>& a)
    {
        return {{a[0], a[1], a[2]}, {a[3], a[4]}};
    }
};

/// Time derivative of the state (per ms).
std::array<double, 5> mf_rhs(const MeanFieldSystem& sys, const MeanFieldState& s);

/// Fatigue on its nullcline for a given rate.
double c_nullcline(const NeuronParams& p, double nu_hz);

enum class Stability { Stable, Unstable, Saddle };
const char* stability_name(Stability s);

struct FixedPoint {
    MeanFieldState state;
    Stability stability = Stability::Stable;
    std::vector<std::complex<double>> eigenvalues;
    double residual = 0.0;  // max_i |phi_i - nu_i| / max(1, nu_i)
};

struct ScanOptions {
    unsigned rate_points = 120;  // samples per rate axis
    double min_rate = 1e-3;      // smallest non-zero sample (Hz)
};

/// nu-nullcline in the (nu_F, c_F) plane: for each fatigue value the rates
/// nu_F where phi_F = nu_F with B and I at their own stationary rates
/// (B fatigue on its nullcline). Up to three branches per c.
struct NullclinePoint {
    double c;
    double nu_F;
    unsigned branch;
};
std::vector<NullclinePoint> nu_nullcline(const MeanFieldSystem& sys, const std::vector<double>& c_values,
                                         const ScanOptions& opt = {});

std::vector<FixedPoint> fixed_points(const MeanFieldSystem& sys, const ScanOptions& opt = {});

/// Jacobian of mf_rhs by central differences (step h in every coordinate).
std::array<std::array<double, 5>, 5> mf_jacobian(const MeanFieldSystem& sys, const MeanFieldState& s,
                                                 double h = 1e-4);

struct TrajectoryPoint {
    double t_ms;
    MeanFieldState state;
};

/// RK4 of the rate equations; rates clamped at 0. One sample every `stride` steps.
std::vector<TrajectoryPoint> integrate_mf(const MeanFieldSystem& sys, MeanFieldState initial,
                                          double duration_ms, double dt_ms, unsigned stride = 1);

}  // namespace dpsnn
