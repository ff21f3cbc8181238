#pragma once

// Brute-force reference models shared by the unit tests and the acceptance
// runner. Deliberately naive: small fixed steps, no closed forms.

#include "dpsnn/core_model.hpp"
#include "dpsnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace dpsnn::oracle {

struct ScriptEvent {
    double t;
    double J;
};

struct EulerResult {
    std::vector<double> spikes;
    std::vector<double> v_at_events;  // membrane just before each jump
};

// Explicit Euler of one LIF+SFA neuron driven by a scripted event list. Steps
// are shortened to land exactly on event times and on the end of refractoriness.
inline EulerResult euler_neuron(const NeuronParams& p, double V0, const std::vector<ScriptEvent>& script,
                                double dt)
{
    EulerResult out;
    double V = V0, c = 0.0, t = 0.0, refr = -1.0;
    const double g = p.adaptation_drive();
    const double tau_c = p.adaptation ? p.adaptation->tau_c : 1.0;
    for (const auto& e : script) {
        while (t < e.t) {
            double h = std::min(dt, e.t - t);
            if (t < refr) h = std::min(h, refr - t);
            if (t < refr)
                V = p.V_r;
            else
                V += h * (-(V - p.E) / p.tau_m - g * c);
            c += h * (-c / tau_c);
            t += h;
        }
        out.v_at_events.push_back(V);
        if (t < refr) continue;
        V += e.J;
        if (V > p.V_theta) {
            out.spikes.push_back(t);
            V = p.V_r;
            if (p.adaptation) c += p.adaptation->alpha_c;
            refr = t + p.tau_arp;
        }
    }
    return out;
}

// Rate (Hz) of one LIF without adaptation under white-noise input with drift
// mu (mV/ms) and diffusion sigma2 (mV^2/ms), Euler-Maruyama with a Brownian
// bridge test for threshold crossings inside a step.
inline double monte_carlo_rate(const NeuronParams& p, double mu, double sigma2, double duration_ms, double dt,
                               std::uint64_t seed)
{
    KeyedStream rng(seed, StreamDomain::Test, 0x6a1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sd = std::sqrt(sigma2 * dt);
    const auto steps = static_cast<std::uint64_t>(duration_ms / dt);
    const auto refr_steps = static_cast<std::uint64_t>(std::llround(p.tau_arp / dt));
    double V = p.V_r;
    std::uint64_t spikes = 0, hold = 0;
    for (std::uint64_t k = 0; k < steps; ++k) {
        if (hold > 0) {
            --hold;
            continue;
        }
        const double next = V + dt * (-(V - p.E) / p.tau_m + mu) + sd * gauss(rng);
        bool crossed = next >= p.V_theta;
        if (!crossed) {
            const double a = p.V_theta - V, b = p.V_theta - next;
            crossed = rng.uniform() < std::exp(-2.0 * a * b / (sigma2 * dt));
        }
        if (crossed) {
            ++spikes;
            V = p.V_r;
            hold = refr_steps;
        } else {
            V = next;
        }
    }
    return 1000.0 * static_cast<double>(spikes) / duration_ms;
}

}  // namespace dpsnn::oracle
