#include "dpsnn/meanfield.hpp"

#include "dpsnn/errors.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dpsnn {

double erfcx(double x)
{
    if (x < 25.0) return std::exp(x * x) * std::erfc(x);
    // Asymptotic series; at x >= 25 the truncation error is below 1e-15.
    const double r = 1.0 / (2.0 * x * x);
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= 6; ++k) {
        term *= -(2.0 * k - 1.0) * r;
        sum += term;
    }
    return sum / (x * std::sqrt(std::numbers::pi));
}

double gain_phi(double mu, double sigma2, const NeuronParams& p)
{
    if (!(sigma2 > 0.0)) throw NumericalError("gain function needs sigma2 > 0");
    const double s = std::sqrt(sigma2 * p.tau_m);
    const double x_theta = (p.V_theta - p.E - mu * p.tau_m) / s;
    const double x_r = (p.V_r - p.E - mu * p.tau_m) / s;
    // Beyond this the mean first-passage time overflows: the rate is 0.
    if (x_theta > 26.0) return 0.0;
    auto f = [](double u) { return erfcx(-u); };
    double err = 0.0;
    const double integral =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, x_r, x_theta, 20, 1e-8, &err);
    if (!std::isfinite(integral) || err > 1e-7 * std::abs(integral) + 1e-300) {
        std::ostringstream os;
        os << "gain quadrature did not converge: mu=" << mu << " sigma2=" << sigma2
           << " x_r=" << x_r << " x_theta=" << x_theta << " integral=" << integral
           << " error=" << err;
        throw NumericalError(os.str());
    }
    return 1000.0 / (p.tau_arp + p.tau_m * std::sqrt(std::numbers::pi) * integral);
}

Moments input_moments(const MeanFieldSystem& sys, const Rates& nu, double c_t, Population t)
{
    const auto& syn = sys.preset.synapses;
    Moments m;
    for (auto s : kPopulations) {
        const double rate = nu[index(s)];
        if (rate < 0.0) throw NumericalError("negative rate in input moments");
        const double J = syn.applied(t, s) * sys.j_scale;
        const double dJ = syn.spread(t, s) * sys.j_scale;
        const double k = sys.in_degree(s) * rate / 1000.0;
        m.mu += k * J;
        m.sigma2 += k * (J * J + dJ * dJ);
    }
    const ExternalDrive& ext = syn.external[index(t)];
    const double dJ = syn.external_spread(t);
    const double k = ext.N * ext.nu / 1000.0;
    m.mu += k * ext.J;
    m.sigma2 += k * (ext.J * ext.J + dJ * dJ);
    if (is_excitatory(t)) {
        if (c_t < 0.0) throw NumericalError("negative fatigue in input moments");
        m.mu -= sys.preset.neuron(t).adaptation_drive() * c_t;
    }
    return m;
}

double population_gain(const MeanFieldSystem& sys, const Rates& nu, double c_t, Population t)
{
    const Moments m = input_moments(sys, nu, c_t, t);
    return gain_phi(m.mu, m.sigma2, sys.preset.neuron(t));
}

double c_nullcline(const NeuronParams& p, double nu_hz)
{
    if (!p.adaptation) return 0.0;
    return p.adaptation->alpha_c * p.adaptation->tau_c * nu_hz / 1000.0;
}

std::array<double, 5> mf_rhs(const MeanFieldSystem& sys, const MeanFieldState& s)
{
    std::array<double, 5> d{};
    const NeuronParams& exc = sys.preset.excitatory;
    for (int i = 0; i < 2; ++i) {
        const auto pop = kPopulations[i];
        d[i] = (population_gain(sys, s.nu, s.c[i], pop) - s.nu[i]) / sys.tau_E;
        if (exc.adaptation)
            d[3 + i] = -s.c[i] / exc.adaptation->tau_c + exc.adaptation->alpha_c * s.nu[i] / 1000.0;
    }
    d[2] = (population_gain(sys, s.nu, 0.0, Population::I) - s.nu[2]) / sys.tau_I;
    return d;
}

const char* stability_name(Stability s)
{
    switch (s) {
        case Stability::Stable: return "stable";
        case Stability::Unstable: return "unstable";
        case Stability::Saddle: return "saddle";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Stationary solutions. Everything is parametrized by nu_F: for a given nu_F
// the inhibitory rate is the (unique) root of its own equation, and B may
// have several stationary rates, each one a branch.

namespace {

using boost::math::tools::eps_tolerance;
using boost::math::tools::toms748_solve;

double max_rate(const NeuronParams& p) { return 1000.0 / p.tau_arp; }

std::vector<double> rate_grid(const NeuronParams& p, const ScanOptions& opt)
{
    std::vector<double> g{0.0};
    const double hi = 0.999 * max_rate(p);
    const unsigned n = std::max(8u, opt.rate_points);
    for (unsigned k = 0; k < n; ++k)
        g.push_back(opt.min_rate * std::pow(hi / opt.min_rate, double(k) / (n - 1)));
    return g;
}

template <class F>
double refine(F&& f, double a, double b, double fa, double fb)
{
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    std::uintmax_t iters = 200;
    const auto r = toms748_solve(f, a, b, fa, fb, eps_tolerance<double>(48), iters);
    return 0.5 * (r.first + r.second);
}

double solve_I(const MeanFieldSystem& sys, double nu_F, double nu_B)
{
    auto f = [&](double x) { return population_gain(sys, {nu_F, nu_B, x}, 0.0, Population::I) - x; };
    const double hi = max_rate(sys.preset.inhibitory);
    const double f0 = f(0.0);
    if (f0 <= 0.0) return 0.0;
    return refine(f, 0.0, hi, f0, f(hi));
}

struct Slaved {
    double nu_B;
    double nu_I;
};

double b_residual(const MeanFieldSystem& sys, double nu_F, double nu_B, double* nu_I)
{
    const double i = solve_I(sys, nu_F, nu_B);
    if (nu_I) *nu_I = i;
    const double cB = c_nullcline(sys.preset.excitatory, nu_B);
    return population_gain(sys, {nu_F, nu_B, i}, cB, Population::B) - nu_B;
}

std::vector<Slaved> slaved_roots(const MeanFieldSystem& sys, double nu_F,
                                 const std::vector<double>& grid)
{
    std::vector<Slaved> out;
    auto g = [&](double x) { return b_residual(sys, nu_F, x, nullptr); };
    double prev_x = grid[0], prev = g(prev_x);
    if (prev == 0.0) out.push_back({prev_x, solve_I(sys, nu_F, prev_x)});
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double x = grid[k], v = g(x);
        if ((prev > 0.0 && v < 0.0) || (prev < 0.0 && v > 0.0) || (v == 0.0 && prev != 0.0)) {
            const double r = refine(g, prev_x, x, prev, v);
            out.push_back({r, solve_I(sys, nu_F, r)});
        }
        prev_x = x;
        prev = v;
    }
    return out;
}

double f_residual(const MeanFieldSystem& sys, double nu_F, const Slaved& s, double c_F)
{
    return population_gain(sys, {nu_F, s.nu_B, s.nu_I}, c_F, Population::F) - nu_F;
}

// Follows branch k of the slaved B solution at a new nu_F: the root nearest
// the reference B rate.
bool slaved_near(const MeanFieldSystem& sys, double nu_F, double ref_B,
                 const std::vector<double>& grid, Slaved& out)
{
    const auto roots = slaved_roots(sys, nu_F, grid);
    if (roots.empty()) return false;
    out = *std::min_element(roots.begin(), roots.end(), [&](const Slaved& a, const Slaved& b) {
        return std::abs(a.nu_B - ref_B) < std::abs(b.nu_B - ref_B);
    });
    return true;
}

struct ScanSample {
    double nu_F;
    std::vector<Slaved> roots;
};

std::vector<ScanSample> scan(const MeanFieldSystem& sys, const ScanOptions& opt)
{
    const auto gridF = rate_grid(sys.preset.excitatory, opt);
    const auto gridB = rate_grid(sys.preset.excitatory, opt);
    std::vector<ScanSample> out;
    out.reserve(gridF.size());
    for (double f : gridF) out.push_back({f, slaved_roots(sys, f, gridB)});
    return out;
}

// Roots in nu_F of phi_F - nu_F along each branch; c_of(nu_F) gives c_F.
template <class CF>
std::vector<std::pair<double, Slaved>> branch_roots(const MeanFieldSystem& sys,
                                                    const std::vector<ScanSample>& samples,
                                                    const ScanOptions& opt, CF&& c_of,
                                                    std::vector<unsigned>* branch_ids)
{
    const auto gridB = rate_grid(sys.preset.excitatory, opt);
    std::vector<std::pair<double, Slaved>> out;
    for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
        const auto& a = samples[k];
        const auto& b = samples[k + 1];
        if (a.roots.size() != b.roots.size()) continue;
        for (std::size_t j = 0; j < a.roots.size(); ++j) {
            const double ra = f_residual(sys, a.nu_F, a.roots[j], c_of(a.nu_F));
            const double rb = f_residual(sys, b.nu_F, b.roots[j], c_of(b.nu_F));
            const bool at_start = ra == 0.0 && k == 0;
            if (!((ra < 0.0) != (rb < 0.0)) && !at_start) continue;
            if (ra == 0.0 && !at_start) continue;  // counted as the previous interval's end
            double ref = a.roots[j].nu_B;
            auto h = [&](double x) {
                Slaved s;
                if (!slaved_near(sys, x, ref, gridB, s)) return std::nan("");
                return f_residual(sys, x, s, c_of(x));
            };
            double x;
            try {
                x = refine(h, a.nu_F, b.nu_F, ra, rb);
            } catch (const std::exception&) {
                x = 0.5 * (a.nu_F + b.nu_F);
            }
            Slaved s;
            if (!slaved_near(sys, x, ref, gridB, s)) continue;
            out.push_back({x, s});
            if (branch_ids) branch_ids->push_back(static_cast<unsigned>(j));
        }
    }
    return out;
}

}  // namespace

std::vector<NullclinePoint> nu_nullcline(const MeanFieldSystem& sys, const std::vector<double>& c_values,
                                         const ScanOptions& opt)
{
    const auto samples = scan(sys, opt);
    std::vector<NullclinePoint> out;
    for (double c : c_values) {
        if (c < 0.0) throw NumericalError("negative fatigue on nullcline grid");
        const auto roots = branch_roots(sys, samples, opt, [c](double) { return c; }, nullptr);
        unsigned n = 0;
        for (const auto& r : roots) out.push_back({c, r.first, n++});
    }
    return out;
}

std::array<std::array<double, 5>, 5> mf_jacobian(const MeanFieldSystem& sys, const MeanFieldState& s,
                                                 double h)
{
    std::array<std::array<double, 5>, 5> J{};
    const auto x0 = s.as_array();
    for (int j = 0; j < 5; ++j) {
        auto xp = x0, xm = x0;
        double width = 2.0 * h;
        xp[j] += h;
        xm[j] -= h;
        if (xm[j] < 0.0) {  // rates and fatigue cannot go negative: one-sided
            xm[j] = x0[j];
            width = h;
        }
        const auto fp = mf_rhs(sys, MeanFieldState::from_array(xp));
        const auto fm = mf_rhs(sys, MeanFieldState::from_array(xm));
        for (int i = 0; i < 5; ++i) J[i][j] = (fp[i] - fm[i]) / width;
    }
    return J;
}

std::vector<FixedPoint> fixed_points(const MeanFieldSystem& sys, const ScanOptions& opt)
{
    const auto samples = scan(sys, opt);
    const NeuronParams& exc = sys.preset.excitatory;
    const auto roots =
        branch_roots(sys, samples, opt, [&](double f) { return c_nullcline(exc, f); }, nullptr);
    std::vector<FixedPoint> out;
    for (const auto& [nu_F, sl] : roots) {
        FixedPoint fp;
        fp.state.nu = {nu_F, sl.nu_B, sl.nu_I};
        fp.state.c = {c_nullcline(exc, nu_F), c_nullcline(exc, sl.nu_B)};
        double res = 0.0;
        for (auto p : kPopulations) {
            const double c = p == Population::I ? 0.0 : fp.state.c[index(p)];
            const double nu = fp.state.nu[index(p)];
            res = std::max(res, std::abs(population_gain(sys, fp.state.nu, c, p) - nu) / std::max(1.0, nu));
        }
        fp.residual = res;
        const auto J = mf_jacobian(sys, fp.state);
        Eigen::Matrix<double, 5, 5> m;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) m(i, j) = J[i][j];
        Eigen::EigenSolver<Eigen::Matrix<double, 5, 5>> es(m, false);
        int pos = 0, neg = 0;
        for (int i = 0; i < 5; ++i) {
            const auto ev = es.eigenvalues()[i];
            fp.eigenvalues.push_back(ev);
            if (ev.real() > 0.0) ++pos;
            else ++neg;
        }
        fp.stability = pos == 0 ? Stability::Stable : neg == 0 ? Stability::Unstable : Stability::Saddle;
        out.push_back(std::move(fp));
    }
    std::sort(out.begin(), out.end(),
              [](const FixedPoint& a, const FixedPoint& b) { return a.state.nu[0] < b.state.nu[0]; });
    return out;
}

std::vector<TrajectoryPoint> integrate_mf(const MeanFieldSystem& sys, MeanFieldState initial,
                                          double duration_ms, double dt_ms, unsigned stride)
{
    if (!(dt_ms > 0.0) || dt_ms > std::min(sys.tau_E, sys.tau_I) / 10.0)
        throw ConfigError("mean-field step must lie in (0, min(tau_E, tau_I)/10]");
    if (stride == 0) stride = 1;
    using A = std::array<double, 5>;
    auto clamp = [](A x) {
        for (auto& v : x) v = std::max(0.0, v);
        return x;
    };
    auto f = [&](const A& x) { return mf_rhs(sys, MeanFieldState::from_array(clamp(x))); };
    auto axpy = [](const A& x, double a, const A& y) {
        A r;
        for (int i = 0; i < 5; ++i) r[i] = x[i] + a * y[i];
        return r;
    };
    std::vector<TrajectoryPoint> out;
    A x = clamp(initial.as_array());
    const auto steps = static_cast<std::uint64_t>(std::llround(duration_ms / dt_ms));
    out.push_back({0.0, MeanFieldState::from_array(x)});
    for (std::uint64_t k = 1; k <= steps; ++k) {
        const A k1 = f(x);
        const A k2 = f(axpy(x, dt_ms / 2, k1));
        const A k3 = f(axpy(x, dt_ms / 2, k2));
        const A k4 = f(axpy(x, dt_ms, k3));
        for (int i = 0; i < 5; ++i) x[i] += dt_ms / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        x = clamp(x);
        for (double v : x)
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "mean-field integration diverged at t=" << k * dt_ms << " ms, state:";
                for (double w : x) os << ' ' << w;
                throw NumericalError(os.str());
            }
        if (k % stride == 0) out.push_back({k * dt_ms, MeanFieldState::from_array(x)});
    }
    return out;
}

}  // namespace dpsnn
