#include "dpsnn/analysis.hpp"
#include "dpsnn/core_model.hpp"
#include "dpsnn/engine.hpp"
#include "dpsnn/errors.hpp"
#include "dpsnn/harness.hpp"
#include "dpsnn/meanfield.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace dpsnn;

namespace {

SimConfig config_from(const py::kwargs& kw)
{
    SimConfig c;
    for (auto item : kw) {
        auto key = py::str(item.first).cast<std::string>();
        std::string val;
        if (py::isinstance<py::bool_>(item.second))
            val = item.second.cast<bool>() ? "true" : "false";
        else
            val = py::str(item.second).cast<std::string>();
        apply_setting(c, key + "=" + val);
    }
    c.validate();
    return c;
}

py::dict run(const py::kwargs& kw)
{
    const auto cfg = config_from(kw);
    RunResult r;
    {
        py::gil_scoped_release nogil;
        Simulation sim(cfg.network(), cfg.options());
        sim.build();
        r = sim.run(cfg.duration_ms, cfg.transient_ms);
    }
    const auto n = r.spikes.spikes.size();
    py::array_t<std::uint32_t> ids(n);
    py::array_t<double> times(n);
    auto pi = ids.mutable_unchecked<1>();
    auto pt = times.mutable_unchecked<1>();
    for (std::size_t k = 0; k < n; ++k) {
        pi(k) = r.spikes.spikes[k].neuron;
        pt(k) = r.spikes.spikes[k].time_ms;
    }
    const auto m = run_metrics(cfg, r);
    py::dict out;
    out["neuron"] = ids;
    out["time_ms"] = times;
    out["neurons"] = r.neurons;
    out["recurrent_synapses"] = r.recurrent_synapses;
    out["mean_rate_hz"] = m.mean_rate_hz;
    out["equivalent_events_per_s"] = m.equivalent_events_per_s;
    out["config"] = cfg.serialize();
    return out;
}

py::list fixed_points_of(const std::string& name)
{
    const auto sys = MeanFieldSystem::from_preset(preset(name));
    py::list out;
    for (const auto& fp : fixed_points(sys)) {
        py::dict d;
        d["nu"] = fp.state.nu;
        d["c"] = fp.state.c;
        d["stability"] = stability_name(fp.stability);
        d["residual"] = fp.residual;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_dpsnn, m)
{
    py::register_exception<Error>(m, "DpsnnError", PyExc_RuntimeError);

    m.def("run", &run, "Build and simulate a network; keyword arguments are config keys.");
    m.def("config_text", [](const py::kwargs& kw) { return config_from(kw).serialize(); });
    m.def("gain", [](double mu, double sigma2) { return gain_phi(mu, sigma2, NeuronParams{}); },
          py::arg("mu"), py::arg("sigma2"));
    m.def("fixed_points", &fixed_points_of, py::arg("preset"));
    m.def(
        "psd",
        [](const std::vector<double>& x, double fs_hz, std::size_t segment) {
            const auto s = psd_welch(x, fs_hz, segment);
            return py::make_tuple(s.freq_hz, s.power);
        },
        py::arg("x"), py::arg("fs_hz"), py::arg("segment") = 512);
    m.def(
        "bimodality",
        [](const std::vector<double>& v) {
            const auto b = bimodality(v);
            py::dict d;
            d["bimodal"] = b.bimodal;
            d["low_mode"] = b.low_mode;
            d["high_mode"] = b.high_mode;
            d["separation"] = b.separation;
            return d;
        },
        py::arg("values"));
}
