#include "dpsnn/engine.hpp"

#include "dpsnn/errors.hpp"
#include "dpsnn/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace dpsnn {

void evolve_free(NeuronState& s, const NeuronParams& p, double dt)
{
    if (dt <= 0.0) return;
    const double em = std::exp(-dt / p.tau_m);
    double v = p.E + (s.V - p.E) * em;
    if (p.adaptation && s.c != 0.0) {
        // V'=-(V-E)/tau_m - (g_c/C_m) c,  c'=-c/tau_c, solved exactly.
        const double x = 1.0 / p.tau_m - 1.0 / p.adaptation->tau_c;
        const double xd = x * dt;
        // int_0^dt e^{-(dt-u)/tau_m} e^{-u/tau_c} du; the expm1 form near tau_c = tau_m,
        // the plain difference elsewhere (em * expm1(xd) would be 0 * inf for long dt).
        double kernel;
        if (xd == 0.0)
            kernel = em * dt;
        else if (std::abs(xd) < 1.0)
            kernel = em * dt * std::expm1(xd) / xd;
        else
            kernel = (std::exp(-dt / p.adaptation->tau_c) - em) / x;
        v -= p.adaptation_drive() * s.c * kernel;
        s.c *= std::exp(-dt / p.adaptation->tau_c);
    }
    s.V = v;
}

void advance_to(NeuronState& s, const NeuronParams& p, double t)
{
    if (t <= s.last_update) return;
    if (s.last_update < s.refractory_until) {
        const double until = std::min(t, s.refractory_until);
        if (p.adaptation) s.c *= std::exp(-(until - s.last_update) / p.adaptation->tau_c);
        s.V = p.V_r;
        s.last_update = until;
    }
    evolve_free(s, p, t - s.last_update);
    s.last_update = t;
}

EventOutcome apply_event(NeuronState& s, const NeuronParams& p, double amplitude, double t)
{
    if (t < s.last_update) throw NumericalError("event at t=" + std::to_string(t) +
                                                " precedes neuron state time " +
                                                std::to_string(s.last_update));
    advance_to(s, p, t);
    EventOutcome out;
    if (t < s.refractory_until) {
        out.discarded = true;
        return out;
    }
    s.V += amplitude;
    if (s.V > p.V_theta) {
        out.spiked = true;
        s.V = p.V_r;
        if (p.adaptation) s.c += p.adaptation->alpha_c;
        s.refractory_until = t + p.tau_arp;
    }
    return out;
}

std::vector<SynapticEvent> external_events(std::uint32_t global_id, std::uint64_t step,
                                           const ExternalDrive& drive, double relative_spread,
                                           std::uint64_t seed)
{
    std::vector<SynapticEvent> out;
    const double mean = drive.N * drive.nu * kCommStepMs / 1000.0;
    if (mean <= 0.0) return out;
    KeyedStream rng(seed, StreamDomain::External, global_id, static_cast<std::uint32_t>(step),
                    static_cast<std::uint32_t>(step >> 32));
    const unsigned n = std::poisson_distribution<unsigned>(mean)(rng);
    out.reserve(n);
    std::normal_distribution<double> amp(drive.J, relative_spread * std::abs(drive.J));
    for (unsigned k = 0; k < n; ++k) {
        const double t = static_cast<double>(step) * kCommStepMs + rng.uniform() * kCommStepMs;
        out.push_back({t, amp(rng), k, 1});
    }
    return out;
}

// ---------------------------------------------------------------------------

RankEngine::RankEngine(unsigned rank, const NetworkSpec& net, const PartitionMap& part,
                       SynapticMatrix matrix, OutgoingSynapses axons)
    : rank_(rank),
      net_(net),
      part_(part),
      matrix_(std::move(matrix)),
      axons_(std::move(axons)),
      delays_(std::max(1u, net.connectivity.delays.max_delay))
{
    if (matrix_.max_delay() > delays_.max_delay())
        throw ConfigError("synaptic matrix holds delays beyond the configured maximum");
    const unsigned n = part.tile(rank).neuron_count;
    state_.resize(n);
    gid_.resize(n);
    population_.resize(n);
    queues_.resize(n);
    for (unsigned l = 0; l < n; ++l) {
        gid_[l] = part.global_id_of(rank, l);
        population_[l] = locate(gid_[l], part.grid()).population;
        const NeuronParams& p = net.state.neuron(population_[l]);
        // Membrane potentials start spread over [E, V_theta).
        KeyedStream rng(net.seed, StreamDomain::Initial, gid_[l]);
        state_[l].V = p.E + rng.uniform() * (p.V_theta - p.E);
    }
}

void RankEngine::ingest(std::uint64_t step, std::vector<AerSpike> local,
                        std::vector<AxonalSpikeBatch> remote)
{
    std::vector<QueuedSpike> spikes;
    std::size_t n = local.size();
    for (const auto& b : remote) n += b.spikes.size();
    if (step == 0) {
        if (n != 0) throw ProtocolError("spikes received before the first step");
        return;
    }
    spikes.reserve(n);
    auto add = [&](const AerSpike& s) {
        spikes.push_back({s.source, part_.global_id(s.source), s.time_ms});
    };
    for (const auto& s : local) add(s);
    for (const auto& b : remote) {
        if (b.step != step - 1)
            throw ProtocolError("batch for step " + std::to_string(b.step) + " ingested at step " +
                                std::to_string(step));
        for (const auto& s : b.spikes) add(s);
    }
    std::sort(spikes.begin(), spikes.end(), [](const QueuedSpike& a, const QueuedSpike& b) {
        return a.source != b.source ? a.source < b.source : a.time_ms < b.time_ms;
    });
    delays_.store(step - 1, std::move(spikes));
}

PackedSpikes RankEngine::compute(std::uint64_t step)
{
    const std::uint32_t mask = (std::uint32_t{1} << part_.bits_for_local()) - 1;
    for (const auto& g : matrix_.groups()) {
        if (step < g.delay) continue;
        const auto spikes = delays_.emitted_at(step - g.delay);
        if (spikes.empty()) continue;
        const double d = g.delay * kCommStepMs;
        demux(spikes, matrix_.group(g), [&](const SynapseRecord& r, const QueuedSpike& s) {
            queues_[r.target.value & mask].push_back({s.time_ms + d, r.weight_mv(), s.global_id, 0});
            ++counters_.recurrent_events;
        });
    }

    const auto& syn = net_.state.synapses;
    std::vector<AerSpike> emitted;
    for (unsigned l = 0; l < state_.size(); ++l) {
        auto& q = queues_[l];
        const Population pop = population_[l];
        auto ext = external_events(gid_[l], step, syn.external[index(pop)], syn.relative_spread,
                                   net_.seed);
        counters_.external_events += ext.size();
        q.insert(q.end(), ext.begin(), ext.end());
        if (q.empty()) continue;
        std::sort(q.begin(), q.end());
        const NeuronParams& p = net_.state.neuron(pop);
        for (const auto& e : q) {
            const auto out = apply_event(state_[l], p, e.amplitude, e.time);
            if (out.discarded) ++counters_.discarded_events;
            if (out.spiked) {
                emitted.push_back({encode_neuron_id(rank_, l, part_.bits_for_local()), e.time});
                log_.push_back({gid_[l], e.time});
            }
        }
        q.clear();
    }
    counters_.spikes += emitted.size();
    return pack(rank_, step, emitted, part_.bits_for_local(),
                [this](unsigned local) { return axons_.targets_of(local); }, part_.rank_count());
}

// ---------------------------------------------------------------------------

double RunResult::mean_rate_hz() const
{
    if (neurons == 0 || window_ms <= 0.0) return 0.0;
    return static_cast<double>(window.spikes) / (static_cast<double>(neurons) * window_ms / 1000.0);
}

Simulation::Simulation(NetworkSpec net, SimulationOptions options)
    : net_(std::move(net)), options_(options)
{
    net_.grid.validate();
    if (options_.ranks == 0) throw ConfigError("at least one rank is required");
    if (net_.connectivity.delays.max_delay == 0)
        throw ConfigError("maximum delay must be at least 1 ms");
    if (net_.connectivity.delays.max_delay > 255)
        throw ConfigError("maximum delay above 255 ms does not fit a synapse record");
}

Simulation::~Simulation() = default;

void Simulation::build()
{
    if (built_) return;
    const auto t0 = std::chrono::steady_clock::now();
    transport_ = make_transport(options_.transport, options_.ranks);
    network_ = build_network(net_, *transport_);
    const unsigned R = network_.partition.rank_count();
    engines_.clear();
    for (unsigned r = 0; r < R; ++r)
        engines_.push_back(std::make_unique<RankEngine>(r, net_, network_.partition,
                                                        std::move(network_.matrices[r]),
                                                        std::move(network_.axons[r])));
    delivery_ = std::make_unique<SpikeDelivery>(network_.subsets, options_.trace_traffic);
    local_inbox_.assign(R, {});
    remote_inbox_.assign(R, {});
    init_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    built_ = true;
}

namespace {

RankCounters operator-(const RankCounters& a, const RankCounters& b)
{
    return {a.spikes - b.spikes, a.recurrent_events - b.recurrent_events,
            a.external_events - b.external_events, a.discarded_events - b.discarded_events};
}

}  // namespace

RunResult Simulation::run(double duration_ms, double transient_ms)
{
    if (duration_ms < 0.0 || transient_ms < 0.0) throw ConfigError("durations must be non-negative");
    build();
    const auto steps = static_cast<std::uint64_t>(std::llround(duration_ms / kCommStepMs));
    const auto transient = std::min<std::uint64_t>(
        steps, static_cast<std::uint64_t>(std::llround(transient_ms / kCommStepMs)));
    const unsigned R = static_cast<unsigned>(engines_.size());
    const std::uint64_t first = step_;

    auto totals = [&] {
        RankCounters c;
        for (const auto& e : engines_) {
            c.spikes += e->counters().spikes;
            c.recurrent_events += e->counters().recurrent_events;
            c.external_events += e->counters().external_events;
            c.discarded_events += e->counters().discarded_events;
        }
        return c;
    };

    std::uint64_t s = first;
    const Phase phases[] = {
        [&](unsigned r) {
            auto& eng = *engines_[r];
            eng.ingest(s, std::move(local_inbox_[r]), std::move(remote_inbox_[r]));
            PackedSpikes packed = eng.compute(s);
            delivery_->note_local(r, packed.local.size());
            local_inbox_[r] = std::move(packed.local);
            delivery_->post_counters(r, s, std::move(packed.batches));
        },
        [&](unsigned r) { delivery_->post_payloads(r, s); },
        [&](unsigned r) { remote_inbox_[r] = delivery_->collect(r, s); },
    };

    RankCounters before = totals();
    auto window_start = std::chrono::steady_clock::now();
    for (; s < first + steps; ++s) {
        if (s == first + transient) {
            before = totals();
            window_start = std::chrono::steady_clock::now();
        }
        transport_->run_phases(phases);
    }
    step_ = s;

    RunResult res;
    res.sim_seconds =
        steps > transient
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - window_start).count()
            : 0.0;
    res.init_seconds = init_seconds_;
    res.window_ms = static_cast<double>(steps - transient) * kCommStepMs;
    res.total = totals();
    res.window = res.total - before;
    res.recurrent_synapses = network_.recurrent_synapses;
    res.peak_records = network_.peak_records;
    res.construction_messages = network_.construction_messages;
    res.neurons = net_.grid.neuron_count();

    // Every remote spike sent during a step must have been received in it.
    for (std::uint64_t k = first; k < step_; ++k) {
        std::uint64_t sent = 0, received = 0;
        for (unsigned r = 0; r < R; ++r) {
            const auto& sv = delivery_->sent_per_step(r);
            const auto& rv = delivery_->received_per_step(r);
            if (k < sv.size()) sent += sv[k];
            if (k < rv.size()) received += rv[k];
        }
        if (sent != received)
            throw ProtocolError("step " + std::to_string(k) + ": " + std::to_string(sent) +
                                " spikes sent but " + std::to_string(received) + " received");
        res.remote_spikes_sent += sent;
        res.remote_spikes_received += received;
    }

    for (auto& e : engines_) {
        auto part = e->take_log();
        res.spikes.spikes.insert(res.spikes.spikes.end(), part.begin(), part.end());
    }
    res.spikes.sort();
    std::ostringstream prov;
    prov << "preset=" << net_.state.name << "\ngrid=" << net_.grid.width << "x" << net_.grid.height
         << "\nsizes=" << net_.grid.sizes.f << "," << net_.grid.sizes.b << "," << net_.grid.sizes.i
         << "\nlambda=" << net_.connectivity.lambda << "\nseed=" << net_.seed
         << "\nj_scale=" << net_.j_scale << "\nranks=" << R
         << "\ntransport=" << transport_name(options_.transport) << "\nstart_ms=" << first * kCommStepMs
         << "\nduration_ms=" << steps * kCommStepMs << "\n";
    res.spikes.provenance = prov.str();
    if (options_.trace_traffic) res.traffic = delivery_->traffic();
    return res;
}

}  // namespace dpsnn
