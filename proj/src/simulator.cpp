#include "occq/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <mutex>
#include <thread>

#include "occq/errors.hpp"
#include "occq/numeric.hpp"
#include "occq/observed_queue.hpp"

namespace occq {
namespace {

Replication simulate_one(const SimConfig& c, const std::vector<double>& probes, std::int64_t index,
                         double cohort_nu) {
    const auto rep = static_cast<std::uint64_t>(index);
    CounterRng arrivals_rng(c.seed, Stream::arrivals, rep);
    CounterRng service_rng(c.seed, Stream::services, rep);
    CounterRng cohort_rng(c.seed, Stream::cohort, rep);
    CounterRng count_rng(c.seed, Stream::initial_count, rep);

    const double end = c.start + c.horizon;
    Replication r;

    // (entry, departure) for everyone who is ever in the system during the run.
    std::vector<double> entries;
    std::vector<double> exits;

    if (const auto* fixed = std::get_if<FixedCohort>(&c.initial)) {
        r.initial = fixed->n;
        for (std::int64_t i = 0; i < fixed->n; ++i) {
            const double u = cohort_rng.uniform();
            const double remaining = fixed->elapsed
                                         ? c.dist.conditional_remaining_quantile((*fixed->elapsed)[static_cast<std::size_t>(i)], u)
                                         : remaining_quantile(c.rate, c.dist, c.start, u);
            entries.push_back(c.start);
            exits.push_back(c.start + remaining);
        }
    } else {
        r.initial = sample_poisson(count_rng, cohort_nu);
        for (std::int64_t i = 0; i < r.initial; ++i) {
            entries.push_back(c.start);
            exits.push_back(c.start + remaining_quantile(c.rate, c.dist, c.start, cohort_rng.uniform()));
        }
    }

    const auto arrivals = sample_nhpp(c.rate, c.start, end, arrivals_rng);
    r.arrivals = static_cast<std::int64_t>(arrivals.size());
    for (double u : arrivals) {
        const bool switched = c.service_switch && u >= c.service_switch->at;
        const ServiceDistribution& law = switched ? c.service_switch->new_dist : c.dist;
        entries.push_back(u);
        exits.push_back(u + law.quantile(service_rng.uniform()));
    }

    std::vector<double> sorted_exits = exits;
    std::sort(sorted_exits.begin(), sorted_exits.end());
    std::vector<double> sorted_entries = entries;
    std::sort(sorted_entries.begin(), sorted_entries.end());

    r.last_departure = sorted_exits.empty() ? c.start : sorted_exits.back();
    auto present_at = [&](double t) {
        const auto in = std::upper_bound(sorted_entries.begin(), sorted_entries.end(), t) - sorted_entries.begin();
        const auto out = std::upper_bound(sorted_exits.begin(), sorted_exits.end(), t) - sorted_exits.begin();
        return static_cast<std::int64_t>(in - out);
    };
    r.occupancy.reserve(probes.size());
    for (double t : probes) r.occupancy.push_back(present_at(t));

    const auto departed_end = std::upper_bound(sorted_exits.begin(), sorted_exits.end(), end);
    r.departed = static_cast<std::int64_t>(departed_end - sorted_exits.begin());
    r.final_occupancy = present_at(end);
    if (c.record_departures) r.departures.assign(sorted_exits.begin(), departed_end);
    return r;
}

}  // namespace

void SimConfig::validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("simulation horizon must be > 0");
    if (replications < 1) throw DomainError("replications must be >= 1");
    if (!std::isfinite(start)) throw DomainError("simulation start must be finite");
    if (const auto* fixed = std::get_if<FixedCohort>(&initial)) {
        if (fixed->n < 0) throw DomainError("initial cohort size must be >= 0");
        if (fixed->elapsed) {
            if (static_cast<std::int64_t>(fixed->elapsed->size()) != fixed->n) {
                throw DomainError("elapsed list length must equal the initial cohort size");
            }
            for (double y : *fixed->elapsed) {
                if (!(y >= 0.0)) throw DomainError("elapsed times must be >= 0");
            }
        }
    }
    if (service_switch && !std::isfinite(service_switch->at)) throw DomainError("switch time must be finite");
}

unsigned worker_threads(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("OCCQ_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

SimOutput run(const SimConfig& config, const std::vector<double>& probe_times) {
    config.validate();
    SimOutput out;
    out.probe_times = probe_times;
    out.replications.resize(static_cast<std::size_t>(config.replications));

    double cohort_nu = 0.0;
    if (std::holds_alternative<SteadyStatePoissonCohort>(config.initial)) {
        cohort_nu = nu_tau(config.rate, config.dist, config.start);
    }

    const unsigned threads =
        std::min<unsigned>(worker_threads(config.threads), static_cast<unsigned>(config.replications));
    auto work = [&](std::int64_t begin, std::int64_t stop) {
        for (std::int64_t i = begin; i < stop; ++i) {
            out.replications[static_cast<std::size_t>(i)] = simulate_one(config, probe_times, i, cohort_nu);
        }
    };
    if (threads <= 1) {
        work(0, config.replications);
        return out;
    }
    std::vector<std::thread> pool;
    const std::int64_t chunk = (config.replications + threads - 1) / threads;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned t = 0; t < threads; ++t) {
        const std::int64_t begin = t * chunk;
        const std::int64_t stop = std::min(config.replications, begin + chunk);
        if (begin >= stop) break;
        pool.emplace_back([&, begin, stop] {
            try {
                work(begin, stop);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

std::size_t SimOutput::probe_index(double t) const {
    const auto it = std::find(probe_times.begin(), probe_times.end(), t);
    if (it == probe_times.end()) throw DomainError("probe time " + numeric::fmt(t) + " was not requested");
    return static_cast<std::size_t>(it - probe_times.begin());
}

double SimOutput::mean_occupancy(double t) const {
    const auto k = probe_index(t);
    double s = 0.0;
    for (const auto& r : replications) s += static_cast<double>(r.occupancy[k]);
    return s / static_cast<double>(replications.size());
}

double SimOutput::standard_error(double t) const {
    const auto k = probe_index(t);
    const double mean = mean_occupancy(t);
    double ss = 0.0;
    for (const auto& r : replications) {
        const double d = static_cast<double>(r.occupancy[k]) - mean;
        ss += d * d;
    }
    const auto n = static_cast<double>(replications.size());
    if (n < 2) return 0.0;
    return std::sqrt(ss / (n - 1.0) / n);
}

double Histogram::frequency(std::int64_t y) const {
    const auto it = counts.find(y);
    if (it == counts.end() || replications == 0) return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(replications);
}

double Histogram::total_mass() const {
    double s = 0.0;
    for (const auto& [y, c] : counts) s += static_cast<double>(c);
    return replications == 0 ? 0.0 : s / static_cast<double>(replications);
}

Histogram empirical_law(const SimOutput& output, double probe_time) {
    const auto k = output.probe_index(probe_time);
    Histogram h;
    h.replications = static_cast<std::int64_t>(output.replications.size());
    for (const auto& r : output.replications) ++h.counts[r.occupancy[k]];
    return h;
}

nlohmann::json to_json(const SimConfig& c) {
    nlohmann::json j = {{"rate", c.rate.to_json()},       {"dist", occq::to_json(c.dist)},
                        {"start", c.start},               {"horizon", c.horizon},
                        {"replications", c.replications}, {"seed", c.seed},
                        {"record_departures", c.record_departures}};
    if (c.service_switch) {
        j["switch"] = {{"at", c.service_switch->at}, {"new", occq::to_json(c.service_switch->new_dist)}};
    }
    if (const auto* fixed = std::get_if<FixedCohort>(&c.initial)) {
        j["initial"] = {{"n", fixed->n}};
        if (fixed->elapsed) j["initial"]["elapsed"] = *fixed->elapsed;
    } else {
        j["initial"] = "steady-state-poisson";
    }
    return j;
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
    SimConfig c;
    try {
        c.rate = arrival_rate_from_json(j.at("rate"));
        c.dist = service_distribution_from_json(j.at("dist"));
        c.start = j.value("start", 0.0);
        c.horizon = j.at("horizon").get<double>();
        c.replications = j.value("replications", std::int64_t{1});
        c.seed = j.value("seed", std::uint64_t{0});
        c.record_departures = j.value("record_departures", true);
        if (j.contains("switch") && !j.at("switch").is_null()) {
            c.service_switch = ServiceSwitch{j.at("switch").at("at").get<double>(),
                                             service_distribution_from_json(j.at("switch").at("new"))};
        }
        if (j.contains("initial")) {
            const auto& ji = j.at("initial");
            if (ji.is_string()) {
                if (ji.get<std::string>() != "steady-state-poisson") {
                    throw ParseError("initial must be an object or \"steady-state-poisson\"");
                }
                c.initial = SteadyStatePoissonCohort{};
            } else {
                FixedCohort f;
                f.n = ji.value("n", std::int64_t{0});
                if (ji.contains("elapsed") && !ji.at("elapsed").is_null()) {
                    f.elapsed = ji.at("elapsed").get<std::vector<double>>();
                }
                c.initial = f;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("simulation config: ") + plain_message(e));
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const SimOutput& out) {
    nlohmann::json probes = nlohmann::json::array();
    for (double t : out.probe_times) {
        probes.push_back({{"t", t}, {"mean", out.mean_occupancy(t)}, {"se", out.standard_error(t)}});
    }
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& r : out.replications) {
        reps.push_back({{"occupancy", r.occupancy},
                        {"initial", r.initial},
                        {"arrivals", r.arrivals},
                        {"departed", r.departed},
                        {"final_occupancy", r.final_occupancy},
                        {"last_departure", r.last_departure}});
    }
    return {{"probes", probes}, {"replications", reps}};
}

void write_occupancy_csv(std::ostream& os, const SimOutput& out) {
    os << "replication";
    os << std::setprecision(17);
    for (double t : out.probe_times) os << ",t=" << t;
    os << '\n';
    for (std::size_t i = 0; i < out.replications.size(); ++i) {
        os << i;
        for (auto v : out.replications[i].occupancy) os << ',' << v;
        os << '\n';
    }
}

}  // namespace occq
