#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>
#include <variant>
#include <vector>

#include "occq/arrivals.hpp"
#include "occq/distribution.hpp"

namespace occq {

struct ServiceSwitch {
    double at;
    ServiceDistribution new_dist;
};

/// Initial cohort of size n; remaining times follow H_y when elapsed times are given,
/// otherwise the remaining-service law G_start of the arrival history.
struct FixedCohort {
    std::int64_t n = 0;
    std::optional<std::vector<double>> elapsed;
};
/// Initial count drawn from Po(nu_start), remaining times from G_start.
struct SteadyStatePoissonCohort {};

struct SimConfig {
    ArrivalRate rate = ArrivalRate::constant(0.0);
    ServiceDistribution dist = ServiceDistribution::exponential(1.0);
    std::optional<ServiceSwitch> service_switch;
    std::variant<FixedCohort, SteadyStatePoissonCohort> initial = FixedCohort{};
    double start = 0.0;     ///< observation time tau; the cohort is present here
    double horizon = 1.0;   ///< months simulated after `start`
    std::int64_t replications = 1;
    std::uint64_t seed = 0;
    bool record_departures = true;
    /// Worker threads; 0 reads OCCQ_THREADS, then the hardware concurrency.
    unsigned threads = 0;

    void validate() const;
};

struct Replication {
    std::vector<std::int64_t> occupancy;  ///< one per probe time
    std::vector<double> departures;       ///< sorted; only departures by start + horizon
    double last_departure = 0.0;          ///< over everyone, including after the horizon
    std::int64_t initial = 0;
    std::int64_t arrivals = 0;
    std::int64_t departed = 0;            ///< by start + horizon
    std::int64_t final_occupancy = 0;     ///< at start + horizon
};

struct SimOutput {
    std::vector<double> probe_times;
    std::vector<Replication> replications;

    std::size_t probe_index(double t) const;
    double mean_occupancy(double t) const;
    /// Standard error of the mean occupancy.
    double standard_error(double t) const;
};

SimOutput run(const SimConfig& config, const std::vector<double>& probe_times);

struct Histogram {
    std::int64_t replications = 0;
    std::map<std::int64_t, std::int64_t> counts;

    double frequency(std::int64_t y) const;
    double total_mass() const;
};

Histogram empirical_law(const SimOutput& output, double probe_time);

/// Worker count from OCCQ_THREADS (if set) or the hardware.
unsigned worker_threads(unsigned requested = 0);

nlohmann::json to_json(const SimConfig& c);
SimConfig sim_config_from_json(const nlohmann::json& j);
/// Per-probe summary plus per-replication conservation fields.
nlohmann::json to_json(const SimOutput& out);
/// CSV: replication,<probe columns>.
void write_occupancy_csv(std::ostream& os, const SimOutput& out);

}  // namespace occq
