#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "occq/arrivals.hpp"
#include "occq/distribution.hpp"

namespace occq {

/// Law of T, the time after arrivals stop at gamma until the system empties:
/// P[T <= x] = exp(-nu_gamma G_gamma^c(x)).
class LastDepartureLaw {
public:
    LastDepartureLaw(ArrivalRate rate, ServiceDistribution dist, double gamma);
    /// Stationary system with constant rate lambda terminated at gamma.
    static LastDepartureLaw stationary(double lambda, const ServiceDistribution& dist);

    double nu() const { return nu_; }
    double gamma() const { return gamma_; }
    /// G_gamma^c(x).
    double survival(double x) const;
    double cdf(double x) const;
    /// nu G_gamma^c(x), the large-x equivalent of P[T > x].
    double tail_equivalent(double x) const { return nu_ * survival(x); }
    /// Defined for exp(-nu) < p < 1.
    double quantile(double p) const;
    /// E[T^k] = int_0^inf k x^{k-1} P[T > x] dx.
    double moment(int k) const;

private:
    ArrivalRate rate_;
    ServiceDistribution dist_;
    double gamma_;
    double nu_;
};

/// Congestion recovery in a stationary system: from level n down to level k, with nu = lambda E[S] < k < n.
class RecoveryProblem {
public:
    /// k defaults to ceil(nu + 1).
    RecoveryProblem(double lambda, ServiceDistribution dist, double n, std::optional<double> k = std::nullopt);

    double lambda() const { return lambda_; }
    const ServiceDistribution& dist() const { return dist_; }
    double n() const { return n_; }
    double k() const { return k_; }
    double nu() const { return nu_; }

private:
    double lambda_;
    ServiceDistribution dist_;
    double n_;
    double k_;
    double nu_;
};

/// Mean-recovery time: root of G_e^c(t) = (k - nu) / (n - nu).
double recovery_time(const RecoveryProblem& p);
/// Same root by bisection, tolerance 1e-10 months.
double recovery_time_bisection(const RecoveryProblem& p);
/// Closed form for a Pareto law.
double pareto_recovery_time(double theta, double alpha, double nu, double n, double k);
/// E[Q(t) | Q(0) = n] for the stationary system: nu G_e(t) + n G_e^c(t).
double conditional_mean_stationary(double nu, const ServiceDistribution& dist, double n, double t);

struct ScaleLambda {
    double factor;
};
struct PauseThenResume {
    double resume_level;  ///< j, with nu < j < k
};
using Intervention = std::variant<std::monostate, ScaleLambda, PauseThenResume>;

struct RecoveryPhase {
    std::string label;
    double months;
    double nu;
    double from_level;
    double to_level;
};

struct RecoveryResult {
    double beta_months;
    double n;
    double k;
    double nu;
    Intervention intervention;
    std::vector<RecoveryPhase> phases;
};

RecoveryResult recovery_with_intervention(const RecoveryProblem& p, const Intervention& intervention);

/// P[N >= n] for N ~ Po(nu).
double congestion_probability(double nu, std::int64_t n);

nlohmann::json to_json(const RecoveryResult& r);
nlohmann::json to_json(const Intervention& i);
Intervention intervention_from_json(const nlohmann::json& j);

}  // namespace occq
