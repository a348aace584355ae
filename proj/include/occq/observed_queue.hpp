#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "occq/arrivals.hpp"
#include "occq/distribution.hpp"

namespace occq {

/// How region masses are evaluated. `analytic` sums closed-form piece integrals;
/// `quadrature` integrates lambda(u) G^c(c - u) numerically.
enum class Method { analytic, quadrature };

/// Poisson mean of arrival/service pairs (u, v) with u in [u_lo, u_hi] and u + v > present_at:
///   N(A) = int_{u_lo}^{u_hi} lambda(u) G^c(present_at - u) du.
/// Every transient quantity of the queue is one of these regions.
double region_mass(const ArrivalRate& rate, const ServiceDistribution& dist, double u_lo, double u_hi, double present_at,
                   Method method = Method::analytic);

/// m(t) = E[Q(t)] for a system empty before the rate's support.
double unconditional_mean(const ArrivalRate& rate, const ServiceDistribution& dist, double t,
                          Method method = Method::analytic);

/// lambda^-(t) = E[lambda(t - S)], the Poisson departure rate.
double departure_rate(const ArrivalRate& rate, const ServiceDistribution& dist, double t,
                      Method method = Method::analytic);

/// nu_tau = int_0^inf lambda(tau - u) G^c(u) du.
double nu_tau(const ArrivalRate& rate, const ServiceDistribution& dist, double tau, Method method = Method::analytic);

/// G_tau^c(x): survival of the remaining service of someone present at tau.
double remaining_survival(const ArrivalRate& rate, const ServiceDistribution& dist, double tau, double x,
                          Method method = Method::analytic);

/// Inverse of G_tau (closed form for Pareto in a stationary system, bisection otherwise).
double remaining_quantile(const ArrivalRate& rate, const ServiceDistribution& dist, double tau, double p);

/// m_check(tau + delta): expected arrivals after tau still present at tau + delta.
double new_arrivals_mean(const ArrivalRate& rate, const ServiceDistribution& dist, double tau, double delta,
                         Method method = Method::analytic);

/// Law of Q(tau + delta) given Q(tau) = n: Bi(n, p) + Po(m).
class ConditionalOccupancyLaw {
public:
    ConditionalOccupancyLaw(std::int64_t n, double p, double m);

    std::int64_t n() const { return n_; }
    double p() const { return p_; }
    double m() const { return m_; }

    double mean() const { return static_cast<double>(n_) * p_ + m_; }
    double variance() const { return static_cast<double>(n_) * p_ * (1.0 - p_) + m_; }

    double pmf(std::int64_t y) const;
    double cdf(std::int64_t y) const;
    /// Smallest y with cdf(y) >= q.
    std::int64_t quantile(double q) const;
    /// pmf over [0, size); mass beyond the end is below 1e-12.
    std::vector<double> pmf_table() const;
    /// Upper end of the table support.
    std::int64_t support_max() const;

private:
    std::int64_t n_;
    double p_;
    double m_;
};

ConditionalOccupancyLaw conditional_law(const ArrivalRate& rate, const ServiceDistribution& dist, double tau,
                                        double delta, std::int64_t n);

/// Mean of the high-load Poisson approximation: n p + m_check.
double poisson_approx_law(const ArrivalRate& rate, const ServiceDistribution& dist, double tau, double delta,
                          std::int64_t n);

double poisson_log_pmf(double mean, std::int64_t y);
double poisson_pmf(double mean, std::int64_t y);
/// P[Po(mean) >= n].
double poisson_upper_tail(double mean, std::int64_t n);

/// Total-variation distance between the exact law and Po(poisson_mean), by pmf summation.
double total_variation_to_poisson(const ConditionalOccupancyLaw& law, double poisson_mean);

struct ClassObservation {
    std::string class_id;
    std::int64_t n = 0;
    std::optional<std::vector<double>> elapsed;
};

struct ObservedState {
    double tau = 0.0;
    std::vector<ClassObservation> classes;

    /// Throws DomainError when an invariant is broken.
    void validate() const;
};

struct MeanVariance {
    double mean;
    double variance;
};

/// Prediction at tau + delta when every initial individual's elapsed time is recorded.
MeanVariance elapsed_informed_prediction(const std::vector<double>& elapsed, const ServiceDistribution& dist,
                                         const ArrivalRate& rate, double tau, double delta);

/// Survival used for the pre-switch cohort.
enum class SwitchCohort {
    /// p_tau(delta) under the old law; equals G_e^{o,c}(delta) in a stationary system.
    remaining_survival,
    /// G_e^{o,c}(delta) regardless of the arrival history.
    stationary_excess,
};

/// Mean occupancy at tau + delta when post-tau arrivals switch to `new_dist`.
/// The initial population is Poisson with mean nu_tau under the old law.
double service_switch_mean(const ArrivalRate& rate, const ServiceDistribution& old_dist,
                           const ServiceDistribution& new_dist, double tau, double delta,
                           SwitchCohort cohort = SwitchCohort::remaining_survival);

/// Same, conditioned on Q(tau) = n.
double service_switch_conditional_mean(const ArrivalRate& rate, const ServiceDistribution& old_dist,
                                       const ServiceDistribution& new_dist, double tau, double delta, std::int64_t n);

nlohmann::json to_json(const ConditionalOccupancyLaw& law, double tau, double delta, const std::string& class_id);
nlohmann::json to_json(const ObservedState& state);
ObservedState observed_state_from_json(const nlohmann::json& j);

}  // namespace occq
