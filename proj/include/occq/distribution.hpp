#pragma once

#include <json.hpp>
#include <string>
#include <variant>

namespace occq {

/// A moment that may be infinite or undefined for heavy-tailed laws.
struct MomentValue {
    enum class State { finite, infinite, undefined };
    State state = State::undefined;
    double value = 0.0;

    static MomentValue finite(double v) { return {State::finite, v}; }
    static MomentValue infinite() { return {State::infinite, 0.0}; }
    static MomentValue undefined() { return {State::undefined, 0.0}; }

    bool is_finite() const { return state == State::finite; }
    /// Throws UnsupportedError unless finite.
    double get(const char* what) const;
};

struct Moments {
    MomentValue mean;
    MomentValue variance;
    MomentValue scv;
};

struct Pareto {
    double theta;  ///< shift (months)
    double alpha;  ///< shape
};
struct Exponential {
    double rate;  ///< 1 / months
};
struct Deterministic {
    double d;  ///< months
};

/// Service-time law G. Times are in months. Instances are immutable.
class ServiceDistribution {
public:
    using Kind = std::variant<Pareto, Exponential, Deterministic>;

    static ServiceDistribution pareto(double theta, double alpha);
    /// Pareto with the given mean: theta = mean * (alpha - 1).
    static ServiceDistribution pareto_with_mean(double mean, double alpha);
    static ServiceDistribution exponential(double rate);
    static ServiceDistribution deterministic(double d);

    const Kind& kind() const { return kind_; }
    bool is_pareto() const { return std::holds_alternative<Pareto>(kind_); }
    std::string name() const;

    double ccdf(double x) const;
    double cdf(double x) const { return 1.0 - ccdf(x); }
    /// Density; zero for the deterministic law except at its atom.
    double pdf(double x) const;
    double quantile(double p) const;

    Moments moments() const;
    /// E[S]; UnsupportedError when infinite.
    double mean() const;

    /// G_e^c(t) of the stationary-excess law.
    double excess_ccdf(double t) const;
    double excess_cdf(double t) const { return 1.0 - excess_ccdf(t); }
    double excess_quantile(double p) const;
    /// E[S_e] = E[S](c_s^2 + 1) / 2.
    double excess_mean() const;

    /// H_x^c(t) = G^c(t + x) / G^c(x): remaining-service ccdf after `elapsed` months.
    double conditional_remaining_ccdf(double elapsed, double t) const;
    /// Inverse of H_x.
    double conditional_remaining_quantile(double elapsed, double p) const;

    /// int_0^x G^c(w) dw; x may be +inf when the mean is finite.
    double integrated_ccdf(double x) const;
    /// int_0^x w G^c(w) dw; x may be +inf when the variance is finite.
    double integrated_weighted_ccdf(double x) const;

    bool operator==(const ServiceDistribution& other) const;

private:
    explicit ServiceDistribution(Kind k) : kind_(k) {}
    Kind kind_;
};

nlohmann::json to_json(const ServiceDistribution& d);
/// Accepts {"kind":"pareto","theta","alpha"} or {"kind":"pareto","mean","alpha"}.
ServiceDistribution service_distribution_from_json(const nlohmann::json& j);

}  // namespace occq

template <>
struct nlohmann::adl_serializer<occq::ServiceDistribution> {
    static occq::ServiceDistribution from_json(const json& j) { return occq::service_distribution_from_json(j); }
    static void to_json(json& j, const occq::ServiceDistribution& d) { j = occq::to_json(d); }
};
