#pragma once

#include <json.hpp>
#include <limits>
#include <utility>
#include <vector>

#include "occq/rng.hpp"

namespace occq {

/// One linear segment of a rate function: rate(t) = c0 + c1 * t on [lo, hi].
struct RatePiece {
    double lo;
    double hi;
    double c0;
    double c1;

    double at(double t) const { return c0 + c1 * t; }
    /// int_a^b (c0 + c1 u) du, with a, b inside [lo, hi].
    double integral(double a, double b) const { return (b - a) * (c0 + 0.5 * c1 * (a + b)); }
};

/// Deterministic arrival rate lambda(t) in arrivals/month on a declared domain.
/// Pieces cover the active part of the domain; elsewhere inside the domain the rate is zero.
class ArrivalRate {
public:
    enum class Kind { constant, linear, piecewise_linear };
    static constexpr double inf = std::numeric_limits<double>::infinity();

    /// Constant rate switched on at `start` (empty system before).
    static ArrivalRate constant(double lambda, double start = 0.0, double end = inf);
    /// Constant rate since t = -inf: the stationary system.
    static ArrivalRate steady(double lambda) { return constant(lambda, -inf, inf); }
    /// beta0 + beta1 t on [lo, hi]; fails when the rate goes negative there.
    static ArrivalRate linear(double beta0, double beta1, double lo, double hi);
    static ArrivalRate piecewise_linear(std::vector<std::pair<double, double>> knots);

    Kind kind() const { return kind_; }
    double domain_lo() const { return lo_; }
    double domain_hi() const { return hi_; }
    /// Earliest time with possibly non-zero rate.
    double support_lo() const;
    const std::vector<RatePiece>& pieces() const { return pieces_; }

    double rate(double t) const;
    double integral(double a, double b) const;
    /// Supremum of the rate on [a, b]; +inf when unbounded.
    double sup(double a, double b) const;

    /// Past process: zero on [tau, inf).
    ArrivalRate cut_past(double tau) const;
    /// Future process: zero on (-inf, tau).
    ArrivalRate cut_future(double tau) const;
    /// Rate multiplied by `factor` >= 0.
    ArrivalRate scaled(double factor) const;

    /// Original constructor arguments, for serialization.
    nlohmann::json to_json() const;

private:
    ArrivalRate(Kind kind, double lo, double hi, std::vector<RatePiece> pieces, nlohmann::json spec)
        : kind_(kind), lo_(lo), hi_(hi), pieces_(std::move(pieces)), spec_(std::move(spec)) {}
    void require_in_domain(double t, const char* what) const;

    Kind kind_;
    double lo_;
    double hi_;
    std::vector<RatePiece> pieces_;
    nlohmann::json spec_;
};

/// A rate cut at tau: the past side keeps t < tau, the future side keeps t >= tau.
struct CutRate {
    enum class Side { past, future };
    ArrivalRate base;
    double cut_at;
    Side side;

    double rate(double t) const;
    double integral(double a, double b) const { return as_rate().integral(a, b); }
    ArrivalRate as_rate() const { return side == Side::past ? base.cut_past(cut_at) : base.cut_future(cut_at); }
};

/// NHPP arrival times on [a, b] by thinning against the supremum rate.
std::vector<double> sample_nhpp(const ArrivalRate& rate, double a, double b, CounterRng& rng);
std::vector<double> sample_nhpp(const ArrivalRate& rate, double a, double b, std::uint64_t seed);

ArrivalRate arrival_rate_from_json(const nlohmann::json& j);

}  // namespace occq

template <>
struct nlohmann::adl_serializer<occq::ArrivalRate> {
    static occq::ArrivalRate from_json(const json& j) { return occq::arrival_rate_from_json(j); }
    static void to_json(json& j, const occq::ArrivalRate& r) { j = r.to_json(); }
};
