#include "occq/distribution.hpp"

#include <cmath>
#include <limits>

#include "occq/errors.hpp"
#include "occq/numeric.hpp"

namespace occq {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_nonnegative(double x, const char* what) {
    if (!(x >= 0.0)) {
        throw DomainError(std::string(what) + ": argument must be >= 0, got " + numeric::fmt(x));
    }
}

void require_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw DomainError(std::string(what) + ": probability must lie in [0, 1]");
    }
}

// expm1(c * L) / c with the c -> 0 limit.
double expm1_over(double c, double L) {
    if (std::abs(c) < 1e-14) return L;
    return std::expm1(c * L) / c;
}

// (theta / (x + theta))^k computed through log1p for small x.
double pareto_tail(double theta, double k, double x) {
    if (x == kInf) return 0.0;
    return std::exp(-k * std::log1p(x / theta));
}

}  // namespace

double MomentValue::get(const char* what) const {
    switch (state) {
        case State::finite:
            return value;
        case State::infinite:
            throw UnsupportedError(std::string(what) + " is infinite for this distribution",
                                   "use a Pareto shape above the moment's threshold");
        case State::undefined:
            break;
    }
    throw UnsupportedError(std::string(what) + " is undefined for this distribution");
}

ServiceDistribution ServiceDistribution::pareto(double theta, double alpha) {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("Pareto theta must be > 0");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("Pareto alpha must be > 0");
    return ServiceDistribution(Pareto{theta, alpha});
}

ServiceDistribution ServiceDistribution::pareto_with_mean(double mean, double alpha) {
    if (!(alpha > 1.0)) throw DomainError("a Pareto law with finite mean needs alpha > 1");
    if (!(mean > 0.0)) throw DomainError("mean service time must be > 0");
    return pareto(mean * (alpha - 1.0), alpha);
}

ServiceDistribution ServiceDistribution::exponential(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("exponential rate must be > 0");
    return ServiceDistribution(Exponential{rate});
}

ServiceDistribution ServiceDistribution::deterministic(double d) {
    if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("deterministic service time must be > 0");
    return ServiceDistribution(Deterministic{d});
}

std::string ServiceDistribution::name() const {
    return std::visit(overloaded{[](const Pareto&) { return std::string("pareto"); },
                                 [](const Exponential&) { return std::string("exponential"); },
                                 [](const Deterministic&) { return std::string("deterministic"); }},
                      kind_);
}

double ServiceDistribution::ccdf(double x) const {
    require_nonnegative(x, "ccdf");
    return std::visit(overloaded{[&](const Pareto& p) { return pareto_tail(p.theta, p.alpha, x); },
                                 [&](const Exponential& e) { return std::exp(-e.rate * x); },
                                 [&](const Deterministic& d) { return x < d.d ? 1.0 : 0.0; }},
                      kind_);
}

double ServiceDistribution::pdf(double x) const {
    require_nonnegative(x, "pdf");
    return std::visit(
        overloaded{[&](const Pareto& p) { return p.alpha / p.theta * pareto_tail(p.theta, p.alpha + 1.0, x); },
                   [&](const Exponential& e) { return e.rate * std::exp(-e.rate * x); },
                   [&](const Deterministic&) { return 0.0; }},
        kind_);
}

double ServiceDistribution::quantile(double q) const {
    require_probability(q, "quantile");
    return std::visit(overloaded{[&](const Pareto& p) {
                                     if (q == 1.0) return kInf;
                                     return p.theta * std::expm1(-std::log1p(-q) / p.alpha);
                                 },
                                 [&](const Exponential& e) { return -std::log1p(-q) / e.rate; },
                                 [&](const Deterministic& d) { return d.d; }},
                      kind_);
}

Moments ServiceDistribution::moments() const {
    return std::visit(
        overloaded{[](const Pareto& p) {
                       Moments m;
                       const double a = p.alpha;
                       m.mean = a > 1.0 ? MomentValue::finite(p.theta / (a - 1.0)) : MomentValue::infinite();
                       if (a > 2.0) {
                           m.variance = MomentValue::finite(p.theta * p.theta * a / ((a - 1.0) * (a - 1.0) * (a - 2.0)));
                           m.scv = MomentValue::finite(a / (a - 2.0));
                       } else if (a > 1.0) {
                           m.variance = MomentValue::infinite();
                           m.scv = MomentValue::infinite();
                       } else {
                           m.variance = MomentValue::undefined();
                           m.scv = MomentValue::undefined();
                       }
                       return m;
                   },
                   [](const Exponential& e) {
                       return Moments{MomentValue::finite(1.0 / e.rate), MomentValue::finite(1.0 / (e.rate * e.rate)),
                                      MomentValue::finite(1.0)};
                   },
                   [](const Deterministic& d) {
                       return Moments{MomentValue::finite(d.d), MomentValue::finite(0.0), MomentValue::finite(0.0)};
                   }},
        kind_);
}

double ServiceDistribution::mean() const { return moments().mean.get("mean service time"); }

double ServiceDistribution::excess_ccdf(double t) const {
    require_nonnegative(t, "excess_ccdf");
    if (!moments().mean.is_finite()) {
        throw UnsupportedError("stationary excess needs a finite mean service time", "use alpha > 1");
    }
    return std::visit(overloaded{[&](const Pareto& p) { return pareto_tail(p.theta, p.alpha - 1.0, t); },
                                 [&](const Exponential& e) { return std::exp(-e.rate * t); },
                                 [&](const Deterministic& d) { return t < d.d ? (d.d - t) / d.d : 0.0; }},
                      kind_);
}

double ServiceDistribution::excess_quantile(double q) const {
    require_probability(q, "excess_quantile");
    if (!moments().mean.is_finite()) {
        throw UnsupportedError("stationary excess needs a finite mean service time", "use alpha > 1");
    }
    return std::visit(overloaded{[&](const Pareto& p) {
                                     if (q == 1.0) return kInf;
                                     return p.theta * std::expm1(-std::log1p(-q) / (p.alpha - 1.0));
                                 },
                                 [&](const Exponential& e) { return -std::log1p(-q) / e.rate; },
                                 [&](const Deterministic& d) { return q * d.d; }},
                      kind_);
}

double ServiceDistribution::excess_mean() const {
    const Moments m = moments();
    if (!m.variance.is_finite()) {
        throw UnsupportedError("E[S_e] needs a finite service-time variance", "use alpha > 2");
    }
    const double mean = m.mean.value;
    return 0.5 * mean * (m.scv.value + 1.0);
}

double ServiceDistribution::conditional_remaining_ccdf(double elapsed, double t) const {
    require_nonnegative(elapsed, "conditional_remaining_ccdf elapsed");
    require_nonnegative(t, "conditional_remaining_ccdf");
    const double survived = ccdf(elapsed);
    if (survived <= 0.0) {
        throw DegenerateError("no service survives the recorded elapsed time " + numeric::fmt(elapsed));
    }
    if (const auto* p = std::get_if<Pareto>(&kind_)) {
        // Ratio in log space so very long elapsed times stay accurate.
        return std::exp(-p->alpha * (std::log1p((t + elapsed) / p->theta) - std::log1p(elapsed / p->theta)));
    }
    return ccdf(t + elapsed) / survived;
}

double ServiceDistribution::conditional_remaining_quantile(double elapsed, double q) const {
    require_nonnegative(elapsed, "conditional_remaining_quantile elapsed");
    require_probability(q, "conditional_remaining_quantile");
    const double survived = ccdf(elapsed);
    if (survived <= 0.0) {
        throw DegenerateError("no service survives the recorded elapsed time " + numeric::fmt(elapsed));
    }
    return std::visit(overloaded{[&](const Pareto& p) {
                                     // Remaining time is Pareto(theta + elapsed, alpha).
                                     if (q == 1.0) return kInf;
                                     return (p.theta + elapsed) * std::expm1(-std::log1p(-q) / p.alpha);
                                 },
                                 [&](const Exponential& e) { return -std::log1p(-q) / e.rate; },
                                 [&](const Deterministic& d) { return d.d - elapsed; }},
                      kind_);
}

double ServiceDistribution::integrated_ccdf(double x) const {
    require_nonnegative(x, "integrated_ccdf");
    if (x == kInf) return mean();
    return std::visit(overloaded{[&](const Pareto& p) {
                                     const double L = std::log1p(x / p.theta);
                                     return p.theta * expm1_over(1.0 - p.alpha, L);
                                 },
                                 [&](const Exponential& e) { return -std::expm1(-e.rate * x) / e.rate; },
                                 [&](const Deterministic& d) { return std::min(x, d.d); }},
                      kind_);
}

double ServiceDistribution::integrated_weighted_ccdf(double x) const {
    require_nonnegative(x, "integrated_weighted_ccdf");
    if (x == kInf) {
        const Moments m = moments();
        const double mean = m.mean.get("mean service time");
        const double var = m.variance.get("service-time variance");
        return 0.5 * (var + mean * mean);
    }
    return std::visit(overloaded{[&](const Pareto& p) {
                                     const double L = std::log1p(x / p.theta);
                                     return p.theta * p.theta *
                                            (expm1_over(2.0 - p.alpha, L) - expm1_over(1.0 - p.alpha, L));
                                 },
                                 [&](const Exponential& e) {
                                     const double rx = e.rate * x;
                                     return (-std::expm1(-rx) - rx * std::exp(-rx)) / (e.rate * e.rate);
                                 },
                                 [&](const Deterministic& d) {
                                     const double m = std::min(x, d.d);
                                     return 0.5 * m * m;
                                 }},
                      kind_);
}

bool ServiceDistribution::operator==(const ServiceDistribution& other) const {
    return std::visit(
        overloaded{[](const Pareto& a, const Pareto& b) { return a.theta == b.theta && a.alpha == b.alpha; },
                   [](const Exponential& a, const Exponential& b) { return a.rate == b.rate; },
                   [](const Deterministic& a, const Deterministic& b) { return a.d == b.d; },
                   [](const auto&, const auto&) { return false; }},
        kind_, other.kind_);
}

nlohmann::json to_json(const ServiceDistribution& d) {
    nlohmann::json j;
    std::visit(overloaded{[&](const Pareto& p) { j = {{"kind", "pareto"}, {"theta", p.theta}, {"alpha", p.alpha}}; },
                          [&](const Exponential& e) { j = {{"kind", "exponential"}, {"rate", e.rate}}; },
                          [&](const Deterministic& x) { j = {{"kind", "deterministic"}, {"d", x.d}}; }},
               d.kind());
    return j;
}

ServiceDistribution service_distribution_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind")) {
        throw ParseError("service distribution must be an object with a \"kind\" field");
    }
    const std::string kind = j.at("kind").get<std::string>();
    try {
        if (kind == "pareto") {
            if (j.contains("mean") && !j.contains("theta")) {
                return ServiceDistribution::pareto_with_mean(j.at("mean").get<double>(), j.at("alpha").get<double>());
            }
            return ServiceDistribution::pareto(j.at("theta").get<double>(), j.at("alpha").get<double>());
        }
        if (kind == "exponential") {
            if (j.contains("mean") && !j.contains("rate")) {
                return ServiceDistribution::exponential(1.0 / j.at("mean").get<double>());
            }
            return ServiceDistribution::exponential(j.at("rate").get<double>());
        }
        if (kind == "deterministic") return ServiceDistribution::deterministic(j.at("d").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("service distribution: ") + plain_message(e));
    }
    throw ParseError("unknown service distribution kind \"" + kind + "\"");
}

}  // namespace occq
