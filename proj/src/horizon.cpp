#include "occq/horizon.hpp"

#include <cmath>
#include <limits>

#include "occq/errors.hpp"
#include "occq/numeric.hpp"
#include "occq/observed_queue.hpp"

namespace occq {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double recovery_ratio(double nu, double n, double k) {
    const double r = (k - nu) / (n - nu);
    if (!(r > 0.0 && r < 1.0)) {
        throw InfeasibleError("recovery ratio (k - nu) / (n - nu) = " + numeric::fmt(r) + " is outside (0, 1)",
                              "choose levels with nu < k < n");
    }
    return r;
}

double solve_excess_ccdf(const ServiceDistribution& dist, double target) {
    if (const auto* p = std::get_if<Pareto>(&dist.kind())) {
        return p->theta * (std::pow(1.0 / target, 1.0 / (p->alpha - 1.0)) - 1.0);
    }
    return numeric::bisect([&](double t) { return dist.excess_ccdf(t) - target; }, 0.0, 1.0, 1e-10);
}

}  // namespace

LastDepartureLaw::LastDepartureLaw(ArrivalRate rate, ServiceDistribution dist, double gamma)
    : rate_(std::move(rate)), dist_(std::move(dist)), gamma_(gamma), nu_(nu_tau(rate_, dist_, gamma)) {}

LastDepartureLaw LastDepartureLaw::stationary(double lambda, const ServiceDistribution& dist) {
    return {ArrivalRate::steady(lambda).cut_past(0.0), dist, 0.0};
}

double LastDepartureLaw::survival(double x) const {
    if (nu_ == 0.0) return 0.0;
    return remaining_survival(rate_, dist_, gamma_, x);
}

double LastDepartureLaw::cdf(double x) const {
    if (!(x >= 0.0)) throw DomainError("last_departure_cdf: x must be >= 0");
    if (nu_ == 0.0) return 1.0;
    return std::exp(-nu_ * survival(x));
}

double LastDepartureLaw::quantile(double p) const {
    const double floor = std::exp(-nu_);
    if (!(p > floor && p < 1.0)) {
        throw DomainError("last-departure quantile is defined only for exp(-nu) < p < 1 (exp(-nu) = " +
                          numeric::fmt(floor) + ")");
    }
    const double level = 1.0 - std::log(1.0 / p) / nu_;
    return remaining_quantile(rate_, dist_, gamma_, level);
}

double LastDepartureLaw::moment(int k) const {
    if (k < 1) throw DomainError("moment order must be >= 1");
    if (nu_ == 0.0) return 0.0;
    auto integrand = [&](double x) {
        const double tail = -std::expm1(-nu_ * survival(x));
        return k * std::pow(x, k - 1) * tail;
    };
    return numeric::integrate_to_infinity(integrand, 0.0);
}

RecoveryProblem::RecoveryProblem(double lambda, ServiceDistribution dist, double n, std::optional<double> k)
    : lambda_(lambda), dist_(std::move(dist)), n_(n) {
    if (!(lambda >= 0.0)) throw DomainError("arrival rate must be >= 0");
    nu_ = lambda * dist_.mean();
    k_ = k ? *k : std::ceil(nu_ + 1.0);
    if (!(nu_ < k_ && k_ < n_)) {
        throw InfeasibleError("recovery needs nu < k < n (nu = " + numeric::fmt(nu_) + ", k = " +
                                  numeric::fmt(k_) + ", n = " + numeric::fmt(n_) + ")",
                              "raise the congestion level n or pick k between nu and n");
    }
}

double pareto_recovery_time(double theta, double alpha, double nu, double n, double k) {
    recovery_ratio(nu, n, k);
    return std::pow(std::pow(theta, alpha - 1.0) * (n - nu) / (k - nu), 1.0 / (alpha - 1.0)) - theta;
}

double recovery_time(const RecoveryProblem& p) {
    if (const auto* par = std::get_if<Pareto>(&p.dist().kind())) {
        return pareto_recovery_time(par->theta, par->alpha, p.nu(), p.n(), p.k());
    }
    return recovery_time_bisection(p);
}

double recovery_time_bisection(const RecoveryProblem& p) {
    const double r = recovery_ratio(p.nu(), p.n(), p.k());
    return numeric::bisect([&](double t) { return p.dist().excess_ccdf(t) - r; }, 0.0, 1.0, 1e-10);
}

double conditional_mean_stationary(double nu, const ServiceDistribution& dist, double n, double t) {
    const double tail = dist.excess_ccdf(t);
    return nu * (1.0 - tail) + n * tail;
}

RecoveryResult recovery_with_intervention(const RecoveryProblem& p, const Intervention& intervention) {
    RecoveryResult out{0.0, p.n(), p.k(), p.nu(), intervention, {}};
    if (std::holds_alternative<std::monostate>(intervention)) {
        out.beta_months = recovery_time(p);
        out.phases.push_back({"baseline", out.beta_months, p.nu(), p.n(), p.k()});
        return out;
    }
    if (const auto* s = std::get_if<ScaleLambda>(&intervention)) {
        if (!(s->factor >= 0.0 && s->factor <= 1.0)) throw DomainError("scale_lambda factor must lie in [0, 1]");
        const double nu = s->factor * p.nu();
        const double beta = solve_excess_ccdf(p.dist(), recovery_ratio(nu, p.n(), p.k()));
        out.beta_months = beta;
        out.phases.push_back({"scaled_arrivals", beta, nu, p.n(), p.k()});
        return out;
    }
    const auto& pause = std::get<PauseThenResume>(intervention);
    const double j = pause.resume_level;
    if (!(p.nu() < j && j < p.k())) {
        throw InfeasibleError("pause_then_resume needs nu < j < k", "pick a resume level between nu and k");
    }
    const double paused = solve_excess_ccdf(p.dist(), recovery_ratio(0.0, p.n(), p.k()));
    const double resumed = solve_excess_ccdf(p.dist(), recovery_ratio(p.nu(), p.k(), j));
    out.beta_months = paused + resumed;
    out.phases.push_back({"paused", paused, 0.0, p.n(), p.k()});
    out.phases.push_back({"resumed", resumed, p.nu(), p.k(), j});
    return out;
}

double congestion_probability(double nu, std::int64_t n) { return poisson_upper_tail(nu, n); }

nlohmann::json to_json(const Intervention& i) {
    if (const auto* s = std::get_if<ScaleLambda>(&i)) return {{"kind", "scale_lambda"}, {"factor", s->factor}};
    if (const auto* p = std::get_if<PauseThenResume>(&i)) {
        return {{"kind", "pause_then_resume"}, {"resume_level", p->resume_level}};
    }
    return {{"kind", "none"}};
}

Intervention intervention_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::monostate{};
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "none") return std::monostate{};
        if (kind == "scale_lambda") return ScaleLambda{j.at("factor").get<double>()};
        if (kind == "pause_then_resume") return PauseThenResume{j.at("resume_level").get<double>()};
        throw ParseError("unknown intervention kind \"" + kind + "\"");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("intervention: ") + plain_message(e));
    }
}

nlohmann::json to_json(const RecoveryResult& r) {
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& ph : r.phases) {
        phases.push_back({{"label", ph.label}, {"months", ph.months}, {"nu", ph.nu}, {"from", ph.from_level},
                          {"to", ph.to_level}});
    }
    return {{"beta_months", r.beta_months}, {"k", r.k},     {"n", r.n}, {"nu", r.nu},
            {"intervention", to_json(r.intervention)},    {"phases", phases}};
}

}  // namespace occq
