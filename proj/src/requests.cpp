#include "occq/requests.hpp"

#include <cmath>
#include <variant>

#include "occq/errors.hpp"

namespace occq {
namespace {

using nlohmann::json;

double number(const json& j, const char* key, const char* where) {
    if (!j.contains(key)) throw ParseError(std::string(where) + ": missing \"" + key + "\"");
    if (!j.at(key).is_number()) throw ParseError(std::string(where) + ": \"" + key + "\" must be a number");
    return j.at(key).get<double>();
}

}  // namespace

std::string engine_version() { return OCCQ_VERSION; }

json to_json(const CountSeries& s) {
    json pts = json::array();
    for (const auto& p : s.points) pts.push_back({{"month", YearMonth{s.origin.index + p.t}.str()}, {"t", p.t}, {"count", p.n}});
    return {{"class_id", s.class_id},
            {"origin", s.origin.str()},
            {"provenance", s.provenance == CountSeries::Provenance::observed ? "observed" : "synthesized"},
            {"points", pts}};
}

CountSeries count_series_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("series: expected an object");
    CountSeries s;
    try {
        s.class_id = j.value("class_id", std::string("all"));
        if (j.value("provenance", std::string("observed")) == "synthesized")
            s.provenance = CountSeries::Provenance::synthesized;
        if (j.contains("counts")) {
            s.origin = YearMonth::parse(j.at("origin").get<std::string>());
            int t = 0;
            for (const auto& c : j.at("counts")) s.points.push_back({t++, c.get<std::int64_t>()});
        } else {
            const auto& pts = j.at("points");
            if (!pts.is_array() || pts.empty()) throw ParseError("series: \"points\" must be a non-empty array");
            s.origin = j.contains("origin") ? YearMonth::parse(j.at("origin").get<std::string>())
                                            : YearMonth::parse(pts.at(0).at("month").get<std::string>());
            for (const auto& p : pts) {
                const auto m = YearMonth::parse(p.at("month").get<std::string>());
                s.points.push_back({m.index - s.origin.index, p.at("count").get<std::int64_t>()});
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("series: ") + plain_message(e),
                         "expected {origin, counts:[...]} or {points:[{month:\"YYYY-MM\", count}]}");
    }
    s.validate();
    return s;
}

ModelParams model_params_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("params: expected an object");
    ModelParams p{number(j, "beta0", "params"), number(j, "beta1", "params"), number(j, "alpha", "params"), 0.0};
    if (j.contains("theta")) {
        p.theta = number(j, "theta", "params");
    } else {
        p.theta = number(j, "mean_service", "params") * (p.alpha - 1.0);
    }
    if (!(p.alpha > 2.0)) throw UnsupportedError("params: alpha must exceed 2 for a finite-variance service law");
    if (!(p.theta > 0.0)) throw DomainError("params: theta must be positive");
    return p;
}

json to_json(const ModelParams& p) {
    return {{"beta0", p.beta0}, {"beta1", p.beta1}, {"alpha", p.alpha}, {"theta", p.theta}};
}

PosteriorDraws point_posterior(const ModelParams& p, int copies) {
    PosteriorDraws d;
    d.chains = 1;
    d.draws.assign(static_cast<std::size_t>(copies), Draw{p.beta0, p.beta1, p.alpha, p.theta});
    return d;
}

json posterior_json(const PosteriorDraws& d) {
    json b0 = json::array(), b1 = json::array(), a = json::array(), th = json::array();
    for (const auto& x : d.draws) {
        b0.push_back(x.beta0);
        b1.push_back(x.beta1);
        a.push_back(x.alpha);
        th.push_back(x.theta);
    }
    return {{"chains", d.chains},
            {"per_chain", d.per_chain()},
            {"converged", d.converged},
            {"diagnostics", to_json(d.diagnostics)},
            {"draws", {{"beta0", b0}, {"beta1", b1}, {"alpha", a}, {"theta", th}}}};
}

std::vector<int> horizons_from_json(const json& j) {
    if (j.is_number_integer()) {
        const int q = j.get<int>();
        if (q < 1) throw DomainError("horizon count must be >= 1");
        return horizon_range(q);
    }
    if (!j.is_array() || j.empty()) throw ParseError("horizons: expected a positive integer or a non-empty list");
    std::vector<int> out;
    for (const auto& h : j) {
        if (!h.is_number_integer()) throw ParseError("horizons: entries must be integers");
        const int d = h.get<int>();
        if (d < 0) throw DomainError("horizons: entries must be >= 0");
        out.push_back(d);
    }
    return out;
}

RecoveryRequest recovery_request_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("recover: expected an object");
    RecoveryRequest r;
    r.lambda = number(j, "lambda", "recover");
    r.mean_service = j.contains("E_S") ? number(j, "E_S", "recover") : number(j, "mean_service", "recover");
    r.alpha = number(j, "alpha", "recover");
    r.n = number(j, "n", "recover");
    if (j.contains("k") && !j.at("k").is_null()) r.k = number(j, "k", "recover");
    if (j.contains("intervention")) r.intervention = intervention_from_json(j.at("intervention"));
    return r;
}

json run_recovery(const RecoveryRequest& r) {
    if (!(r.alpha > 2.0)) throw UnsupportedError("recover: alpha must exceed 2 (the excess law needs a finite variance)");
    const RecoveryProblem problem(r.lambda, ServiceDistribution::pareto_with_mean(r.mean_service, r.alpha), r.n, r.k);
    const auto base = recovery_with_intervention(problem, std::monostate{});
    json out = {{"baseline", to_json(base)},
                {"bisection_months", recovery_time_bisection(problem)},
                {"congestion_probability", congestion_probability(problem.nu(), static_cast<std::int64_t>(std::ceil(r.n)))},
                {"intervention", nullptr}};
    if (!std::holds_alternative<std::monostate>(r.intervention))
        out["intervention"] = to_json(recovery_with_intervention(problem, r.intervention));
    return out;
}

LastDepartureRequest last_departure_request_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("lastdep: expected an object");
    LastDepartureRequest r;
    r.lambda = number(j, "lambda", "lastdep");
    if (j.contains("dist")) {
        r.dist = service_distribution_from_json(j.at("dist"));
    } else {
        const double es = j.contains("E_S") ? number(j, "E_S", "lastdep") : number(j, "mean_service", "lastdep");
        double alpha;
        if (j.contains("scv")) {
            const double scv = number(j, "scv", "lastdep");
            if (!(scv > 1.0)) throw DomainError("lastdep: a Pareto law needs scv > 1");
            alpha = 2.0 * scv / (scv - 1.0);
        } else {
            alpha = number(j, "alpha", "lastdep");
        }
        r.dist = ServiceDistribution::pareto_with_mean(es, alpha);
    }
    try {
        if (j.contains("probabilities")) r.probabilities = j.at("probabilities").get<std::vector<double>>();
        if (j.contains("grid")) r.grid = j.at("grid").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("lastdep: ") + plain_message(e));
    }
    return r;
}

json run_last_departure(const LastDepartureRequest& r) {
    const auto law = LastDepartureLaw::stationary(r.lambda, r.dist);
    json q = json::array(), cdf = json::array(), moments = json::object();
    for (double p : r.probabilities) q.push_back({{"p", p}, {"x", law.quantile(p)}});
    for (double x : r.grid) cdf.push_back({{"x", x}, {"cdf", law.cdf(x)}, {"tail_equivalent", law.tail_equivalent(x)}});
    // P[T > x] decays like G_e^c(x), so for Pareto E[T^k] is finite only when alpha - 1 > k.
    for (int k : {1, 2}) {
        const auto* par = std::get_if<Pareto>(&r.dist.kind());
        const bool finite = !par || par->alpha - 1.0 > k;
        moments[k == 1 ? "mean" : "second_moment"] = finite ? json(law.moment(k)) : json(nullptr);
    }
    return {{"lambda", r.lambda},
            {"dist", to_json(r.dist)},
            {"nu", law.nu()},
            {"atom_at_zero", std::exp(-law.nu())},
            {"quantiles", q},
            {"cdf", cdf},
            {"moments", moments}};
}

}  // namespace occq
