#include "occq/arrivals.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "occq/errors.hpp"
#include "occq/numeric.hpp"

namespace occq {
namespace {

using numeric::fmt;

nlohmann::json encode_bound(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double decode_bound(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return ArrivalRate::inf;
        if (s == "-inf") return -ArrivalRate::inf;
        throw ParseError("domain bound must be a number, \"inf\" or \"-inf\"");
    }
    if (j.is_null()) throw ParseError("domain bound must not be null");
    return j.get<double>();
}

}  // namespace

ArrivalRate ArrivalRate::constant(double lambda, double start, double end) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("constant arrival rate must be >= 0");
    if (!(start < end)) throw DomainError("rate domain must satisfy start < end");
    nlohmann::json spec = {{"kind", "constant"}, {"lambda", lambda}};
    if (start != 0.0 || end != inf) spec["domain"] = {encode_bound(start), encode_bound(end)};
    return ArrivalRate(Kind::constant, start, end, {RatePiece{start, end, lambda, 0.0}}, std::move(spec));
}

ArrivalRate ArrivalRate::linear(double beta0, double beta1, double lo, double hi) {
    if (!std::isfinite(beta0) || !std::isfinite(beta1)) throw DomainError("linear rate coefficients must be finite");
    if (!(lo < hi)) throw DomainError("linear rate domain must satisfy lo < hi");
    auto negative_at = [&](double t) {
        if (std::isinf(t)) return beta1 != 0.0 && (t > 0 ? beta1 < 0.0 : beta1 > 0.0);
        return beta0 + beta1 * t < 0.0;
    };
    if (negative_at(lo) || negative_at(hi)) {
        throw DomainError("linear rate " + fmt(beta0) + " + " + fmt(beta1) + " t goes negative on [" + fmt(lo) + ", " +
                              fmt(hi) + "]",
                          "shrink the rate domain (horizon) so the rate stays non-negative");
    }
    nlohmann::json spec = {
        {"kind", "linear"}, {"beta0", beta0}, {"beta1", beta1}, {"domain", {encode_bound(lo), encode_bound(hi)}}};
    return ArrivalRate(Kind::linear, lo, hi, {RatePiece{lo, hi, beta0, beta1}}, std::move(spec));
}

ArrivalRate ArrivalRate::piecewise_linear(std::vector<std::pair<double, double>> knots) {
    if (knots.size() < 2) throw DomainError("piecewise-linear rate needs at least two knots");
    std::vector<RatePiece> pieces;
    nlohmann::json jk = nlohmann::json::array();
    for (std::size_t i = 0; i < knots.size(); ++i) {
        const auto [t, r] = knots[i];
        if (!std::isfinite(t) || !(r >= 0.0) || !std::isfinite(r)) {
            throw DomainError("piecewise-linear knots need finite times and non-negative rates");
        }
        if (i > 0 && !(t > knots[i - 1].first)) throw DomainError("piecewise-linear knot times must increase");
        jk.push_back({t, r});
        if (i > 0) {
            const auto [t0, r0] = knots[i - 1];
            const double slope = (r - r0) / (t - t0);
            pieces.push_back(RatePiece{t0, t, r0 - slope * t0, slope});
        }
    }
    return ArrivalRate(Kind::piecewise_linear, knots.front().first, knots.back().first, std::move(pieces),
                       {{"kind", "piecewise_linear"}, {"knots", jk}});
}

double ArrivalRate::support_lo() const {
    double s = inf;
    for (const auto& p : pieces_) s = std::min(s, p.lo);
    return s;
}

void ArrivalRate::require_in_domain(double t, const char* what) const {
    if (std::isnan(t) || t < lo_ || t > hi_) {
        throw DomainError(std::string(what) + ": t = " + fmt(t) + " outside the rate domain [" + fmt(lo_) + ", " +
                              fmt(hi_) + "]",
                          "extend the rate domain or query inside it");
    }
}

double ArrivalRate::rate(double t) const {
    require_in_domain(t, "rate");
    for (const auto& p : pieces_) {
        if (t >= p.lo && (t < p.hi || (t == p.hi && p.hi == hi_))) return p.at(t);
    }
    return 0.0;
}

double ArrivalRate::integral(double a, double b) const {
    if (!(a <= b)) throw DomainError("integral requires a <= b");
    require_in_domain(a, "integral");
    require_in_domain(b, "integral");
    double total = 0.0;
    for (const auto& p : pieces_) {
        const double lo = std::max(a, p.lo);
        const double hi = std::min(b, p.hi);
        if (lo < hi) {
            if (std::isinf(lo) || std::isinf(hi)) {
                if (p.c0 == 0.0 && p.c1 == 0.0) continue;
                return inf;
            }
            total += p.integral(lo, hi);
        }
    }
    return total;
}

double ArrivalRate::sup(double a, double b) const {
    double s = 0.0;
    for (const auto& p : pieces_) {
        const double lo = std::max(a, p.lo);
        const double hi = std::min(b, p.hi);
        if (lo > hi) continue;
        for (double t : {lo, hi}) {
            if (std::isinf(t)) {
                if (p.c1 != 0.0) return inf;
                s = std::max(s, p.c0);
            } else {
                s = std::max(s, p.at(t));
            }
        }
    }
    return s;
}

ArrivalRate ArrivalRate::cut_past(double tau) const {
    std::vector<RatePiece> pieces;
    for (auto p : pieces_) {
        if (p.lo >= tau) continue;
        p.hi = std::min(p.hi, tau);
        pieces.push_back(p);
    }
    return ArrivalRate(kind_, lo_, inf, std::move(pieces),
                       {{"kind", "cut"}, {"side", "past"}, {"cut_at", tau}, {"base", spec_}});
}

ArrivalRate ArrivalRate::cut_future(double tau) const {
    std::vector<RatePiece> pieces;
    for (auto p : pieces_) {
        if (p.hi < tau) continue;
        p.lo = std::max(p.lo, tau);
        pieces.push_back(p);
    }
    return ArrivalRate(kind_, -inf, hi_, std::move(pieces),
                       {{"kind", "cut"}, {"side", "future"}, {"cut_at", tau}, {"base", spec_}});
}

ArrivalRate ArrivalRate::scaled(double factor) const {
    if (!(factor >= 0.0) || !std::isfinite(factor)) throw DomainError("rate scale factor must be >= 0");
    std::vector<RatePiece> pieces = pieces_;
    for (auto& p : pieces) {
        p.c0 *= factor;
        p.c1 *= factor;
    }
    return ArrivalRate(kind_, lo_, hi_, std::move(pieces), {{"kind", "scaled"}, {"factor", factor}, {"base", spec_}});
}

nlohmann::json ArrivalRate::to_json() const { return spec_; }

double CutRate::rate(double t) const {
    if (side == Side::past && t >= cut_at) return 0.0;
    if (side == Side::future && t < cut_at) return 0.0;
    if (t < base.domain_lo() || t > base.domain_hi()) return 0.0;
    return base.rate(t);
}

std::vector<double> sample_nhpp(const ArrivalRate& rate, double a, double b, CounterRng& rng) {
    if (!(a <= b)) throw DomainError("sampling window must satisfy a <= b");
    if (std::isinf(a) || std::isinf(b)) throw UnsupportedError("cannot sample an NHPP on an infinite window");
    const double lo = std::max(a, rate.domain_lo());
    const double hi = std::min(b, rate.domain_hi());
    std::vector<double> times;
    if (!(lo < hi)) return times;
    const double bound = rate.sup(lo, hi);
    if (!std::isfinite(bound)) throw UnsupportedError("arrival rate is unbounded on the sampling window");
    if (bound <= 0.0) return times;
    double t = lo;
    while (true) {
        t -= std::log(rng.uniform()) / bound;
        if (t > hi) break;
        if (rng.uniform() * bound <= rate.rate(t)) times.push_back(t);
    }
    return times;
}

std::vector<double> sample_nhpp(const ArrivalRate& rate, double a, double b, std::uint64_t seed) {
    CounterRng rng(seed, Stream::arrivals);
    return sample_nhpp(rate, a, b, rng);
}

ArrivalRate arrival_rate_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind")) throw ParseError("arrival rate must be an object with a \"kind\" field");
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "constant") {
            double lo = 0.0, hi = ArrivalRate::inf;
            if (j.contains("domain")) {
                lo = decode_bound(j.at("domain").at(0));
                hi = decode_bound(j.at("domain").at(1));
            }
            return ArrivalRate::constant(j.at("lambda").get<double>(), lo, hi);
        }
        if (kind == "steady") return ArrivalRate::steady(j.at("lambda").get<double>());
        if (kind == "linear") {
            const auto& d = j.at("domain");
            return ArrivalRate::linear(j.at("beta0").get<double>(), j.at("beta1").get<double>(), decode_bound(d.at(0)),
                                       decode_bound(d.at(1)));
        }
        if (kind == "piecewise_linear") {
            std::vector<std::pair<double, double>> knots;
            for (const auto& k : j.at("knots")) knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
            return ArrivalRate::piecewise_linear(std::move(knots));
        }
        if (kind == "cut") {
            const auto base = arrival_rate_from_json(j.at("base"));
            const double tau = j.at("cut_at").get<double>();
            const auto side = j.at("side").get<std::string>();
            if (side == "past") return base.cut_past(tau);
            if (side == "future") return base.cut_future(tau);
            throw ParseError("cut side must be \"past\" or \"future\"");
        }
        if (kind == "scaled") return arrival_rate_from_json(j.at("base")).scaled(j.at("factor").get<double>());
        throw ParseError("unknown arrival rate kind \"" + kind + "\"");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("arrival rate: ") + plain_message(e));
    }
}

}  // namespace occq
