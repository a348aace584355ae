#include "occq/observed_queue.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "occq/errors.hpp"
#include "occq/numeric.hpp"

namespace occq {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPoissonTail = 1e-12;

void require_within_rate(const ArrivalRate& rate, double t) {
    if (t > rate.domain_hi()) {
        throw DomainError("time " + numeric::fmt(t) + " lies beyond the arrival-rate domain (ends at " +
                              numeric::fmt(rate.domain_hi()) + ")",
                          "extend the rate's domain/horizon");
    }
}

// Breakpoints where G^c(present_at - u) is not smooth in u.
std::vector<double> kinks(const ServiceDistribution& dist, double present_at, double a, double b) {
    std::vector<double> pts{a};
    if (const auto* d = std::get_if<Deterministic>(&dist.kind())) {
        const double k = present_at - d->d;
        if (k > a && k < b) pts.push_back(k);
    }
    pts.push_back(b);
    return pts;
}

double piece_mass_quadrature(const RatePiece& piece, const ServiceDistribution& dist, double a, double b,
                             double present_at) {
    auto f = [&](double u) {
        const double age = present_at - u;
        return piece.at(u) * dist.ccdf(std::max(age, 0.0));
    };
    const auto pts = kinks(dist, present_at, a, b);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) total += numeric::integrate_range(f, pts[i], pts[i + 1]);
    return total;
}

double piece_mass_analytic(const RatePiece& piece, const ServiceDistribution& dist, double a, double b,
                           double present_at) {
    // Substitute w = present_at - u, so the integrand becomes (c0 + c1 c - c1 w) G^c(w).
    const double w_lo = present_at - b;
    const double w_hi = present_at - a;
    const double coef = piece.c0 + piece.c1 * present_at;
    double mass = coef * (dist.integrated_ccdf(w_hi) - dist.integrated_ccdf(w_lo));
    if (piece.c1 != 0.0) {
        mass -= piece.c1 * (dist.integrated_weighted_ccdf(w_hi) - dist.integrated_weighted_ccdf(w_lo));
    }
    return mass;
}

bool is_steady_constant(const ArrivalRate& rate, double tau) {
    const auto& pieces = rate.pieces();
    return pieces.size() == 1 && pieces[0].lo == -kInf && pieces[0].c1 == 0.0 && pieces[0].hi >= tau;
}

std::vector<double> poisson_table(double m, std::int64_t j_max) {
    std::vector<double> out(static_cast<std::size_t>(j_max + 1), 0.0);
    if (m == 0.0) {
        out[0] = 1.0;
        return out;
    }
    for (std::int64_t j = 0; j <= j_max; ++j) out[static_cast<std::size_t>(j)] = poisson_pmf(m, j);
    return out;
}

double binomial_log_pmf(std::int64_t n, double p, std::int64_t k) {
    if (p == 0.0) return k == 0 ? 0.0 : -kInf;
    if (p == 1.0) return k == n ? 0.0 : -kInf;
    const double nn = static_cast<double>(n);
    const double kk = static_cast<double>(k);
    return std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0) + kk * std::log(p) +
           (nn - kk) * std::log1p(-p);
}

std::int64_t poisson_cutoff(double m) { return static_cast<std::int64_t>(std::ceil(m + 12.0 * std::sqrt(m + 1.0) + 10.0)); }

}  // namespace

double region_mass(const ArrivalRate& rate, const ServiceDistribution& dist, double u_lo, double u_hi, double present_at,
                   Method method) {
    if (!(u_lo <= u_hi)) throw DomainError("region requires u_lo <= u_hi");
    if (!(present_at >= u_hi)) throw DomainError("region must end no later than the presence time");
    require_within_rate(rate, u_hi);
    double total = 0.0;
    for (const auto& piece : rate.pieces()) {
        const double a = std::max(piece.lo, u_lo);
        const double b = std::min(piece.hi, u_hi);
        if (!(a < b)) continue;
        if (piece.c0 == 0.0 && piece.c1 == 0.0) continue;
        total += method == Method::analytic ? piece_mass_analytic(piece, dist, a, b, present_at)
                                            : piece_mass_quadrature(piece, dist, a, b, present_at);
    }
    return total;
}

double unconditional_mean(const ArrivalRate& rate, const ServiceDistribution& dist, double t, Method method) {
    if (t == kInf) {
        // Stationary limit of a rate that is eventually constant.
        const auto& pieces = rate.pieces();
        if (pieces.empty()) return 0.0;
        const auto& last = pieces.back();
        if (last.hi != kInf || last.c1 != 0.0) {
            throw UnsupportedError("m(inf) needs a rate that is eventually constant");
        }
        return last.c0 * dist.mean();
    }
    return region_mass(rate, dist, -kInf, t, t, method);
}

double departure_rate(const ArrivalRate& rate, const ServiceDistribution& dist, double t, Method method) {
    if (t == kInf) {
        const auto& pieces = rate.pieces();
        if (pieces.empty() || pieces.back().hi != kInf || pieces.back().c1 != 0.0) {
            throw UnsupportedError("lambda^-(inf) needs a rate that is eventually constant");
        }
        return pieces.back().c0;
    }
    require_within_rate(rate, t);
    const bool deterministic = std::holds_alternative<Deterministic>(dist.kind());
    if (deterministic) {
        const double d = std::get<Deterministic>(dist.kind()).d;
        const double u = t - d;
        if (u < rate.domain_lo()) return 0.0;
        for (const auto& p : rate.pieces()) {
            if (u >= p.lo && u <= p.hi) return p.at(u);
        }
        return 0.0;
    }
    double total = 0.0;
    for (const auto& piece : rate.pieces()) {
        const double a = piece.lo;
        const double b = std::min(piece.hi, t);
        if (!(a < b)) continue;
        if (method == Method::quadrature) {
            auto f = [&](double u) { return piece.at(u) * dist.pdf(std::max(t - u, 0.0)); };
            total += numeric::integrate_range(f, a, b);
            continue;
        }
        // int (c0 + c1 (t - w)) g(w) dw over w in [t - b, t - a]; J(x) = int_0^x w g(w) dw.
        const double w_lo = t - b;
        const double w_hi = t - a;
        auto J = [&](double x) { return x == kInf ? dist.mean() : dist.integrated_ccdf(x) - x * dist.ccdf(x); };
        total += (piece.c0 + piece.c1 * t) * (dist.ccdf(w_lo) - dist.ccdf(w_hi));
        if (piece.c1 != 0.0) total -= piece.c1 * (J(w_hi) - J(w_lo));
    }
    return total;
}

double nu_tau(const ArrivalRate& rate, const ServiceDistribution& dist, double tau, Method method) {
    return region_mass(rate, dist, -kInf, tau, tau, method);
}

double remaining_survival(const ArrivalRate& rate, const ServiceDistribution& dist, double tau, double x,
                          Method method) {
    if (!(x >= 0.0)) throw DomainError("remaining_survival: x must be >= 0");
    if (is_steady_constant(rate, tau) && method == Method::analytic) {
        if (rate.pieces()[0].c0 == 0.0) throw DegenerateError("nu_tau = 0: nobody can be present at tau");
        return dist.excess_ccdf(x);
    }
    const double nu = nu_tau(rate, dist, tau, method);
    if (!(nu > 0.0)) throw DegenerateError("nu_tau = 0: nobody can be present at tau");
    if (x == 0.0) return 1.0;
    if (x == kInf) return 0.0;
    const double survivors = region_mass(rate, dist, -kInf, tau, tau + x, method);
    return std::clamp(survivors / nu, 0.0, 1.0);
}

double remaining_quantile(const ArrivalRate& rate, const ServiceDistribution& dist, double tau, double p) {
    if (!(p >= 0.0 && p < 1.0)) throw DomainError("remaining_quantile: p must lie in [0, 1)");
    if (is_steady_constant(rate, tau)) return dist.excess_quantile(p);
    if (p == 0.0) return 0.0;
    const double nu = nu_tau(rate, dist, tau);
    if (!(nu > 0.0)) throw DegenerateError("nu_tau = 0: nobody can be present at tau");
    const double target = (1.0 - p) * nu;
    auto f = [&](double x) { return region_mass(rate, dist, -kInf, tau, tau + x) - target; };
    return numeric::bisect(f, 0.0, 1.0, 1e-10);
}

double new_arrivals_mean(const ArrivalRate& rate, const ServiceDistribution& dist, double tau, double delta,
                         Method method) {
    if (!(delta >= 0.0)) throw DomainError("delta must be >= 0");
    if (delta == 0.0) return 0.0;
    return region_mass(rate, dist, tau, tau + delta, tau + delta, method);
}

ConditionalOccupancyLaw::ConditionalOccupancyLaw(std::int64_t n, double p, double m) : n_(n), p_(p), m_(m) {
    if (n < 0) throw DomainError("conditional law needs n >= 0");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("conditional law needs p in [0, 1]");
    if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError("conditional law needs a finite m >= 0");
}

std::int64_t ConditionalOccupancyLaw::support_max() const { return n_ + poisson_cutoff(m_); }

std::vector<double> ConditionalOccupancyLaw::pmf_table() const {
    const std::int64_t j_max = poisson_cutoff(m_);
    const auto pois = poisson_table(m_, j_max);
    // Binomial terms outside [k_lo, k_hi] are below exp(-60) of the mode.
    const double mode = std::floor((static_cast<double>(n_) + 1.0) * p_);
    const auto k_mode = std::clamp<std::int64_t>(static_cast<std::int64_t>(mode), 0, n_);
    const double log_peak = binomial_log_pmf(n_, p_, k_mode);
    std::int64_t k_lo = k_mode, k_hi = k_mode;
    while (k_lo > 0 && binomial_log_pmf(n_, p_, k_lo - 1) > log_peak - 60.0) --k_lo;
    while (k_hi < n_ && binomial_log_pmf(n_, p_, k_hi + 1) > log_peak - 60.0) ++k_hi;

    std::vector<double> table(static_cast<std::size_t>(n_ + j_max + 1), 0.0);
    for (std::int64_t k = k_lo; k <= k_hi; ++k) {
        const double bk = std::exp(binomial_log_pmf(n_, p_, k));
        if (bk == 0.0) continue;
        for (std::int64_t j = 0; j <= j_max; ++j) {
            table[static_cast<std::size_t>(k + j)] += bk * pois[static_cast<std::size_t>(j)];
        }
    }
    return table;
}

double ConditionalOccupancyLaw::pmf(std::int64_t y) const {
    if (y < 0) return 0.0;
    const std::int64_t k_lo = m_ == 0.0 ? y : 0;
    double total = 0.0;
    for (std::int64_t k = std::max<std::int64_t>(0, k_lo); k <= std::min(n_, y); ++k) {
        const double lb = binomial_log_pmf(n_, p_, k);
        if (lb == -kInf) continue;
        total += std::exp(lb + poisson_log_pmf(m_, y - k));
    }
    return total;
}

double ConditionalOccupancyLaw::cdf(std::int64_t y) const {
    if (y < 0) return 0.0;
    const auto table = pmf_table();
    double total = 0.0;
    for (std::int64_t i = 0; i <= y && i < static_cast<std::int64_t>(table.size()); ++i) {
        total += table[static_cast<std::size_t>(i)];
    }
    return std::min(total, 1.0);
}

std::int64_t ConditionalOccupancyLaw::quantile(double q) const {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
    const auto table = pmf_table();
    double total = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        total += table[i];
        if (total >= q - 1e-15) return static_cast<std::int64_t>(i);
    }
    return static_cast<std::int64_t>(table.size()) - 1;
}

ConditionalOccupancyLaw conditional_law(const ArrivalRate& rate, const ServiceDistribution& dist, double tau,
                                        double delta, std::int64_t n) {
    if (!(delta >= 0.0)) throw DomainError("delta must be >= 0");
    if (n < 0) throw DomainError("observed count must be >= 0");
    if (delta == 0.0) return {n, 1.0, 0.0};
    const double p = n > 0 ? remaining_survival(rate, dist, tau, delta) : 0.0;
    return {n, p, new_arrivals_mean(rate, dist, tau, delta)};
}

double poisson_approx_law(const ArrivalRate& rate, const ServiceDistribution& dist, double tau, double delta,
                          std::int64_t n) {
    return conditional_law(rate, dist, tau, delta, n).mean();
}

double poisson_log_pmf(double mean, std::int64_t y) {
    if (y < 0) return -kInf;
    if (mean == 0.0) return y == 0 ? 0.0 : -kInf;
    const double yy = static_cast<double>(y);
    return -mean + yy * std::log(mean) - std::lgamma(yy + 1.0);
}

double poisson_pmf(double mean, std::int64_t y) { return std::exp(poisson_log_pmf(mean, y)); }

double poisson_upper_tail(double mean, std::int64_t n) {
    if (!(mean >= 0.0)) throw DomainError("Poisson mean must be >= 0");
    if (n <= 0) return 1.0;
    if (mean == 0.0) return 0.0;
    if (static_cast<double>(n) > mean) {
        double total = 0.0;
        for (std::int64_t k = n;; ++k) {
            const double term = poisson_pmf(mean, k);
            total += term;
            if (term < 1e-18 * total || term == 0.0) break;
        }
        return total;
    }
    double below = 0.0;
    for (std::int64_t k = 0; k < n; ++k) below += poisson_pmf(mean, k);
    return std::max(0.0, 1.0 - below);
}

double total_variation_to_poisson(const ConditionalOccupancyLaw& law, double poisson_mean) {
    const auto exact = law.pmf_table();
    const auto span = std::max<std::int64_t>(static_cast<std::int64_t>(exact.size()), poisson_cutoff(poisson_mean) + 1);
    double tv = 0.0;
    double exact_mass = 0.0;
    double approx_mass = 0.0;
    for (std::int64_t y = 0; y < span; ++y) {
        const double a = y < static_cast<std::int64_t>(exact.size()) ? exact[static_cast<std::size_t>(y)] : 0.0;
        const double b = poisson_pmf(poisson_mean, y);
        tv += std::abs(a - b);
        exact_mass += a;
        approx_mass += b;
    }
    // Mass outside the summed range counts fully.
    tv += std::max(0.0, 1.0 - exact_mass) + std::max(0.0, 1.0 - approx_mass);
    return 0.5 * tv;
}

void ObservedState::validate() const {
    for (const auto& c : classes) {
        if (c.n < 0) throw DomainError("class " + c.class_id + ": count must be >= 0");
        if (c.elapsed) {
            if (static_cast<std::int64_t>(c.elapsed->size()) != c.n) {
                throw DomainError("class " + c.class_id + ": elapsed list length must equal n");
            }
            for (double y : *c.elapsed) {
                if (!(y >= 0.0)) throw DomainError("class " + c.class_id + ": elapsed times must be >= 0");
            }
        }
    }
}

MeanVariance elapsed_informed_prediction(const std::vector<double>& elapsed, const ServiceDistribution& dist,
                                         const ArrivalRate& rate, double tau, double delta) {
    if (!(delta >= 0.0)) throw DomainError("delta must be >= 0");
    double mean = 0.0;
    double var = 0.0;
    for (double y : elapsed) {
        const double h = dist.conditional_remaining_ccdf(y, delta);
        mean += h;
        var += h * (1.0 - h);
    }
    const double m = new_arrivals_mean(rate, dist, tau, delta);
    return {mean + m, var + m};
}

double service_switch_mean(const ArrivalRate& rate, const ServiceDistribution& old_dist,
                           const ServiceDistribution& new_dist, double tau, double delta, SwitchCohort cohort) {
    if (!(delta >= 0.0)) throw DomainError("delta must be >= 0");
    const double cohort_mean = nu_tau(rate, old_dist, tau);
    if (delta == 0.0) return cohort_mean;
    double survival = 0.0;
    if (cohort == SwitchCohort::stationary_excess) {
        survival = old_dist.excess_ccdf(delta);
    } else if (cohort_mean > 0.0) {
        survival = remaining_survival(rate, old_dist, tau, delta);
    }
    return cohort_mean * survival + new_arrivals_mean(rate, new_dist, tau, delta);
}

double service_switch_conditional_mean(const ArrivalRate& rate, const ServiceDistribution& old_dist,
                                       const ServiceDistribution& new_dist, double tau, double delta, std::int64_t n) {
    if (!(delta >= 0.0)) throw DomainError("delta must be >= 0");
    if (delta == 0.0) return static_cast<double>(n);
    const double p = n > 0 ? remaining_survival(rate, old_dist, tau, delta) : 0.0;
    return static_cast<double>(n) * p + new_arrivals_mean(rate, new_dist, tau, delta);
}

nlohmann::json to_json(const ConditionalOccupancyLaw& law, double tau, double delta, const std::string& class_id) {
    return {{"n", law.n()},       {"p", law.p()},         {"m", law.m()},   {"mean", law.mean()},
            {"variance", law.variance()}, {"tau", tau}, {"delta", delta}, {"class_id", class_id}};
}

nlohmann::json to_json(const ObservedState& state) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : state.classes) {
        nlohmann::json jc = {{"class_id", c.class_id}, {"n", c.n}};
        if (c.elapsed) jc["elapsed"] = *c.elapsed;
        classes.push_back(jc);
    }
    return {{"tau", state.tau}, {"classes", classes}};
}

ObservedState observed_state_from_json(const nlohmann::json& j) {
    ObservedState s;
    try {
        s.tau = j.at("tau").get<double>();
        for (const auto& jc : j.at("classes")) {
            ClassObservation c;
            c.class_id = jc.value("class_id", std::string("all"));
            c.n = jc.at("n").get<std::int64_t>();
            if (jc.contains("elapsed") && !jc.at("elapsed").is_null()) c.elapsed = jc.at("elapsed").get<std::vector<double>>();
            s.classes.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("observed state: ") + e.what());
    }
    s.validate();
    return s;
}

}  // namespace occq
