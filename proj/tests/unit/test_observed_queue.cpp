#include <doctest.h>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <cmath>
#include <random>

#include "../oracle.hpp"
#include "occq/errors.hpp"
#include "occq/observed_queue.hpp"

using namespace occq;

namespace {

const auto kPareto = ServiceDistribution::pareto(6.0, 3.0);  // E[S] = 3

// Defining integrals, evaluated with Boost quadrature on the raw rate function.
double ref_nu(const ArrivalRate& r, const ServiceDistribution& d, double tau) {
    return oracle::quad([&](double u) { return u < r.domain_lo() ? 0.0 : r.rate(u) * d.ccdf(tau - u); },
                        std::max(r.domain_lo(), -1e300) == r.domain_lo() && std::isfinite(r.domain_lo()) ? r.domain_lo() : -INFINITY,
                        tau);
}

double ref_mass(const ArrivalRate& r, const ServiceDistribution& d, double lo, double hi, double at) {
    const double a = std::isfinite(r.domain_lo()) ? std::max(lo, r.domain_lo()) : lo;
    if (!(a < hi)) return 0.0;
    return oracle::quad([&](double u) { return r.rate(u) * d.ccdf(at - u); }, a, hi);
}

}  // namespace

TEST_CASE("unconditional mean") {
    CHECK(unconditional_mean(ArrivalRate::constant(10.0), kPareto, INFINITY) == doctest::Approx(30.0));
    CHECK(unconditional_mean(ArrivalRate::steady(10.0), kPareto, 4.0) == doctest::Approx(30.0).epsilon(1e-12));
    CHECK(unconditional_mean(ArrivalRate::constant(10.0, 2.0), kPareto, 2.0) == 0.0);
    const auto r = ArrivalRate::constant(10.0);
    for (double t : {0.5, 3.0, 30.0}) {
        CHECK(unconditional_mean(r, kPareto, t) == doctest::Approx(ref_mass(r, kPareto, 0.0, t, t)).epsilon(1e-10));
        // Approach to steady state: m(t) = lambda E[S] G_e(t).
        CHECK(unconditional_mean(r, kPareto, t) == doctest::Approx(30.0 * kPareto.excess_cdf(t)).epsilon(1e-10));
    }
    CHECK_THROWS_AS(unconditional_mean(r, ServiceDistribution::pareto(1.0, 0.9), INFINITY), UnsupportedError);
}

TEST_CASE("departure rate") {
    const auto r = ArrivalRate::constant(10.0);
    CHECK(departure_rate(r, kPareto, INFINITY) == 10.0);
    for (double t : {0.5, 2.0, 9.0}) {
        CHECK(departure_rate(r, kPareto, t) == doctest::Approx(10.0 * kPareto.cdf(t)).epsilon(1e-10));
        CHECK(departure_rate(r, kPareto, t) ==
              doctest::Approx(oracle::quad([&](double u) { return 10.0 * kPareto.pdf(t - u); }, 0.0, t)).epsilon(1e-9));
    }
    const auto term = ArrivalRate::constant(10.0).cut_past(5.0);
    for (double t : {6.0, 20.0, 400.0}) {
        CHECK(departure_rate(term, kPareto, t) ==
              doctest::Approx(10.0 * (kPareto.cdf(t) - kPareto.cdf(t - 5.0))).epsilon(1e-9));
    }
    CHECK(departure_rate(term, kPareto, 1e6) < 1e-9);
    const auto lin = ArrivalRate::linear(20.0, -0.5, 0.0, 30.0);
    CHECK(departure_rate(lin, kPareto, 12.0) ==
          doctest::Approx(oracle::quad([&](double u) { return lin.rate(u) * kPareto.pdf(12.0 - u); }, 0.0, 12.0))
              .epsilon(1e-9));
}

TEST_CASE("nu_tau and remaining survival") {
    CHECK(nu_tau(ArrivalRate::steady(10.0), kPareto, 7.0) == doctest::Approx(30.0));
    CHECK(nu_tau(ArrivalRate::constant(10.0), kPareto, 0.0) == 0.0);
    CHECK(nu_tau(ArrivalRate::constant(10.0), kPareto, 4.0) == doctest::Approx(30.0 * kPareto.excess_cdf(4.0)));
    for (double x : {0.0, 1.0, 5.0}) {
        CHECK(remaining_survival(ArrivalRate::steady(10.0), kPareto, 3.0, x) == doctest::Approx(kPareto.excess_ccdf(x)));
    }
    const auto r = ArrivalRate::constant(10.0);
    const double tau = 5.0;
    for (double x : {0.0, 0.7, 4.0, 25.0}) {
        const double g = remaining_survival(r, kPareto, tau, x);
        CHECK(g == doctest::Approx(ref_mass(r, kPareto, 0.0, tau, tau + x) / ref_nu(r, kPareto, tau)).epsilon(1e-9));
        // Constant rate from 0: (G_e(tau + x) - G_e(x)) / G_e(tau).
        CHECK(g == doctest::Approx((kPareto.excess_cdf(tau + x) - kPareto.excess_cdf(x)) / kPareto.excess_cdf(tau))
                       .epsilon(1e-9));
        CHECK(remaining_survival(r, kPareto, tau, x, Method::quadrature) == doctest::Approx(g).epsilon(1e-8));
    }
    CHECK_THROWS_AS(remaining_survival(r, kPareto, 0.0, 1.0), DegenerateError);
}

TEST_CASE("conditional law basics") {
    const auto r = ArrivalRate::steady(10.0);
    const auto point = conditional_law(r, kPareto, 0.0, 0.0, 17);
    CHECK(point.p() == 1.0);
    CHECK(point.m() == 0.0);
    CHECK(point.pmf(17) == doctest::Approx(1.0));
    const auto empty = conditional_law(r, kPareto, 0.0, 2.0, 0);
    for (int y : {0, 5, 12}) CHECK(empty.pmf(y) == doctest::Approx(poisson_pmf(empty.m(), y)));

    for (double delta : {1.0, 3.0, 10.0}) {
        const auto law = conditional_law(r, kPareto, 0.0, delta, 60);
        // Stationary conditional mean lambda E[S] G_e(delta) + n G_e^c(delta).
        CHECK(law.mean() ==
              doctest::Approx(30.0 * kPareto.excess_cdf(delta) + 60.0 * kPareto.excess_ccdf(delta)).epsilon(1e-12));
        const auto table = law.pmf_table();
        double total = 0.0, mean = 0.0, m2 = 0.0;
        for (std::size_t y = 0; y < table.size(); ++y) {
            total += table[y];
            mean += y * table[y];
            m2 += double(y) * y * table[y];
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
        CHECK(mean == doctest::Approx(law.mean()).epsilon(1e-9));
        CHECK(m2 - mean * mean == doctest::Approx(law.variance()).epsilon(1e-9));
        CHECK(law.cdf(law.quantile(0.5)) >= 0.5);
        CHECK(law.cdf(law.quantile(0.5) - 1) < 0.5);
    }
}

TEST_CASE("pmf convolution against boost") {
    const ConditionalOccupancyLaw law(40, 0.35, 7.5);
    boost::math::binomial_distribution<double> bi(40, 0.35);
    boost::math::poisson_distribution<double> po(7.5);
    for (long y : {0L, 3L, 14L, 21L, 40L, 60L}) {
        double ref = 0.0;
        for (long k = 0; k <= std::min(40L, y); ++k) ref += boost::math::pdf(bi, k) * boost::math::pdf(po, y - k);
        CHECK(law.pmf(y) == doctest::Approx(ref).epsilon(1e-10));
        CHECK(law.pmf_table()[static_cast<std::size_t>(y)] == doctest::Approx(ref).epsilon(1e-10));
    }
    // Prison-scale n does not overflow.
    const ConditionalOccupancyLaw big(10000, 0.9, 800.0);
    double s = 0.0;
    for (double v : big.pmf_table()) s += v;
    CHECK(std::abs(s - 1.0) < 1e-9);
}

TEST_CASE("poisson approximation") {
    const auto r = ArrivalRate::steady(10.0);
    CHECK(poisson_approx_law(r, kPareto, 0.0, 0.0, 44) == 44.0);
    CHECK(poisson_approx_law(r, kPareto, 0.0, 4.0, 44) == conditional_law(r, kPareto, 0.0, 4.0, 44).mean());

    // Distance at n=500, p=0.8, m=50 against an independent Boost summation.
    const ConditionalOccupancyLaw law(500, 0.8, 50.0);
    boost::math::binomial_distribution<double> bi(500, 0.8);
    boost::math::poisson_distribution<double> po(50.0), approx(450.0);
    double tv = 0.0;
    for (long y = 0; y < 1200; ++y) {
        double exact = 0.0;
        for (long k = std::max(0L, y - 400); k <= std::min(500L, y); ++k)
            exact += boost::math::pdf(bi, k) * boost::math::pdf(po, y - k);
        tv += std::abs(exact - boost::math::pdf(approx, y));
    }
    tv *= 0.5;
    CHECK(total_variation_to_poisson(law, 450.0) == doctest::Approx(tv).epsilon(1e-8));
}

TEST_CASE("region consistency") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const double alpha = 2.2 + 4.0 * u(gen);
        const auto d = i % 3 == 2 ? ServiceDistribution::exponential(0.2 + u(gen))
                                  : ServiceDistribution::pareto(0.5 + 10.0 * u(gen), alpha);
        const double b0 = 5.0 + 50.0 * u(gen);
        const double b1 = (u(gen) - 0.5) * b0 / 60.0;
        const auto r = ArrivalRate::linear(b0, b1, 0.0, 60.0);
        const double tau = 1.0 + 30.0 * u(gen);
        const double delta = 25.0 * u(gen);
        const double lhs = nu_tau(r, d, tau) * remaining_survival(r, d, tau, delta) + new_arrivals_mean(r, d, tau, delta);
        const double rhs = ref_mass(r, d, 0.0, tau + delta, tau + delta);
        CHECK(std::abs(lhs - rhs) < 1e-8);
        CHECK(std::abs(unconditional_mean(r, d, tau + delta) - rhs) < 1e-8);
    }
}

TEST_CASE("monotonicity") {
    // m_check is non-decreasing only for non-decreasing rates; a falling rate can shrink it.
    const auto r = ArrivalRate::linear(30.0, 0.2, 0.0, 100.0);
    double prev_p = 1.0, prev_m = 0.0;
    for (int i = 0; i <= 60; ++i) {
        const double delta = 0.5 * i;
        const double p = remaining_survival(r, kPareto, 20.0, delta);
        const double m = new_arrivals_mean(r, kPareto, 20.0, delta);
        CHECK(p <= prev_p + 1e-15);
        CHECK(m >= prev_m - 1e-12);
        prev_p = p;
        prev_m = m;
    }
}

TEST_CASE("constant-rate reductions at large tau") {
    // The gap decays like G_e^c(tau): about 4e-6 for alpha = 3 at tau = 3000, so the 1e-6 check uses alpha = 4.
    const auto r = ArrivalRate::constant(10.0);
    for (const auto& d : {ServiceDistribution::pareto(9.0, 4.0), ServiceDistribution::exponential(1.0 / 3.0)}) {
        const double tau = 1000.0 * d.mean();
        for (double delta : {1.0, 5.0, 20.0}) {
            CHECK(std::abs(remaining_survival(r, d, tau, delta) - d.excess_ccdf(delta)) < 1e-6);
            CHECK(std::abs(new_arrivals_mean(r, d, tau, delta) - 10.0 * d.mean() * d.excess_cdf(delta)) < 1e-6);
        }
    }
    const double tau = 3000.0;
    CHECK(std::abs(remaining_survival(r, kPareto, tau, 5.0) - kPareto.excess_ccdf(5.0)) < 10.0 * kPareto.excess_ccdf(tau));
}

TEST_CASE("elapsed-informed prediction") {
    const auto none = ArrivalRate::constant(0.0);
    const auto e = ServiceDistribution::exponential(0.5);
    const auto mv = elapsed_informed_prediction(std::vector<double>(10, 0.0), e, none, 0.0, 2.0);
    const double p = std::exp(-1.0);
    CHECK(mv.mean == doctest::Approx(10.0 * p));
    CHECK(mv.variance == doctest::Approx(10.0 * p * (1.0 - p)));

    const auto par = ServiceDistribution::pareto(10.44, 3.0);
    const auto one = elapsed_informed_prediction({10.44}, par, none, 0.0, 6.0);
    CHECK(one.mean == doctest::Approx(par.ccdf(3.0)).epsilon(1e-12));

    // Monte Carlo over conditioned remaining times: Y_y is Pareto(theta + y, alpha).
    const std::vector<double> ys{1.0, 5.0, 20.0};
    const auto r = ArrivalRate::constant(4.0);
    const auto pred = elapsed_informed_prediction(ys, par, r, 0.0, 6.0);
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int draws = 1000000;
    double s = 0.0, s2 = 0.0;
    const double m = new_arrivals_mean(r, par, 0.0, 6.0);
    std::poisson_distribution<int> pois(m);
    for (int i = 0; i < draws; ++i) {
        int alive = pois(gen);
        for (double y : ys) {
            const double scale = 10.44 + y;
            const double remaining = scale * (std::pow(u(gen), -1.0 / 3.0) - 1.0);
            alive += remaining > 6.0;
        }
        s += alive;
        s2 += double(alive) * alive;
    }
    const double mean = s / draws;
    const double var = s2 / draws - mean * mean;
    CHECK(std::abs(mean - pred.mean) < 3.0 * std::sqrt(var / draws));
    CHECK(var == doctest::Approx(pred.variance).epsilon(0.01));
    CHECK_THROWS_AS(elapsed_informed_prediction({3.0}, ServiceDistribution::deterministic(2.0), none, 0.0, 1.0),
                    DegenerateError);
}

TEST_CASE("service switch") {
    const auto r = ArrivalRate::steady(10.0);
    CHECK(service_switch_mean(r, kPareto, kPareto, 0.0, 4.0) == doctest::Approx(30.0).epsilon(1e-12));
    const auto ramp = ArrivalRate::linear(40.0, -0.2, 0.0, 100.0);
    CHECK(service_switch_mean(ramp, kPareto, kPareto, 10.0, 6.0) ==
          doctest::Approx(unconditional_mean(ramp, kPareto, 16.0)).epsilon(1e-12));
    CHECK(service_switch_mean(ramp, kPareto, ServiceDistribution::pareto(1.0, 4.0), 10.0, 0.0) ==
          doctest::Approx(nu_tau(ramp, kPareto, 10.0)));
    // Steady state: the cohort term reduces to nu G_e^{o,c}(delta).
    const auto fast = ServiceDistribution::pareto_with_mean(1.5, 3.0);
    CHECK(service_switch_mean(r, kPareto, fast, 0.0, 5.0) ==
          doctest::Approx(service_switch_mean(r, kPareto, fast, 0.0, 5.0, SwitchCohort::stationary_excess)));

    // Theft-like ordering: shorter new sentences sit below longer ones at every horizon.
    const auto theft = ArrivalRate::linear(677.4, -3.77, -400.0, 120.0);
    const auto old_law = ServiceDistribution::pareto_with_mean(5.22, 4.0);
    for (double delta = 1.0; delta <= 24.0; delta += 1.0) {
        const double lo = service_switch_mean(theft, old_law, ServiceDistribution::pareto_with_mean(3.0, 4.0), 52.0, delta);
        const double mid = service_switch_mean(theft, old_law, old_law, 52.0, delta);
        const double hi = service_switch_mean(theft, old_law, ServiceDistribution::pareto_with_mean(8.0, 4.0), 52.0, delta);
        CHECK(lo < mid);
        CHECK(mid < hi);
    }
}

TEST_CASE("observed state json") {
    const auto s = observed_state_from_json(nlohmann::json::parse(
        R"({"tau":12,"classes":[{"class_id":"theft","n":3,"elapsed":[1,2,3]},{"class_id":"fraud","n":9}]})"));
    CHECK(s.classes.size() == 2);
    CHECK(to_json(s)["classes"][0]["elapsed"].size() == 3);
    CHECK_THROWS_AS(observed_state_from_json(nlohmann::json::parse(R"({"tau":1,"classes":[{"n":2,"elapsed":[1]}]})")),
                    DomainError);
    CHECK_THROWS_AS(observed_state_from_json(nlohmann::json::parse(R"({"classes":[]})")), ParseError);
}
