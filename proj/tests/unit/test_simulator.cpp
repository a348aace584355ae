#include <doctest.h>

#include <cmath>

#include "../oracle.hpp"
#include "occq/errors.hpp"
#include "occq/horizon.hpp"
#include "occq/observed_queue.hpp"
#include "occq/simulator.hpp"

using namespace occq;

namespace {

const auto kPareto = ServiceDistribution::pareto(6.0, 3.0);

std::map<long long, long long> to_counts(const Histogram& h) {
    std::map<long long, long long> m;
    for (const auto& [y, c] : h.counts) m[y] = c;
    return m;
}

double law_pvalue(const Histogram& h, const ConditionalOccupancyLaw& law) {
    const auto table = law.pmf_table();
    return oracle::chi_square_pvalue(
        to_counts(h), [&](long long y) { return y < static_cast<long long>(table.size()) ? table[y] : 0.0; }, 0,
        static_cast<long long>(table.size()) - 1, h.replications);
}

}  // namespace

TEST_CASE("empty system stays empty") {
    SimConfig c;
    c.rate = ArrivalRate::constant(0.0);
    c.horizon = 50.0;
    c.replications = 20;
    const auto out = run(c, {0.0, 10.0, 50.0});
    for (const auto& r : out.replications) {
        for (auto q : r.occupancy) CHECK(q == 0);
    }
}

TEST_CASE("empty start approaches lambda E[S]") {
    SimConfig c;
    c.rate = ArrivalRate::constant(10.0);
    c.dist = ServiceDistribution::exponential(1.0 / 3.0);
    c.horizon = 100.0;
    c.replications = 10000;
    c.seed = 4;
    const auto out = run(c, {100.0});
    CHECK(std::abs(out.mean_occupancy(100.0) - 30.0) < 3.0 * out.standard_error(100.0));
}

TEST_CASE("conservation and determinism") {
    SimConfig c;
    c.rate = ArrivalRate::steady(10.0);
    c.dist = kPareto;
    c.initial = FixedCohort{60, std::nullopt};
    c.horizon = 12.0;
    c.replications = 300;
    c.seed = 8;
    const auto a = run(c, {3.0, 12.0});
    for (const auto& r : a.replications) CHECK(r.initial + r.arrivals == r.departed + r.final_occupancy);
    const auto b = run(c, {3.0, 12.0});
    CHECK(to_json(a) == to_json(b));
    c.threads = 1;
    CHECK(to_json(run(c, {3.0, 12.0})) == to_json(a));
    c.seed = 9;
    CHECK(to_json(run(c, {3.0, 12.0})) != to_json(a));
}

TEST_CASE("empirical law") {
    SimConfig c;
    c.rate = ArrivalRate::steady(10.0);
    c.dist = kPareto;
    c.horizon = 3.0;
    c.initial = FixedCohort{60, std::nullopt};
    c.replications = 1;
    const auto one = empirical_law(run(c, {3.0}), 3.0);
    CHECK(one.counts.size() == 1);
    CHECK(one.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(empirical_law(run(c, {3.0}), 4.0), DomainError);

    c.replications = 20000;
    c.seed = 31;
    const auto out = run(c, {3.0});
    const auto h = empirical_law(out, 3.0);
    CHECK(std::abs(h.total_mass() - 1.0) < 1e-12);
    CHECK(law_pvalue(h, conditional_law(c.rate, kPareto, 0.0, 3.0, 60)) > 1e-3);
}

TEST_CASE("memorylessness with recorded zero elapsed times") {
    SimConfig c;
    c.rate = ArrivalRate::steady(4.0);
    c.dist = ServiceDistribution::exponential(0.5);
    c.horizon = 2.0;
    c.replications = 20000;
    c.seed = 12;
    c.initial = FixedCohort{25, std::vector<double>(25, 0.0)};
    const auto law = conditional_law(c.rate, c.dist, 0.0, 2.0, 25);
    CHECK(law_pvalue(empirical_law(run(c, {2.0}), 2.0), law) > 1e-3);
    c.initial = FixedCohort{25, std::nullopt};
    CHECK(law_pvalue(empirical_law(run(c, {2.0}), 2.0), law) > 1e-3);
}

TEST_CASE("service switch matches the analytic mean") {
    SimConfig c;
    c.rate = ArrivalRate::steady(10.0);
    c.dist = kPareto;
    const auto fast = ServiceDistribution::pareto_with_mean(1.5, 3.0);
    c.service_switch = ServiceSwitch{0.0, fast};
    c.initial = FixedCohort{45, std::nullopt};
    c.horizon = 6.0;
    c.replications = 10000;
    c.seed = 17;
    const auto out = run(c, {6.0});
    const double analytic = service_switch_conditional_mean(c.rate, kPareto, fast, 0.0, 6.0, 45);
    CHECK(std::abs(out.mean_occupancy(6.0) - analytic) < 3.0 * out.standard_error(6.0));
}

TEST_CASE("recovery crossing") {
    const RecoveryProblem p(10.0, kPareto, 60.0);
    const double beta = recovery_time(p);
    SimConfig c;
    c.rate = ArrivalRate::steady(10.0);
    c.dist = kPareto;
    c.initial = FixedCohort{60, std::nullopt};
    c.horizon = beta + 1.0;
    c.replications = 10000;
    c.seed = 5;
    const auto out = run(c, {beta});
    CHECK(std::abs(out.mean_occupancy(beta) - 31.0) < 3.0 * out.standard_error(beta));
}

TEST_CASE("config json and validation") {
    const auto c = sim_config_from_json(nlohmann::json::parse(
        R"({"rate":{"kind":"steady","lambda":10},"dist":{"kind":"pareto","mean":3,"alpha":3},
            "initial":"steady-state-poisson","horizon":5,"replications":3,"seed":2})"));
    CHECK(std::holds_alternative<SteadyStatePoissonCohort>(c.initial));
    CHECK(sim_config_from_json(to_json(c)).replications == 3);
    CHECK_THROWS_AS(sim_config_from_json(nlohmann::json::parse(
                        R"({"rate":{"kind":"constant","lambda":1},"dist":{"kind":"exponential","rate":1},"horizon":-1})")),
                    DomainError);
    CHECK_THROWS_AS(sim_config_from_json(nlohmann::json::parse(R"({"rate":{"kind":"constant","lambda":1}})")),
                    ParseError);
    SimConfig bad;
    bad.initial = FixedCohort{2, std::vector<double>{1.0}};
    CHECK_THROWS_AS(bad.validate(), DomainError);
}
