#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "occq/api.hpp"
#include "occq/errors.hpp"
#include "occq/horizon.hpp"
#include "occq/inference.hpp"
#include "occq/observed_queue.hpp"
#include "occq/requests.hpp"
#include "occq/simulator.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace occq;

namespace {

// JSON crosses the boundary as text; the Python side wraps these with json.loads/dumps.
json parse(const std::string& s) { return json::parse(s); }

std::string simulate_json(const std::string& config, const std::vector<double>& probes) {
    const auto cfg = sim_config_from_json(parse(config));
    SimOutput out;
    {
        py::gil_scoped_release release;
        out = run(cfg, probes);
    }
    return to_json(out).dump();
}

std::string fit_json(const std::string& series, const std::string& priors, const std::string& mcmc) {
    const auto s = count_series_from_json(parse(series));
    const auto p = prior_spec_from_json(parse(priors));
    const auto m = mcmc_settings_from_json(parse(mcmc));
    PosteriorDraws d;
    {
        py::gil_scoped_release release;
        d = fit(s, p, m);
    }
    return posterior_json(d).dump();
}

PosteriorDraws draws_from_json(const json& j) {
    PosteriorDraws d;
    d.chains = j.value("chains", 1);
    const auto& cols = j.at("draws");
    const auto b0 = cols.at("beta0").get<std::vector<double>>(), b1 = cols.at("beta1").get<std::vector<double>>(),
               a = cols.at("alpha").get<std::vector<double>>(), th = cols.at("theta").get<std::vector<double>>();
    if (b1.size() != b0.size() || a.size() != b0.size() || th.size() != b0.size()) {
        throw ParseError("posterior draws: columns differ in length");
    }
    for (std::size_t i = 0; i < b0.size(); ++i) d.draws.push_back({b0[i], b1[i], a[i], th[i]});
    return d;
}

std::string predict_json(const std::string& posterior, double tau, std::int64_t n, const std::vector<int>& horizons,
                         std::uint64_t seed, const std::string& scenario) {
    PredictOptions opts;
    opts.seed = seed;
    if (!scenario.empty()) opts.scenario = scenario_from_json(parse(scenario));
    return to_json(predict(draws_from_json(parse(posterior)), tau, n, horizons, opts)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Observed-queue occupancy engine";
    m.attr("__version__") = engine_version();

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<UnsupportedError>(m, "UnsupportedError", base.ptr());
    py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
    py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const json::exception& e) {
            PyErr_SetString(PyExc_ValueError, plain_message(e).c_str());
        }
    });

    py::class_<ServiceDistribution>(m, "ServiceDistribution")
        .def_static("pareto", &ServiceDistribution::pareto, py::arg("theta"), py::arg("alpha"))
        .def_static("pareto_with_mean", &ServiceDistribution::pareto_with_mean, py::arg("mean"), py::arg("alpha"))
        .def_static("exponential", &ServiceDistribution::exponential, py::arg("rate"))
        .def_static("deterministic", &ServiceDistribution::deterministic, py::arg("d"))
        .def_property_readonly("name", &ServiceDistribution::name)
        .def("ccdf", &ServiceDistribution::ccdf)
        .def("cdf", &ServiceDistribution::cdf)
        .def("pdf", &ServiceDistribution::pdf)
        .def("quantile", &ServiceDistribution::quantile)
        .def("mean", &ServiceDistribution::mean)
        .def("excess_ccdf", &ServiceDistribution::excess_ccdf)
        .def("excess_mean", &ServiceDistribution::excess_mean)
        .def("conditional_remaining_ccdf", &ServiceDistribution::conditional_remaining_ccdf, py::arg("elapsed"),
             py::arg("t"))
        .def("__repr__", [](const ServiceDistribution& d) { return "ServiceDistribution(" + to_json(d).dump() + ")"; });

    py::class_<ArrivalRate>(m, "ArrivalRate")
        .def_static("constant", &ArrivalRate::constant, py::arg("rate"), py::arg("start") = 0.0,
                    py::arg("end") = ArrivalRate::inf)
        .def_static("steady", &ArrivalRate::steady, py::arg("rate"))
        .def_static("linear", &ArrivalRate::linear, py::arg("beta0"), py::arg("beta1"), py::arg("lo"), py::arg("hi"))
        .def_static("piecewise_linear", &ArrivalRate::piecewise_linear, py::arg("knots"))
        .def("rate", &ArrivalRate::rate)
        .def("integral", &ArrivalRate::integral)
        .def("__repr__", [](const ArrivalRate& r) { return "ArrivalRate(" + r.to_json().dump() + ")"; });

    py::class_<ConditionalOccupancyLaw>(m, "ConditionalOccupancyLaw")
        .def(py::init<std::int64_t, double, double>(), py::arg("n"), py::arg("p"), py::arg("m"))
        .def_property_readonly("n", &ConditionalOccupancyLaw::n)
        .def_property_readonly("p", &ConditionalOccupancyLaw::p)
        .def_property_readonly("m", &ConditionalOccupancyLaw::m)
        .def("mean", &ConditionalOccupancyLaw::mean)
        .def("variance", &ConditionalOccupancyLaw::variance)
        .def("pmf", &ConditionalOccupancyLaw::pmf)
        .def("cdf", &ConditionalOccupancyLaw::cdf)
        .def("quantile", &ConditionalOccupancyLaw::quantile)
        .def("pmf_table", &ConditionalOccupancyLaw::pmf_table);

    py::enum_<Method>(m, "Method").value("analytic", Method::analytic).value("quadrature", Method::quadrature);
    const auto analytic = py::arg("method") = Method::analytic;
    m.def("unconditional_mean", &unconditional_mean, py::arg("rate"), py::arg("dist"), py::arg("t"), analytic);
    m.def("nu_tau", &nu_tau, py::arg("rate"), py::arg("dist"), py::arg("tau"), analytic);
    m.def("remaining_survival", &remaining_survival, py::arg("rate"), py::arg("dist"), py::arg("tau"), py::arg("x"),
          analytic);
    m.def("new_arrivals_mean", &new_arrivals_mean, py::arg("rate"), py::arg("dist"), py::arg("tau"), py::arg("delta"),
          analytic);
    m.def("conditional_law", &conditional_law, py::arg("rate"), py::arg("dist"), py::arg("tau"), py::arg("delta"),
          py::arg("n"));
    m.def("total_variation_to_poisson", &total_variation_to_poisson, py::arg("law"), py::arg("poisson_mean"));
    m.def(
        "elapsed_informed_prediction",
        [](const std::vector<double>& elapsed, const ServiceDistribution& d, const ArrivalRate& r, double tau,
           double delta) {
            const auto mv = elapsed_informed_prediction(elapsed, d, r, tau, delta);
            return py::make_tuple(mv.mean, mv.variance);
        },
        py::arg("elapsed"), py::arg("dist"), py::arg("rate"), py::arg("tau"), py::arg("delta"));

    m.def(
        "closed_forms",
        [](double beta0, double beta1, double alpha, double theta, double tau, double delta) {
            const auto c = closed_forms(beta0, beta1, alpha, theta, tau, delta);
            return py::dict(py::arg("v_tau") = c.v_tau, py::arg("p_tau_delta") = c.p_tau_delta,
                            py::arg("m_check") = c.m_check);
        },
        py::arg("beta0"), py::arg("beta1"), py::arg("alpha"), py::arg("theta"), py::arg("tau"), py::arg("delta"));

    py::class_<LastDepartureLaw>(m, "LastDepartureLaw")
        .def_static("stationary", &LastDepartureLaw::stationary, py::arg("rate"), py::arg("dist"))
        .def_property_readonly("nu", &LastDepartureLaw::nu)
        .def("cdf", &LastDepartureLaw::cdf)
        .def("quantile", &LastDepartureLaw::quantile)
        .def("moment", &LastDepartureLaw::moment);

    m.def(
        "recovery_time",
        [](double lambda, const ServiceDistribution& d, double n, std::optional<double> k) {
            return recovery_time(RecoveryProblem(lambda, d, n, k));
        },
        py::arg("rate"), py::arg("dist"), py::arg("n"), py::arg("k") = py::none());
    m.def("pareto_recovery_time", &pareto_recovery_time, py::arg("theta"), py::arg("alpha"), py::arg("nu"),
          py::arg("n"), py::arg("k"));

    m.def("_simulate", &simulate_json);
    m.def("_fit", &fit_json);
    m.def("_predict", &predict_json);
    m.def("_recover", [](const std::string& body) { return run_recovery(recovery_request_from_json(parse(body))).dump(); });
    m.def("_last_departure",
          [](const std::string& body) { return run_last_departure(last_departure_request_from_json(parse(body))).dump(); });

    py::class_<api::Service>(m, "_Service")
        .def(py::init([](const std::string& config) {
            return std::make_unique<api::Service>(api::server_config_from_json(parse(config)));
        }))
        .def("handle",
             [](api::Service& s, const std::string& method, const std::string& path, const std::string& body) {
                 api::Response r;
                 {
                     py::gil_scoped_release release;
                     r = s.handle(method, path, body);
                 }
                 return py::make_tuple(r.status, r.body.dump());
             })
        .def("drain", [](api::Service& s) {
            py::gil_scoped_release release;
            s.drain();
        });
}
