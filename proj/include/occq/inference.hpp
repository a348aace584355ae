#pragma once

#include <cstdint>
#include <functional>
#include <json.hpp>
#include <optional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "occq/errors.hpp"
#include "occq/observed_queue.hpp"
#include "occq/series.hpp"

namespace occq {

/// Linear arrival rate beta0 + beta1 t with a Pareto(theta, alpha) service law.
struct ModelParams {
    double beta0;
    double beta1;
    double alpha;
    double theta;
};

/// v_tau, p_tau(delta) and m_check(tau + delta) for a linear rate running since t = -inf.
struct ClosedForms {
    double v_tau;
    double p_tau_delta;
    double m_check;
};

/// Requires alpha > 2 (UnsupportedError) and a non-negative rate on (-inf, tau + delta]
/// (DomainError), i.e. beta1 <= 0 and beta0 + beta1 (tau + delta) >= 0.
ClosedForms closed_forms(double beta0, double beta1, double alpha, double theta, double tau, double delta);
inline ClosedForms closed_forms(const ModelParams& p, double tau, double delta) {
    return closed_forms(p.beta0, p.beta1, p.alpha, p.theta, tau, delta);
}

/// M(tau + delta) = n p_tau(delta) + m_check(tau + delta).
double forecast_mean(const ModelParams& p, double tau, double delta, std::int64_t n);

struct NormalPrior {
    double mu;
    double sigma;
};
struct UniformPrior {
    double lo;
    double hi;
};

struct PriorSpec {
    NormalPrior beta0{0.0, 1.0};
    NormalPrior beta1{0.0, 1.0};
    UniformPrior alpha{2.5, 10.0};
    double mean_service = 1.0;  ///< E[S] in months; theta = E[S] (alpha - 1)

    /// Throws DomainError; returns warnings for permitted but unusual settings.
    std::vector<std::string> validate() const;
    double theta_for(double alpha) const { return mean_service * (alpha - 1.0); }
};

/// Free parameters of the occupancy model; theta follows from the prior's theta rule.
struct FreeParams {
    double beta0;
    double beta1;
    double alpha;
};

/// Log posterior up to a constant. Month i > 0 contributes log Po(n_i; M) with M conditioned on
/// n_{i-1}; the first month is the initial condition. -inf outside the support.
double log_posterior(const FreeParams& x, const CountSeries& series, const PriorSpec& priors,
                     bool include_likelihood = true);
/// Analytic d/d beta0 of log_posterior.
double log_posterior_dbeta0(const FreeParams& x, const CountSeries& series, const PriorSpec& priors);

struct McmcSettings {
    int chains = 2;
    int iterations = 10000;
    int warmup = -1;  ///< -1 means iterations / 2
    std::uint64_t seed = 0;
    int max_restarts = 2;
    double rhat_threshold = 1.05;
    bool include_likelihood = true;

    int warmup_iterations() const { return warmup < 0 ? iterations / 2 : warmup; }
};

struct Diagnostics {
    std::vector<std::string> parameters;
    std::vector<double> r_hat;
    std::vector<double> ess;
    std::vector<double> acceptance;  ///< per chain
    int iterations = 0;
    int restarts = 0;

    double max_r_hat() const;
};

struct Draw {
    double beta0;
    double beta1;
    double alpha;
    double theta;

    ModelParams params() const { return {beta0, beta1, alpha, theta}; }
};

/// Post-warmup draws, chain-major: chain c owns [c * per_chain, (c + 1) * per_chain).
struct PosteriorDraws {
    std::vector<Draw> draws;
    int chains = 0;
    Diagnostics diagnostics;
    bool converged = true;

    std::size_t per_chain() const { return chains == 0 ? 0 : draws.size() / static_cast<std::size_t>(chains); }
};

/// Sampler failure after every restart; carries the last traces.
class FitConvergenceError : public ConvergenceError {
public:
    FitConvergenceError(const std::string& what, PosteriorDraws traces)
        : ConvergenceError(what, "increase iterations or tighten the priors"), traces_(std::move(traces)) {}
    const PosteriorDraws& traces() const { return traces_; }

private:
    PosteriorDraws traces_;
};

/// Adaptive random-walk Metropolis over (beta0, beta1, alpha).
PosteriorDraws fit(const CountSeries& series, const PriorSpec& priors, const McmcSettings& mcmc);

struct ArrivalDraw {
    double beta0;
    double beta1;
};
struct ArrivalPosterior {
    std::vector<ArrivalDraw> draws;
    int chains = 0;
    Diagnostics diagnostics;
};

/// Posterior of (beta0, beta1) from monthly arrival counts: month t ~ Po(int_t^{t+1} lambda), flat priors.
ArrivalPosterior fit_arrival_counts(const CountSeries& arrivals, const McmcSettings& mcmc);

/// Normal priors centred on the posterior means with `sd_scale` times the posterior sds.
PriorSpec prior_from_arrivals(const ArrivalPosterior& posterior, double mean_service, double sd_scale = 10.0,
                              UniformPrior alpha = {2.5, 10.0});

/// What-if changes applied to post-tau arrivals.
struct Scenario {
    std::optional<double> new_mean_service;  ///< E[S^new]; theta = E[S^new] (alpha - 1) per draw
    double lambda_scale = 1.0;
    double pause_months = 0.0;  ///< arrivals stop for this long after tau

    bool is_baseline() const { return !new_mean_service && lambda_scale == 1.0 && pause_months == 0.0; }
};

struct ForecastPoint {
    int delta;
    double t;
    double mean;
    double sd;
    double lower;  ///< mean - 2 sd
    double upper;  ///< mean + 2 sd
    double sampled_mean;
    double sampled_sd;
};

struct PredictionSeries {
    enum class Mode { long_term, short_term };
    Mode mode = Mode::long_term;
    std::string class_id = "all";
    double tau = 0.0;
    std::int64_t n = 0;
    std::vector<ForecastPoint> points;
};

struct PredictOptions {
    std::uint64_t seed = 0;
    double horizon_cap = 24.0;  ///< months past tau the linear rate is trusted
    Scenario scenario{};
};

/// Posterior predictive from one posterior. mean/sd are E[M] and sqrt(E[M] + Var[M]) over draws;
/// sampled_mean/sampled_sd draw Q ~ Po(M) once per posterior draw. delta = 0 is the observation.
PredictionSeries predict(const PosteriorDraws& draws, double tau, std::int64_t n, const std::vector<int>& horizons,
                         const PredictOptions& opts = {});
PredictionSeries predict(const PosteriorDraws& draws, const ObservedState& state, const std::vector<int>& horizons,
                         const PredictOptions& opts = {});

/// One-step-ahead forecasts, refitting after each realized month of `full` beyond `train_size`.
PredictionSeries predict_short_term(const CountSeries& full, std::size_t train_size, int q, const PriorSpec& priors,
                                    const McmcSettings& mcmc, const PredictOptions& opts = {});

/// sqrt(mean (n - mu)^2) over forecast points; every point's time must be a month of `actual`.
double rmse(const PredictionSeries& pred, const CountSeries& actual);

/// Occupancy series generated from the model: n_0 ~ Po(v_0), n_i ~ Po(M(i | n_{i-1})).
CountSeries simulate_count_series(const ModelParams& truth, int months, std::uint64_t seed);
/// Monthly arrival counts: month t ~ Po(beta0 + beta1 (t + 1/2)).
CountSeries simulate_arrival_counts(double beta0, double beta1, int months, std::uint64_t seed);

std::vector<int> horizon_range(int q);

nlohmann::json to_json(const PriorSpec& p);
PriorSpec prior_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const McmcSettings& m);
McmcSettings mcmc_settings_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Diagnostics& d);
nlohmann::json to_json(const PredictionSeries& p);
nlohmann::json to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
/// chain,draw,beta0,beta1,alpha,theta
void write_draws_csv(std::ostream& os, const PosteriorDraws& d);
/// Inverse of write_draws_csv. Diagnostics are not stored in the file.
PosteriorDraws read_draws_csv(std::istream& in);
/// delta,t,mean,sd,lower,upper for fan charts.
void write_prediction_csv(std::ostream& os, const PredictionSeries& p);

}  // namespace occq
