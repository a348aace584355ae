#pragma once

// JSON-level operations shared by the command line and the HTTP API.

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "occq/horizon.hpp"
#include "occq/inference.hpp"
#include "occq/series.hpp"

namespace occq {

std::string engine_version();

nlohmann::json to_json(const CountSeries& s);
/// {"class_id", "origin": "YYYY-MM", "points": [{"month": "YYYY-MM", "count"}]} or
/// {"class_id", "origin", "counts": [...]} for consecutive months.
CountSeries count_series_from_json(const nlohmann::json& j);

/// {"beta0", "beta1", "alpha", and "theta" or "mean_service"}.
ModelParams model_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelParams& p);
/// `copies` identical draws in one chain.
PosteriorDraws point_posterior(const ModelParams& p, int copies = 1);

nlohmann::json posterior_json(const PosteriorDraws& d);

/// Horizons from a list or a count q (1..q).
std::vector<int> horizons_from_json(const nlohmann::json& j);

struct RecoveryRequest {
    double lambda = 0.0;
    double mean_service = 0.0;
    double alpha = 0.0;
    double n = 0.0;
    std::optional<double> k;
    Intervention intervention;
};

/// {"lambda", "E_S", "alpha", "n", "k"?, "intervention"?}.
RecoveryRequest recovery_request_from_json(const nlohmann::json& j);
/// {"baseline": RecoveryResult, "intervention": RecoveryResult | null, "bisection_months"}.
nlohmann::json run_recovery(const RecoveryRequest& r);

struct LastDepartureRequest {
    double lambda = 0.0;
    ServiceDistribution dist = ServiceDistribution::exponential(1.0);
    std::vector<double> probabilities{0.5, 0.9, 0.95, 0.99};
    std::vector<double> grid;
};

/// {"lambda", "dist" | ("E_S", "alpha" | "scv"), "probabilities"?, "grid"?}.
LastDepartureRequest last_departure_request_from_json(const nlohmann::json& j);
/// nu, quantiles, cdf on the grid, and moments (null when infinite).
nlohmann::json run_last_departure(const LastDepartureRequest& r);

}  // namespace occq
