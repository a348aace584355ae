"""Occupancy forecasting for M_t/G/inf queues observed at a point in time."""

import json

from ._core import (
    ArrivalRate,
    ConditionalOccupancyLaw,
    ConvergenceError,
    DegenerateError,
    DomainError,
    Error,
    InfeasibleError,
    LastDepartureLaw,
    Method,
    NumericalError,
    ParseError,
    ServiceDistribution,
    UnsupportedError,
    __version__,
    closed_forms,
    conditional_law,
    elapsed_informed_prediction,
    new_arrivals_mean,
    nu_tau,
    pareto_recovery_time,
    recovery_time,
    remaining_survival,
    total_variation_to_poisson,
    unconditional_mean,
)
from . import _core


def simulate(config, probes):
    """Run the discrete-event simulator. `config` uses the CLI's simulation JSON layout."""
    return json.loads(_core._simulate(json.dumps(config), list(probes)))


def fit(series, priors, mcmc=None):
    """Posterior draws for a monthly series.

    series: {"origin": "YYYY-MM", "counts": [...]} or {"points": [{"month", "count"}]}.
    """
    return json.loads(_core._fit(json.dumps(series), json.dumps(priors), json.dumps(mcmc or {})))


def predict(posterior, tau, n, horizons, seed=0, scenario=None):
    """Forecast from a posterior returned by `fit` (or any dict with column draws)."""
    return json.loads(
        _core._predict(json.dumps(posterior), float(tau), int(n), list(horizons), int(seed),
                       json.dumps(scenario) if scenario else "")
    )


def recover(request):
    return json.loads(_core._recover(json.dumps(request)))


def last_departure(request):
    return json.loads(_core._last_departure(json.dumps(request)))


class Service:
    """The HTTP API's route table without a socket: handle(method, path, body) -> (status, dict)."""

    def __init__(self, **config):
        self._service = _core._Service(json.dumps(config))

    def handle(self, method, path, body=None):
        text = body if isinstance(body, str) else json.dumps(body) if body is not None else ""
        status, payload = self._service.handle(method, path, text)
        return status, json.loads(payload)

    def drain(self):
        self._service.drain()
