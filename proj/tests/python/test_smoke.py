import math

import pytest

import occq


def test_version():
    assert occq.__version__


def test_pareto_distribution():
    d = occq.ServiceDistribution.pareto_with_mean(3.0, 3.0)
    assert d.mean() == pytest.approx(3.0)
    assert d.ccdf(0.0) == 1.0
    assert d.cdf(d.quantile(0.7)) == pytest.approx(0.7, abs=1e-12)
    # E[S_e] = E[S] (scv + 1) / 2 with scv = alpha / (alpha - 2) = 3.
    assert d.excess_mean() == pytest.approx(6.0)
    # Remaining mean after x months grows by (1 + x / theta).
    tail = sum(d.conditional_remaining_ccdf(6.0, 0.01 * (i + 0.5)) * 0.01 for i in range(200000))
    assert tail == pytest.approx(2.0 * d.mean(), rel=2e-3)


def test_conditional_law_at_delta_zero_is_the_observation():
    rate = occq.ArrivalRate.steady(10.0)
    d = occq.ServiceDistribution.pareto(6.0, 3.0)
    law = occq.conditional_law(rate, d, 0.0, 0.0, 44)
    assert law.pmf(44) == pytest.approx(1.0)
    law = occq.conditional_law(rate, d, 0.0, 3.0, 60)
    assert law.mean() == pytest.approx(60 * law.p + law.m)
    assert sum(law.pmf_table()) == pytest.approx(1.0, abs=1e-10)


def test_closed_forms_constant_rate():
    cf = occq.closed_forms(40.0, 0.0, 3.0, 10.44, 12.0, 5.0)
    assert cf["v_tau"] == pytest.approx(40.0 * 10.44 / 2.0)
    with pytest.raises(occq.UnsupportedError):
        occq.closed_forms(40.0, 0.0, 2.0, 10.44, 12.0, 5.0)


def test_simulate_matches_unconditional_mean():
    cfg = {
        "rate": {"kind": "steady", "lambda": 10},
        "dist": {"kind": "pareto", "mean": 3, "alpha": 3},
        "initial": {"n": 60},
        "horizon": 3,
        "replications": 4000,
        "seed": 3,
    }
    out = occq.simulate(cfg, [3.0])
    law = occq.conditional_law(occq.ArrivalRate.steady(10.0), occq.ServiceDistribution.pareto(6.0, 3.0), 0.0, 3.0, 60)
    probe = out["probes"][0]
    assert abs(probe["mean"] - law.mean()) < 4 * probe["se"]


def test_fit_and_predict():
    counts = [700, 697, 690, 688, 680, 677, 671, 668, 660, 655, 652, 646]
    series = {"origin": "2015-03", "counts": counts}
    priors = {
        "beta0": {"mu": 150, "sigma": 30},
        "beta1": {"mu": -1, "sigma": 1},
        "alpha": {"lo": 2.5, "hi": 10},
        "mean_service": 5.22,
    }
    post = occq.fit(series, priors, {"chains": 2, "iterations": 2000, "seed": 4})
    assert post["chains"] == 2
    pred = occq.predict(post, tau=11, n=counts[-1], horizons=[0, 1, 6], seed=1)
    points = pred["points"]
    assert points[0]["mean"] == counts[-1]
    assert points[0]["sd"] == 0.0
    assert points[2]["sd"] >= points[1]["sd"]


def test_recover_and_last_departure():
    r = occq.recover({"lambda": 10, "E_S": 3, "alpha": 3, "n": 60, "intervention": {"kind": "scale_lambda", "factor": 0.8}})
    assert r["intervention"]["beta_months"] < r["baseline"]["beta_months"]
    assert abs(r["baseline"]["beta_months"] - r["bisection_months"]) < 1e-9
    ld = occq.last_departure({"lambda": 10, "E_S": 3, "scv": 3, "probabilities": [0.9]})
    assert ld["nu"] == pytest.approx(30.0)
    law = occq.LastDepartureLaw.stationary(10.0, occq.ServiceDistribution.pareto_with_mean(3.0, 3.0))
    assert law.cdf(law.quantile(0.9)) == pytest.approx(0.9, abs=1e-9)


def test_service_routes():
    svc = occq.Service(workers=1)
    status, body = svc.handle("GET", "/health")
    assert status == 200 and body["status"] == "ok"
    status, body = svc.handle("POST", "/recover", {"lambda": 10, "E_S": 3, "alpha": 3, "n": 20})
    assert status == 422
    assert body["seed"] is None
    status, _ = svc.handle("GET", "/fit/nope")
    assert status == 404


def test_errors_are_typed():
    with pytest.raises(occq.Error):
        occq.recovery_time(10.0, occq.ServiceDistribution.pareto_with_mean(3.0, 3.0), 25.0)
    with pytest.raises(occq.ParseError):
        occq.recover({"lambda": 10})
    assert math.isfinite(occq.pareto_recovery_time(6.0, 3.0, 30.0, 60.0, 31.0))
