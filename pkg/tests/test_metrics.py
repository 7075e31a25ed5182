"""Censoring-aware evaluation: KM weights, scores, concordance, calibration."""

import json

import numpy as np
import pytest

from gamesurv.core import RawSurvivalData, discretize
from gamesurv.metrics import (
    calibration_curve,
    concordance,
    concordance_index,
    eval_bll,
    eval_bs,
    evaluate,
    km_censoring,
    km_fit,
    nll_metric,
)
from gamesurv.losses import nll
from gamesurv.simgen import MarginalWorld, gen_marginal


def test_km_hand_case():
    km = km_fit(np.array([1.0, 2.0, 2.0, 3.0, 4.0]), np.array([1, 1, 1, 0, 1], bool))
    np.testing.assert_array_equal(km.times, [1, 2, 3, 4])
    np.testing.assert_array_equal(km.at_risk, [5, 4, 2, 1])
    np.testing.assert_array_equal(km.n_events, [1, 2, 0, 1])
    np.testing.assert_allclose(km.surv, [0.8, 0.4, 0.4, 0.0], atol=1e-15)


def test_km_censored_tie_stays_at_risk():
    # a subject censored at t counts in the risk set for the deaths at t
    km = km_fit(np.array([1.0, 1.0]), np.array([True, False]))
    np.testing.assert_allclose(km.surv, [0.5])
    assert km.at_risk[0] == 2


def test_km_step_function_accessors():
    km = km_fit(np.array([1.0, 2.0, 2.0, 3.0, 4.0]), np.array([1, 1, 1, 0, 1], bool))
    np.testing.assert_allclose(km.surv_at([0.5, 1.0, 1.5, 2.0, 4.0]), [1.0, 0.8, 0.8, 0.4, 0.0])
    # the left limit excludes the jump at the query point
    np.testing.assert_allclose(km.surv_left_at([1.0, 2.0, 4.0]), [1.0, 0.8, 0.4])


def test_km_matches_empirical_survival_without_censoring():
    rng = np.random.default_rng(1)
    t = rng.integers(1, 8, size=500).astype(float)
    km = km_fit(t, np.ones(500, bool))
    for q in range(1, 8):
        assert km.surv_at(float(q)) == pytest.approx((t > q).mean(), abs=1e-12)


def test_km_censoring_flips_indicator():
    w = MarginalWorld([0.3, 0.4, 0.3], [0.2, 0.5, 0.3])
    ds = gen_marginal(w, 400, seed=0)
    a = km_censoring(ds)
    b = km_fit(ds.time_bin.astype(float), ~ds.event)
    np.testing.assert_array_equal(a.surv, b.surv)


def _brute_concordance(risk, time, event):
    conc = 0.0
    admissible = 0
    n = len(risk)
    for i in range(n):
        if not event[i]:
            continue
        for j in range(n):
            if i == j:
                continue
            if time[i] < time[j] or (time[i] == time[j] and not event[j]):
                admissible += 1
                if risk[i] > risk[j]:
                    conc += 1.0
                elif risk[i] == risk[j]:
                    conc += 0.5
    return conc / admissible


def test_concordance_index_hand_cases():
    t = np.array([1, 2, 3])
    ev = np.ones(3, bool)
    assert concordance_index(np.array([3.0, 2.0, 1.0]), t, ev) == 1.0
    assert concordance_index(np.array([1.0, 2.0, 3.0]), t, ev) == 0.0
    assert concordance_index(np.array([5.0, 5.0, 5.0]), t, ev) == 0.5
    # same-time pairs are admissible only against a censored partner
    t2 = np.array([2, 2])
    assert concordance_index(np.array([1.0, 0.0]), t2, np.array([True, False])) == 1.0
    with pytest.raises(ValueError, match="no admissible pairs"):
        concordance_index(np.array([1.0, 0.0]), t2, np.array([True, True]))


def test_concordance_index_matches_brute_force():
    rng = np.random.default_rng(7)
    for trial in range(20):
        n = int(rng.integers(20, 120))
        # coarse grids force heavy ties in both time and risk
        time = rng.integers(1, 6, size=n)
        event = rng.random(n) < 0.6
        risk = np.round(rng.normal(size=n), 1)
        if not np.any(event):
            event[0] = True
        fast = concordance_index(risk, time, event)
        assert fast == _brute_concordance(risk, time, event)


def test_concordance_uses_expected_bin_risk():
    w = MarginalWorld([0.3, 0.4, 0.3], [0.2, 0.5, 0.3])
    ds = gen_marginal(w, 300, seed=3)
    pmf = np.random.default_rng(0).dirichlet(np.ones(3), size=300)
    bins = np.arange(1, 4)
    want = concordance_index(-(pmf @ bins), ds.time_bin, ds.event)
    assert concordance(pmf, ds) == want


def test_censoring_free_scores_equal_plain_scores():
    rng = np.random.default_rng(11)
    raw = RawSurvivalData(rng.normal(size=(300, 2)), rng.gamma(2.0, 1.0, 300),
                          np.ones(300, bool))
    ds = discretize(raw, n_bins=5)
    pmf = rng.dirichlet(np.ones(5), size=300)
    cdf = np.cumsum(pmf, axis=1)
    ts = np.arange(1, 5)
    ind = (ds.time_bin[:, None] <= ts[None, :]).astype(float)
    plain_bs = ((ind - cdf[:, :-1]) ** 2).mean(axis=0)
    np.testing.assert_array_equal(eval_bs(pmf, ds, weighting="km"), plain_bs)
    got_bll = eval_bll(pmf, ds, weighting="km")
    want_bll = (-ind * np.log(cdf[:, :-1]) - (1 - ind) * np.log(1 - cdf[:, :-1])).mean(axis=0)
    np.testing.assert_allclose(got_bll, want_bll, rtol=1e-12)


def test_latent_weighting_scores_true_failure_times():
    w = MarginalWorld([0.3, 0.4, 0.3], [0.2, 0.5, 0.3])
    ds = gen_marginal(w, 500, seed=6)
    pmf = np.random.default_rng(1).dirichlet(np.ones(3), size=500)
    from gamesurv.core import assign_bins
    lat = assign_bins(ds.latent_time, ds.bin_edges)
    cdf = np.cumsum(pmf, axis=1)
    ts = np.arange(1, 3)
    ind = (lat[:, None] <= ts[None, :]).astype(float)
    want = ((ind - cdf[:, :-1]) ** 2).mean(axis=0)
    np.testing.assert_allclose(eval_bs(pmf, ds, weighting="uncensored-latent"), want, rtol=1e-12)


def test_true_g_weighting_beats_model_g_at_truth():
    # with the exact censoring marginal the two weighting routes coincide
    w = MarginalWorld([0.3, 0.4, 0.3], [0.2, 0.5, 0.3])
    ds = gen_marginal(w, 400, seed=8)
    pmf = np.random.default_rng(2).dirichlet(np.ones(3), size=400)
    via_world = eval_bs(pmf, ds, weighting="true-G", world=w)
    via_model = eval_bs(pmf, ds, weighting="model-G", g_pmf=w.theta_c)
    np.testing.assert_allclose(via_world, via_model, rtol=1e-12)
    with pytest.raises(ValueError):
        eval_bs(pmf, ds, weighting="true-G")
    with pytest.raises(ValueError):
        eval_bs(pmf, ds, weighting="model-G")


def test_nll_metric_is_mean_partial_likelihood():
    w = MarginalWorld([0.3, 0.4, 0.3], [0.2, 0.5, 0.3])
    ds = gen_marginal(w, 200, seed=9)
    pmf = np.random.default_rng(3).dirichlet(np.ones(3), size=200)
    want = nll(pmf, ds.time_bin, ds.event).mean()
    assert nll_metric(pmf, ds) == pytest.approx(want, rel=1e-14)


def test_calibration_frozen_case():
    w = MarginalWorld([0.3, 0.5, 0.2], [0.4, 0.3, 0.3])
    ds = gen_marginal(w, 2000, seed=5)
    levels, observed = calibration_curve(np.array([0.3, 0.5, 0.2]), ds)
    np.testing.assert_allclose(levels, np.arange(1, 10) / 10.0)
    # the true model's coverage steps through the empirical bin frequencies
    np.testing.assert_allclose(
        observed, [0.0, 0.0, 0.295, 0.295, 0.295, 0.295, 0.295, 0.8, 0.8], atol=1e-12)
    assert np.all(np.diff(observed) >= 0)


def test_evaluate_report_shape_and_json():
    w = MarginalWorld([0.3, 0.4, 0.3], [0.2, 0.5, 0.3])
    ds = gen_marginal(w, 300, seed=10)
    pmf = np.tile(w.theta_t, (300, 1))
    rep = evaluate(pmf, ds, weighting="km", calibration=True)
    assert rep.n == 300 and rep.n_bins == 3
    assert rep.bs.shape == (2,) and rep.bll.shape == (2,)
    assert rep.bs_sum == pytest.approx(rep.bs.sum(), rel=1e-14)
    assert rep.bs_mean == pytest.approx(rep.bs.mean(), rel=1e-14)
    assert 0.0 <= rep.concordance <= 1.0
    payload = json.loads(rep.to_json())
    assert payload["weighting"] == "km"
    assert len(payload["bs"]) == 2
    assert "calibration" in payload and len(payload["calibration"]["levels"]) == 9
    # calibration needs latent times and can be forced off
    rep2 = evaluate(pmf, ds, weighting="km", calibration=False)
    assert "calibration" not in json.loads(rep2.to_json())
