"""Inverse-weighted losses: hand values, identities, and clamping."""

import numpy as np
import pytest

from gamesurv.core import Batch
from gamesurv.losses import (
    ClampStats,
    LossSpec,
    batch_loss,
    ipcw_bll_censor,
    ipcw_bll_failure,
    ipcw_bs_censor,
    ipcw_bs_failure,
    ipcw_mean,
    ipcw_weight_arrays,
    nll,
    per_horizon_loss,
    resolve_times,
    summed_loss,
)
from gamesurv.simgen import MarginalWorld, population_batch

TRUTH = MarginalWorld([0.3, 0.7], [0.4, 0.6])


def test_resolve_times():
    np.testing.assert_array_equal(resolve_times("all", 4), [1, 2, 3])
    # explicit tuples come back sorted
    np.testing.assert_array_equal(resolve_times((2, 1), 4), [1, 2])
    with pytest.raises(ValueError):
        resolve_times((0,), 4)
    with pytest.raises(ValueError):
        resolve_times((4,), 4)


def test_weight_arrays_left_limit_asymmetry():
    # one subject with U=2 on K=3 bins. The failure player's event branch
    # divides by Gbar(U-) = P(C >= U); the censor player's event branch
    # divides by Fbar(U) = P(T > U), no left limit. That off-by-one in the
    # survival index is the entire difference between the two roles.
    g = np.array([0.2, 0.3, 0.5])
    f = np.array([0.1, 0.6, 0.3])
    ts = np.array([1, 2])
    a_f, b_f = ipcw_weight_arrays("failure", g, np.array([2]), np.array([True]), ts)
    np.testing.assert_allclose(a_f, [[0.0, 1.0 / 0.8]])   # Gbar(2-) = 1 - 0.2
    np.testing.assert_allclose(b_f, [[1.0 / 0.8, 0.0]])   # Gbar(1) = 0.8
    a_c, b_c = ipcw_weight_arrays("censor", f, np.array([2]), np.array([False]), ts)
    np.testing.assert_allclose(a_c, [[0.0, 1.0 / 0.3]])   # Fbar(2) = 1 - 0.7
    np.testing.assert_allclose(b_c, [[1.0 / 0.9, 0.0]])   # Fbar(1) = 0.9


def test_population_hand_values():
    # two-bin world (0.3, 0.4): at truth the single-horizon Brier values are
    # fbs = 0.7^2*0.3 + 0.3^2*0.7 = 0.21 and gbs = 0.6^2*0.4 + 0.4^2*0.6 = 0.24
    pb = population_batch(TRUTH)
    lf, lg = summed_loss("ipcw-bs", TRUTH.theta_t, TRUTH.theta_c, pb)
    assert lf == pytest.approx(0.21, abs=5e-16)
    assert lg == pytest.approx(0.24, abs=5e-16)
    assert lf + lg == pytest.approx(0.45, abs=1e-15)


def test_population_gradient_zero_at_truth():
    # the enumerated batch makes the weight ratios cancel exactly in IEEE
    pb = population_batch(TRUTH)
    for role, own, frozen in (("failure", TRUTH.theta_t, TRUTH.theta_c),
                              ("censor", TRUTH.theta_c, TRUTH.theta_t)):
        spec = LossSpec("ipcw-bs", role)
        n = pb.n
        _, coefs = per_horizon_loss(spec, np.tile(own, (n, 1)), np.tile(frozen, (n, 1)), pb)
        assert coefs.shape == (1,)
        assert abs(coefs[0]) < 5e-16


def test_per_horizon_matches_named_wrappers():
    rng = np.random.default_rng(21)
    for _ in range(20):
        k = int(rng.integers(2, 6))
        n = int(rng.integers(3, 40))
        f = rng.dirichlet(np.ones(k), size=n)
        g = rng.dirichlet(np.ones(k), size=n)
        u = rng.integers(1, k + 1, size=n)
        ev = rng.random(n) < 0.6
        t = int(rng.integers(1, k))
        w = np.full(n, 1.0 / n)
        cases = [
            (ipcw_bs_failure(t, f, g, u, ev), "ipcw-bs", "failure", f, g),
            (ipcw_bs_censor(t, g, f, u, ev), "ipcw-bs", "censor", g, f),
            (ipcw_bll_failure(t, f, g, u, ev), "ipcw-bll", "failure", f, g),
            (ipcw_bll_censor(t, g, f, u, ev), "ipcw-bll", "censor", g, f),
        ]
        for per_sample, family, role, own, frz in cases:
            assert per_sample.shape == (n,)
            spec = LossSpec(family, role, times=(t,))
            vals, _ = per_horizon_loss(spec, own, frz, Batch(u, ev))
            np.testing.assert_allclose(vals[0], per_sample @ w, rtol=1e-13)


def test_batch_loss_sums_horizons():
    rng = np.random.default_rng(33)
    k, n = 5, 30
    f = rng.dirichlet(np.ones(k), size=n)
    g = rng.dirichlet(np.ones(k), size=n)
    b = Batch(rng.integers(1, k + 1, size=n), rng.random(n) < 0.5)
    spec_all = LossSpec("ipcw-bs", "failure")
    total, _ = batch_loss(spec_all, f, g, b)
    vals, _ = per_horizon_loss(spec_all, f, g, b)
    assert total == pytest.approx(vals.sum(), rel=1e-14)
    # single-horizon summed game equals that horizon alone
    spec_1 = LossSpec("ipcw-bs", "failure", times=(2,))
    single, _ = batch_loss(spec_1, f, g, b)
    assert single == pytest.approx(vals[1], rel=1e-14)


def test_summed_loss_matches_batch_loss_pair():
    rng = np.random.default_rng(40)
    k, n = 4, 25
    f = rng.dirichlet(np.ones(k), size=n)
    g = rng.dirichlet(np.ones(k), size=n)
    b = Batch(rng.integers(1, k + 1, size=n), rng.random(n) < 0.5)
    for family in ("ipcw-bs", "ipcw-bll"):
        lf, lg = summed_loss(family, f, g, b)
        assert lf == pytest.approx(batch_loss(LossSpec(family, "failure"), f, g, b)[0], rel=1e-14)
        assert lg == pytest.approx(batch_loss(LossSpec(family, "censor"), g, f, b)[0], rel=1e-14)


def test_censoring_free_reduces_to_plain_scores():
    # with no censored rows and Ghat == point mass at K, every weight is 1
    rng = np.random.default_rng(55)
    k, n = 4, 200
    f = rng.dirichlet(np.ones(k), size=n)
    u = rng.integers(1, k + 1, size=n)
    ev = np.ones(n, bool)
    g_free = np.zeros(k)
    g_free[-1] = 1.0
    cdf = np.cumsum(f, axis=1)
    for t in range(1, k):
        ind = (u <= t).astype(float)
        plain_bs = (ind - cdf[:, t - 1]) ** 2
        np.testing.assert_array_equal(ipcw_bs_failure(t, f, g_free, u, ev), plain_bs)
        # log(1 - cdf) and log1p(-cdf) differ in the last bits
        plain_bll = -ind * np.log(cdf[:, t - 1]) - (1 - ind) * np.log1p(-cdf[:, t - 1])
        np.testing.assert_allclose(ipcw_bll_failure(t, f, g_free, u, ev), plain_bll,
                                   rtol=1e-12, atol=1e-15)


def test_ipcw_mean_population_example():
    # T and C independent uniform on {1, 2}: outcomes (U, delta) are
    # (1,1) w.p. 1/2, (1,0) w.p. 1/4, (2,1) w.p. 1/4 (equal-weight rows
    # double the (1,1) row). Weighted T/Gbar(U-) contributions 1,1,0,4
    # average to 1.5 = E[T], recovered exactly.
    time_bin = np.array([1, 1, 1, 2])
    event = np.array([True, True, False, True])
    g = np.array([0.5, 0.5])
    assert ipcw_mean(time_bin, event, g) == 1.5


def test_ipcw_mean_values_and_weights():
    time_bin = np.array([1, 1, 1, 2])
    event = np.array([True, True, False, True])
    g = np.array([0.5, 0.5])
    # substituting per-sample values reweights the same inverse weights
    vals = np.array([2.0, 9.0, 3.0, 9.0])
    assert ipcw_mean(time_bin, event, g, values=vals) == pytest.approx((2 + 9 + 0 + 9 / 0.5) / 4)
    # explicit weights replace the uniform average
    w = np.array([1.0, 1.0, 1.0, 0.0])
    assert ipcw_mean(time_bin, event, g, weight=w) == pytest.approx(2.0 / 3.0)


def test_ipcw_mean_monte_carlo_unbiased():
    w = MarginalWorld([0.25, 0.45, 0.3], [0.5, 0.25, 0.25])
    e_t = np.dot(np.arange(1, 4), w.theta_t)
    rng = np.random.default_rng(17)
    pad_c = np.concatenate([[0.0], np.cumsum(w.theta_c)])
    n = 100_000
    t = rng.choice([1, 2, 3], p=w.theta_t, size=n)
    c = rng.choice([1, 2, 3], p=w.theta_c, size=n)
    u = np.minimum(t, c)
    ev = t <= c
    est = ipcw_mean(u, ev, w.theta_c)
    contrib = np.where(ev, u / (1.0 - pad_c[u - 1]), 0.0)
    se = contrib.std(ddof=1) / np.sqrt(n)
    assert abs(est - e_t) < 3 * se


def test_weight_floor_clamps_and_counts():
    # a frozen model with zero survival at the horizon sends the branch
    # weight to 1/floor; the clamp counter sees exactly the rows that hit it
    g_early = np.array([1.0, 0.0])  # Gbar(1) = 0
    u = np.array([2, 1])
    ev = np.array([True, True])
    stats = ClampStats()
    a, b = ipcw_weight_arrays("failure", g_early, u, ev, np.array([1]),
                              weight_floor=1e-6, stats=stats)
    # row 0 survives past t=1 and divides by Gbar(1); row 1 is an event at
    # t=1 and divides by Gbar(1-) = 1, untouched
    assert b[0, 0] == pytest.approx(1e6)
    assert a[1, 0] == 1.0
    assert stats.count == 1


def test_nll_hand_values_and_decoupling():
    g = np.array([0.2, 0.3, 0.5])
    f = np.array([0.1, 0.6, 0.3])
    u = np.array([2, 2])
    ev = np.array([True, False])
    np.testing.assert_allclose(nll(f, u, ev), [-np.log(0.6), -np.log(0.3)], rtol=1e-15)
    # censor role swaps the branches and keeps the left limit on events
    np.testing.assert_allclose(nll(g, u, ev, role="censor"),
                               [-np.log(0.8), -np.log(0.3)], rtol=1e-15)


def test_nll_terminal_censored_clamps():
    f = np.array([0.3, 0.7])
    stats = ClampStats()
    v = nll(f, np.array([2]), np.array([False]), weight_floor=1e-6, stats=stats)
    assert v[0] == pytest.approx(-np.log(1e-6))
    assert stats.count == 1


def test_bll_needs_interior_cdf_values():
    # log loss at a horizon where the model puts zero mass below clamps too
    f = np.array([0.0, 1.0])
    v = ipcw_bll_failure(1, f, np.array([0.5, 0.5]), np.array([1]), np.array([True]))
    assert np.isfinite(v[0])
