"""
Scoring survival predictions under censoring
============================================

Censored test sets cannot be scored naively: subjects whose event was
never observed would be graded as if they survived. The evaluation
module reweights scores by an estimate of the censoring survival
function and supports four choices of that estimate, from the Kaplan-
Meier default to the latent-time gold standard available in simulation.
"""

import numpy as np

import gamesurv as gs

world = gs.MarginalWorld([0.3, 0.4, 0.3], [0.2, 0.5, 0.3])
ds = gs.gen_marginal(world, 4000, seed=2)
print(f"marginal cohort: n={ds.n}, censoring rate {1 - ds.event.mean():.3f}")

# Kaplan-Meier on the observed times; censored ties stay at risk
km = gs.km_fit(ds.time_bin.astype(float), ds.event)
print("\nKaplan-Meier failure survival:")
for t, s, r, d in zip(km.times, km.surv, km.at_risk, km.n_events):
    print(f"  t={t:.0f}: at risk {r:4d}, events {d:3d}, S(t)={s:.4f}")
true_surv = 1.0 - np.cumsum(world.theta_t)
print(f"  truth: {np.round(true_surv, 4)}")

# score the true pmf and a deliberately wrong one under each weighting
pmf_true = np.broadcast_to(world.theta_t, (ds.n, 3))
pmf_wrong = np.broadcast_to(np.array([0.6, 0.2, 0.2]), (ds.n, 3))
print(f"\nsummed Brier score under each weighting (true model vs wrong model):")
for weighting in ("km", "model-G", "true-G", "uncensored-latent"):
    kwargs = {}
    if weighting == "model-G":
        kwargs["g_pmf"] = np.broadcast_to(world.theta_c, (ds.n, 3))
    if weighting == "true-G":
        kwargs["world"] = world
    bs_true = gs.eval_bs(pmf_true, ds, weighting, **kwargs).sum()
    bs_wrong = gs.eval_bs(pmf_wrong, ds, weighting, **kwargs).sum()
    print(f"  {weighting:18s} {bs_true:.4f} vs {bs_wrong:.4f}")

# concordance orders subjects by expected bin; ties get half credit
risk_true = -(pmf_true @ np.arange(1, 4))
print(f"\nconcordance of the true model: "
      f"{gs.concordance_index(risk_true, ds.time_bin, ds.event):.4f}")

# calibration reads predicted cdf level sets against latent failure times
levels, observed = gs.calibration_curve(pmf_true, ds)
print("\ncalibration of the true model (level: observed coverage):")
print("  " + "  ".join(f"{a:.1f}:{o:.3f}" for a, o in zip(levels, observed)))

# the one-call report collects everything
report = gs.evaluate(pmf_true, ds, weighting="km")
print(f"\nevaluate(): bs_sum={report.bs_sum:.4f} bll_sum={report.bll_sum:.4f} "
      f"nll={report.nll:.4f} concordance={report.concordance:.4f}")
