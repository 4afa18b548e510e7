"""
Universal thresholding in the sequence model
============================================

Observe y = theta + eps * z for theta on the boundary of a Sobolev-type body,
shrink with the universal soft threshold, and watch the worst-case risk fall
as the noise level drops. The fitted log-log slope sits near 2r = 4/3 for
alpha = 1; keeping every coefficient (the identity) decays like eps^2 but
starts far higher.
"""

from wavshrink import BesovBody, identity_estimator, rate_experiment, universal_estimate

body = BesovBody(alpha=1.0, p=2.0, q=2.0, C=1.0)
eps = [0.1, 0.05, 0.025, 0.0125]

# A shallower pyramid and fewer replications than the full check keep this quick.
for name, est in (("universal", universal_estimate), ("identity", identity_estimator)):
    res = rate_experiment(body, eps, est, n_rep=200, seed=1, max_level=10)
    risks = "  ".join(f"{r:.2e}" for r in res.sup_risks)
    print(f"{name:9s} sup-risk: {risks}   slope {res.slope:.3f}  CI [{res.slope_ci[0]:.2f}, {res.slope_ci[1]:.2f}]")

print("target slope for universal thresholding:", round(2 * body.rate_exponent, 4))
