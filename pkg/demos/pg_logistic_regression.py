"""
Polya-Gamma draws and a two-block logistic regression sampler
=============================================================

PG(1, c) variates turn a logistic likelihood into a Gaussian one in the
coefficients.  This script checks the sampler's moments and then uses it
for a small Bayesian logistic regression.
"""

import numpy as np
from scipy.special import expit

from pgocc.pg import PgParams, pg_mean, pg_variance, sample_pg1

rng = np.random.default_rng(1)

###############################################################################
# Moments of PG(1, c) against their closed forms

print(f"{'c':>5} {'mean':>9} {'exact':>9} {'var':>9} {'exact':>9}")
for c in (0.0, 1.0, 4.0, 10.0):
    x = sample_pg1(np.full(50_000, c), rng)
    p = PgParams(1, c)
    print(f"{c:5.1f} {x.mean():9.5f} {pg_mean(p):9.5f} {x.var():9.5f} {pg_variance(p):9.5f}")

###############################################################################
# Logistic regression: alternate omega | beta and beta | omega

n, beta_true = 2000, np.array([-0.5, 1.2, -2.0])
X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
y = (rng.random(n) < expit(X @ beta_true)).astype(float)

prior_prec = np.eye(3) / 10.0
beta = np.zeros(3)
keep = []
for it in range(1500):
    omega = sample_pg1(X @ beta, rng)
    P = X.T @ (omega[:, None] * X) + prior_prec
    L = np.linalg.cholesky(P)
    mean = np.linalg.solve(P, X.T @ (y - 0.5))
    beta = mean + np.linalg.solve(L.T, rng.standard_normal(3))
    if it >= 500:
        keep.append(beta)

keep = np.array(keep)
lo, hi = np.quantile(keep, [0.025, 0.975], axis=0)
for j in range(3):
    print(f"beta[{j}] true {beta_true[j]:+.2f}  posterior median {np.median(keep[:, j]):+.3f}  "
          f"95% [{lo[j]:+.3f}, {hi[j]:+.3f}]")
