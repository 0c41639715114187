"""
Occupancy trend on simulated survey data
========================================

Simulate 500 sites over 15 years with Poisson(2) visits per site-year, fit the
model and compare the yearly occupancy index with the value used to generate
the data.  Longer chains tighten the agreement; this run is kept short.
"""

import numpy as np

from pgocc import McmcConfig, run_chain, simulate
from pgocc.posterior import credible_interval, gof_report

ds, truth = simulate.generate(simulate.preset("supp-2.1-s500", seed=0))
truth = simulate.truth_for_dataset(truth, ds)
print(ds.summary(), f"detections={int(ds.y.sum())}")

chain = run_chain(ds, config=McmcConfig(iterations=2000, burnin=1000, seed=1, map_years=(0,)))
print(f"{chain.metadata['timing']['seconds_per_iteration'] * 1e3:.1f} ms per iteration, "
      f"temporal MH acceptance {chain.metadata['temporal_mh_acceptance']:.2f}")

###############################################################################
# Index by year

lo, hi = credible_interval(chain.index_draws, 0.95)
med = np.median(chain.index_draws, axis=0)
print(f"{'year':>6} {'true':>7} {'median':>7} {'lower':>7} {'upper':>7}")
for t, yr in enumerate(ds.years):
    flag = "" if lo[t] <= truth["index"][t] <= hi[t] else "  <- missed"
    print(f"{yr:>6} {truth['index'][t]:7.3f} {med[t]:7.3f} {lo[t]:7.3f} {hi[t]:7.3f}{flag}")

###############################################################################
# Posterior-predictive check of the yearly detection totals

rep = gof_report(chain)
print("yearly detection totals inside their 95% predictive interval:",
      f"{rep['year']['inside_95_fraction']:.0%}")
