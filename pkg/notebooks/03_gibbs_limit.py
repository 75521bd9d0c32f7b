"""
Stationary law of the group mean
================================

In the continuum limit with strong attraction the group mean of N threads
samples exp(-2 N f / (sigma^2 step)). Here f is a double well, so the
density is bimodal.
"""

import numpy as np

from flockopt.objectives import double_well_objective
from flockopt.potentials import Potential
from flockopt.sde import burn_in, empirical_vs_gibbs, euler_maruyama, flocking_sde_system, gibbs_mean_marginal
from flockopt.topology import complete_graph

N, a = 3, 100.0
f = double_well_objective(1)
system = flocking_sde_system(f, Potential(a), complete_graph(N), gamma=1.0, tau=2.0)
rng = np.random.default_rng(0)

# 100 independent paths, one long run each
rec = euler_maruyama(system, rng.uniform(-1.5, 1.5, (100, N)), 1e-3, 100.0, rng, record_every=100)
ybar = burn_in(rec.mean(axis=-1)).ravel()

dens = gibbs_mean_marginal(f, N, sigma=2.0, step=1.0, box=f.box)
print("TV distance:", empirical_vs_gibbs(ybar, dens))

###############################################################################
# A coarse text histogram next to the predicted cell masses

edges = np.linspace(-2.0, 2.0, 17)
counts, _ = np.histogram(ybar, bins=edges)
pred = np.diff(dens.cdf_1d(edges))
for lo, c, p in zip(edges, counts / len(ybar), pred):
    print(f"{lo:5.2f}  {'#' * int(200 * c):40s} {c:.3f} vs {p:.3f}")
