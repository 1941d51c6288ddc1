# %% [markdown]
# # Block atoms of a Chinese restaurant process
#
# Each block that reaches size N+1 leaves an atom (k_1, ..., k_N, m): its first
# N members and the step at which the next member arrived.  Scaled by n, these
# atoms settle into a Poisson random measure with intensity
# theta * N! / y^(N+1) on the cone 0 < x_1 <= ... <= x_N <= y.
#
# This script simulates a batch of trajectories, counts atoms in a few
# windows and compares the counts with the exact window masses.

# %%
import numpy as np
from scipy import stats

from crplimits import ConeWindow, CrpParams, TrackerConfig, extract_point_measure, mass, run

theta, n, reps = 1.0, 20_000, 400
windows = [
    ConeWindow(((0.0, 1.0),), (1.0, 2.0)),
    ConeWindow(((0.2, 0.6),), (0.8, 1.5)),
    ConeWindow(((0.0, 0.5), (0.0, 1.0)), (1.0, 2.0)),
]

# %% [markdown]
# The horizon must cover the largest y in any window, so simulate to 2n.

# %%
counts = np.zeros((reps, len(windows)), dtype=int)
for rep in range(reps):
    obs = run(CrpParams(theta, seed=2024, horizon=2 * n), TrackerConfig(N_max=2), replicate=rep)
    for j, w in enumerate(windows):
        counts[rep, j] = extract_point_measure(obs, w.N, n).count(w)

# %%
print(f"{'window':<44} {'mass':>8} {'mean':>8} {'P(void)':>8} {'exp(-mass)':>10}")
for j, w in enumerate(windows):
    mu = mass(w, theta)
    c = counts[:, j]
    print(f"{str(w.x_bounds) + ' x ' + str(w.y_bounds):<44} {mu:8.4f} {c.mean():8.4f} "
          f"{np.mean(c == 0):8.4f} {np.exp(-mu):10.4f}")

# %% [markdown]
# Dispersion: a Poisson count has variance equal to its mean.

# %%
for j, w in enumerate(windows):
    c = counts[:, j]
    print(f"N={w.N}  mean {c.mean():.3f}  var {c.var(ddof=1):.3f}  "
          f"P(count>=2) emp {np.mean(c >= 2):.3f} vs {stats.poisson.sf(1, mass(w, theta)):.3f}")
