# %% [markdown]
# # Short-lived singletons
#
# Among singletons born after step delta*n, take the one that is joined
# soonest.  Its scaled birth S and lifetime T have a joint limit law with
# P{T > t} = (1 + t/delta)^(-theta).  The counting process of such record
# lifetimes is Poisson with mean theta*log(1 + t/delta).

# %%
import numpy as np
from scipy import stats

from crplimits import CrpParams, observe_shortlived, run_singletons, sample_ST_closed_form
from crplimits.limits import T_cdf, T_median

theta, delta, n, reps = 1.0, 0.5, 10_000, 500

# %% [markdown]
# The singleton-only simulator skips ahead between events, so a horizon far
# beyond n is cheap.  Censored replicates are those where an open singleton
# could still beat the best lifetime.

# %%
T = []
censored = 0
for rep in range(reps):
    params = CrpParams(theta, seed=99, horizon=int(1e4 * n))
    obs = run_singletons(params, first_birth=int(delta * n), replicate=rep)
    rec = observe_shortlived(obs, delta, n)
    if rec.censored:
        censored += 1
    else:
        T.append(rec.scaled[1])
T = np.array(T)
print(f"censored {censored}/{reps}")
print(f"median T/n {np.median(T):.4f}  limit {T_median(delta, theta):.4f}")
print("KS vs limit:", stats.kstest(T, lambda t: T_cdf(t, delta, theta)))

# %% [markdown]
# Samples drawn straight from the limit law, for comparison.

# %%
S_lim, T_lim = sample_ST_closed_form(delta, theta, np.random.default_rng(1), size=reps)
print(f"limit sample: median T {np.median(T_lim):.4f}, min S {S_lim.min():.4f} (>= delta)")
print("two-sample KS:", stats.ks_2samp(T, T_lim))
