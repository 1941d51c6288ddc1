# %% [markdown]
# # Exact probabilities behind the limit
#
# The probability that prescribed tuples are the first N+1 members of
# distinct blocks has a product form.  Two independent routes compute it:
# a closed form and a step-by-step product over the insertion sequence.
# Both agree to rounding, and small cases agree with brute-force enumeration
# of set partitions weighted by the Ewens law.

# %%
from fractions import Fraction

import numpy as np

from crplimits import TupleFamily, exhaustive_partition_distribution, joint_probability, stepwise_probability
from crplimits.oracle import random_family

fam = TupleFamily(((3, 7, 11, 19), (6, 12, 21, 24)), 1.0)
a = joint_probability(fam).value
b = stepwise_probability(fam).value
print("closed form :", a)
print("stepwise    :", b)
print("rational    :", Fraction(36, 57120 * 255024), "=", 36 / (57120 * 255024))

# %% [markdown]
# Agreement on random families, including large step indices where the
# values underflow a naive product.

# %%
rng = np.random.default_rng(7)
errs = []
for _ in range(200):
    f = random_family(rng)
    x, y = joint_probability(f), stepwise_probability(f)
    errs.append(abs(x.log_value - y.log_value))
print(f"max |log difference| over 200 families: {max(errs):.2e}")

# %% [markdown]
# Ewens law for n = 4: probabilities of every set partition sum to one.

# %%
dist = exhaustive_partition_distribution(4, 2.0)
print(f"{len(dist)} partitions, total probability {sum(dist.values()):.15f}")
for part, p in sorted(dist.items(), key=lambda kv: -kv[1])[:5]:
    print(part, f"{p:.5f}")
