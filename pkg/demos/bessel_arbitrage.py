"""The three-dimensional Bessel process as a price.

It admits no unbounded profit with bounded risk on a finite horizon, yet its
reciprocal, a strict local martingale, hands out a free lunch.  The
classifier says so, and the speed-measure walk shows the deflator losing mass.
"""

import numpy as np
from scipy.special import erf

from diffscope import classify, get_model
from diffscope import simulator as sim

spec = get_model("bessel3")
report = classify(spec)
for key, v in report.verdicts.items():
    print(f"{key:15s} {v.value.value}")

# the state price density E[Z_T] falls below 1: P(Bessel-3 from 1 has not hit 0 by T)
grid = sim.build_grid(spec, 0.01)
for T in (0.25, 1.0, 4.0):
    st = sim.estimate_smd(grid, T, 20_000, seed=7)
    print(f"T={T:4}: E[Z_T] = {st.mean_Z_T:.4f} +- {st.std_err_Z_T:.4f}")

# the inverse Bessel process loses mean: E[X_T] < x0
# the candidate martingale has a heavy upper tail, so truncate far out
gap = sim.estimate_candidate_martingale_gap(get_model("inverse_bessel3"), 1.0, 20_000, seed=7,
                                            truncation=(0.02, 2000.0))
print(f"inverse Bessel-3: E[X_1] - x0 = {gap.gap:.4f} +- {gap.std_err:.4f}")

print(f"closed form: {erf(1 / np.sqrt(2)) - 1:.4f}")
