"""Boundary behaviour across a two-parameter family.

Take beta(x) = c / x near 0 and speed density x^q.  Sweeping c moves the
boundary from accessible to inaccessible, and the verdicts follow.  Every
report is also checked for internal consistency.
"""

import math

import numpy as np

from diffscope import DiffusionSpec, SpeedSpec, StateInterval, audit_boundary_consistency, boundary_report, classify
from diffscope import scale_from_beta

interval = StateInterval(0.0, math.inf, l_closed=True)


def power_spec(c, q=0.0):
    scale = scale_from_beta(lambda x: c / np.asarray(x), 1.0, (0.0,), interval)
    speed = SpeedSpec(lambda x: np.asarray(x) ** q, boundary_mass_l=math.inf)
    return DiffusionSpec(interval, scale, speed, 1.0)


print(f"{'c':>6}  {'lower end':12s} nupbr_finite  nflvr_finite  audit")
for c in (-3.0, -1.0, -0.6, -0.4, 0.0, 0.5, 2.0):
    spec = power_spec(c)
    rep = boundary_report(spec, "lower")
    v = classify(spec).verdicts
    audit = audit_boundary_consistency(rep) or "consistent"
    print(f"{c:6.2f}  {rep.accessibility:12s} {v['nupbr_finite'].value.value:13s} "
          f"{v['nflvr_finite'].value.value:13s} {audit}")
