"""For regularly varying claims H(x) is asymptotically a constant times x times the tail.

The constant integrates the limit measure of the claim vector over the shifted
ruin set.  Two independent Pareto(2.5) lines put all of that mass on the axes,
so the constant is a one-line integral; the last column shows H(x) / (x V(x))
settling onto it.
"""

import numpy as np

from ruinlab import Allocation, RuinSetSpec, build_gauge
from ruinlab.asymptotics import big_H, corollary_constant
from ruinlab.distributions import IndependentMargins, Pareto
from ruinlab.process import ExpArrivals, RiskModel

b = Allocation((0.5, 0.5))
margin = Pareto(2.5)
model = RiskModel(IndependentMargins((margin, margin)), ExpArrivals(1.0), [5 / 3 + 0.75] * 2, b)
for kind in ("sum_negative", "any_negative"):
    A = build_gauge(getattr(RuinSetSpec, kind)(2), b)
    k = corollary_constant(model, A).value
    print(f"{kind}: constant {k:.6f}")
    for x in np.geomspace(1e2, 1e5, 4):
        print(f"  x={x:8.0f}  H/(x V) = {big_H(model, A, x).value / (x * float(margin.tail(x))):.5f}")
