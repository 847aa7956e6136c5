"""Numerical membership checks for the heavy-tail classes the asymptotics rely on.

A long-tailed law keeps F(x + 1) / F(x) near 1, a dominatedly varying law
keeps F(x / 2) / F(x) bounded, and a subexponential law has a two-fold
convolution tail close to twice the tail.  The oscillating Pareto law wobbles
in the second check but stays inside its envelope; the exponential law fails
the first check with the constant e.
"""

import numpy as np

from ruinlab import Allocation, RuinSetSpec, build_gauge
from ruinlab.diagnostics import FFTConvolution, ratio_D, ratio_L, ratio_S
from ruinlab.distributions import Exponential, IndependentMargins, OscillatingPareto, Pareto

xs = np.geomspace(1e2, 1e4, 25)
b = Allocation((0.5, 0.5))
A = build_gauge(RuinSetSpec.sum_negative(2), b)

for margin in (Pareto(2.0), OscillatingPareto(2.0)):
    name = type(margin).__name__
    rl = ratio_L(margin, 1.0, xs)
    rd = ratio_D(margin, 0.5, xs, alpha_hint=2.0)
    rs = ratio_S(IndependentMargins((margin, margin)), A, np.geomspace(1e2, 1e3, 9), FFTConvolution())
    print(f"{name:18} L {rl.ratio[-1]:.4f} {rl.verdict.value:11} "
          f"D in [{rd.ratio.min():.3f}, {rd.ratio.max():.3f}] {rd.verdict.value:8} "
          f"S {rs.ratio[-1]:.4f} {rs.verdict.value}")

rl = ratio_L(Exponential(1.0), 1.0, xs)
print(f"{'Exponential':18} L {rl.ratio[-1]:.4f} {rl.verdict.value}")
