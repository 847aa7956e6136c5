"""Check the simulation engine against the one ruin probability known in closed form.

With Poisson(1) arrivals, Exp(1) claims and premium rate 1.25 the ruin
probability is 0.8 exp(-0.2 x).  The estimator never sees that formula, so
agreement within a few standard errors checks the walk, the RNG and the
stopping rule together.
"""

from ruinlab import Allocation, RuinSetSpec, build_gauge
from ruinlab.distributions import Exponential, IndependentMargins
from ruinlab.montecarlo import cramer_lundberg_psi, estimate_curve
from ruinlab.process import ExpArrivals, RiskModel

model = RiskModel(IndependentMargins((Exponential(1.0),)), ExpArrivals(1.0), [1.25], Allocation((1.0,)))
A = build_gauge(RuinSetSpec.sum_negative(1), Allocation((1.0,)))
xs = [1.0, 3.0, 5.0, 10.0]

curve = estimate_curve(model, A, xs, 200_000, seed=7)
exact = cramer_lundberg_psi(xs, 1.0, 1.0, 1.25)

print(f"{'x':>5} {'estimate':>10} {'exact':>10} {'z':>7}")
for e, ex in zip(curve, exact):
    print(f"{e.x:5.0f} {e.estimate:10.5f} {ex:10.5f} {(e.estimate - ex) / e.std_err:7.2f}")
