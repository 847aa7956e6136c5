"""Two Pareto(2) lines: watch the ruin probability approach H(x).

Ruin here means the total surplus goes negative.  For heavy-tailed claims the
probability of that behaves like H(x), the expected overshoot of a single
big claim over the drift-adjusted capital.  The ratio column should drift
towards 1 as x grows.  At small x it sits well above 1 because an
accumulation of moderate claims is still a competitive route to ruin.
"""

from ruinlab import Allocation, RuinSetSpec, build_gauge
from ruinlab.asymptotics import big_H
from ruinlab.distributions import IndependentMargins, Pareto
from ruinlab.montecarlo import estimate_curve
from ruinlab.process import ExpArrivals, RiskModel, drift_c

b = Allocation((0.5, 0.5))
model = RiskModel(IndependentMargins((Pareto(2.0), Pareto(2.0))), ExpArrivals(1.0), [2.5, 2.5], b)
A = build_gauge(RuinSetSpec.sum_negative(2), b)
print("drift c =", drift_c(model))

xs = [20.0, 50.0, 100.0, 200.0]
curve = estimate_curve(model, A, xs, 100_000, seed=3)
print(f"{'x':>5} {'psi_hat':>10} {'se':>9} {'H(x)':>10} {'ratio':>7}")
for e in curve:
    h = big_H(model, A, e.x).value
    print(f"{e.x:5.0f} {e.estimate:10.5f} {e.std_err:9.5f} {h:10.5f} {e.estimate / h:7.3f}")
