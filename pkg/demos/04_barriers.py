"""
ODE barriers
============

Barriers w = f(tau) phi(z, y - g(tau)) are driven by
f' = f (1 - delta - f^(m-1))/(m-1),  g' = c* f^(m-1).
Without delta the system is logistic in p = f^(m-1) and solvable in closed
form; delta(tau) = 2 (m-1) delta0/(1+tau)^2 slows the sub-barrier.
"""

import numpy as np

from pmetube import (
    BarrierParams,
    epsilon_bookkeeping,
    find_delta_bar,
    integrate_barrier,
    super_closed_form,
)

m, cs = 2.0, 1.0
sup = integrate_barrier(BarrierParams("super", m, cs, 0.5, 0.0), 30.0, 1e-3)
fb, gb = super_closed_form(0.5, 0.0, cs, m, sup.tau)
print(f"RK4 vs closed form: {max(np.abs(sup.f - fb).max(), np.abs(sup.g - gb).max()):.1e}")

sub = integrate_barrier(BarrierParams("sub", m, cs, 0.5, 0.0, 0.05), 30.0, 1e-3)
for p, name in ((sup, "super"), (sub, "sub")):
    print(f"{name:5s}: g - c* tau at 30 = {p.shift[-1]:+.6f}, limit {p.predicted_shift:+.6f}, "
          f"gap {p.shift[-1] - p.predicted_shift:+.2e}")

# the sub gap decays only like 1/tau: about 2 c* (m-1) delta0/(1+tau)
for t in (30.0, 100.0, 300.0):
    p = integrate_barrier(BarrierParams("sub", m, cs, 0.5, 0.0, 0.05), t, 1e-2)
    print(f"  tau={t:5.0f}  gap {p.shift[-1] - p.predicted_shift:+.2e}  vs  {0.1 / (1 + t):+.2e}")

# largest delta0 keeping f <= 1 - delta/(2(m-1)), found by bisection
print(f"delta_bar(m=2, f0=0.3) = {find_delta_bar(m, 0.3, tol=1e-5):.5f}")

b = epsilon_bookkeeping(0.1, m, cs)
print(f"eps=0.1: a={b.a_eps:.4f} b={b.b_eps:.4f} lambda={b.lam_eps:.4f} c_eps={b.c_eps:.4f}")
