"""
Spreading in a strip
====================

A small bump spreads along the strip (0, pi) x R.  In rescaled variables
v = (t+t0)^(1/(m-1)) u, tau = ln(t+t0) it invades the strip at speed c*,
leaving v ~ Phi behind the fronts.  Coarser than the acceptance runs so it
finishes in well under a minute.
"""

import numpy as np

from pmetube import (
    FRONT_THRESHOLD,
    RunConfig,
    TubeGrid,
    error_series,
    front_series,
    measure_speed,
    outer_vanishing_time,
    relax_profile,
    run_evolution,
)

m = 2.0
prof = relax_profile(np.pi, m, 32)
grid = TubeGrid.build(np.pi, 32, -30.0, 30.0, 512)
y = grid.y
v0 = 0.5 * np.outer(prof.phi, np.clip(1.0 - (y / 0.5) ** 2, 0.0, None))

cfg = RunConfig(grid, m, v0, t_end=14.0, snapshot_every=0.5, support_threshold=1e-10 * prof.sup_phi)
run = run_evolution(cfg)
print(f"{run.steps} explicit steps, {run.wall_time:.1f} s")

fronts = front_series(run, FRONT_THRESHOLD * prof.sup_phi)
slope, icpt, res = measure_speed(fronts, (7.0, 14.0))
print(f"front speed {slope:.4f} vs c* = {prof.cstar:.4f}")

# behind the front v/Phi -> 1 ...
inner = error_series(run, prof, 0.5 * prof.cstar)
for t in (2.0, 7.0, 14.0):
    print(f"  tau={t:5.1f}  sup |v/Phi - 1| on |y| <= c*tau/2: {inner.at(t):.4f}")

# ... and beyond 1.5 c* tau the solution vanishes identically
tau_c, _ = outer_vanishing_time(run, 1.5 * prof.cstar)
print(f"v = 0 on |y| >= 1.5 c* tau from tau = {tau_c}")
