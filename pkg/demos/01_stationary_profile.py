"""
Stationary profile on an interval
=================================

The separated-variables solution t^(-1/(m-1)) Phi(z) of the porous medium
equation on (0, L) is fixed by the profile Phi solving
-(Phi^m)'' = Phi/(m-1) with zero ends.  Two independent solvers compute it.
"""

import numpy as np

from pmetube import (
    analytic_lambda1,
    critical_speed,
    dilate_profile,
    numeric_lambda1,
    relax_profile,
    shoot_profile,
)

m, L = 2.0, np.pi

# shooting on the first integral vs parabolic relaxation
ps = shoot_profile(L, m, 201)
pr = relax_profile(L, m, 201)
print(f"sup Phi: shoot {ps.sup_phi:.10f}  relax {pr.sup_phi:.10f}")
rel = np.max(np.abs(pr.phi - ps.phi)) / ps.sup_phi
print(f"relative sup difference {rel:.2e}")

# the wave speed comes from the first Dirichlet eigenvalue
lam = analytic_lambda1(L)
print(f"lambda1 = {lam:.6f} (discrete {numeric_lambda1(pr.grid):.6f}), c* = {critical_speed(m, lam):.4f}")

# second order: peak error shrinks ~4x per grid doubling
ref = shoot_profile(L, m, 1601).sup_phi
errs = [abs(relax_profile(L, m, n).sup_phi - ref) for n in (51, 101, 201)]
print("peak errors", ["%.2e" % e for e in errs], "ratios", ["%.2f" % (a / b) for a, b in zip(errs, errs[1:])])

# Phi on (0, lam L) is lam^(2/(m-1)) Phi(z/lam): no new solve needed
wide = dilate_profile(pr, 2.0)
direct = relax_profile(2 * L, m, 201)
print(f"dilated vs direct on (0, 2 pi): {np.max(np.abs(wide.phi - direct.phi)) / direct.sup_phi:.2e}")
