"""Cross-section of the tube: the interval D = (0, L).

Holds the stationary profile Phi solving -(Phi^m)'' = Phi/(m-1) with zero
Dirichlet data, the principal Dirichlet eigenvalue, the critical wave speed
and the cosine subsolution Phi(z) [lam cos(alpha y)]^(1/m).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, special

from .errors import (
    ConvergenceError,
    DegenerateExponentError,
    InvalidParameterError,
    OracleFailureError,
)

__all__ = [
    "SectionGrid",
    "SectionProfile",
    "CosineSubsolution",
    "analytic_lambda1",
    "numeric_lambda1",
    "critical_speed",
    "shoot_profile",
    "relax_profile",
    "dilate_profile",
    "cosine_subsolution",
    "stationary_residual",
]


def _check_m(m):
    if not m > 1:
        raise DegenerateExponentError(f"diffusion exponent must satisfy m > 1, got m={m}")


@dataclass(frozen=True)
class SectionGrid:
    """Uniform grid on [0, L] with ``n`` nodes; nodes 0 and n-1 are boundary."""

    L: float
    n: int

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidParameterError(f"section length must be positive, got L={self.L}")
        if int(self.n) != self.n or self.n < 3:
            raise InvalidParameterError(f"node count must be an integer >= 3, got n={self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self):
        return self.L / (self.n - 1)

    @property
    def z(self):
        return np.arange(self.n) * self.h


@dataclass(frozen=True, eq=False)
class SectionProfile:
    """Discrete stationary profile Phi on a section grid.

    ``phi`` includes the two (zero) boundary values.
    """

    grid: SectionGrid
    phi: np.ndarray
    m: float
    lambda1: float
    cstar: float
    method: str = "unknown"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.shape != (self.grid.n,):
            raise InvalidParameterError(f"phi has shape {phi.shape}, expected ({self.grid.n},)")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def z(self):
        return self.grid.z

    @property
    def sup_phi(self):
        return float(self.phi.max())

    def boundary_flux(self):
        """Outward one-sided differences of Phi^m at the left and right ends.

        Both are strictly negative for a genuine profile (Hopf property).
        """
        w = self.phi ** self.m
        h = self.grid.h
        return (-(w[1] - w[0]) / h, -(w[-2] - w[-1]) / h)

    def residual(self):
        """Interior values of -(Phi^m)'' - Phi/(m-1) with second differences."""
        return stationary_residual(self.phi, self.grid.h, self.m)

    def symmetry_defect(self):
        return float(np.max(np.abs(self.phi - self.phi[::-1])))


def stationary_residual(phi, h, m):
    w = np.asarray(phi, dtype=float) ** m
    lap = (w[:-2] - 2.0 * w[1:-1] + w[2:]) / h**2
    return -lap - phi[1:-1] / (m - 1)


def analytic_lambda1(L):
    """Principal eigenvalue (pi/L)^2 of -d^2/dz^2 on (0, L) with Dirichlet data."""
    if not L > 0:
        raise InvalidParameterError(f"section length must be positive, got L={L}")
    return (np.pi / L) ** 2


def numeric_lambda1(grid):
    """Smallest eigenvalue of the interior second-difference Dirichlet matrix."""
    if not isinstance(grid, SectionGrid):
        raise InvalidParameterError("numeric_lambda1 expects a SectionGrid")
    k = grid.n - 2
    diag = np.full(k, 2.0 / grid.h**2)
    off = np.full(k - 1, -1.0 / grid.h**2)
    vals = linalg.eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))
    return float(vals[0])


def critical_speed(m, lambda1):
    """Critical speed c* = 1 / ((m - 1) sqrt(lambda1))."""
    _check_m(m)
    if not lambda1 > 0:
        raise InvalidParameterError(f"eigenvalue must be positive, got {lambda1}")
    return 1.0 / ((m - 1.0) * np.sqrt(lambda1))


def _half_length(wmax, m, epsabs=1e-13):
    # Half-width of the support of the stationary profile with peak w = Phi^m = wmax.
    # With w = wmax * s**(m/(m+1)) the integrand becomes s^(-1/(m+1)) (1-s)^(-1/2)
    # times a constant; quad's algebraic weight handles both endpoint powers.
    q = (m + 1.0) / m
    kappa = m / ((m - 1.0) * (m + 1.0))
    scale = wmax ** (1.0 - q / 2.0) / (q * np.sqrt(2.0 * kappa))
    val, err, *rest = integrate.quad(
        lambda s: 1.0, 0.0, 1.0, weight="alg", wvar=(-1.0 / (m + 1.0), -0.5),
        epsabs=epsabs, epsrel=1e-13, full_output=1,
    )
    if len(rest) > 1 or not np.isfinite(val):
        return np.nan, err
    return scale * val, scale * err


def shoot_profile(L, m, n, tol=1e-10, max_iter=400):
    """Semi-analytic stationary profile from the first integral.

    The peak value w_max = Phi(L/2)^m is found by bisection so that the
    half-length quadrature equals L/2; the profile is then tabulated by
    inverting the same quadrature, which is a regularised incomplete beta
    function in the variable s = (w / w_max)^((m+1)/m).
    """
    _check_m(m)
    grid = SectionGrid(L, n)
    target = L / 2.0

    lo, hi = 0.0, 1.0
    for _ in range(200):
        val, _ = _half_length(hi, m)
        if not np.isfinite(val):
            raise OracleFailureError("half-length quadrature failed", bracket=(lo, hi))
        if val >= target:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise OracleFailureError("could not bracket the peak value", bracket=(lo, hi))

    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        val, _ = _half_length(mid, m)
        if not np.isfinite(val):
            raise OracleFailureError("half-length quadrature failed", bracket=(lo, hi))
        if val < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    else:
        raise OracleFailureError("bisection on the peak value did not converge", bracket=(lo, hi))
    wmax = 0.5 * (lo + hi)

    q = (m + 1.0) / m
    idx = np.minimum(np.arange(n), n - 1 - np.arange(n))
    frac = np.clip(2.0 * idx * grid.h / L, 0.0, 1.0)
    s = special.betaincinv(1.0 / q, 0.5, frac)
    phi = wmax ** (1.0 / m) * s ** (1.0 / (m + 1.0))
    phi[0] = phi[-1] = 0.0

    lam1 = analytic_lambda1(L)
    return SectionProfile(
        grid, phi, m, lam1, critical_speed(m, lam1), method="shoot",
        info={"wmax": wmax, "bisection_iterations": it + 1},
    )


def relax_profile(L, m, n, tol=1e-10, init=None, max_steps=20000, dtau_max=None):
    """Stationary profile as the long-time limit of v_t = (v^m)'' + v/(m-1).

    Pseudo-time stepping with backward Euler (Newton on a tridiagonal
    system); the step is capped at (m-1)/2 so that every step is a monotone
    map.  Stops once the sup-norm change per unit pseudo-time, which for
    backward Euler equals the stationary residual, falls below ``tol``.
    """
    _check_m(m)
    grid = SectionGrid(L, n)
    h = grid.h
    z = grid.z
    if init is None:
        v = 0.5 * (L / np.pi) ** (2.0 / (m - 1.0)) * np.sin(np.pi * z / L)
    else:
        v = np.array(init, dtype=float)
        if v.shape != (n,):
            raise InvalidParameterError(f"init has shape {v.shape}, expected ({n},)")
    v = v[1:-1].copy()
    if np.any(v <= 0):
        raise InvalidParameterError("relaxation needs a strictly positive interior initialization")

    if dtau_max is None:
        dtau_max = 0.5 * (m - 1.0)
    dtau = min(0.05, dtau_max)
    r_react = 1.0 / (m - 1.0)
    history = []

    def lap(w):
        out = -2.0 * w
        out[1:] += w[:-1]
        out[:-1] += w[1:]
        return out / h**2

    for step in range(1, max_steps + 1):
        v_old = v
        u = v_old.copy()
        for _ in range(50):
            w = u**m
            G = u - v_old - dtau * (lap(w) + r_react * u)
            d = m * u ** (m - 1.0)
            r = dtau / h**2
            ab = np.empty((3, u.size))
            ab[0, 1:] = -r * d[1:]
            ab[0, 0] = 0.0
            ab[1] = 1.0 - dtau * r_react + 2.0 * r * d
            ab[2, :-1] = -r * d[:-1]
            ab[2, -1] = 0.0
            du = linalg.solve_banded((1, 1), ab, -G)
            theta = 1.0
            while np.any(u + theta * du <= 0):
                theta *= 0.5
                if theta < 1e-8:
                    raise ConvergenceError("Newton step lost positivity", residual=float(np.max(np.abs(G))))
            u = u + theta * du
            if np.max(np.abs(du)) <= 1e-15 * max(1.0, np.max(u)):
                break
        change = float(np.max(np.abs(u - v_old)) / dtau)
        history.append(change)
        v = u
        if change < tol:
            break
        dtau = min(dtau * 1.5, dtau_max)
    else:
        raise ConvergenceError(
            f"relaxation did not reach tol={tol:g} in {max_steps} steps",
            residual=history[-1], history=history,
        )

    phi = np.zeros(n)
    phi[1:-1] = v
    lam1 = analytic_lambda1(L)
    return SectionProfile(
        grid, phi, m, lam1, critical_speed(m, lam1), method="relax",
        info={"steps": step, "final_change": history[-1], "tol": tol},
    )


def dilate_profile(p, lam):
    """Profile on the dilated section (0, lam L) predicted by scaling.

    Phi_{lam L}(z) = lam^(2/(m-1)) Phi_L(z / lam); on a grid with the same
    node count the resampling is exact, node for node.
    """
    if not lam >= 1:
        raise InvalidParameterError(f"dilation factor must be >= 1, got {lam}")
    m = p.m
    grid = SectionGrid(lam * p.grid.L, p.grid.n)
    lam1 = p.lambda1 / lam**2
    return SectionProfile(
        grid, lam ** (2.0 / (m - 1.0)) * p.phi, m, lam1, critical_speed(m, lam1),
        method=f"dilate({p.method})", info={"factor": lam},
    )


@dataclass(frozen=True, eq=False)
class CosineSubsolution:
    profile: SectionProfile
    lambda_param: float
    alpha: float
    y: np.ndarray
    values: np.ndarray
    admissible: bool

    @property
    def half_width(self):
        return np.pi / (2.0 * self.alpha)

    @property
    def bracket(self):
        m = self.profile.m
        return self.lambda_param ** ((m - 1.0) / m) * (
            1.0 + self.alpha**2 * (m - 1.0) * self.profile.sup_phi ** (m - 1.0)
        )

    def residual(self):
        """-Lap_h(Psi^m) - Psi/(m-1) at interior nodes (nonpositive up to O(h^2))."""
        m = self.profile.m
        w = self.values**m
        hz = self.profile.grid.h
        hy = self.y[1] - self.y[0]
        lap = (w[:-2, 1:-1] - 2 * w[1:-1, 1:-1] + w[2:, 1:-1]) / hz**2
        lap += (w[1:-1, :-2] - 2 * w[1:-1, 1:-1] + w[1:-1, 2:]) / hy**2
        return -lap - self.values[1:-1, 1:-1] / (m - 1.0)


def cosine_subsolution(p, lambda_param, alpha, ny):
    if not 0 < lambda_param <= 1:
        raise InvalidParameterError(f"lambda_param must lie in (0, 1], got {lambda_param}")
    if not alpha > 0:
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")
    if int(ny) != ny or ny < 3:
        raise InvalidParameterError(f"ny must be an integer >= 3, got {ny}")
    m = p.m
    half = np.pi / (2.0 * alpha)
    y = np.linspace(-half, half, int(ny))
    prof = np.clip(lambda_param * np.cos(alpha * y), 0.0, None) ** (1.0 / m)
    prof[0] = prof[-1] = 0.0
    values = np.outer(p.phi, prof)
    bracket = lambda_param ** ((m - 1.0) / m) * (1.0 + alpha**2 * (m - 1.0) * p.sup_phi ** (m - 1.0))
    # One ulp of slack so the exact equality case counts as admissible.
    return CosineSubsolution(p, lambda_param, alpha, y, values, bool(bracket <= 1.0 + 4 * np.finfo(float).eps))
