"""Amplitude/shift ODEs for traveling-wave barriers and related constants.

A barrier has the form w(z, y, tau) = f(tau) phi(z, y - g(tau)) with phi the
critical wave.  The amplitude and shift obey

    f' = f (1 - delta(tau) - f^(m-1)) / (m-1),     g' = c* f^(m-1),

with delta(tau) = 2 (m-1) delta0 / (1+tau)^2 for the sub-barrier and
delta = 0 for the super-barrier.  In the variable p = f^(m-1) the super
system is the logistic equation p' = p (1 - p), which gives closed forms.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationFailureError, InvalidParameterError, RangeError
from .section import _check_m

__all__ = [
    "BarrierParams",
    "BarrierPath",
    "EpsilonBookkeeping",
    "delta_schedule",
    "integrate_barrier",
    "super_closed_form",
    "asymptotic_shift",
    "evaluate_barrier",
    "epsilon_bookkeeping",
    "find_delta_bar",
]


def delta_schedule(delta0, m, tau):
    """delta(tau) = 2 (m-1) delta0 / (1+tau)^2.  Accepts array tau."""
    _check_m(m)
    if not 0.0 <= delta0 < 1.0:
        raise InvalidParameterError(f"delta0 must lie in [0, 1), got {delta0}")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise InvalidParameterError("tau must be nonnegative")
    out = 2.0 * (m - 1.0) * delta0 / (1.0 + tau) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BarrierParams:
    kind: str
    m: float
    cstar: float
    f0: float
    g0: float = 0.0
    delta0: float = 0.0

    def __post_init__(self):
        _check_m(self.m)
        if self.kind not in ("sub", "super"):
            raise InvalidParameterError(f"kind must be 'sub' or 'super', got {self.kind!r}")
        if not 0.0 < self.f0 < 1.0:
            raise InvalidParameterError(f"f0 must lie in (0, 1), got {self.f0}")
        if not self.cstar > 0:
            raise InvalidParameterError(f"cstar must be positive, got {self.cstar}")
        if not np.isfinite(self.g0):
            raise InvalidParameterError("g0 must be finite")
        if self.kind == "sub":
            # delta0 = 0 is allowed: it degenerates the sub system to the super one
            if not 0.0 <= self.delta0 < 1.0:
                raise InvalidParameterError(f"delta0 must lie in [0, 1), got {self.delta0}")
        elif self.delta0 != 0.0:
            raise InvalidParameterError("delta0 is only meaningful for sub-barriers")

    def delta(self, tau):
        if self.kind == "super":
            return 0.0 * np.asarray(tau, dtype=float)
        return delta_schedule(self.delta0, self.m, tau)

    def admissible_for_ordering(self, delta_bar):
        """delta0 < min(delta_bar, 1/(2 c* (m-1)))."""
        return self.delta0 < min(delta_bar, 1.0 / (2.0 * self.cstar * (self.m - 1.0)))

    def as_dict(self):
        return {"kind": self.kind, "m": self.m, "cstar": self.cstar, "f0": self.f0,
                "g0": self.g0, "delta0": self.delta0}


@dataclass(frozen=True, eq=False)
class BarrierPath:
    params: BarrierParams
    tau: np.ndarray
    f: np.ndarray
    g: np.ndarray
    predicted_shift: float
    info: dict = field(default_factory=dict)

    @property
    def dtau(self):
        return float(self.tau[1] - self.tau[0]) if self.tau.size > 1 else 0.0

    @property
    def shift(self):
        """g(tau) - c* tau along the path."""
        return self.g - self.params.cstar * self.tau

    def ceiling_margin(self):
        """min over samples of 1 - delta/(2(m-1)) - f; nonnegative when the sub ceiling holds."""
        p = self.params
        return float(np.min(1.0 - p.delta(self.tau) / (2.0 * (p.m - 1.0)) - self.f))

    def at(self, tau):
        """(f, g) at ``tau`` by linear interpolation between samples."""
        tau = np.asarray(tau, dtype=float)
        lo, hi = self.tau[0], self.tau[-1]
        if np.any(tau < lo - 1e-12) or np.any(tau > hi + 1e-12):
            raise RangeError(f"tau outside the path range [{lo}, {hi}]")
        return np.interp(tau, self.tau, self.f), np.interp(tau, self.tau, self.g)


def _rhs(params):
    m, cs = params.m, params.cstar
    if params.kind == "super":
        def rhs(t, f):
            p = f ** (m - 1.0)
            return f * (1.0 - p) / (m - 1.0), cs * p
    else:
        k = 2.0 * (m - 1.0) * params.delta0

        def rhs(t, f):
            p = f ** (m - 1.0)
            return f * (1.0 - k / (1.0 + t) ** 2 - p) / (m - 1.0), cs * p
    return rhs


def integrate_barrier(params, tau_end, dtau=1e-3):
    """Classical RK4 on a uniform grid for (f, g).

    The g equation does not feed back into f, so g is integrated with the same
    stages.  Raises IntegrationFailureError as soon as f leaves (0, 1]; values
    equal to 1 to rounding are tolerated for the super path at late times.
    """
    if not dtau > 0 or dtau > 0.01 * (params.m - 1.0) + 1e-15:
        raise InvalidParameterError(f"dtau must lie in (0, 0.01 (m-1)], got {dtau}")
    if not tau_end >= dtau:
        raise InvalidParameterError("tau_end must be at least dtau")
    n = int(round(tau_end / dtau))
    if abs(n * dtau - tau_end) > 1e-9 * max(1.0, tau_end):
        raise InvalidParameterError("tau_end must be an integer multiple of dtau")
    rhs = _rhs(params)
    tau = dtau * np.arange(n + 1)
    f = np.empty(n + 1)
    g = np.empty(n + 1)
    f[0], g[0] = params.f0, params.g0
    h = dtau
    for k in range(n):
        t, fk = tau[k], f[k]
        a1, b1 = rhs(t, fk)
        a2, b2 = rhs(t + h / 2, fk + h / 2 * a1)
        a3, b3 = rhs(t + h / 2, fk + h / 2 * a2)
        a4, b4 = rhs(t + h, fk + h * a3)
        fn = fk + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        if not (0.0 < fn <= 1.0 + 1e-12):
            raise IntegrationFailureError("amplitude left (0, 1]", tau=tau[k + 1])
        f[k + 1] = fn
        g[k + 1] = g[k] + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
    if np.any(np.diff(g) <= 0):
        raise IntegrationFailureError("shift is not strictly increasing",
                                      tau=float(tau[1 + np.argmax(np.diff(g) <= 0)]))
    return BarrierPath(params, tau, f, g, asymptotic_shift(params))


def super_closed_form(f0, g0, cstar, m, tau):
    """Exact (f_bar, g_bar) of the super system from the logistic solution."""
    BarrierParams("super", m, cstar, f0, g0)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise InvalidParameterError("tau must be nonnegative")
    p0 = f0 ** (m - 1.0)
    # 1 + p0 (e^tau - 1), written to stay accurate for small tau
    q = 1.0 + p0 * np.expm1(tau)
    p = p0 * np.exp(tau) / q
    fb = p ** (1.0 / (m - 1.0))
    gb = g0 + cstar * np.log(q)
    if fb.ndim == 0:
        return float(fb), float(gb)
    return fb, gb


def asymptotic_shift(params):
    """Limit of g(tau) - c* tau as tau -> infinity, from the closed formulas."""
    p = params
    s = p.g0 + p.cstar * (p.m - 1.0) * np.log(p.f0)
    if p.kind == "sub":
        s -= 2.0 * p.cstar * (p.m - 1.0) * p.delta0
    return float(s)


def evaluate_barrier(path, wave, tau, z_index, y):
    """f(tau) phi(z, y - g(tau)) for the rows ``z_index`` and positions ``y``.

    ``wave`` must be normalized; evaluation uses its linear interpolation in
    xi, which is exactly zero beyond the front and Phi on the plateau side.
    Returns an array of shape (len(z_index), len(y)) (squeezed for scalars).
    """
    if not wave.normalized:
        raise InvalidParameterError("wave must be normalized before building barriers")
    f, g = path.at(tau)
    y = np.asarray(y, dtype=float)
    vals = wave(np.atleast_1d(y) - g)[z_index]
    out = f * vals
    if isinstance(z_index, (int, np.integer)) and y.ndim == 0:
        return float(out[0])
    if y.ndim == 0:
        return out[..., 0]
    return out


@dataclass(frozen=True)
class EpsilonBookkeeping:
    eps: float
    m: float
    cstar: float
    a_eps: float
    b_eps: float
    lam_eps: float
    c_eps: float


def epsilon_bookkeeping(eps, m, cstar):
    """Constants of the star-shaped lower bound: a, b, lambda and the reduced speed."""
    _check_m(m)
    if not 0.0 < eps < 1.0:
        raise InvalidParameterError(f"eps must lie in (0, 1), got {eps}")
    if not cstar > 0:
        raise InvalidParameterError("cstar must be positive")
    a = eps * (3.0 - eps) / 2.0
    b = eps / 2.0
    lam = (1.0 - eps) ** (-(m - 1.0) / 2.0)
    c_eps = cstar * ((1.0 - a) / (1.0 - eps)) ** (m - 1.0)
    out = EpsilonBookkeeping(eps, m, cstar, a, b, lam, c_eps)
    assert eps < a < 1.0 and 0.0 < b < a
    assert abs((1.0 - a) / (1.0 - b) - (1.0 - eps)) <= 4 * np.finfo(float).eps
    assert c_eps < cstar
    return out


def find_delta_bar(m, f0, cstar=1.0, tau_end=50.0, dtau=None, tol=1e-6):
    """Largest delta0 for which the sub ceiling f <= 1 - delta/(2(m-1)) holds on [0, tau_end].

    Located by bisection on [0, 1); the ceiling is monotone in delta0 over
    the range of interest, which is checked at the bracket ends.
    """
    if dtau is None:
        dtau = min(1e-2, 0.01 * (m - 1.0))

    def ok(d):
        try:
            path = integrate_barrier(BarrierParams("sub", m, cstar, f0, 0.0, d), tau_end, dtau)
        except IntegrationFailureError:
            return False
        return path.ceiling_margin() >= 0.0

    lo, hi = 0.0, 1.0 - 1e-12
    if not ok(lo):
        raise InvalidParameterError("the ceiling fails already for delta0 = 0")
    if ok(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
