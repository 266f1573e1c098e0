"""Traveling-wave profiles computed by comoving-frame relaxation.

The wave profile phi(z, xi) solves Lap(phi^m) + c phi_xi + phi/(m-1) = 0,
equals Phi far to the left and vanishes to the right of a free boundary.
It is obtained as the steady state of the rescaled equation in a frame
moving with the front.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import TubeGrid, _Kernel, _power
from .errors import (
    ConvergenceError,
    DegenerateProfileError,
    EstimationError,
    InvalidParameterError,
    WindowTooShortError,
)

log = logging.getLogger(__name__)

__all__ = [
    "WaveProfile",
    "FrontSeries",
    "relax_wave",
    "normalize_wave",
    "front_curve",
    "reflect_wave",
    "measure_speed",
    "wave_residual",
    "FRONT_THRESHOLD",
]

FRONT_THRESHOLD = 1e-8


def front_curve(values, coords, threshold, leading="right", rows=None):
    """Per-row free-boundary position of a nonnegative 2-D field.

    For each row the outermost node with value above ``threshold`` is found
    (rightmost for ``leading="right"``).  The position is refined linearly,
    using the last two super-threshold nodes, to where the field would cross
    the threshold, never moving more than one spacing outward.  Rows with no
    super-threshold node give NaN.  ``rows`` defaults to the interior rows.
    """
    if not threshold > 0:
        raise InvalidParameterError(f"threshold must be positive, got {threshold}")
    values = np.asarray(values, dtype=float)
    coords = np.asarray(coords, dtype=float)
    if rows is None:
        rows = np.arange(1, values.shape[0] - 1)
    sub = values[rows]
    if leading == "left":
        g = front_curve(sub[:, ::-1], -coords[::-1], threshold, "right", rows=np.arange(len(rows)))
        return -g
    h = coords[1] - coords[0]
    above = sub > threshold
    has = above.any(axis=1)
    last = sub.shape[1] - 1 - np.argmax(above[:, ::-1], axis=1)
    out = np.full(sub.shape[0], np.nan)
    for r in np.nonzero(has)[0]:
        j = last[r]
        pos = coords[j]
        if j > 0:
            vj, vp = sub[r, j], sub[r, j - 1]
            if vp > vj:
                pos += min(h, h * (vj - threshold) / (vp - vj))
        out[r] = pos
    return out


@dataclass(frozen=True, eq=False)
class WaveProfile:
    """Discrete wave profile on the window [xi_min, xi_min + (n_xi - 1) h].

    ``speed`` is the frame speed at which the profile is steady; ``requested``
    the speed the relaxation was started with and ``drift`` their difference,
    i.e. the rate at which the front had to be re-pinned.
    """

    grid: TubeGrid
    values: np.ndarray
    m: float
    speed: float
    phi_section: np.ndarray
    normalized: bool = False
    reflected: bool = False
    requested: float = None
    drift: float = 0.0
    threshold: float = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.threshold is None:
            object.__setattr__(self, "threshold", FRONT_THRESHOLD * float(np.max(self.phi_section)))
        if self.requested is None:
            object.__setattr__(self, "requested", self.speed)

    @property
    def xi(self):
        return self.grid.y

    @property
    def h(self):
        return self.grid.hy

    @property
    def xi_min(self):
        return self.grid.y_min

    @property
    def xi_max(self):
        return self.grid.y_max

    @property
    def front(self):
        return front_curve(self.values, self.xi, self.threshold,
                           leading="left" if self.reflected else "right")

    @property
    def xi0(self):
        f = self.front
        return float(np.nanmin(f)) if self.reflected else float(np.nanmax(f))

    def shifted(self, k):
        """Same values on a window moved by ``k`` spacings."""
        g = self.grid
        return replace(self, grid=TubeGrid(g.section, g.y_min + k * g.hy, g.y_max + k * g.hy, g.ny))

    def __call__(self, xi):
        """Linear interpolation in xi for every z-row; Phi to the plateau side, 0 beyond the front."""
        xi = np.asarray(xi, dtype=float)
        h = self.h
        s = (xi - self.xi_min) / h
        j = np.floor(s).astype(int)
        t = s - j
        n = self.grid.ny
        plateau = self.phi_section[:, None] if not self.reflected else None
        jc = np.clip(j, 0, n - 2)
        tc = np.clip(np.where(j < 0, 0.0, np.where(j > n - 2, 1.0, t)), 0.0, 1.0)
        out = (1.0 - tc) * self.values[:, jc] + tc * self.values[:, jc + 1]
        left = s < 0
        right = s > n - 1
        if self.reflected:
            out[:, left] = 0.0
            out[:, right] = self.phi_section[:, None]
        else:
            out[:, left] = plateau
            out[:, right] = 0.0
        return out

    def monotonicity_defect(self):
        """Largest forward difference against the direction of decay."""
        d = np.diff(self.values, axis=1)
        return float(d.max() if not self.reflected else (-d).max())

    def plateau_defect(self, xi=None):
        """sup_z |phi(z, xi)/Phi(z) - 1| over interior rows.

        The end column on the plateau side is imposed, so the default
        station lies a quarter of the window inside it.
        """
        if xi is None:
            q = 0.25 * (self.xi_max - self.xi_min)
            xi = self.xi_max - q if self.reflected else self.xi_min + q
        col = self(np.array([xi]))[:, 0]
        phi = self.phi_section
        return float(np.max(np.abs(col[1:-1] / phi[1:-1] - 1.0)))

    def support_defect(self):
        """Largest value strictly beyond the front estimate xi0 (should be ~0)."""
        x0 = self.xi0
        mask = self.xi < x0 - 1e-12 if self.reflected else self.xi > x0 + 1e-12
        mask &= np.abs(self.xi - x0) > self.h
        if not mask.any():
            return 0.0
        return float(self.values[:, mask].max())


def wave_residual(w, speed=None, scheme="upwind"):
    """Lap_h(phi^m) + c D phi + phi/(m-1) at interior nodes.

    ``scheme="upwind"`` takes the xi-difference one-sided toward the zero
    state, ``"central"`` uses the centred difference.  The relaxation
    transports by exact node shifts rather than either difference; the
    upwind residual of a relaxed profile is O(h), the central one O(h^2)
    away from the front, and both are largest at the front.
    """
    c = w.speed if speed is None else speed
    m = w.m
    g = w.grid
    v = w.values
    u = _power(v, m)
    lap = (u[:-2, 1:-1] + u[2:, 1:-1] - 2 * u[1:-1, 1:-1]) / g.hz**2
    lap += (u[1:-1, :-2] + u[1:-1, 2:] - 2 * u[1:-1, 1:-1]) / g.hy**2
    if scheme == "central":
        adv = c * (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * g.hy)
    elif scheme != "upwind":
        raise InvalidParameterError(f"scheme must be 'upwind' or 'central', got {scheme!r}")
    elif c >= 0:
        adv = c * (v[1:-1, 2:] - v[1:-1, 1:-1]) / g.hy
    else:
        adv = -c * (v[1:-1, :-2] - v[1:-1, 1:-1]) / g.hy
    return lap + adv + v[1:-1, 1:-1] / (m - 1.0)


def _step_position(v, phi, xi, h):
    # Position of the equivalent step for the mid row: xi_min + h * sum(phi/Phi).
    r = v.shape[0] // 2
    return xi[0] - 0.5 * h + h * float(np.sum(v[r]) / phi[r])


def relax_wave(profile, c, window=(-20.0, 10.0), n_xi=385, tol=1e-7, station=0.0,
               safety=0.9, max_time=400.0, adapt=True, burn_in=3.0, gain=0.5, init=None):
    """Relax the comoving rescaled equation to a traveling-wave profile.

    Boundary values are phi = Phi at xi_min and phi = 0 at xi_max.  The
    frame motion is applied as an exact one-node shift after every interval
    h/c of lab-frame diffusion-reaction steps (upwind transport at Courant
    number one, so no numerical diffusion is added).  After each shift the
    profile is re-pinned to ``station`` by further whole-node shifts, and,
    with ``adapt``, the frame speed absorbs the measured drift so that a
    genuine fixed point exists on the grid.  Iteration stops when the
    sup-norm change per unit pseudo-time between consecutive shifts is below
    ``tol``.  The returned profile is not normalized; ``drift`` is the frame
    correction (positive when the wave outruns ``c``).
    """
    if not c > 0:
        raise InvalidParameterError(f"wave speed must be positive, got {c}")
    xi_min, xi_max = window
    if not xi_min < station < xi_max:
        raise InvalidParameterError("pinning station must lie inside the window")
    m = profile.m
    grid = TubeGrid(profile.grid, float(xi_min), float(xi_max), int(n_xi))
    xi = grid.y
    h = grid.hy
    phi = np.asarray(profile.phi, dtype=float)
    threshold = FRONT_THRESHOLD * profile.sup_phi

    if init is None:
        ramp = np.clip((station - xi) / 5.0, 0.0, 1.0) ** (1.0 / (m - 1.0))
        v = phi[:, None] * ramp[None, :]
    else:
        v = np.array(init, dtype=float)
    v[:, 0] = phi
    v[:, -1] = 0.0

    def shift(arr, k):
        if k > 0:
            arr = np.concatenate([arr[:, k:], np.zeros((arr.shape[0], k))], axis=1)
        elif k < 0:
            arr = np.concatenate([np.repeat(phi[:, None], -k, axis=1), arr[:, :k]], axis=1)
        arr[:, 0] = phi
        arr[:, -1] = 0.0
        return arr

    kern = _Kernel(grid, m, "v", 0.0, y_ends="hold")
    frame = float(c)
    x_ref = _step_position(v, phi, xi, h)
    tau = 0.0
    history, drifts = [], []
    pins = 0
    converged = False
    while tau < max_time:
        period = h / frame
        v_prev = v
        x_prev = _step_position(v, phi, xi, h)
        elapsed = 0.0
        while elapsed < period - 1e-15:
            dt = min(safety * kern.max_dt(v), period - elapsed)
            v = kern.advance(v, dt)
            elapsed += dt
        tau += period
        v = shift(v, 1)
        x_now = _step_position(v, phi, xi, h)
        rate = (x_now - x_prev) / period
        change = float(np.max(np.abs(v - v_prev))) / period
        history.append(change)
        drifts.append(frame - c + rate)
        f = front_curve(v, xi, threshold)
        if np.all(np.isnan(f)):
            raise DegenerateProfileError("wave relaxation lost its positivity set")
        edge = float(np.nanmax(f))
        if edge >= xi[-1] - 5 * h or x_now <= xi[0] + 5 * h:
            raise WindowTooShortError(f"front at xi={edge:.3f} left the window {window}")
        if change < tol and tau > burn_in:
            converged = True
            break
        k = int(round((x_now - x_ref) / h))
        if k != 0:
            v = shift(v, k)
            pins += k
        if adapt and tau > burn_in:
            frame = min(max(frame + gain * rate, 0.25 * c), 4.0 * c)
    if not converged:
        raise ConvergenceError(
            f"wave relaxation at c={c:g} did not converge within pseudo-time {max_time:g}",
            residual=history[-1] if history else None, history=history)
    drift = frame - c if adapt else pins * h / tau
    info = {"pseudo_time": tau, "pin_nodes": pins, "history": history,
            "drift_history": drifts, "final_change": history[-1]}
    return WaveProfile(grid, v, m, frame if adapt else c, phi, requested=c, drift=drift,
                       threshold=threshold, info=info)



def normalize_wave(w):
    """Shift the window by whole nodes so that max_z of the front is within h/2 of 0."""
    f = w.front
    if np.any(np.isnan(f)):
        raise DegenerateProfileError("some interior row has an empty positivity set")
    edge = float(np.nanmin(f)) if w.reflected else float(np.nanmax(f))
    k = int(round(edge / w.h))
    out = w.shifted(-k)
    return replace(out, normalized=True)


def reflect_wave(w):
    """Profile for xi -> -xi; travels with speed -c and grows in xi."""
    g = w.grid
    grid = TubeGrid(g.section, -g.y_max, -g.y_min, g.ny)
    return replace(w, grid=grid, values=w.values[:, ::-1], speed=-w.speed,
                   requested=-w.requested, drift=-w.drift, reflected=not w.reflected)


@dataclass
class FrontSeries:
    """Time-indexed free-boundary positions; ``gamma[k, r]`` is row r at ``taus[k]``."""

    taus: np.ndarray
    gamma: np.ndarray
    rows: np.ndarray = None

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        self.gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        if self.gamma.shape[0] != self.taus.size:
            self.gamma = self.gamma.reshape(self.taus.size, -1)
        if self.taus.size > 1 and np.any(np.diff(self.taus) <= 0):
            raise InvalidParameterError("front series times must be strictly increasing")

    @property
    def row_max(self):
        return np.array([np.nanmax(g) if np.any(np.isfinite(g)) else np.nan for g in self.gamma])

    @property
    def row_min(self):
        return np.array([np.nanmin(g) if np.any(np.isfinite(g)) else np.nan for g in self.gamma])


def measure_speed(fronts, fit_window):
    """Least-squares line through (tau, max_z Gamma(z, tau)) on ``fit_window``.

    Returns ``(slope, intercept, max_abs_residual)``.
    """
    ta, tb = fit_window
    taus = fronts.taus
    sel = (taus >= ta - 1e-12) & (taus <= tb + 1e-12)
    if sel.sum() < 10:
        raise EstimationError(f"need at least 10 samples in {fit_window}, got {int(sel.sum())}")
    gmax = fronts.row_max[sel]
    if np.any(np.isnan(gmax)):
        raise EstimationError("empty front in the fit window")
    t = taus[sel]
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, gmax, rcond=None)
    resid = gmax - A @ coef
    return float(coef[0]), float(coef[1]), float(np.max(np.abs(resid)))
