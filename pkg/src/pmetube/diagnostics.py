"""Quantitative checks of the long-time behaviour against simulation output.

All functions are read-only over snapshots.  Fields are in the rescaled
variable v; the y coordinate of a comoving field is shifted back to the lab
frame before windows |y| <= c tau are applied.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import GUARD_NODES
from .errors import (
    InvalidParameterError,
    RangeError,
    StabilityError,
    WindowTooLateError,
)
from .waves import FrontSeries, front_curve, reflect_wave

__all__ = [
    "ErrorSeries",
    "FitResult",
    "OrderingReport",
    "relative_error_window",
    "error_series",
    "outer_support_max",
    "outer_vanishing_time",
    "front_series",
    "front_law_audit",
    "ordering_audit",
    "search_alignment",
    "exp_rate_fit",
    "linear_fit",
    "flat_problem_checks",
    "inner_uniform_check",
    "concave_envelope_gap",
]


def _lab_y(f):
    return f.grid.y + f.speed * f.time


def _check_v(f):
    if f.variable != "v":
        raise InvalidParameterError("diagnostics expect rescaled (v) fields")


def relative_error_window(field, profile, c):
    """(tau, c, sup |v/Phi - 1|, count) over interior rows and |y| <= c tau.

    An empty window gives error NaN and count 0.
    """
    _check_v(field)
    tau = field.time
    y = _lab_y(field)
    cols = np.abs(y) <= c * tau
    count = int(cols.sum()) * (field.grid.section.n - 2)
    if count == 0:
        return tau, c, float("nan"), 0
    phi = profile.phi[1:-1, None]
    q = field.values[1:-1][:, cols] / phi
    return tau, c, float(np.max(np.abs(q - 1.0))), count


@dataclass
class ErrorSeries:
    taus: np.ndarray
    speeds: np.ndarray
    errors: np.ndarray
    counts: np.ndarray

    def burn_in(self, run_length=3):
        """First tau from which the error decreases for ``run_length`` consecutive samples."""
        e = self.errors
        d = np.diff(e) < 0
        for k in range(len(d) - run_length + 1):
            if np.all(np.isfinite(e[k:k + run_length + 1])) and d[k:k + run_length].all():
                return float(self.taus[k])
        return None

    def trend_violations(self, lag=5.0, start=None):
        """Pairs (tau, tau+lag) past ``start`` where the error increased."""
        if start is None:
            start = self.burn_in()
        if start is None:
            return None
        bad = []
        for k, t in enumerate(self.taus):
            if t < start - 1e-12:
                continue
            j = np.nonzero(np.abs(self.taus - (t + lag)) < 1e-9)[0]
            if j.size and self.errors[j[0]] > self.errors[k]:
                bad.append((float(t), float(self.taus[j[0]])))
        return bad

    def at(self, tau):
        k = int(np.argmin(np.abs(self.taus - tau)))
        return float(self.errors[k])

    def rows(self):
        return [(float(t), float(c), float(e), int(n))
                for t, c, e, n in zip(self.taus, self.speeds, self.errors, self.counts)]


def error_series(run, profile, c):
    samples = [relative_error_window(f, profile, c) for f in run.fields()]
    a = np.array(samples, dtype=float).reshape(-1, 4)
    return ErrorSeries(a[:, 0], a[:, 1], a[:, 2], a[:, 3].astype(int))


def outer_support_max(field, c, guard_threshold=0.0):
    """max v over |y| >= c tau (0 if that region lies beyond the grid).

    Returns NaN (inconclusive) when the field is above ``guard_threshold``
    within the guard band at either y-end: the truncation may then be
    hiding mass that belongs to the outer region.
    """
    _check_v(field)
    v = field.values
    if np.any(v[:, :GUARD_NODES] > guard_threshold) or np.any(v[:, -GUARD_NODES:] > guard_threshold):
        return float("nan")
    cols = np.abs(_lab_y(field)) >= c * field.time
    if not cols.any():
        return 0.0
    return float(np.max(v[:, cols]))


def outer_vanishing_time(run, c):
    """Smallest snapshot time from which outer_support_max is exactly 0 to the end.

    Returns (tau_c, values); tau_c is None if the outer maximum is positive at
    the last snapshot.
    """
    vals = np.array([outer_support_max(f, c) for f in run.fields()])
    taus = np.asarray(run.times, dtype=float)
    if vals.size == 0 or vals[-1] != 0.0:
        return None, vals
    nz = np.nonzero(vals != 0.0)[0]
    k = 0 if nz.size == 0 else nz[-1] + 1
    return float(taus[k]), vals


def front_series(run, threshold, rows=None, leading="right"):
    taus, gam = [], []
    for f in run.fields():
        taus.append(f.time)
        gam.append(front_curve(f.values, _lab_y(f), threshold, leading=leading, rows=rows))
    if rows is None:
        rows = np.arange(1, run.grid.section.n - 1)
    return FrontSeries(np.array(taus), np.array(gam), np.asarray(rows))


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float
    r2: float
    n: int

    def as_dict(self):
        return asdict(self)


def linear_fit(x, y):
    """Least-squares line with sup residual and coefficient of determination."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise InvalidParameterError("need at least two points for a line fit")
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(r * r)) / ss if ss > 0 else 1.0
    return FitResult(float(coef[0]), float(coef[1]), float(np.max(np.abs(r))),
                     min(max(r2, 0.0), 1.0), int(x.size))


def _centre_index(y):
    return int(np.argmin(np.abs(y)))


def exp_rate_fit(run, profile, z_station, window, y_index=None):
    """Fit ln(1 - v(z, 0, tau)/Phi(z)) = slope * tau + intercept on ``window``.

    The y node defaults to the one closest to y = 0.  A gap below 1e-14
    anywhere in the window raises WindowTooLateError.
    """
    ta, tb = window
    taus, gaps = [], []
    for f in run.fields():
        if f.time < ta - 1e-12 or f.time > tb + 1e-12:
            continue
        _check_v(f)
        j = _centre_index(_lab_y(f)) if y_index is None else y_index
        gap = 1.0 - f.values[z_station, j] / profile.phi[z_station]
        if not gap > 1e-14:
            raise WindowTooLateError(f"gap {gap:.3e} at tau={f.time:.3f} is below 1e-14")
        taus.append(f.time)
        gaps.append(gap)
    if len(taus) < 3:
        raise RangeError(f"fewer than three snapshots in {window}")
    return linear_fit(taus, np.log(gaps))


def flat_problem_checks(A=2.0, k=1.0, eps=0.1, B=1.0, n=81, dtau=None, tau_end=20.0, m=2.0,
                        fit_window=None, tol=1e-10):
    """Integrate f_tau = k (f^m)_yy + f (1 - f^(m-1))/(m-1) on [-A, A].

    Initial and boundary value 1 - eps.  Checks (a) concavity of f^m,
    (b) f nondecreasing in tau at every node, (c) exponential approach on
    |y| <= B.  On a bounded interval the solution tends to a steady state
    strictly below 1, so (c) fits ln(max_{|y|<=B} (f_inf - f)) where f_inf is
    obtained by continuing the same scheme to stationarity; the distance from
    f_inf to 1 is reported as ``steady_gap_to_one``.
    """
    if not 0.0 <= eps < 0.5:
        raise InvalidParameterError("eps must lie in [0, 1/2)")
    if not 0.0 <= B < A:
        raise InvalidParameterError("need 0 <= B < A")
    if not k > 0 or not m > 1:
        raise InvalidParameterError("need k > 0 and m > 1")
    y = np.linspace(-A, A, n)
    h = y[1] - y[0]
    fmax = 1.0
    stable = h * h / (2.0 * k * m * fmax ** (m - 1.0) + h * h / (m - 1.0))
    if dtau is None:
        dtau = 0.5 * stable
    if dtau > stable:
        raise StabilityError(f"dtau={dtau:g} exceeds the monotone limit {stable:g}")
    nsteps = int(np.ceil(tau_end / dtau - 1e-9))
    dtau = tau_end / nsteps if nsteps else dtau
    sample = max(1, int(round(0.05 / dtau)))

    def rhs(f):
        u = f ** m
        out = np.zeros_like(f)
        out[1:-1] = k * (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2 + f[1:-1] * (1 - f[1:-1] ** (m - 1)) / (m - 1)
        return out

    f = np.full(n, 1.0 - eps)
    concave = 0.0
    decrease = 0.0
    inner = np.abs(y) <= B + 1e-12
    taus, mins = [0.0], [f[inner].min()]
    traj = [f[inner].copy()]
    for s in range(nsteps):
        fn = f + dtau * rhs(f)
        decrease = max(decrease, float(np.max(f - fn)))
        f = fn
        u = f ** m
        concave = max(concave, float(np.max(u[2:] - 2 * u[1:-1] + u[:-2]) / h**2))
        if (s + 1) % sample == 0 or s == nsteps - 1:
            taus.append((s + 1) * dtau)
            traj.append(f[inner].copy())
    # continue to the discrete steady state
    g = f.copy()
    for _ in range(2_000_000):
        gn = g + dtau * rhs(g)
        if np.max(np.abs(gn - g)) < 1e-15:
            g = gn
            break
        g = gn
    f_inf = g[inner]
    taus = np.array(taus)
    gaps = np.array([np.max(f_inf - t) for t in traj])
    if eps == 0.0:
        fit = None
        ok_c = True
    else:
        if fit_window is None:
            fit_window = (0.25 * tau_end, tau_end)
        sel = (taus >= fit_window[0]) & (taus <= fit_window[1]) & (gaps > 1e-12)
        fit = linear_fit(taus[sel], np.log(gaps[sel])) if sel.sum() >= 3 else None
        ok_c = fit is not None and fit.slope < 0 and fit.r2 >= 0.99
    return {
        "concavity_max": concave,
        "concavity_ok": concave <= tol,
        "monotone_max_decrease": decrease,
        "monotone_ok": decrease <= tol,
        "boundary_value": float(f[0]),
        "fit": None if fit is None else fit.as_dict(),
        "exponential_ok": bool(ok_c),
        "steady_gap_to_one": float(1.0 - f_inf.min()),
        "passed": bool(concave <= tol and decrease <= tol and ok_c),
        "dtau": dtau,
        "final": f,
        "y": y,
    }


@dataclass
class OrderingReport:
    max_sub_violation: float
    max_super_violation: float
    offending: dict
    alignment: dict
    threshold: float
    snapshots: int

    @property
    def passed(self):
        return self.max_sub_violation <= self.threshold and self.max_super_violation <= self.threshold

    def as_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _barrier_field(path, wave, rwave, s, y):
    """f(s) * max(phi(z, y - g), phi~(z, y + g)) over the whole strip.

    For y >= 0 the right-moving wave applies and for y <= 0 its reflection
    (which travels to the left); at any node only one of the two is used.
    """
    f, g = path.at(s)
    out = np.empty((wave.grid.section.n, y.size))
    right = y >= 0
    out[:, right] = wave(y[right] - g)
    out[:, ~right] = rwave(y[~right] + g)
    return f * out


def ordering_audit(run, sub, sup, wave, alignment=(0.0, 0.0, 0.0), threshold=None):
    """Check f(s) phi(z, y - g(s)) <= v <= f_bar(s') phi(z, y - g_bar(s')).

    ``alignment = (tau0, tau1, T)``: at a snapshot with rescaled time tau the
    sub-barrier is evaluated at s = tau - tau0 - T and the super-barrier at
    s' = tau - tau1.  The half-tube y <= 0 uses the reflected wave.  Either
    path may be None.  Violations beyond 1e-8 ||Phi|| fail the audit.
    """
    if not wave.normalized:
        raise InvalidParameterError("wave must be normalized")
    tau0, tau1, T = (float(a) for a in alignment)
    rwave = reflect_wave(wave)
    if threshold is None:
        threshold = 1e-8 * float(np.max(wave.phi_section))
    worst = {"sub": (0.0, None), "super": (0.0, None)}
    used = 0
    for fld in run.fields():
        _check_v(fld)
        tau = fld.time
        y = _lab_y(fld)
        v = fld.values
        hit = False
        for kind, path, s in (("sub", sub, tau - tau0 - T), ("super", sup, tau - tau1)):
            if path is None or s < path.tau[0] - 1e-12 or s > path.tau[-1] + 1e-12:
                continue
            hit = True
            w = _barrier_field(path, wave, rwave, s, y)
            d = w - v if kind == "sub" else v - w
            i, j = np.unravel_index(np.argmax(d), d.shape)
            if d[i, j] > worst[kind][0]:
                worst[kind] = (float(d[i, j]), {"tau": tau, "z_index": int(i), "y": float(y[j])})
        used += hit
    if used == 0:
        raise RangeError("the barrier paths and the run do not overlap after alignment")
    off = {k: v[1] for k, v in worst.items() if v[1] is not None}
    return OrderingReport(worst["sub"][0], worst["super"][0], off,
                          {"tau0": tau0, "tau1": tau1, "T": T}, threshold, used)


def search_alignment(run, sub, sup, wave, T_grid=(0.0,), tau0_grid=(0.0,), tau1_grid=(0.0,)):
    """Coarse grid search over (tau0, tau1, T), smallest total delay first.

    Returns (best_report, tried) where best_report is the first passing
    OrderingReport (or the one with the smallest worst violation if none
    passes) and ``tried`` lists (alignment, sub, super) violations.
    """
    combos = sorted(((a, b, c) for a in tau0_grid for b in tau1_grid for c in T_grid),
                    key=lambda t: (t[0] + t[1] + t[2], t))
    best, tried = None, []
    for al in combos:
        try:
            r = ordering_audit(run, sub, sup, wave, al)
        except RangeError:
            continue
        tried.append((al, r.max_sub_violation, r.max_super_violation))
        if r.passed:
            return r, tried
        if best is None or max(r.max_sub_violation, r.max_super_violation) < \
                max(best.max_sub_violation, best.max_super_violation):
            best = r
    if best is None:
        raise RangeError("no alignment in the search grid overlaps the run")
    return best, tried


def concave_envelope_gap(x, g):
    """max (hull - g) where hull is the least concave majorant of (x, g)."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    ok = np.isfinite(g)
    x, g = x[ok], g[ok]
    hull = []
    for p in zip(x, g):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    hx, hy = zip(*hull)
    return float(np.max(np.interp(x, hx, hy) - g))


def front_law_audit(fronts, cstar, wave, T, exclude_edge_rows=1):
    """Free-boundary law: Gamma_v(z, tau)/tau -> c* and |Gamma_v - Gamma_phi - c* tau| <= C.

    ``fronts`` and ``wave`` must use the same interior rows.  Rows next to
    the z-boundary (``exclude_edge_rows`` on each side) are left out of C_emp
    because the discrete front there is threshold-sensitive.  C_emp is
    declared non-drifting if its maximum over the last quarter of [T, end]
    is at most 1.1 times its maximum over the middle half.
    """
    taus = fronts.taus
    sel = taus >= T - 1e-12
    if not sel.any():
        raise RangeError(f"no front samples at or after T={T}")
    gam = fronts.gamma[sel]
    if np.any(np.isnan(gam)):
        return {"inconclusive": True, "reason": "empty rows after T"}
    gphi = wave.front
    if gphi.shape[0] != gam.shape[1]:
        raise InvalidParameterError("wave and front series use different rows")
    t = taus[sel]
    dev = np.abs(gam - gphi[None, :] - cstar * t[:, None])
    e = exclude_edge_rows
    core = dev[:, e:dev.shape[1] - e] if e else dev
    per_tau = core.max(axis=1)
    span = t[-1] - t[0]
    mid = (t >= t[0] + 0.25 * span) & (t <= t[0] + 0.75 * span)
    last = t >= t[0] + 0.75 * span
    mid_max = float(per_tau[mid].max()) if mid.any() else float("nan")
    last_max = float(per_tau[last].max()) if last.any() else float("nan")
    ratio = float(np.max(fronts.gamma[-1]) / taus[-1])
    c_emp = float(per_tau.max())
    zrows = wave.grid.section.z[1:-1]
    return {
        "inconclusive": False,
        "final_tau": float(taus[-1]),
        "ratio": ratio,
        "ratio_rel_error": abs(ratio - cstar) / cstar,
        "C_emp": c_emp,
        "C_mid_max": mid_max,
        "C_last_max": last_max,
        "non_drifting": bool(np.isfinite(c_emp) and last_max <= 1.1 * mid_max),
        "concave_envelope_gap": concave_envelope_gap(zrows, gphi),
        "per_tau": per_tau,
    }


def inner_uniform_check(run, profile, eps, c, ceiling_tol=1e-10):
    """First snapshot time with v >= (1 - eps) Phi on interior rows and |y| <= c tau.

    Also reports whether v <= Phi + ceiling_tol held at every snapshot.
    ``tau`` is None (not achieved) if the bound never holds; ``final_error``
    is the windowed shortfall max(1 - v/Phi) at the last snapshot.
    """
    if not c > 0:
        raise InvalidParameterError("c must be positive")
    first = None
    ceiling = True
    short = float("nan")
    phi = profile.phi[1:-1, None]
    for f in run.fields():
        _check_v(f)
        ceiling &= bool(np.all(f.values <= profile.phi[:, None] + ceiling_tol))
        cols = np.abs(_lab_y(f)) <= c * f.time
        if not cols.any():
            short = float("nan")
            if eps >= 1.0 and first is None:
                first = f.time
            continue
        q = f.values[1:-1][:, cols] / phi
        short = float(np.max(1.0 - q))
        if first is None and short <= eps:
            first = f.time
    return {"tau": first, "achieved": first is not None, "final_error": short,
            "ceiling_ok": ceiling, "eps": eps, "c": c}
