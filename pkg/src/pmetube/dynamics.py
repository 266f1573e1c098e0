"""Explicit finite-difference evolution on the strip (0, L) x (y_min, y_max).

Two forms are supported: the porous medium equation u_t = Lap(u^m) in
physical time, and the rescaled reaction-diffusion equation
v_tau = Lap(v^m) + v/(m-1) (+ c v_xi in a frame moving with speed c).
Every stepper is a monotone map under the CFL bound returned by ``cfl_dt``,
so discrete comparison holds between any two runs on the same grid.
"""

import hashlib
import json
import logging
import time as _time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    ArtifactIOError,
    InadmissibleDatumError,
    InvalidParameterError,
    SchemeFailureError,
    StabilityError,
    TruncationGuardError,
)
from .section import SectionGrid, _check_m

log = logging.getLogger(__name__)

__all__ = [
    "TubeGrid",
    "TubeField",
    "RunConfig",
    "RunRecord",
    "cfl_dt",
    "step_pme",
    "step_rescaled",
    "reaction_step",
    "to_rescaled",
    "from_rescaled",
    "admissible_t0",
    "run_evolution",
    "NEGATIVE_TOL",
    "GUARD_NODES",
]

NEGATIVE_TOL = 1e-14
GUARD_NODES = 5


@dataclass(frozen=True)
class TubeGrid:
    section: SectionGrid
    y_min: float
    y_max: float
    ny: int

    def __post_init__(self):
        if not self.y_min < self.y_max:
            raise InvalidParameterError(f"need y_min < y_max, got ({self.y_min}, {self.y_max})")
        if int(self.ny) != self.ny or self.ny < 3:
            raise InvalidParameterError(f"ny must be an integer >= 3, got {self.ny}")
        object.__setattr__(self, "ny", int(self.ny))

    @classmethod
    def build(cls, L, nz, y_min, y_max, ny):
        return cls(SectionGrid(L, nz), float(y_min), float(y_max), int(ny))

    @property
    def hz(self):
        return self.section.h

    @property
    def hy(self):
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def z(self):
        return self.section.z

    @property
    def y(self):
        return self.y_min + np.arange(self.ny) * self.hy

    @property
    def shape(self):
        return (self.section.n, self.ny)

    def as_dict(self):
        return {"L": self.section.L, "nz": self.section.n, "y_min": self.y_min,
                "y_max": self.y_max, "ny": self.ny}

    @classmethod
    def from_dict(cls, d):
        return cls.build(d["L"], d["nz"], d["y_min"], d["y_max"], d["ny"])


@dataclass(frozen=True, eq=False)
class TubeField:
    """Nonnegative field on a tube grid, indexed ``values[i, j]`` = (z_i, y_j).

    ``variable`` is ``"u"`` (physical, ``time`` is t) or ``"v"`` (rescaled,
    ``time`` is tau).  ``speed`` is the frame speed; 0 means the lab frame.
    """

    grid: TubeGrid
    values: np.ndarray
    time: float
    m: float
    variable: str = "v"
    speed: float = 0.0
    t0: float = 1.0

    def __post_init__(self):
        _check_m(self.m)
        if self.variable not in ("u", "v"):
            raise InvalidParameterError(f"variable must be 'u' or 'v', got {self.variable!r}")
        if not self.t0 > 0:
            raise InvalidParameterError(f"t0 must be positive, got {self.t0}")
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise InvalidParameterError(f"values have shape {vals.shape}, expected {self.grid.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def frame(self):
        return "lab" if self.speed == 0 else "comoving"

    def metadata(self):
        key = "tau" if self.variable == "v" else "t"
        return {key: self.time, "frame": self.frame, "speed": self.speed, "variable": self.variable,
                "m": self.m, "t0": self.t0, "grid": self.grid.as_dict()}


def cfl_dt(field, safety=0.9):
    """Largest stable explicit step (times ``safety``) for ``field``.

    The diffusion part uses the largest local diffusivity m v^(m-1); the
    rescaled form adds the reaction rate and, in a moving frame, c/hy.
    A field that is identically zero falls back to unit diffusivity.
    """
    if not 0 < safety <= 1:
        raise InvalidParameterError(f"safety must lie in (0, 1], got {safety}")
    g = field.grid
    vmax = float(field.values.max())
    diff = field.m * vmax ** (field.m - 1.0) if vmax > 0 else 0.0
    if diff == 0.0:
        diff = 1.0
    margin = 0.0
    if field.variable == "v":
        margin += 1.0 / (field.m - 1.0)
        margin += abs(field.speed) / g.hy
    return safety / (2.0 * diff * (1.0 / g.hz**2 + 1.0 / g.hy**2) + margin)


def _power(v, m):
    if m == 2:
        return v * v
    if m == 3:
        return v * v * v
    return v**m


class _Kernel:
    """Preallocated buffers for repeated explicit updates on one grid."""

    def __init__(self, grid, m, variable, speed=0.0, z_boundary="dirichlet", y_ends="zero",
                 scheme="euler"):
        if z_boundary not in ("dirichlet", "neumann"):
            raise InvalidParameterError(f"unknown z_boundary {z_boundary!r}")
        if y_ends not in ("zero", "hold"):
            raise InvalidParameterError(f"unknown y_ends {y_ends!r}")
        if scheme not in ("euler", "lie"):
            raise InvalidParameterError(f"unknown scheme {scheme!r}")
        self.grid = grid
        self.m = float(m)
        self.variable = variable
        self.speed = float(speed)
        self.z_boundary = z_boundary
        self.y_ends = y_ends
        self.scheme = scheme
        self.rz = 1.0 / grid.hz**2
        self.ry = 1.0 / grid.hy**2
        self.lap = np.zeros(grid.shape)
        self.clamped = 0

    def max_dt(self, v):
        vmax = float(v.max())
        diff = self.m * vmax ** (self.m - 1.0) if vmax > 0 else 0.0
        if diff == 0.0:
            diff = 1.0
        margin = 0.0
        if self.variable == "v":
            margin = 1.0 / (self.m - 1.0) + abs(self.speed) / self.grid.hy
        return 1.0 / (2.0 * diff * (self.rz + self.ry) + margin)

    def laplacian(self, v):
        w = _power(v, self.m)
        lap = self.lap
        c = w[1:-1, 1:-1]
        lap[1:-1, 1:-1] = (w[:-2, 1:-1] + w[2:, 1:-1] - 2.0 * c) * self.rz
        lap[1:-1, 1:-1] += (w[1:-1, :-2] + w[1:-1, 2:] - 2.0 * c) * self.ry
        if self.z_boundary == "neumann":
            for i, k in ((0, 1), (-1, -2)):
                row = w[i, 1:-1]
                lap[i, 1:-1] = 2.0 * (w[k, 1:-1] - row) * self.rz
                lap[i, 1:-1] += (w[i, :-2] + w[i, 2:] - 2.0 * row) * self.ry
        return lap

    def advance(self, v, dt):
        """Return the updated array; ``v`` is not modified."""
        if dt <= 0:
            raise InvalidParameterError(f"time step must be positive, got {dt}")
        if self.speed != 0 and abs(self.speed) * dt > self.grid.hy * (1 + 1e-12):
            raise StabilityError(f"advection CFL violated: |c| dt = {abs(self.speed) * dt:g} > hy = {self.grid.hy:g}")
        limit = self.max_dt(v)
        if dt > limit * (1 + 1e-12):
            raise StabilityError(f"time step {dt:g} exceeds the CFL bound {limit:g}")
        lap = self.laplacian(v)
        rows = slice(None) if self.z_boundary == "neumann" else slice(1, -1)
        out = v.copy()
        inner = out[rows, 1:-1]
        if self.variable == "v" and self.scheme == "euler":
            inner += dt * (lap[rows, 1:-1] + v[rows, 1:-1] / (self.m - 1.0))
        else:
            inner += dt * lap[rows, 1:-1]
        if self.speed != 0:
            # xi-transport toward decreasing xi (c > 0): upwind from the right neighbour.
            if self.speed > 0:
                inner += (self.speed * dt / self.grid.hy) * (v[rows, 2:] - v[rows, 1:-1])
            else:
                inner += (-self.speed * dt / self.grid.hy) * (v[rows, :-2] - v[rows, 1:-1])
        if self.variable == "v" and self.scheme == "lie":
            inner *= np.exp(dt / (self.m - 1.0))
        if self.z_boundary == "dirichlet":
            out[0, :] = 0.0
            out[-1, :] = 0.0
        if self.y_ends == "zero":
            out[:, 0] = 0.0
            out[:, -1] = 0.0
        neg = out < 0
        if neg.any():
            worst = float(out.min())
            if worst < -NEGATIVE_TOL:
                raise SchemeFailureError(f"negative value {worst:.3e} produced by the explicit update")
            count = int(neg.sum())
            self.clamped += count
            log.debug("clamped %d tiny negative values (min %.3e)", count, worst)
            out[neg] = 0.0
        return out


def step_pme(field, dt, z_boundary="dirichlet", y_ends="zero"):
    """One explicit step of u_t = Lap(u^m).

    ``z_boundary="neumann"`` frees the z-walls (reflecting ghost rows); it is
    used by the one-dimensional Barenblatt harness.
    """
    if field.variable != "u":
        raise InvalidParameterError("step_pme expects a physical-u field")
    k = _Kernel(field.grid, field.m, "u", field.speed, z_boundary, y_ends)
    return replace(field, values=k.advance(field.values, dt), time=field.time + dt)


def step_rescaled(field, dtau, scheme="euler", z_boundary="dirichlet", y_ends="zero"):
    """One explicit step of v_tau = Lap(v^m) + v/(m-1) (+ c v_xi if comoving).

    ``scheme="euler"`` applies diffusion, reaction and advection in one
    forward-Euler update, so the discrete stationary profile is an exact
    fixed point.  ``scheme="lie"`` splits off the reaction and applies the
    exact factor exp(dtau/(m-1)) after the transport step.
    """
    if field.variable != "v":
        raise InvalidParameterError("step_rescaled expects a rescaled-v field")
    k = _Kernel(field.grid, field.m, "v", field.speed, z_boundary, y_ends, scheme)
    return replace(field, values=k.advance(field.values, dtau), time=field.time + dtau)


def reaction_step(values, dtau, m):
    """Exact solution operator of v_tau = v/(m-1) over ``dtau``."""
    _check_m(m)
    return np.asarray(values, dtype=float) * np.exp(dtau / (m - 1.0))


def to_rescaled(u_field, t0=None):
    """u(x, t) -> v(x, tau) = (t + t0)^(1/(m-1)) u, tau = ln(t + t0)."""
    if u_field.variable != "u":
        raise InvalidParameterError("to_rescaled expects a physical-u field")
    t0 = u_field.t0 if t0 is None else t0
    if not t0 > 0 or not u_field.time + t0 > 0:
        raise InvalidParameterError(f"need t0 > 0 and t + t0 > 0, got t0={t0}, t={u_field.time}")
    tau = float(np.log(u_field.time + t0))
    factor = np.exp(tau / (u_field.m - 1.0))
    return replace(u_field, values=u_field.values * factor, time=tau, variable="v", t0=t0)


def from_rescaled(v_field):
    if v_field.variable != "v":
        raise InvalidParameterError("from_rescaled expects a rescaled-v field")
    tau = v_field.time
    t = float(np.exp(tau) - v_field.t0)
    if not t + v_field.t0 > 0:
        raise InvalidParameterError("t + t0 must be positive")
    factor = np.exp(tau / (v_field.m - 1.0))
    return replace(v_field, values=v_field.values / factor, time=t, variable="u")


def admissible_t0(u0, profile, floor=1e-12):
    """Largest t0 with t0^(1/(m-1)) u0 <= Phi/2 at every node.

    ``u0`` is an array on the tube grid whose z-index matches the profile.
    """
    u0 = np.asarray(u0, dtype=float)
    phi = np.asarray(profile.phi, dtype=float)
    if u0.ndim != 2 or u0.shape[0] != phi.size:
        raise InvalidParameterError(f"datum shape {u0.shape} does not match the profile ({phi.size} z-nodes)")
    if np.any(u0 < 0):
        raise InadmissibleDatumError("initial datum must be nonnegative")
    pos = u0 > 0
    if not pos.any():
        raise InadmissibleDatumError("initial datum is identically zero")
    phi2d = np.broadcast_to(phi[:, None], u0.shape)
    if np.any(phi2d[pos] <= 0):
        raise InadmissibleDatumError("datum is positive where Phi vanishes; v0 <= Phi/2 is impossible")
    ratio = phi2d[pos] / (2.0 * u0[pos])
    return max(float(np.min(ratio ** (profile.m - 1.0))), floor)


@dataclass
class RunConfig:
    """Everything that determines a run.  ``initial`` is given in the
    variable being integrated (v0 for rescaled runs, u0 for physical ones)."""

    grid: TubeGrid
    m: float
    initial: np.ndarray
    t_end: float
    t_start: float = 0.0
    t0: float = 1.0
    variable: str = "v"
    speed: float = 0.0
    snapshot_every: float = 0.25
    safety: float = 0.9
    scheme: str = "euler"
    support_threshold: float = 0.0
    guard: bool = True
    max_steps: int = 50_000_000

    def echo(self):
        return {
            "grid": self.grid.as_dict(), "m": self.m, "t_start": self.t_start, "t_end": self.t_end,
            "t0": self.t0, "variable": self.variable, "speed": self.speed,
            "snapshot_every": self.snapshot_every, "safety": self.safety, "scheme": self.scheme,
            "support_threshold": self.support_threshold, "guard": self.guard,
            "initial_sha256": hashlib.sha256(np.ascontiguousarray(self.initial, dtype=float).tobytes()).hexdigest(),
        }


@dataclass
class RunRecord:
    config: dict
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    paths: list = field(default_factory=list)
    steps: int = 0
    wall_time: float = 0.0
    clamped: int = 0
    grid: TubeGrid = None
    m: float = None
    t0: float = None
    variable: str = "v"
    speed: float = 0.0

    def field(self, k):
        return TubeField(self.grid, self.snapshots[k], self.times[k], self.m, self.variable,
                         self.speed, self.t0)

    def fields(self):
        for k in range(len(self.times)):
            yield self.field(k)

    def manifest(self):
        return {"config": self.config, "times": self.times, "snapshots": [str(p) for p in self.paths],
                "steps": self.steps, "wall_time": self.wall_time, "clamped": self.clamped}


def _check_guard(v, threshold, hy, y_min):
    n = GUARD_NODES + 1
    left = v[:, :n].max()
    right = v[:, -n:].max()
    if left > threshold or right > threshold:
        side = "lower" if left > threshold else "upper"
        raise TruncationGuardError(
            f"numerical support reached the {side} y-truncation guard "
            f"({GUARD_NODES} nodes, hy={hy:g}); enlarge the y extent")


def run_evolution(config, observers=(), out_dir=None, keep_snapshots=True):
    """Integrate ``config`` from ``t_start`` to ``t_end`` with snapshots.

    Steps are shortened so that snapshot times are hit exactly; the result
    is deterministic for a fixed configuration.  Observers are called as
    ``observer(field)`` at every snapshot.  When ``out_dir`` is given each
    snapshot is written as ``snap_XXXXX.npy`` plus a JSON sidecar, and the
    run manifest as ``run.json``.
    """
    cfg = config
    if cfg.t_end < cfg.t_start:
        raise InvalidParameterError("t_end must not precede t_start")
    if not cfg.snapshot_every > 0:
        raise InvalidParameterError("snapshot cadence must be positive")
    kern = _Kernel(cfg.grid, cfg.m, cfg.variable, cfg.speed, scheme=cfg.scheme)
    v = np.array(cfg.initial, dtype=float)
    if v.shape != cfg.grid.shape:
        raise InvalidParameterError(f"initial datum has shape {v.shape}, expected {cfg.grid.shape}")
    if np.any(v < 0):
        raise InvalidParameterError("initial datum must be nonnegative")
    v[0, :] = 0.0
    v[-1, :] = 0.0

    out = None
    if out_dir is not None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ArtifactIOError(f"cannot create output directory {out}: {exc}") from exc

    rec = RunRecord(cfg.echo(), grid=cfg.grid, m=cfg.m, t0=cfg.t0, variable=cfg.variable, speed=cfg.speed)
    threshold = cfg.support_threshold if cfg.support_threshold > 0 else 1e-10 * max(float(v.max()), 1e-300)

    def emit(values, t):
        f = TubeField(cfg.grid, values, t, cfg.m, cfg.variable, cfg.speed, cfg.t0)
        k = len(rec.times)
        rec.times.append(t)
        if keep_snapshots:
            rec.snapshots.append(f.values)
        if out is not None:
            path = out / f"snap_{k:05d}.npy"
            try:
                np.save(path, f.values)
                path.with_suffix(".json").write_text(json.dumps(f.metadata(), sort_keys=True))
            except OSError as exc:
                raise ArtifactIOError(f"failed to write snapshot {path}: {exc}") from exc
            rec.paths.append(path)
        for obs in observers:
            obs(f)

    start = _time.perf_counter()
    t = cfg.t_start
    emit(v, t)
    n_snap = int(np.floor((cfg.t_end - cfg.t_start) / cfg.snapshot_every + 1e-9))
    targets = [cfg.t_start + k * cfg.snapshot_every for k in range(1, n_snap + 1)]
    if not targets or targets[-1] < cfg.t_end - 1e-12:
        if cfg.t_end > cfg.t_start:
            targets.append(cfg.t_end)
    steps = 0
    for target in targets:
        while t < target - 1e-13:
            dt = cfg.safety * kern.max_dt(v)
            if cfg.speed != 0:
                dt = min(dt, cfg.grid.hy / abs(cfg.speed))
            if t + dt > target:
                dt = target - t
            v = kern.advance(v, dt)
            t += dt
            steps += 1
            if cfg.guard:
                _check_guard(v, threshold, cfg.grid.hy, cfg.grid.y_min)
            if steps > cfg.max_steps:
                raise StabilityError(f"step budget {cfg.max_steps} exhausted at t={t:g}")
        t = target
        emit(v, t)
    rec.steps = steps
    rec.clamped = kern.clamped
    rec.wall_time = _time.perf_counter() - start
    if kern.clamped:
        log.info("run clamped %d tiny negative values in total", kern.clamped)
    if out is not None:
        try:
            (out / "run.json").write_text(json.dumps(rec.manifest(), indent=2, sort_keys=True))
        except OSError as exc:
            raise ArtifactIOError(f"failed to write run manifest in {out}: {exc}") from exc
    return rec
