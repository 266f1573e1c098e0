"""CSV/JSON persistence for profiles, waves, fronts, barrier paths and runs."""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .barriers import BarrierParams, BarrierPath
from .dynamics import RunRecord, TubeField, TubeGrid
from .errors import ArtifactIOError
from .section import SectionGrid, SectionProfile
from .waves import WaveProfile

__all__ = [
    "sha256_file",
    "write_json",
    "read_json",
    "save_profile",
    "load_profile",
    "save_wave",
    "load_wave",
    "save_fronts",
    "save_front_series",
    "save_barrier_path",
    "load_barrier_path",
    "save_error_series",
    "export_field_csv",
    "load_run",
    "field_from_file",
]


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        return _plain(x.item())
    if isinstance(x, Path):
        return str(x)
    if isinstance(x, float) and not np.isfinite(x):
        return None if np.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def write_json(path, obj):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True))
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc
    return path


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc


def _write_csv(path, header, rows):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc
    return path


def _read_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    return rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))


def save_profile(profile, path):
    """``path``.csv with columns z,phi and a JSON sidecar."""
    path = Path(path).with_suffix(".csv")
    _write_csv(path, ["z", "phi"], zip(profile.z, profile.phi))
    meta = {"L": profile.grid.L, "n": profile.grid.n, "m": profile.m, "lambda1": profile.lambda1,
            "cstar": profile.cstar, "method": profile.method,
            "info": {k: v for k, v in profile.info.items() if np.isscalar(v)}}
    write_json(path.with_suffix(".json"), meta)
    return path


def load_profile(path):
    path = Path(path).with_suffix(".csv")
    meta = read_json(path.with_suffix(".json"))
    _, data = _read_csv(path)
    grid = SectionGrid(meta["L"], meta["n"])
    return SectionProfile(grid, data[:, 1], meta["m"], meta["lambda1"], meta["cstar"],
                          meta["method"], meta.get("info", {}))


def save_wave(w, path):
    """Values as .npy plus a JSON sidecar; the window is stored as xi_min/xi_max/n_xi."""
    path = Path(path).with_suffix(".npy")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, np.asarray(w.values))
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc
    g = w.grid
    meta = {"L": g.section.L, "nz": g.section.n, "xi_min": g.y_min, "xi_max": g.y_max, "n_xi": g.ny,
            "m": w.m, "speed": w.speed, "requested": w.requested, "drift": w.drift,
            "normalized": w.normalized, "reflected": w.reflected, "threshold": w.threshold,
            "xi0": w.xi0, "phi_section": w.phi_section}
    write_json(path.with_suffix(".json"), meta)
    return path


def load_wave(path):
    path = Path(path).with_suffix(".npy")
    meta = read_json(path.with_suffix(".json"))
    try:
        values = np.load(path)
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    grid = TubeGrid(SectionGrid(meta["L"], meta["nz"]), meta["xi_min"], meta["xi_max"], meta["n_xi"])
    return WaveProfile(grid, values, meta["m"], meta["speed"], np.array(meta["phi_section"]),
                       normalized=meta["normalized"], reflected=meta["reflected"],
                       requested=meta["requested"], drift=meta["drift"], threshold=meta["threshold"])


def save_fronts(z, gamma, path):
    return _write_csv(path, ["z", "gamma"], zip(z, gamma))


def save_front_series(fronts, z, path):
    rows = ((t, zz, gg) for t, gr in zip(fronts.taus, fronts.gamma) for zz, gg in zip(z, gr))
    return _write_csv(path, ["tau", "z", "gamma"], rows)


def save_barrier_path(path_obj, path):
    path = Path(path).with_suffix(".csv")
    p = path_obj
    _write_csv(path, ["tau", "f", "g", "g_minus_cstar_tau"], zip(p.tau, p.f, p.g, p.shift))
    meta = dict(p.params.as_dict(), predicted_shift=p.predicted_shift, dtau=p.dtau)
    write_json(path.with_suffix(".json"), meta)
    return path


def load_barrier_path(path):
    path = Path(path).with_suffix(".csv")
    meta = read_json(path.with_suffix(".json"))
    _, data = _read_csv(path)
    params = BarrierParams(meta["kind"], meta["m"], meta["cstar"], meta["f0"], meta["g0"], meta["delta0"])
    return BarrierPath(params, data[:, 0], data[:, 1], data[:, 2], meta["predicted_shift"])


def save_error_series(series, path):
    return _write_csv(path, ["tau", "c", "error", "count"], series.rows())


def export_field_csv(field, path):
    """Long-format CSV z,y,value of one snapshot."""
    g = field.grid
    Z, Y = np.meshgrid(g.z, g.y, indexing="ij")
    return _write_csv(path, ["z", "y", "value"], zip(Z.ravel(), Y.ravel(), field.values.ravel()))


def load_run(out_dir):
    """Rebuild a RunRecord from a directory written by run_evolution."""
    out = Path(out_dir)
    man = read_json(out / "run.json")
    cfg = man["config"]
    grid = TubeGrid.from_dict(cfg["grid"])
    rec = RunRecord(cfg, grid=grid, m=cfg["m"], t0=cfg["t0"], variable=cfg["variable"],
                    speed=cfg["speed"])
    for t, p in zip(man["times"], man["snapshots"]):
        p = Path(p)
        if not p.exists():
            p = out / p.name
        try:
            rec.snapshots.append(np.load(p))
        except OSError as exc:
            raise ArtifactIOError(f"cannot read snapshot {p}: {exc}") from exc
        rec.times.append(t)
        rec.paths.append(p)
    rec.steps = man.get("steps", 0)
    rec.wall_time = man.get("wall_time", 0.0)
    rec.clamped = man.get("clamped", 0)
    return rec


def field_from_file(path):
    """A TubeField from a snapshot .npy and its JSON sidecar."""
    path = Path(path)
    meta = read_json(path.with_suffix(".json"))
    var = meta["variable"]
    try:
        values = np.load(path)
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    return TubeField(TubeGrid.from_dict(meta["grid"]), values, meta["tau" if var == "v" else "t"],
                     meta["m"], var, meta["speed"], meta["t0"])
