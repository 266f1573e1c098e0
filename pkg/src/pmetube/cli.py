"""Command-line entry point: ``pmetube {section,evolve,wave,barriers,verify}``.

Every command takes ``--config file.json`` and/or flags (flags win), writes
its artifacts plus ``manifest.json`` (config echo, sha256 of every artifact,
version, timings, PASS/FAIL per check) into ``--out``.

Exit codes: 0 all checks pass, 1 some check failed, 2 invalid configuration,
3 numerical failure, 4 I/O failure.
"""

import argparse
import copy
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .barriers import BarrierParams, integrate_barrier
from .diagnostics import (
    error_series,
    exp_rate_fit,
    front_law_audit,
    front_series,
    outer_vanishing_time,
    search_alignment,
)
from .dynamics import RunConfig, TubeGrid, admissible_t0, run_evolution
from .errors import (
    ArtifactIOError,
    DegenerateExponentError,
    InvalidParameterError,
    PMETubeError,
    TruncationGuardError,
)
from .io import (
    export_field_csv,
    load_run,
    load_wave,
    read_json,
    save_barrier_path,
    save_error_series,
    save_front_series,
    save_fronts,
    save_profile,
    save_wave,
    sha256_file,
    write_json,
)
from .section import (
    analytic_lambda1,
    critical_speed,
    dilate_profile,
    numeric_lambda1,
    relax_profile,
    shoot_profile,
)
from .waves import FRONT_THRESHOLD, measure_speed, normalize_wave, relax_wave

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4

DEFAULTS = {
    "section": {"L": float(np.pi), "m": 2.0, "n": 201, "tol": 1e-10, "dilate": None},
    "evolve": {
        "L": float(np.pi), "m": 2.0, "nz": 64, "ny": 1024, "y_min": -40.0, "y_max": 40.0,
        "t0": 1.0, "initial": {"kind": "bump", "amplitude": 0.5, "width": 0.5, "centers": [0.0]},
        "speed": 0.0, "tau_end": 20.0, "snapshot_every": 0.25, "safety": 0.9, "scheme": "euler",
        "csv": False,
    },
    "wave": {"L": float(np.pi), "m": 2.0, "nz": 64, "c": "auto", "window": [-20.0, 10.0],
             "n_xi": 385, "tol": 1e-7},
    "barriers": {"kind": "super", "m": 2.0, "L": float(np.pi), "cstar": "auto", "f0": 0.5, "g0": 0.0,
                 "delta0": 0.0, "tau_end": 30.0, "dtau": 1e-3, "shift_tol": 1e-3},
    "verify": {
        "run": None, "wave": None, "window": [-20.0, 10.0], "n_xi": 385, "checks": "all",
        "inner_speed": 0.5, "inner_tol": 0.05, "outer_speed": 1.5, "speed_tol": 0.05,
        "fit_window": [10.0, None], "front_T": 5.0, "rate_window": [5.0, None],
        "sub": {"f0": 0.3, "g0": -3.0, "delta0": 0.05}, "super": {"f0": 0.6, "g0": 8.0},
        "T_grid": [float(k) for k in range(13)], "tau0_grid": [0.0], "tau1_grid": [0.0],
    },
}

VERIFY_CHECKS = ("speed", "inner", "sharpness", "outer", "front_law", "ordering", "rate")

DATUM_KINDS = ("bump", "plateau", "two_bump", "csv")


# ---------------------------------------------------------------- config

def validate_config(command, cfg):
    """Merge ``cfg`` over the defaults and check names and ranges."""
    if command not in DEFAULTS:
        raise InvalidParameterError(f"unknown command {command!r}")
    unknown = set(cfg) - set(DEFAULTS[command])
    if unknown:
        raise InvalidParameterError(f"unknown keys for {command}: {sorted(unknown)}")
    out = copy.deepcopy(DEFAULTS[command])
    out.update(copy.deepcopy(cfg))
    m = out.get("m")
    if m is not None and not (isinstance(m, (int, float)) and m > 1):
        raise DegenerateExponentError(f"exponent m must be > 1, got {m}")
    for key in ("L", "tol", "tau_end", "snapshot_every", "safety", "dtau"):
        if key in out and out[key] is not None and not (isinstance(out[key], (int, float)) and out[key] > 0):
            if not (key == "tau_end" and command == "evolve" and out[key] == 0):
                raise InvalidParameterError(f"{key} must be positive, got {out[key]}")
    for key in ("n", "nz", "ny", "n_xi"):
        if key in out and not (isinstance(out[key], int) and out[key] >= 5):
            raise InvalidParameterError(f"{key} must be an integer >= 5, got {out[key]}")
    if command == "section" and out["dilate"] is not None and not out["dilate"] >= 1:
        raise InvalidParameterError("dilate must be >= 1")
    if command == "evolve":
        if not out["y_min"] < out["y_max"]:
            raise InvalidParameterError("need y_min < y_max")
        if out["t0"] != "auto" and not (isinstance(out["t0"], (int, float)) and out["t0"] > 0):
            raise InvalidParameterError("t0 must be positive or 'auto'")
        init = out["initial"]
        if not isinstance(init, dict) or init.get("kind") not in DATUM_KINDS:
            raise InvalidParameterError(f"initial.kind must be one of {DATUM_KINDS}")
        if out["scheme"] not in ("euler", "lie"):
            raise InvalidParameterError("scheme must be 'euler' or 'lie'")
    if command == "wave":
        if out["c"] != "auto" and not (isinstance(out["c"], (int, float)) and out["c"] > 0):
            raise InvalidParameterError("c must be positive or 'auto'")
        if not out["window"][0] < 0 < out["window"][1]:
            raise InvalidParameterError("window must contain 0")
    if command == "barriers":
        BarrierParams(out["kind"], out["m"], 1.0, out["f0"], out["g0"],
                      out["delta0"] if out["kind"] == "sub" else 0.0)
        if out["cstar"] != "auto" and not out["cstar"] > 0:
            raise InvalidParameterError("cstar must be positive or 'auto'")
    if command == "verify":
        if out["run"] is None:
            raise InvalidParameterError("verify needs a run directory (--run)")
        out["run"] = str(out["run"])
        checks = VERIFY_CHECKS if out["checks"] == "all" else out["checks"]
        bad = set(checks) - set(VERIFY_CHECKS)
        if bad:
            raise InvalidParameterError(f"unknown checks {sorted(bad)}")
        if not 0 < out["inner_speed"] < 1 < out["outer_speed"]:
            raise InvalidParameterError("need 0 < inner_speed < 1 < outer_speed (fractions of c*)")
    return out


def config_to_json(cfg):
    return json.dumps(cfg, sort_keys=True)


def config_from_json(text, command):
    return validate_config(command, json.loads(text))


def _parse_value(text):
    try:
        return json.loads(text)
    except ValueError:
        return text


def build_parser():
    p = argparse.ArgumentParser(prog="pmetube", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, defaults in DEFAULTS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON file with parameters")
        sp.add_argument("--out", type=Path, default=Path(f"out_{name}"), help="artifact directory")
        sp.add_argument("-v", "--verbose", action="store_true")
        for key in defaults:
            sp.add_argument(f"--{key.replace('_', '-')}", dest=key, type=_parse_value, default=argparse.SUPPRESS)
        if name == "wave":
            sp.add_argument("--auto-cstar", dest="c", action="store_const", const="auto", default=argparse.SUPPRESS)
        if name == "verify":
            sp.add_argument("--all", dest="checks", action="store_const", const="all", default=argparse.SUPPRESS)
    return p


# ---------------------------------------------------------------- manifest

def write_manifest(out, command, cfg, artifacts, checks, timings, extra=None):
    out = Path(out)
    hashes = {}
    for a in artifacts:
        a = Path(a)
        if not a.exists():
            raise ArtifactIOError(f"artifact {a} missing at manifest time")
        hashes[str(a.relative_to(out) if a.is_relative_to(out) else a)] = sha256_file(a)
    man = {"command": command, "config": cfg, "artifacts": hashes, "version": __version__,
           "timings": timings, "checks": {k: ("PASS" if v else "FAIL") for k, v in checks.items()}}
    if extra:
        man["report"] = extra
    path = write_json(out / "manifest.json", man)
    if not verify_manifest(path):
        raise ArtifactIOError("manifest hashes do not verify after write")
    return man


def verify_manifest(path):
    path = Path(path)
    man = read_json(path)
    for rel, digest in man["artifacts"].items():
        a = Path(rel) if Path(rel).is_absolute() else path.parent / rel
        if not a.exists() or sha256_file(a) != digest:
            return False
    return True


# ---------------------------------------------------------------- data

def initial_datum(datum_cfg, profile, grid):
    """Built-in nonnegative data on the tube grid.

    bump:     a Phi(z) (1 - ((y - y_c)/w)^2)_+ summed over ``centers``
    plateau:  a Phi(z) 1{|y - y_c| <= w}
    two_bump: bumps at +-center (``centers`` = [center])
    csv:      long-format z,y,value file on the same grid (``path``)
    """
    kind = datum_cfg["kind"]
    y = grid.y
    if kind == "csv":
        data = np.loadtxt(datum_cfg["path"], delimiter=",", skiprows=1)
        if data.shape[0] != grid.shape[0] * grid.shape[1]:
            raise InvalidParameterError("CSV datum does not match the grid size")
        return data[:, 2].reshape(grid.shape)
    a = float(datum_cfg.get("amplitude", 0.5))
    w = float(datum_cfg.get("width", 0.5))
    centers = list(datum_cfg.get("centers", [0.0]))
    if kind == "two_bump":
        c = abs(float(centers[0])) if centers else 2.0
        centers = [-c, c]
    if not a > 0 or not w > 0:
        raise InvalidParameterError("amplitude and width must be positive")
    prof = np.zeros_like(y)
    for yc in centers:
        s = (y - float(yc)) / w
        prof += (np.abs(s) <= 1.0).astype(float) if kind == "plateau" else np.clip(1.0 - s * s, 0.0, None)
    return a * np.outer(profile.phi, prof)


def _rel_sup(a, b):
    return float(np.max(np.abs(a[1:-1] - b[1:-1])) / np.max(np.abs(b)))


# ---------------------------------------------------------------- commands

def cmd_section(cfg, out):
    t = time.perf_counter()
    L, m, n, tol = cfg["L"], cfg["m"], cfg["n"], cfg["tol"]
    ps = shoot_profile(L, m, n, tol=tol)
    pr = relax_profile(L, m, n, tol=tol)
    lam_num = numeric_lambda1(pr.grid)
    lam = analytic_lambda1(L)
    err = _rel_sup(pr.phi, ps.phi)
    checks = {"relax_vs_shoot": err <= 1e-3}
    report = {"lambda1": lam, "lambda1_numeric": lam_num, "cstar": critical_speed(m, lam),
              "sup_phi": ps.sup_phi, "relax_vs_shoot": err}
    arts = [save_profile(ps, out / "profile_shoot"), save_profile(pr, out / "profile_relax")]
    arts += [a.with_suffix(".json") for a in list(arts)]
    if cfg["dilate"] is not None:
        lamf = float(cfg["dilate"])
        pd = dilate_profile(pr, lamf)
        direct = relax_profile(lamf * L, m, n, tol=tol)
        derr = _rel_sup(pd.phi, direct.phi)
        checks["dilation"] = derr <= 1e-3
        report["dilation_error"] = derr
        arts.append(save_profile(pd, out / "profile_dilated"))
        arts.append(arts[-1].with_suffix(".json"))
    return arts, checks, report, {"total": time.perf_counter() - t}


def cmd_evolve(cfg, out):
    t = time.perf_counter()
    m = cfg["m"]
    prof = relax_profile(cfg["L"], m, cfg["nz"])
    grid = TubeGrid.build(cfg["L"], cfg["nz"], cfg["y_min"], cfg["y_max"], cfg["ny"])
    u0 = initial_datum(cfg["initial"], prof, grid)
    t0 = admissible_t0(u0, prof) if cfg["t0"] == "auto" else float(cfg["t0"])
    v0 = t0 ** (1.0 / (m - 1.0)) * u0
    tau_start = float(np.log(t0))
    rc = RunConfig(grid, m, v0, t_end=tau_start + cfg["tau_end"], t_start=tau_start, t0=t0,
                   speed=cfg["speed"], snapshot_every=cfg["snapshot_every"], safety=cfg["safety"],
                   scheme=cfg["scheme"], support_threshold=1e-10 * prof.sup_phi)
    rec = run_evolution(rc, out_dir=out / "run")
    fs = front_series(rec, FRONT_THRESHOLD * prof.sup_phi)
    arts = list(rec.paths) + [p.with_suffix(".json") for p in rec.paths] + [out / "run" / "run.json"]
    arts.append(save_front_series(fs, grid.z[1:-1], out / "fronts.csv"))
    arts.append(save_profile(prof, out / "profile"))
    arts.append(arts[-1].with_suffix(".json"))
    if cfg["csv"]:
        for k, f in enumerate(rec.fields()):
            arts.append(export_field_csv(f, out / "csv" / f"snap_{k:05d}.csv"))
    report = {"t0": t0, "steps": rec.steps, "snapshots": len(rec.times), "clamped": rec.clamped,
              "final_front_max": float(fs.row_max[-1]) if fs.taus.size else None}
    return arts, {"completed": True}, report, {"total": time.perf_counter() - t, "run": rec.wall_time}


def wave_checks(w, profile):
    h = w.h
    return {
        "monotone": w.monotonicity_defect() <= 1e-10,
        "plateau": w.plateau_defect() <= 0.01,
        "compact_support": w.support_defect() <= w.threshold,
        "normalized": abs(w.xi0) <= h,
    }


def cmd_wave(cfg, out):
    t = time.perf_counter()
    prof = relax_profile(cfg["L"], cfg["m"], cfg["nz"])
    c = prof.cstar if cfg["c"] == "auto" else float(cfg["c"])
    w = normalize_wave(relax_wave(prof, c, window=tuple(cfg["window"]), n_xi=cfg["n_xi"], tol=cfg["tol"]))
    checks = wave_checks(w, prof)
    arts = [save_wave(w, out / "wave")]
    arts.append(arts[0].with_suffix(".json"))
    arts.append(save_fronts(w.grid.z[1:-1], w.front, out / "wave_front.csv"))
    report = {"c": c, "frame_speed": w.speed, "drift": w.drift, "xi0": w.xi0,
              "monotonicity_defect": w.monotonicity_defect(), "plateau_defect": w.plateau_defect(),
              "pseudo_time": w.info.get("pseudo_time")}
    return arts, checks, report, {"total": time.perf_counter() - t}


def cmd_barriers(cfg, out):
    t = time.perf_counter()
    m = cfg["m"]
    cs = critical_speed(m, analytic_lambda1(cfg["L"])) if cfg["cstar"] == "auto" else float(cfg["cstar"])
    params = BarrierParams(cfg["kind"], m, cs, cfg["f0"], cfg["g0"],
                           cfg["delta0"] if cfg["kind"] == "sub" else 0.0)
    path = integrate_barrier(params, cfg["tau_end"], cfg["dtau"])
    tail = float(path.shift[-1])
    err = abs(tail - path.predicted_shift)
    arts = [save_barrier_path(path, out / f"barrier_{cfg['kind']}")]
    arts.append(arts[0].with_suffix(".json"))
    report = {"cstar": cs, "tail_shift": tail, "predicted_shift": path.predicted_shift, "shift_error": err}
    return arts, {"shift": err <= cfg["shift_tol"]}, report, {"total": time.perf_counter() - t}


def cmd_verify(cfg, out):
    t = time.perf_counter()
    rec = load_run(cfg["run"])
    m = rec.m
    g = rec.grid
    prof = relax_profile(g.section.L, m, g.section.n)
    cs = prof.cstar
    checks_wanted = VERIFY_CHECKS if cfg["checks"] == "all" else tuple(cfg["checks"])
    tau_end = rec.times[-1]
    checks, report, arts = {}, {}, []
    fs = front_series(rec, FRONT_THRESHOLD * prof.sup_phi)
    need_wave = {"front_law", "ordering"} & set(checks_wanted)
    w = None
    if need_wave:
        if cfg["wave"] is not None:
            w = load_wave(cfg["wave"])
        else:
            w = normalize_wave(relax_wave(prof, cs, window=tuple(cfg["window"]), n_xi=cfg["n_xi"]))
    if "speed" in checks_wanted:
        fw = cfg["fit_window"]
        slope, icpt, res = measure_speed(fs, (fw[0], tau_end if fw[1] is None else fw[1]))
        report["speed"] = {"slope": slope, "intercept": icpt, "residual": res, "cstar": cs}
        checks["speed"] = abs(slope - cs) <= cfg["speed_tol"] * cs
    if "inner" in checks_wanted:
        es = error_series(rec, prof, cfg["inner_speed"] * cs)
        arts.append(save_error_series(es, out / "inner_error.csv"))
        viol = es.trend_violations()
        report["inner"] = {"final_error": float(es.errors[-1]), "burn_in": es.burn_in(), "trend_violations": viol}
        checks["inner"] = bool(es.errors[-1] <= cfg["inner_tol"] and viol == [])
    if "sharpness" in checks_wanted:
        es = error_series(rec, prof, cs)
        late = es.errors[es.taus >= 0.5 * tau_end]
        report["sharpness"] = {"min_late_error": float(np.nanmin(late))}
        checks["sharpness"] = bool(np.nanmin(late) >= 0.5)
    if "outer" in checks_wanted:
        tau_c, vals = outer_vanishing_time(rec, cfg["outer_speed"] * cs)
        report["outer"] = {"tau_c": tau_c}
        checks["outer"] = tau_c is not None
    if "front_law" in checks_wanted:
        a = front_law_audit(fs, cs, w, cfg["front_T"])
        report["front_law"] = {k: v for k, v in a.items() if k != "per_tau"}
        checks["front_law"] = (not a["inconclusive"]) and a["ratio_rel_error"] <= 0.05 and a["non_drifting"]
        arts.append(save_front_series(fs, g.z[1:-1], out / "fronts.csv"))
    if "ordering" in checks_wanted:
        horizon = tau_end + 1.0
        sub = integrate_barrier(BarrierParams("sub", m, cs, cfg["sub"]["f0"], cfg["sub"]["g0"],
                                              cfg["sub"]["delta0"]), horizon, 1e-2 * (m - 1))
        sup = integrate_barrier(BarrierParams("super", m, cs, cfg["super"]["f0"], cfg["super"]["g0"]),
                                horizon, 1e-2 * (m - 1))
        r, tried = search_alignment(rec, sub, sup, w, cfg["T_grid"], cfg["tau0_grid"], cfg["tau1_grid"])
        report["ordering"] = r.as_dict()
        checks["ordering"] = r.passed
    if "rate" in checks_wanted:
        rw = cfg["rate_window"]
        fit = exp_rate_fit(rec, prof, g.section.n // 2, (rw[0], tau_end if rw[1] is None else rw[1]))
        report["rate"] = fit.as_dict()
        checks["rate"] = fit.slope < 0 and fit.r2 >= 0.99
    return arts, checks, report, {"total": time.perf_counter() - t}


COMMANDS = {"section": cmd_section, "evolve": cmd_evolve, "wave": cmd_wave,
            "barriers": cmd_barriers, "verify": cmd_verify}


def run(command, cfg, out):
    """Validate, execute and write the manifest; returns (exit_code, manifest)."""
    cfg = validate_config(command, cfg)
    out = Path(out)
    arts, checks, report, timings = COMMANDS[command](cfg, out)
    man = write_manifest(out, command, cfg, arts, checks, timings, report)
    return (EXIT_OK if all(checks.values()) else EXIT_FAIL), man


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    ns = vars(args)
    command = ns.pop("command")
    out = ns.pop("out")
    cfg_path = ns.pop("config")
    ns.pop("verbose")
    try:
        cfg = read_json(cfg_path) if cfg_path is not None else {}
        if not isinstance(cfg, dict):
            raise InvalidParameterError("config file must hold a JSON object")
        cfg.update(ns)
        code, man = run(command, cfg, out)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactIOError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PMETubeError as exc:
        hint = " (increase the y extent)" if isinstance(exc, TruncationGuardError) else ""
        print(f"numerical failure: {exc}{hint}", file=sys.stderr)
        return EXIT_NUMERIC
    for name, status in man["checks"].items():
        print(f"{status} {command}.{name}")
    return code


if __name__ == "__main__":
    sys.exit(main())
