import json

import numpy as np
import pytest

from pmetube import (
    InadmissibleDatumError,
    InvalidParameterError,
    RunConfig,
    StabilityError,
    TruncationGuardError,
    TubeField,
    TubeGrid,
    admissible_t0,
    cfl_dt,
    from_rescaled,
    reaction_step,
    relax_profile,
    run_evolution,
    shoot_profile,
    step_pme,
    step_rescaled,
    to_rescaled,
)


def barenblatt(y, t, m, C=1.0):
    k = (m - 1) / (2 * m * (m + 1))
    return t ** (-1 / (m + 1)) * np.clip(C - k * y**2 * t ** (-2 / (m + 1)), 0, None) ** (1 / (m - 1))


@pytest.fixture(scope="module")
def small():
    prof = relax_profile(np.pi, 2.0, 17)
    grid = TubeGrid.build(np.pi, 17, -6, 6, 61)
    y = grid.y
    v0 = 0.5 * np.outer(prof.phi, np.clip(1 - (y / 1.5) ** 2, 0, None))
    return prof, grid, v0


class TestCFL:
    def test_zero_field_fallback(self):
        g = TubeGrid.build(1.0, 11, -1, 1, 21)
        dt = cfl_dt(TubeField(g, np.zeros(g.shape), 0.0, 2.0, "u"))
        assert np.isfinite(dt) and dt > 0

    def test_amplitude_doubling_halves(self):
        g = TubeGrid.build(1.0, 11, -1, 1, 21)
        a = np.outer(np.sin(np.pi * g.z), np.ones(g.ny))
        d1 = cfl_dt(TubeField(g, a, 0.0, 2.0, "u"))
        d2 = cfl_dt(TubeField(g, 2 * a, 0.0, 2.0, "u"))
        assert d2 == pytest.approx(d1 / 2, rel=1e-12)

    def test_refinement_quarters(self):
        g1 = TubeGrid.build(1.0, 11, -1, 1, 21)
        g2 = TubeGrid.build(1.0, 21, -1, 1, 41)
        d1 = cfl_dt(TubeField(g1, np.ones(g1.shape), 0.0, 2.0, "u"))
        d2 = cfl_dt(TubeField(g2, np.ones(g2.shape), 0.0, 2.0, "u"))
        assert d2 == pytest.approx(d1 / 4, rel=1e-12)

    def test_rescaled_bound_includes_reaction_and_advection(self):
        g = TubeGrid.build(1.0, 11, -1, 1, 21)
        u = TubeField(g, np.ones(g.shape), 0.0, 2.0, "u")
        v = TubeField(g, np.ones(g.shape), 0.0, 2.0, "v")
        w = TubeField(g, np.ones(g.shape), 0.0, 2.0, "v", speed=1.0)
        assert cfl_dt(w) < cfl_dt(v) < cfl_dt(u)

    def test_bad_safety(self):
        g = TubeGrid.build(1.0, 11, -1, 1, 21)
        with pytest.raises(InvalidParameterError):
            cfl_dt(TubeField(g, np.ones(g.shape), 0.0, 2.0, "u"), safety=0.0)


class TestSteppers:
    def test_zero_is_fixed(self):
        g = TubeGrid.build(1.0, 9, -1, 1, 9)
        for var, step in (("u", step_pme), ("v", step_rescaled)):
            f = TubeField(g, np.zeros(g.shape), 0.0, 2.0, var)
            out = step(f, 1e-3)
            assert np.all(out.values == 0) and out.time == pytest.approx(1e-3)

    def test_mass_nonincreasing(self, small):
        prof, g, v0 = small
        f = TubeField(g, v0, 0.0, 2.0, "u")
        mass = [f.values.sum()]
        for _ in range(200):
            f = step_pme(f, 0.9 * cfl_dt(f))
            mass.append(f.values.sum())
            assert np.all(f.values >= 0)
            assert np.all(f.values[0] == 0) and np.all(f.values[-1] == 0)
        assert np.all(np.diff(mass) <= 1e-14)

    def test_cfl_violation(self, small):
        prof, g, v0 = small
        f = TubeField(g, v0, 0.0, 2.0, "u")
        with pytest.raises(StabilityError):
            step_pme(f, 3 * cfl_dt(f))

    def test_variable_mismatch(self, small):
        prof, g, v0 = small
        with pytest.raises(InvalidParameterError):
            step_pme(TubeField(g, v0, 0.0, 2.0, "v"), 1e-4)
        with pytest.raises(InvalidParameterError):
            step_rescaled(TubeField(g, v0, 0.0, 2.0, "u"), 1e-4)

    def test_stationary_profile_is_fixed(self):
        # Phi extended in y with held ends: the discrete Phi is an exact fixed
        # point of the unsplit scheme; the shooting Phi moves by O(h^2).
        prof = relax_profile(np.pi, 2.0, 33)
        g = TubeGrid.build(np.pi, 33, -1, 1, 11)
        f = TubeField(g, np.outer(prof.phi, np.ones(g.ny)), 0.0, 2.0, "v")
        dt = 0.9 * cfl_dt(f)
        out = step_rescaled(f, dt, y_ends="hold")
        assert np.max(np.abs(out.values - f.values)) / dt <= 1e-8
        shots = []
        for n in (33, 65):
            ps = shoot_profile(np.pi, 2.0, n)
            g = TubeGrid.build(np.pi, n, -1, 1, 11)
            f = TubeField(g, np.outer(ps.phi, np.ones(g.ny)), 0.0, 2.0, "v")
            dt = 0.9 * cfl_dt(f)
            out = step_rescaled(f, dt, y_ends="hold")
            k = n // 10
            shots.append(np.max(np.abs(out.values - f.values)[k:-k]) / dt)
        assert shots[0] / shots[1] == pytest.approx(4.0, rel=0.1)

    def test_lie_scheme_near_fixed_point(self):
        prof = relax_profile(np.pi, 2.0, 33)
        g = TubeGrid.build(np.pi, 33, -1, 1, 11)
        f = TubeField(g, np.outer(prof.phi, np.ones(g.ny)), 0.0, 2.0, "v")
        dt = 0.5 * cfl_dt(f)
        out = step_rescaled(f, dt, scheme="lie", y_ends="hold")
        # splitting defect is second order in dt per step
        assert np.max(np.abs(out.values - f.values)) <= 2 * dt**2 * prof.sup_phi

    def test_reaction_step(self):
        assert reaction_step(np.array(0.5), np.log(2.0), 2.0) == pytest.approx(1.0, rel=1e-15)

    def test_comoving_advection_cfl(self, small):
        prof, g, v0 = small
        f = TubeField(g, v0, 0.0, 2.0, "v", speed=100.0)
        with pytest.raises(StabilityError):
            step_rescaled(f, 2 * g.hy / 100.0)


class TestRescaling:
    def test_zero(self):
        g = TubeGrid.build(1.0, 5, -1, 1, 5)
        v = to_rescaled(TubeField(g, np.zeros(g.shape), 0.0, 2.0, "u"))
        assert np.all(v.values == 0)

    def test_unit_factor(self):
        g = TubeGrid.build(1.0, 5, -1, 1, 5)
        u = TubeField(g, np.full(g.shape, 0.3), 0.0, 2.0, "u", t0=1.0)
        v = to_rescaled(u)
        assert v.time == 0.0 and np.array_equal(v.values, u.values)

    def test_substitution(self):
        g = TubeGrid.build(1.0, 5, -1, 1, 5)
        v = to_rescaled(TubeField(g, np.full(g.shape, 0.3), 3.0, 2.0, "u"), t0=1.0)
        assert v.time == pytest.approx(np.log(4.0))
        assert np.allclose(v.values, 1.2, rtol=1e-14)

    def test_round_trip(self):
        g = TubeGrid.build(1.0, 7, -1, 1, 9)
        rng = np.random.default_rng(0)
        u = TubeField(g, rng.random(g.shape), 2.5, 3.0, "u", t0=0.7)
        back = from_rescaled(to_rescaled(u))
        assert back.time == pytest.approx(2.5, abs=1e-14)
        assert np.max(np.abs(back.values - u.values)) <= 1e-14

    def test_negative_time_origin(self):
        g = TubeGrid.build(1.0, 5, -1, 1, 5)
        with pytest.raises(InvalidParameterError):
            to_rescaled(TubeField(g, np.zeros(g.shape), -2.0, 2.0, "u"), t0=1.0)


class TestAdmissibleT0:
    def test_indicator_datum(self):
        prof = shoot_profile(np.pi, 2.0, 33)
        g = TubeGrid.build(np.pi, 33, -3, 3, 31)
        u0 = 0.5 * np.outer(prof.phi, (np.abs(g.y) <= 1).astype(float))
        t0 = admissible_t0(u0, prof)
        assert t0 >= 1.0
        assert np.all(t0 * u0 <= 0.5 * prof.phi[:, None] + 1e-15)

    def test_homogeneity(self):
        m = 3.0
        prof = shoot_profile(np.pi, m, 33)
        g = TubeGrid.build(np.pi, 33, -3, 3, 31)
        u0 = 0.3 * np.outer(prof.phi, np.clip(1 - g.y**2, 0, None))
        assert admissible_t0(u0 / 2, prof) == pytest.approx(2 ** (m - 1) * admissible_t0(u0, prof))

    def test_boundary_mass_rejected(self):
        prof = shoot_profile(np.pi, 2.0, 33)
        g = TubeGrid.build(np.pi, 33, -3, 3, 31)
        u0 = np.zeros(g.shape)
        u0[0, 10] = 1.0
        with pytest.raises(InadmissibleDatumError):
            admissible_t0(u0, prof)


class TestRunEvolution:
    def test_initial_only(self, small):
        prof, g, v0 = small
        rec = run_evolution(RunConfig(g, 2.0, v0, t_end=0.0))
        assert rec.times == [0.0] and len(rec.snapshots) == 1 and rec.steps == 0

    def test_deterministic_files(self, small, tmp_path):
        prof, g, v0 = small
        cfg = RunConfig(g, 2.0, v0, t_end=0.5, snapshot_every=0.25)
        r1 = run_evolution(cfg, out_dir=tmp_path / "a")
        r2 = run_evolution(cfg, out_dir=tmp_path / "b")
        assert r1.times == [0.0, 0.25, 0.5]
        for p1, p2 in zip(r1.paths, r2.paths):
            assert p1.read_bytes() == p2.read_bytes()
        meta = json.loads(r1.paths[1].with_suffix(".json").read_text())
        assert meta["tau"] == 0.25 and meta["frame"] == "lab" and meta["grid"]["ny"] == 61
        man = json.loads((tmp_path / "a" / "run.json").read_text())
        assert man["times"] == r1.times

    def test_observers_and_ceiling(self, small):
        prof, g, v0 = small
        seen = []
        run_evolution(RunConfig(g, 2.0, v0, t_end=1.0, snapshot_every=0.25),
                      observers=[lambda f: seen.append(float(np.max(f.values - prof.phi[:, None])))])
        assert len(seen) == 5 and max(seen) <= 1e-10

    def test_comparison_principle(self, small):
        prof, g, v0 = small
        hi = TubeField(g, v0, 0.0, 2.0, "v")
        lo = TubeField(g, 0.5 * v0 * (np.abs(g.y) < 1.0), 0.0, 2.0, "v")
        assert np.all(lo.values <= hi.values)
        for _ in range(400):
            dt = 0.9 * min(cfl_dt(hi), cfl_dt(lo))
            hi, lo = step_rescaled(hi, dt), step_rescaled(lo, dt)
            assert np.max(lo.values - hi.values) <= 1e-12

    def test_truncation_guard(self, small):
        prof, g, v0 = small
        narrow = TubeGrid.build(np.pi, 17, -1.7, 1.7, 35)
        y = narrow.y
        v = 0.5 * np.outer(prof.phi, np.clip(1 - (y / 1.5) ** 2, 0, None))
        with pytest.raises(TruncationGuardError):
            run_evolution(RunConfig(narrow, 2.0, v, t_end=3.0))

    def test_bad_datum(self, small):
        prof, g, v0 = small
        with pytest.raises(InvalidParameterError):
            run_evolution(RunConfig(g, 2.0, -v0, t_end=0.1))
        with pytest.raises(InvalidParameterError):
            run_evolution(RunConfig(g, 2.0, v0[:, :10], t_end=0.1))


def test_reference_run_ceiling_and_support(ref_m2):
    # Friendly-giant ceiling and interior support for the reference run.
    prof = ref_m2["profile"]
    rec = ref_m2["run"]
    assert np.all(np.diff(rec.times) > 0)
    worst = max(float(np.max(s - prof.phi[:, None])) for s in rec.snapshots)
    assert worst <= 1e-10
    last = rec.snapshots[-1]
    assert np.all(last[:, :5] == 0) and np.all(last[:, -5:] == 0)


def test_barenblatt_single_level():
    # z-walls freed (reflecting), datum constant in z: a 1-D Barenblatt run.
    m = 2.0
    g = TubeGrid.build(1.0, 5, -6, 6, 241)
    f = TubeField(g, np.tile(barenblatt(g.y, 1.0, m), (5, 1)), 1.0, m, "u")
    while f.time < 2.0 - 1e-14:
        f = step_pme(f, min(0.9 * cfl_dt(f), 2.0 - f.time), z_boundary="neumann")
    exact = barenblatt(g.y, 2.0, m)
    radius = np.sqrt(2 * m * (m + 1) / (m - 1)) * 2.0 ** (1 / (m + 1))
    inner = np.abs(g.y) <= 0.8 * radius
    assert np.max(np.abs(f.values - exact)[:, inner]) <= 5e-5
    assert np.max(np.abs(f.values - exact)) <= 5e-3
    assert np.ptp(f.values, axis=0).max() <= 1e-14
