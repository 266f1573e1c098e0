import json

import numpy as np
import pytest

from pmetube import BarrierParams, InvalidParameterError, integrate_barrier, relax_profile
from pmetube.cli import (
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_IO,
    EXIT_NUMERIC,
    EXIT_OK,
    config_from_json,
    config_to_json,
    main,
    validate_config,
    verify_manifest,
)
from pmetube.io import (
    load_barrier_path,
    load_profile,
    load_run,
    load_wave,
    read_json,
    save_barrier_path,
    save_profile,
    save_wave,
    write_json,
)

SMALL_EVOLVE = ["--nz", "17", "--ny", "121", "--y-min", "-12", "--y-max", "12", "--tau-end", "1.0",
                "--snapshot-every", "0.5"]


class TestRoundTrips:
    def test_profile(self, tmp_path):
        p = relax_profile(np.pi, 3.0, 41)
        q = load_profile(save_profile(p, tmp_path / "prof"))
        assert np.array_equal(p.phi, q.phi) and q.m == 3.0 and q.cstar == p.cstar

    def test_wave(self, tmp_path, wave_m2):
        w = load_wave(save_wave(wave_m2, tmp_path / "w"))
        assert np.array_equal(w.values, wave_m2.values)
        assert w.xi_min == wave_m2.xi_min and w.normalized and w.speed == wave_m2.speed
        assert np.array_equal(w.front, wave_m2.front)

    def test_barrier_path(self, tmp_path):
        path = integrate_barrier(BarrierParams("sub", 2.0, 1.0, 0.3, -1.0, 0.05), 2.0, 1e-2)
        back = load_barrier_path(save_barrier_path(path, tmp_path / "b"))
        assert np.array_equal(back.f, path.f) and np.array_equal(back.g, path.g)
        assert back.params == path.params

    def test_json_nonfinite(self, tmp_path):
        write_json(tmp_path / "x.json", {"a": np.float64(np.nan), "b": np.arange(3), "c": np.inf})
        assert read_json(tmp_path / "x.json") == {"a": None, "b": [0, 1, 2], "c": "inf"}


class TestConfig:
    def test_defaults_and_round_trip(self):
        cfg = validate_config("section", {"m": 3.0})
        assert cfg["n"] == 201 and cfg["m"] == 3.0
        assert config_from_json(config_to_json(cfg), "section") == cfg

    @pytest.mark.parametrize("command, cfg", [("section", {"bogus": 1}), ("section", {"n": 3}),
                                              ("section", {"dilate": 0.5}), ("evolve", {"scheme": "rk"}),
                                              ("wave", {"window": [1.0, 2.0]}), ("verify", {}),
                                              ("barriers", {"f0": 1.5})])
    def test_rejects(self, command, cfg):
        with pytest.raises(InvalidParameterError):
            validate_config(command, cfg)


class TestCommands:
    def test_section_with_dilation(self, tmp_path, capsys):
        out = tmp_path / "sec"
        assert main(["section", "--n", "101", "--dilate", "2", "--out", str(out)]) == EXIT_OK
        man = read_json(out / "manifest.json")
        assert man["checks"] == {"relax_vs_shoot": "PASS", "dilation": "PASS"}
        assert man["report"]["lambda1"] == pytest.approx(1.0)
        assert verify_manifest(out / "manifest.json")
        assert "PASS section.dilation" in capsys.readouterr().out

    def test_manifest_detects_tampering(self, tmp_path):
        out = tmp_path / "sec"
        main(["section", "--n", "51", "--out", str(out)])
        with open(out / "profile_shoot.csv", "a") as fh:
            fh.write("0,0\n")
        assert not verify_manifest(out / "manifest.json")

    def test_barriers_super_shift(self, tmp_path):
        out = tmp_path / "bar"
        assert main(["barriers", "--out", str(out)]) == EXIT_OK
        rep = read_json(out / "manifest.json")["report"]
        assert rep["predicted_shift"] == pytest.approx(np.log(0.5))
        assert rep["shift_error"] <= 1e-3

    def test_config_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"kind": "super", "f0": 0.25, "tau_end": 5.0, "dtau": 0.01}))
        out = tmp_path / "bar"
        code = main(["barriers", "--config", str(cfg), "--f0", "0.5", "--out", str(out)])
        man = read_json(out / "manifest.json")
        assert man["config"]["f0"] == 0.5 and man["config"]["tau_end"] == 5.0
        # at tau = 5 the shift is still ln(1 + e^-5) ~ 6.7e-3 away from its limit
        assert code == EXIT_FAIL and man["checks"]["shift"] == "FAIL"

    def test_evolve_and_reload(self, tmp_path):
        out = tmp_path / "ev"
        assert main(["evolve", *SMALL_EVOLVE, "--out", str(out)]) == EXIT_OK
        rec = load_run(out / "run")
        assert rec.times == pytest.approx([0.0, 0.5, 1.0])
        assert verify_manifest(out / "manifest.json")
        assert (out / "fronts.csv").exists()

    def test_evolve_zero_duration(self, tmp_path):
        out = tmp_path / "ev0"
        args = [a if a != "1.0" else "0" for a in SMALL_EVOLVE]
        assert main(["evolve", *args, "--out", str(out)]) == EXIT_OK
        assert len(load_run(out / "run").times) == 1

    def test_exit_codes(self, tmp_path):
        assert main(["section", "--m", "1", "--out", str(tmp_path / "a")]) == EXIT_CONFIG
        assert main(["section", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "b")]) == EXIT_IO
        # support reaches the truncation guard on a tiny y extent
        code = main(["evolve", "--nz", "17", "--ny", "41", "--y-min", "-2", "--y-max", "2", "--tau-end", "3",
                     "--out", str(tmp_path / "c")])
        assert code == EXIT_NUMERIC
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["section", "--n", "51", "--out", str(blocker / "sub")]) == EXIT_IO
