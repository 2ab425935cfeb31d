import math

import numpy as np
import pytest

from kaleflow import KernelSpec, ParticleCloud, kale_divergence
from kaleflow.cli import main
from kaleflow.io import (
    ConfigError,
    format_run_config,
    parse_run_config,
    read_cloud_csv,
    read_trace_columns,
    write_cloud_csv,
)


def write_points(path, pts, weights=None):
    write_cloud_csv(path, ParticleCloud(np.asarray(pts, dtype=float), weights))


BASE_CONFIG = """
scenario = gaussian_pair
n = 12
sigma = 0.6
lambda = 0.5
gamma = auto
steps = 3
seed = 7
snapshot_every = 2
output_dir = {out}
"""


class TestConfigParsing:
    def test_round_trip_identity(self):
        cfg = parse_run_config(BASE_CONFIG.format(out="/tmp/x"))
        assert parse_run_config(format_run_config(cfg)) == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key 'stepz'"):
            parse_run_config("stepz = 3\nsigma = 1\nlambda = 1\nsteps = 1\noutput_dir = o")

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="missing required key 'sigma'"):
            parse_run_config("lambda = 1\nsteps = 1\noutput_dir = o\nscenario = three_rings\nn = 5")

    def test_field_level_messages(self):
        base = BASE_CONFIG.format(out="/tmp/x")
        with pytest.raises(ConfigError, match="'lambda'"):
            parse_run_config(base.replace("lambda = 0.5", "lambda = -1"))
        with pytest.raises(ConfigError, match="'reference'"):
            parse_run_config(base + "reference = spam\n")
        with pytest.raises(ConfigError, match="ula"):
            parse_run_config(base + "reference = ula\n")  # needs mog_4corners

    def test_csv_pair_mode(self, tmp_path):
        text = (
            f"source_csv = {tmp_path}/s.csv\ntarget_csv = {tmp_path}/t.csv\n"
            "sigma = 1\nlambda = 1\nsteps = 1\noutput_dir = o"
        )
        cfg = parse_run_config(text)
        assert cfg.scenario is None
        assert parse_run_config(format_run_config(cfg)) == cfg


class TestDivergenceCommand:
    def test_identical_files(self, tmp_path, capsys):
        pts = np.random.default_rng(0).normal(size=(10, 2))
        write_points(tmp_path / "a.csv", pts)
        write_points(tmp_path / "b.csv", pts)
        rc = main(["divergence", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"),
                   "--sigma", "0.5", "--lambda", "1.0"])
        out = dict(line.split("=") for line in capsys.readouterr().out.splitlines())
        assert rc == 0
        assert float(out["kale"]) <= 1e-10
        assert float(out["mmd2"]) <= 1e-12

    def test_two_singletons_closed_form(self, tmp_path, capsys):
        r, sigma = 0.8, 0.5
        write_points(tmp_path / "a.csv", [[0.0, 0.0]])
        write_points(tmp_path / "b.csv", [[r, 0.0]])
        rc = main(["divergence", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"),
                   "--sigma", str(sigma), "--lambda", "1.0"])
        out = dict(line.split("=") for line in capsys.readouterr().out.splitlines())
        assert rc == 0
        expected = 2.0 - 2.0 * math.exp(-(r**2) / (2 * sigma**2))
        assert float(out["mmd2"]) == pytest.approx(expected, rel=1e-12)

    def test_matches_library_bit_for_bit(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        src, tgt = rng.normal(size=(8, 2)), rng.normal(size=(9, 2)) + 0.4
        write_points(tmp_path / "s.csv", src)
        write_points(tmp_path / "t.csv", tgt)
        rc = main(["divergence", str(tmp_path / "s.csv"), str(tmp_path / "t.csv"),
                   "--sigma", "0.7", "--lambda", "0.3"])
        out = dict(line.split("=") for line in capsys.readouterr().out.splitlines())
        # CSV round-trips at 17 significant digits, so values match exactly
        val, _, _ = kale_divergence(
            read_cloud_csv(tmp_path / "s.csv"), read_cloud_csv(tmp_path / "t.csv"),
            KernelSpec(0.7), 0.3,
        )
        assert rc == 0
        assert float(out["kale"]) == val

    def test_malformed_csv_names_file_and_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("x0,x1\n1.0,2.0\n1.0,oops\n")
        write_points(tmp_path / "t.csv", [[0.0, 0.0]])
        rc = main(["divergence", str(bad), str(tmp_path / "t.csv"),
                   "--sigma", "1", "--lambda", "1"])
        err = capsys.readouterr().err
        assert rc == 3
        assert "bad.csv" in err and "line 3" in err


class TestFlowCommand:
    def run_flow(self, tmp_path, extra="", name="run"):
        out_dir = tmp_path / name
        cfg = tmp_path / f"{name}.cfg"
        cfg.write_text(BASE_CONFIG.format(out=out_dir) + extra)
        rc = main(["flow", str(cfg)])
        return rc, out_dir

    def test_outputs_and_schema(self, tmp_path):
        rc, out_dir = self.run_flow(tmp_path)
        assert rc == 0
        cols = read_trace_columns(out_dir / "trace.csv")
        assert list(cols) == ["step", "kale", "mmd2", "witness_norm2",
                              "mean_sq_velocity", "solver_iters", "beta", "w2_to_reference"]
        assert len(cols["step"]) == 4
        assert all(v is None for v in cols["w2_to_reference"])
        assert {p.name for p in out_dir.glob("particles_*.csv")} == {
            "particles_0.csv", "particles_2.csv", "particles_3.csv"}
        assert (out_dir / "target.csv").exists()
        echoed = parse_run_config((out_dir / "config_echo.txt").read_text())
        assert echoed.steps == 3 and echoed.scenario == "gaussian_pair"

    def test_zero_steps_single_row(self, tmp_path):
        out_dir = tmp_path / "zero"
        cfg = tmp_path / "zero.cfg"
        cfg.write_text(BASE_CONFIG.format(out=out_dir).replace("steps = 3", "steps = 0"))
        assert main(["flow", str(cfg)]) == 0
        assert len(read_trace_columns(out_dir / "trace.csv")["step"]) == 1

    def test_rerun_byte_identical(self, tmp_path):
        _, dir_a = self.run_flow(tmp_path, name="a")
        _, dir_b = self.run_flow(tmp_path, name="b")
        assert (dir_a / "trace.csv").read_bytes() == (dir_b / "trace.csv").read_bytes()

    def test_config_error_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("nonsense = 1\n")
        assert main(["flow", str(cfg)]) == 2

    def test_missing_config_exit_code(self, tmp_path):
        assert main(["flow", str(tmp_path / "nope.cfg")]) == 3

    def test_mmd_reference_fills_w2(self, tmp_path):
        rc, out_dir = self.run_flow(tmp_path, extra="reference = mmd\n", name="ref")
        assert rc == 0
        w2 = read_trace_columns(out_dir / "trace.csv")["w2_to_reference"]
        assert all(v is not None for v in w2)
        assert w2[0] == 0.0  # identical initial clouds


class TestCompareCommand:
    def test_run_against_itself_is_zero(self, tmp_path, capsys):
        out_dir = tmp_path / "run"
        cfg = tmp_path / "run.cfg"
        cfg.write_text(BASE_CONFIG.format(out=out_dir))
        assert main(["flow", str(cfg)]) == 0
        out_csv = tmp_path / "cmp.csv"
        assert main(["compare", str(out_dir), str(out_dir), "--out", str(out_csv)]) == 0
        lines = out_csv.read_text().splitlines()
        assert lines[0] == "step,w2"
        assert len(lines) == 4  # snapshots at 0, 2, 3
        assert all(float(line.split(",")[1]) == 0.0 for line in lines[1:])

    def test_schedule_mismatch_rejected(self, tmp_path, capsys):
        for name, every in (("a", 2), ("b", 3)):
            cfg = tmp_path / f"{name}.cfg"
            cfg.write_text(
                BASE_CONFIG.format(out=tmp_path / name).replace(
                    "snapshot_every = 2", f"snapshot_every = {every}")
            )
            assert main(["flow", str(cfg)]) == 0
        rc = main(["compare", str(tmp_path / "a"), str(tmp_path / "b"),
                   "--out", str(tmp_path / "c.csv")])
        assert rc == 2
        assert "schedules differ" in capsys.readouterr().err


class TestScenarioCommand:
    def test_dump_clouds(self, tmp_path):
        rc = main(["scenario", "three_rings", "--n", "30", "--seed", "3",
                   "--out-source", str(tmp_path / "s.csv"),
                   "--out-target", str(tmp_path / "t.csv")])
        assert rc == 0
        src = read_cloud_csv(tmp_path / "s.csv")
        tgt = read_cloud_csv(tmp_path / "t.csv")
        assert src.points.shape == (30, 2) and tgt.points.shape == (30, 2)

    def test_cloud_csv_weight_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        w = rng.dirichlet(np.ones(5))
        write_points(tmp_path / "w.csv", rng.normal(size=(5, 3)), w)
        back = read_cloud_csv(tmp_path / "w.csv")
        assert back.weights is not None
        assert np.array_equal(back.weights, w)
