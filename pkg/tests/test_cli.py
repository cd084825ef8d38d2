import json
from pathlib import Path

import pytest

from a2gcomp.cli import (
    EXIT_CHECK_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    EXPERIMENTS,
    ExperimentConfig,
    UsageError,
    main,
    parse_config_file,
)


def run_cli(*argv):
    return main(list(argv))


class TestUsage:
    def test_unknown_experiment_exits_2(self, tmp_path):
        assert run_cli("run", "fig99", "--out", str(tmp_path)) == EXIT_USAGE

    def test_zero_intensity_exits_2(self, tmp_path):
        code = run_cli(
            "run", "custom", "--set", "lambda0_per_km2=0", "--out", str(tmp_path)
        )
        assert code == EXIT_USAGE

    def test_out_of_range_needs_force(self, tmp_path):
        code = run_cli(
            "run", "fig8", "--set", "v_kmh_list=25,120", "--out", str(tmp_path)
        )
        assert code == EXIT_USAGE

    def test_unknown_parameter_rejected(self):
        with pytest.raises(UsageError):
            ExperimentConfig(experiment="fig8", params={"bogus_key": "1"})

    def test_bad_set_syntax(self, tmp_path):
        assert run_cli("run", "fig8", "--set", "oops", "--out", str(tmp_path)) == EXIT_USAGE

    def test_list_command(self, capsys):
        assert run_cli("list") == EXIT_OK
        out = capsys.readouterr().out
        assert "fig8" in out and "custom" in out


class TestFig8:
    def test_identity_run(self, tmp_path):
        code = run_cli(
            "run", "fig8", "--set", "t_s_list=0,10,20", "--out", str(tmp_path)
        )
        assert code == EXIT_OK
        csvs = sorted(tmp_path.glob("handoff_same_speed_*.csv"))
        assert len(csvs) == 4  # one per (density, speed) curve
        header, *rows = csvs[0].read_text().splitlines()
        assert header == "t_s,p_same_speed,p_single_tier,absdiff"
        assert len(rows) == 3
        assert all(float(r.split(",")[3]) < 1e-6 for r in rows)
        report = (tmp_path / "report.txt").read_text()
        assert report.startswith("PASS")
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["experiment"] == "fig8"
        assert manifest["params"]["t_s_list"] == [0.0, 10.0, 20.0]


class TestReproducibility:
    ARGS = (
        "run", "custom", "--set", "metric=coverage",
        "--set", "gamma_db_min=-5", "--set", "gamma_db_max=5",
        "--set", "gamma_db_step=5", "--trials", "300", "--seed", "9",
    )

    def test_same_manifest_means_identical_csv(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(*self.ARGS, "--out", str(a)) == EXIT_OK
        assert run_cli(*self.ARGS, "--out", str(b)) == EXIT_OK
        assert (a / "custom_coverage.csv").read_bytes() == (
            b / "custom_coverage.csv"
        ).read_bytes()
        assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()

    def test_thread_count_does_not_change_output(self, tmp_path):
        a, b = tmp_path / "t1", tmp_path / "t4"
        assert run_cli(*self.ARGS, "--threads", "1", "--out", str(a)) == EXIT_OK
        assert run_cli(*self.ARGS, "--threads", "4", "--out", str(b)) == EXIT_OK
        assert (a / "custom_coverage.csv").read_bytes() == (
            b / "custom_coverage.csv"
        ).read_bytes()


class TestConfigFile:
    def test_file_plus_set_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# comment line\n"
            "metric = coverage\n"
            "lambda0_per_km2 = 10\n"
            "gamma_db_min = -5\ngamma_db_max = 5\ngamma_db_step = 5\n"
        )
        out = tmp_path / "out"
        code = run_cli(
            "run", "custom", "--config", str(cfg),
            "--set", "lambda0_per_km2=20", "--trials", "50", "--out", str(out),
        )
        assert code == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["params"]["lambda0_per_km2"] == 20.0

    def test_malformed_line_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("just words\n")
        with pytest.raises(UsageError):
            parse_config_file(cfg)


class TestCsvFormat:
    def test_headers_lf_and_decimal_points(self, tmp_path):
        run_cli(
            "run", "custom", "--set", "metric=spectral_efficiency",
            "--trials", "60", "--out", str(tmp_path),
        )
        raw = (tmp_path / "custom_se.csv").read_bytes()
        assert b"\r" not in raw
        text = raw.decode()
        lines = text.splitlines()
        assert lines[0] == "se_mean,se_ci95"
        assert "." in lines[1]


def test_every_experiment_has_description_and_defaults():
    for name, exp in EXPERIMENTS.items():
        assert exp.description
        assert isinstance(exp.defaults, dict)


def test_numeric_failure_exits_3(tmp_path, monkeypatch):
    from a2gcomp.analytic import NumericError
    from a2gcomp.cli import EXIT_NUMERIC, Experiment

    def boom(cfg):
        raise NumericError("synthetic quadrature failure")

    monkeypatch.setitem(
        EXPERIMENTS, "fig8", Experiment(boom, "boom", EXPERIMENTS["fig8"].defaults)
    )
    assert run_cli("run", "fig8", "--out", str(tmp_path)) == EXIT_NUMERIC
