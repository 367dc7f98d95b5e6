"""Tests for the command-line interface."""

import csv
import json
import math

import pytest

from racing.cli import EXIT_OK, EXIT_USAGE, build_parser, run
from racing.config import RacingSettings
from tests.conftest import DATA_DIR


@pytest.fixture
def settings(tmp_path) -> RacingSettings:
    return RacingSettings(log_file=None, jobs=1, output_dir=str(tmp_path / "runs"))


def _report_row(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class TestParser:
    """Test argument parsing and usage errors."""

    def test_fit_arguments(self):
        """Test the fit subcommand options."""
        args = build_parser().parse_args(["fit", "points.csv", "--truth", "t.json", "-s", "estimator.c_fixed=20"])
        assert args.points == "points.csv"
        assert args.truth == "t.json"
        assert args.overrides == ["estimator.c_fixed=20"]

    def test_unknown_command(self, settings):
        """Test that an unknown subcommand is a usage error."""
        assert run(["drive"], settings) == EXIT_USAGE

    def test_missing_required_option(self, settings):
        """Test that sample needs its model."""
        assert run(["sample", "--map", "map.csv"], settings) == EXIT_USAGE

    def test_version(self, capsys):
        """Test the version flag."""
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["--version"])
        assert info.value.code == 0
        assert "racing" in capsys.readouterr().out


class TestConfigValidation:
    """Test experiment resolution from files and overrides."""

    def test_dry_run(self, settings):
        """Test that the shipped experiment resolves."""
        code = run(["race", "--config", str(DATA_DIR / "experiment.json"), "--dry-run"], settings)
        assert code == EXIT_OK

    def test_invalid_mode(self, settings):
        """Test that an unknown mode is rejected before any run."""
        assert run(["race", "--dry-run", "-s", "mode=bogus"], settings) == EXIT_USAGE

    def test_unknown_track(self, settings):
        """Test that a misspelled track is a config error, with or without a dry run."""
        assert run(["race", "--dry-run", "-s", "track=nurburgring"], settings) == EXIT_USAGE
        assert run(["race", "-s", "track=nurburgring"], settings) == EXIT_USAGE

    def test_unknown_nested_key(self, settings):
        """Test that a misspelled key inside a section is a config error."""
        assert run(["race", "--dry-run", "-s", "estimator.delta_lamda=0.05"], settings) == EXIT_USAGE

    def test_malformed_override(self, settings):
        """Test that an override needs a value."""
        assert run(["race", "--dry-run", "-s", "mode"], settings) == EXIT_USAGE

    def test_missing_config(self, settings, tmp_path):
        """Test that a missing config file is a usage error."""
        assert run(["race", "--dry-run", "--config", str(tmp_path / "none.json")], settings) == EXIT_USAGE

    def test_invalid_config_json(self, settings, tmp_path):
        """Test that a broken config document is a usage error."""
        path = tmp_path / "bad.json"
        path.write_text('{"mode": }')
        assert run(["race", "--dry-run", "--config", str(path)], settings) == EXIT_USAGE


class TestFit:
    """Test fitting a curvature model from a point file."""

    def test_fit_example(self, settings, tmp_path):
        """Test the shipped example against its true model."""
        out = tmp_path / "fit"
        code = run(["fit", str(DATA_DIR / "points.csv"), "--truth", str(DATA_DIR / "truth_model.json"),
                    "--out", str(out)], settings)
        assert code == EXIT_OK
        for name in ("model.json", "map.csv", "diagnostics.jsonl", "fit_metrics.json", "manifest.json"):
            assert (out / name).exists()
        assert json.loads((out / "fit_metrics.json").read_text())["kappa_mae"] <= 0.05

    def test_malformed_header(self, settings, tmp_path):
        """Test that a point file without x,y columns is rejected."""
        path = tmp_path / "points.csv"
        path.write_text("a,b\n0,0\n1,0\n")
        assert run(["fit", str(path), "--out", str(tmp_path / "out")], settings) == EXIT_USAGE

    def test_empty_file(self, settings, tmp_path):
        """Test that an empty point file is rejected."""
        path = tmp_path / "points.csv"
        path.write_text("")
        assert run(["fit", str(path), "--out", str(tmp_path / "out")], settings) == EXIT_USAGE


class TestSample:
    """Test scenario sampling from fitted artifacts."""

    def test_shortfall_still_succeeds(self, settings, tmp_path, capsys):
        """Test that too few accepted candidates warn and repeat the estimate."""
        fit = tmp_path / "fit"
        assert run(["fit", str(DATA_DIR / "points.csv"), "--out", str(fit)], settings) == EXIT_OK
        out = tmp_path / "sample"
        code = run(["sample", "--model", str(fit / "model.json"), "--map", str(fit / "map.csv"),
                    "--out", str(out), "-s", "sampling.distance_budget=0", "-s", "sampling.n_rep=4"], settings)
        assert code == EXIT_OK
        scenarios = json.loads((out / "scenarios.json").read_text())
        assert scenarios["shortfall"] is True
        assert len(scenarios["models"]) == 5
        assert "Warning" in capsys.readouterr().err
        assert len((out / "acceptance.csv").read_text().splitlines()) == 5


class TestReport:
    """Test aggregation of stored run metrics."""

    def _metrics(self, directory, values):
        for index, value in enumerate(values):
            run_dir = directory / f"seed_{index}"
            run_dir.mkdir(parents=True)
            (run_dir / "metrics.json").write_text(json.dumps({
                "seed": index, "metrics": {"mean_hausdorff": value, "success": value < 0.05, "max_eta": value},
            }))

    def test_mean_and_std(self, settings, tmp_path):
        """Test mean and population std over three runs."""
        runs = tmp_path / "runs"
        self._metrics(runs, [0.01, 0.02, 0.06])
        assert run(["report", str(runs), "--label", "ours", "--track", "trackA-analogue"], settings) == EXIT_OK
        row = _report_row(runs / "report.csv")[0]
        assert row["label"] == "ours"
        assert row["track"] == "trackA-analogue"
        assert int(row["runs"]) == 3
        assert float(row["hausdorff_mean"]) == pytest.approx(0.03)
        assert float(row["hausdorff_std"]) == pytest.approx(math.sqrt(14e-4 / 3.0))
        assert float(row["success_rate"]) == pytest.approx(200.0 / 3.0)

    def test_single_run_has_zero_std(self, settings, tmp_path):
        """Test that one run reports its own value with zero spread."""
        runs = tmp_path / "runs"
        self._metrics(runs, [0.02])
        assert run(["report", str(runs)], settings) == EXIT_OK
        row = _report_row(runs / "report.csv")[0]
        assert row["label"] == "runs"
        assert float(row["hausdorff_mean"]) == pytest.approx(0.02)
        assert float(row["hausdorff_std"]) == 0.0

    def test_empty_directory(self, settings, tmp_path):
        """Test that a directory without metrics is a usage error."""
        (tmp_path / "empty").mkdir()
        assert run(["report", str(tmp_path / "empty")], settings) == EXIT_USAGE
