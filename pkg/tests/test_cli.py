"""
Hydra-CP - Command-Line Tests

End-to-end runs of every subcommand on a two-frame scenario: exit codes,
output files, byte-identical reruns and manifest replay.
"""

import csv
import json
from pathlib import Path

import pytest
import yaml

from hydra_cp.config import settings
from hydra_cp.core.exceptions import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, RoutingError
from hydra_cp.main import main
from hydra_cp.services.experiment_service import ExperimentService

pytestmark = pytest.mark.integration


def read_csv(path: Path):
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def run(scenario: Path, out: Path, *extra: str) -> int:
    return main(["run", "--scenario", str(scenario), "--out", str(out), *extra])


class TestValidate:
    """Test the validate command."""

    def test_prints_resolved_manifest(self, small_scenario_file, capsys):
        assert main(["validate", "--scenario", str(small_scenario_file)]) == EXIT_OK
        document = yaml.safe_load(capsys.readouterr().out)
        assert document["manifest"]["method"] == "hydra"
        assert document["scenario"]["name"] == "small"

    def test_method_override(self, small_scenario_file, capsys):
        argv = ["validate", "--scenario", str(small_scenario_file)]
        assert main([*argv, "--method", "LateOnly"]) == EXIT_OK
        document = yaml.safe_load(capsys.readouterr().out)
        assert document["manifest"]["method"] == "late_only"

    def test_invalid_value(self, small_scenario_file):
        argv = ["validate", "--scenario", str(small_scenario_file)]
        assert main([*argv, "--set", "classifier.tau=2"]) == EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        missing = tmp_path / "nope.yaml"
        assert main(["validate", "--scenario", str(missing)]) == EXIT_CONFIG


class TestRun:
    """Test the run command."""

    def test_writes_reports(self, small_scenario_file, tmp_path):
        out = tmp_path / "out"
        assert run(small_scenario_file, out) == EXIT_OK
        assert {p.name for p in out.iterdir()} == {
            "report.json",
            "report.csv",
            "manifest.echo",
            "timing.csv",
        }
        report = json.loads((out / "report.json").read_text())
        assert report["method"] == "hydra"
        assert report["n_frames"] == 2
        assert set(report["ap"]["total"]) == {"0.3", "0.5", "0.7"}
        rows = read_csv(out / "report.csv")
        assert len(rows) == 4 * 3
        assert [r["class"] for r in rows[-3:]] == ["total"] * 3
        assert len(read_csv(out / "timing.csv")) == 2

    def test_reruns_are_byte_identical(self, small_scenario_file, tmp_path):
        assert run(small_scenario_file, tmp_path / "a") == EXIT_OK
        assert run(small_scenario_file, tmp_path / "b") == EXIT_OK
        for name in ("report.json", "report.csv", "manifest.echo"):
            first = (tmp_path / "a" / name).read_bytes()
            assert first == (tmp_path / "b" / name).read_bytes()

    def test_manifest_echo_replays(self, small_scenario_file, tmp_path):
        first = tmp_path / "first"
        noisy = ["--set", "scenario.pose_noise_sigma=0.3"]
        assert run(small_scenario_file, first, *noisy) == EXIT_OK
        replay = tmp_path / "replay"
        assert run(first / "manifest.echo", replay) == EXIT_OK
        expected = (first / "report.json").read_bytes()
        assert expected == (replay / "report.json").read_bytes()

    def test_parallel_frames_match_serial(self, small_scenario_file, tmp_path):
        assert run(small_scenario_file, tmp_path / "serial", "--jobs", "1") == EXIT_OK
        assert run(small_scenario_file, tmp_path / "parallel", "--jobs", "2") == EXIT_OK
        serial = (tmp_path / "serial" / "report.json").read_bytes()
        assert serial == (tmp_path / "parallel" / "report.json").read_bytes()

    def test_zero_pgo_budget_equals_no_pgo(self, small_scenario_file, tmp_path):
        noisy = ["--set", "scenario.pose_noise_sigma=0.4"]
        off_argv = [*noisy, "--set", "pgo.max_iters=0"]
        assert run(small_scenario_file, tmp_path / "off", *off_argv) == EXIT_OK
        no_pgo_argv = [*noisy, "--method", "hydra_no_pgo"]
        assert run(small_scenario_file, tmp_path / "nopgo", *no_pgo_argv) == EXIT_OK
        off = json.loads((tmp_path / "off" / "report.json").read_text())
        no_pgo = json.loads((tmp_path / "nopgo" / "report.json").read_text())
        assert off["pgo_enabled"] is False
        assert off["ap"] == no_pgo["ap"]

    def test_default_output_root(self, small_scenario_file, tmp_path, mocker):
        mocker.patch.object(settings, "output_root", str(tmp_path / "runs"))
        assert main(["run", "--scenario", str(small_scenario_file)]) == EXIT_OK
        assert (tmp_path / "runs" / "run" / "report.json").is_file()

    def test_config_error_writes_nothing(self, small_scenario_file, tmp_path):
        out = tmp_path / "out"
        bad = ["--set", "scenario.n_frames=-1"]
        assert run(small_scenario_file, out, *bad) == EXIT_CONFIG
        assert not out.exists()

    def test_unknown_method(self, small_scenario_file, tmp_path):
        out = tmp_path / "out"
        assert run(small_scenario_file, out, "--method", "magic") == EXIT_CONFIG

    def test_bad_jobs(self, small_scenario_file, tmp_path):
        assert run(small_scenario_file, tmp_path / "out", "--jobs", "0") == EXIT_CONFIG

    def test_runtime_error_exit_code(self, small_scenario_file, tmp_path, mocker):
        mocker.patch(
            "hydra_cp.commands.run.ExperimentService.run_method",
            side_effect=RoutingError("late data in stage 1"),
        )
        out = tmp_path / "out"
        assert run(small_scenario_file, out) == EXIT_RUNTIME
        assert not out.exists()

    def test_unexpected_error_exit_code(self, small_scenario_file, tmp_path, mocker):
        mocker.patch(
            "hydra_cp.commands.run.ExperimentService.run_method",
            side_effect=RuntimeError("boom"),
        )
        assert run(small_scenario_file, tmp_path / "out") == EXIT_RUNTIME


class TestSweep:
    """Test the sweep command."""

    def sweep(self, scenario: Path, out: Path, *extra: str) -> int:
        return main(
            [
                "sweep",
                "--scenario",
                str(scenario),
                "--out",
                str(out),
                "--key",
                "scenario.pose_noise_sigma",
                *extra,
            ]
        )

    def test_points_and_table(self, small_scenario_file, tmp_path):
        out = tmp_path / "sweep"
        argv = ["--values", "0.0", "0.4", "--method", "hydra", "--method", "late_only"]
        assert self.sweep(small_scenario_file, out, *argv) == EXIT_OK
        for value in ("0.0", "0.4"):
            for method in ("hydra", "late_only"):
                point = out / "points" / value / method
                assert {p.name for p in point.iterdir()} == {
                    "report.json",
                    "report.csv",
                    "manifest.echo",
                }
        rows = read_csv(out / "sweep.csv")
        assert len(rows) == 2 * 2 * 4 * 3
        assert {r["value"] for r in rows} == {"0.0", "0.4"}
        assert (out / "timing.csv").is_file()

    def test_point_replays_through_run(self, small_scenario_file, tmp_path):
        out = tmp_path / "sweep"
        argv = ["--values", "0.4", "--method", "hydra"]
        assert self.sweep(small_scenario_file, out, *argv) == EXIT_OK
        point = out / "points" / "0.4" / "hydra"
        echo = yaml.safe_load((point / "manifest.echo").read_text())
        assert echo["manifest"]["sweep"]["key"] == "scenario.pose_noise_sigma"
        assert echo["scenario"]["seed"] != 3
        replay = tmp_path / "replay"
        assert run(point / "manifest.echo", replay) == EXIT_OK
        expected = (point / "report.json").read_bytes()
        assert expected == (replay / "report.json").read_bytes()

    def test_sweep_is_deterministic(self, small_scenario_file, tmp_path):
        argv = ["--values", "0.2", "--method", "hydra"]
        assert self.sweep(small_scenario_file, tmp_path / "a", *argv) == EXIT_OK
        assert self.sweep(small_scenario_file, tmp_path / "b", *argv) == EXIT_OK
        a = (tmp_path / "a" / "sweep.csv").read_bytes()
        assert a == (tmp_path / "b" / "sweep.csv").read_bytes()

    def test_empty_values(self, small_scenario_file, tmp_path):
        out = tmp_path / "sweep"
        assert self.sweep(small_scenario_file, out) == EXIT_CONFIG
        assert not out.exists()

    def test_invalid_value_fails_before_running(
        self, small_scenario_file, tmp_path, mocker
    ):
        spy = mocker.spy(ExperimentService, "run_method")
        out = tmp_path / "sweep"
        argv = ["--values", "0.1", "-1"]
        assert self.sweep(small_scenario_file, out, *argv) == EXIT_CONFIG
        assert spy.call_count == 0
        assert not out.exists()

    @pytest.mark.slow
    def test_runtime_grows_at_most_linearly_with_agents(
        self, small_scenario_file, tmp_path
    ):
        out = tmp_path / "scale"
        argv = [
            "sweep",
            "--scenario",
            str(small_scenario_file),
            "--out",
            str(out),
            "--key",
            "scenario.agent_count",
            "--values",
            "2",
            "4",
            "8",
            "16",
            "--method",
            "hydra",
        ]
        assert main(argv) == EXIT_OK
        seconds = {}
        for row in read_csv(out / "timing.csv"):
            assert row["agents"] == row["value"]
            seconds.setdefault(int(row["value"]), []).append(float(row["seconds"]))
        mean = {count: sum(s) / len(s) for count, s in seconds.items()}
        assert sorted(mean) == [2, 4, 8, 16]
        for count in (4, 8, 16):
            assert mean[count] <= 3.0 * (count / 2) * mean[2] + 0.25


class TestAblate:
    """Test the ablate command."""

    def test_grid(self, small_scenario_file, tmp_path):
        out = tmp_path / "ablate"
        argv = ["ablate", "--scenario", str(small_scenario_file), "--out", str(out)]
        assert main(argv) == EXIT_OK
        rows = read_csv(out / "ablation.csv")
        assert [(r["classifier"], r["pgo"], r["method"]) for r in rows] == [
            ("0", "0", "intermediate_only"),
            ("0", "1", "hydra_no_classifier"),
            ("1", "0", "hydra_no_pgo"),
            ("1", "1", "hydra"),
        ]
        assert all(r["sigma"] == "0.4" for r in rows)
        assert all(0.0 <= float(r["ap@0.5"]) <= 1.0 for r in rows)


class TestScores:
    """Test the scores command."""

    def test_table(self, small_scenario_file, tmp_path):
        out = tmp_path / "scores"
        argv = ["scores", "--scenario", str(small_scenario_file), "--out", str(out)]
        assert main(argv) == EXIT_OK
        rows = read_csv(out / "scores.csv")
        assert {(r["noise"], r["kind"]) for r in rows} == {
            ("w/o noise", "homogeneous"),
            ("w/o noise", "het_latent"),
            ("w/ noise", "homogeneous"),
            ("w/ noise", "het_latent"),
        }
        assert all(int(r["samples"]) == 2 for r in rows)
        payload = json.loads((out / "scores.json").read_text())
        assert set(payload["margins"]) == {"w/o noise", "w/ noise"}

    def test_ego_only_lineup(self, small_scenario_file, tmp_path):
        out = tmp_path / "scores"
        argv = ["scores", "--scenario", str(small_scenario_file), "--out", str(out)]
        assert main([*argv, "--set", "scenario.agent_count=1"]) == EXIT_OK
        header = "noise,kind,mean,max,min,std,samples\n"
        assert (out / "scores.csv").read_text() == header
