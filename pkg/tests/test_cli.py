"""End-to-end tests of the command line interface via subprocesses."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from hclimits import mortality_csv_path

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def run_cli(*args, check=True):
    proc = subprocess.run(
        [sys.executable, "-m", "hclimits.cli", *args],
        capture_output=True,
        text=True,
    )
    if check and proc.returncode != 0:
        raise AssertionError(f"cli failed: {proc.stderr}")
    return proc


@pytest.fixture(scope="module")
def data_path():
    return str(mortality_csv_path())


class TestCompute:
    def test_heuristic_table(self, data_path):
        proc = run_cli("compute", "--input", data_path, "--method", "np-chart,mean-sd")
        lines = proc.stdout.strip().splitlines()
        assert lines[0].split() == ["method", "lower", "upper", "covered"]
        assert lines[1].split() == ["np-chart", "7.478", "20.122", "[8,", "20]"]
        assert lines[2].startswith("mean-sd")

    def test_out_file_replaces_stdout(self, data_path, tmp_path):
        out = tmp_path / "table.txt"
        stdout_proc = run_cli("compute", "--input", data_path, "--method", "hist-range")
        file_proc = run_cli(
            "compute", "--input", data_path, "--method", "hist-range", "--out", str(out)
        )
        assert out.read_text() == stdout_proc.stdout
        assert file_proc.stdout == ""

    def test_json_report_structure(self, data_path, tmp_path):
        report_path = tmp_path / "report.json"
        run_cli(
            "compute",
            "--input",
            data_path,
            "--method",
            "qb-cal",
            "--B",
            "2000",
            "--seed",
            "1",
            "--json",
            str(report_path),
        )
        report = json.loads(report_path.read_text())
        assert report["schema_version"] == 1
        assert report["input"]["studies"] == 10
        assert len(report["input"]["sha256"]) == 64
        (entry,) = report["results"]
        assert entry["method"] == "qb-cal"
        assert entry["covered_range"] == [6, 22]
        assert entry["estimates"]["pi_hat"] == pytest.approx(0.276)
        assert abs(entry["calibration"]["achieved_psi_upper"] - 0.975) <= 0.001 + 1e-12

    def test_repeated_seed_byte_identical(self, data_path, tmp_path):
        paths = []
        for name in ("a.json", "b.json"):
            path = tmp_path / name
            run_cli(
                "compute",
                "--input",
                data_path,
                "--method",
                "bb-cal",
                "--B",
                "2000",
                "--seed",
                "7",
                "--json",
                str(path),
            )
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_figures_written(self, data_path, tmp_path):
        figdir = tmp_path / "figs"
        run_cli(
            "compute",
            "--input",
            data_path,
            "--method",
            "np-chart",
            "--figures",
            str(figdir),
        )
        files = list(figdir.glob("*.png"))
        assert files
        assert files[0].read_bytes()[:8] == PNG_MAGIC

    def test_k_flag_changes_npchart(self, data_path):
        two = run_cli("compute", "--input", data_path, "--method", "np-chart")
        three = run_cli(
            "compute", "--input", data_path, "--method", "np-chart", "--k", "3"
        )
        lower_two = float(two.stdout.splitlines()[1].split()[1])
        lower_three = float(three.stdout.splitlines()[1].split()[1])
        assert lower_three < lower_two

    def test_missing_input_fails_cleanly(self):
        proc = run_cli("compute", "--input", "/no/such.csv", "--method", "np-chart", check=False)
        assert proc.returncode == 1
        assert proc.stderr.strip().splitlines()[-1].startswith("error[FileNotFound]")

    def test_unknown_method_fails_cleanly(self, data_path):
        proc = run_cli("compute", "--input", data_path, "--method", "bogus", check=False)
        assert proc.returncode == 1
        assert "error[InvalidParameter]" in proc.stderr

    def test_run_is_logged_for_reproducibility(self, data_path):
        proc = run_cli(
            "compute", "--input", data_path, "--method", "hist-range", "--seed", "5"
        )
        assert "sha256" in proc.stderr
        assert "seed 5" in proc.stderr
        assert '"command": "compute"' in proc.stderr


class TestSimulate:
    def test_custom_toml_grid(self, tmp_path):
        grid = tmp_path / "grid.toml"
        grid.write_text(
            "[[setting]]\n"
            'id = "demo"\n'
            "H = 10\npi = 0.3\nphi = 1.5\nn_h = 50\nn_star = 50\nS = 60\n"
            'methods = ["np-chart", "mean-sd"]\n'
        )
        out = tmp_path / "sim.csv"
        run_cli("simulate", "--grid-file", str(grid), "--out", str(out))
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("setting_id,method,H,pi,phi")
        assert len(lines) == 3
        assert all(line.startswith("demo,") for line in lines[1:])

    def test_stdout_output_and_filter(self):
        proc = run_cli(
            "simulate",
            "--grid",
            "ltc",
            "--filter",
            "H=5,phi=3",
            "--methods",
            "hist-range",
            "--S",
            "30",
            "--out",
            "-",
        )
        lines = proc.stdout.strip().splitlines()
        assert len(lines) == 1 + 6
        assert all(",hist-range," in line for line in lines[1:])

    def test_unknown_toml_key_rejected(self, tmp_path):
        grid = tmp_path / "grid.toml"
        grid.write_text(
            "[[setting]]\n"
            'id = "demo"\nH = 10\npi = 0.3\nphi = 1.5\nn_h = 50\nn_star = 50\nwat = 1\n'
        )
        proc = run_cli("simulate", "--grid-file", str(grid), "--out", "-", check=False)
        assert proc.returncode == 1
        assert "error[InvalidParameter]" in proc.stderr

    def test_grid_and_grid_file_are_exclusive(self, tmp_path):
        grid = tmp_path / "grid.toml"
        grid.write_text("[[setting]]\n")
        proc = run_cli(
            "simulate", "--grid", "mnt", "--grid-file", str(grid), "--out", "-", check=False
        )
        assert proc.returncode != 0


class TestPlot:
    def test_figures_from_csv(self, tmp_path):
        grid = tmp_path / "grid.toml"
        grid.write_text(
            "[[setting]]\n"
            'id = "demo"\nH = 10\npi = 0.3\nphi = 1.5\nn_h = 50\nn_star = 50\nS = 40\n'
            'methods = ["np-chart"]\n'
        )
        csv_path = tmp_path / "sim.csv"
        run_cli("simulate", "--grid-file", str(grid), "--out", str(csv_path))
        figdir = tmp_path / "figs"
        run_cli("plot", "--results", str(csv_path), "--out-dir", str(figdir))
        files = list(figdir.glob("*.png"))
        assert len(files) == 1
        assert files[0].read_bytes()[:8] == PNG_MAGIC


def test_version_flag():
    proc = run_cli("--version")
    assert proc.stdout.strip().endswith("0.1.0")
