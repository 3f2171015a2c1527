import json
import os

import numpy as np
import pytest

from hjbplan.cli import main


def run(args):
    return main(args)


def read_manifest(out_dir):
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        return json.load(fh)


class TestSolve1d:
    def test_default_run(self, tmp_path):
        out = str(tmp_path)
        assert run(["solve1d", "--out-dir", out]) == 0
        lines = (tmp_path / "solution1d.csv").read_text().splitlines()
        assert lines[0] == "x,u,z,p_star"
        assert len(lines) == 301
        first = lines[1].split(",")
        last = lines[-1].split(",")
        assert float(first[1]) == pytest.approx(0.2096113871510978, abs=1e-12)
        assert float(last[1]) == pytest.approx(0.2096113871510978, abs=1e-12)
        manifest = read_manifest(out)
        assert manifest["command"] == "solve1d"
        assert manifest["parameters"]["n"] == 300
        assert manifest["outputs"][0]["file"] == "solution1d.csv"

    def test_zero_z0_boundary_is_one(self, tmp_path):
        out = str(tmp_path)
        assert run(["solve1d", "--z0", "0", "--out-dir", out]) == 0
        first_u = (tmp_path / "solution1d.csv").read_text().splitlines()[1].split(",")[1]
        assert float(first_u) == 1.0

    def test_quadratic_cost_variant(self, tmp_path):
        assert run(["solve1d", "--cost", "x2", "--out-dir", str(tmp_path)]) == 0

    def test_bad_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run(["solve1d", "--n", "not-a-number"])
        assert exc.value.code == 2

    def test_bad_cost_selector_exits_2(self, tmp_path):
        assert run(["solve1d", "--cost", "nope", "--out-dir", str(tmp_path)]) == 2


class TestSolve2d:
    def test_small_grid_run(self, tmp_path):
        out = str(tmp_path)
        assert run(["solve2d", "--h", "0.1", "--tol", "1e-8", "--out-dir", out]) == 0
        manifest = read_manifest(out)
        assert manifest["solve_stats"]["converged"] is True
        assert manifest["solve_stats"]["iterations"] >= 1
        lines = (tmp_path / "solution2d.csv").read_text().splitlines()
        assert lines[0] == "y1,y2,inside,u,z,p1,p2"
        data = np.loadtxt(str(tmp_path / "solution2d.csv"), delimiter=",", skiprows=1)
        assert set(np.unique(data[:, 2])) == {0.0, 1.0}
        # outside rows still present
        assert data.shape[0] == 21 * 21

    def test_non_convergence_exits_1(self, tmp_path):
        assert run(["solve2d", "--h", "0.05", "--max-iter", "2", "--out-dir", str(tmp_path)]) == 1

    def test_constant_zero_cost_single_sweep(self, tmp_path):
        out = str(tmp_path)
        assert run(["solve2d", "--h", "0.1", "--cost", "const:0", "--out-dir", out]) == 0
        manifest = read_manifest(out)
        assert manifest["solve_stats"]["iterations"] == 1
        data = np.loadtxt(str(tmp_path / "solution2d.csv"), delimiter=",", skiprows=1)
        bc = np.exp(-0.2 / (2 * 0.09))
        assert np.max(np.abs(data[:, 3] - bc)) == 0.0

    def test_appendix_geometry_variant(self, tmp_path):
        out = str(tmp_path)
        assert run(["solve2d", "--a", "1.5", "--b", "1.0", "--h", "0.1", "--out-dir", out]) == 0
        data = np.loadtxt(str(tmp_path / "solution2d.csv"), delimiter=",", skiprows=1)
        assert data[:, 0].min() == pytest.approx(-1.5, abs=1e-12)
        assert data[:, 0].max() == pytest.approx(1.5, abs=1e-12)
        assert data[:, 1].min() == pytest.approx(-1.0, abs=1e-12)


class TestSimulate:
    def test_default_1d_run(self, tmp_path):
        out = str(tmp_path)
        assert run(["simulate", "--t-max", "5", "--seed", "11", "--out-dir", out]) == 0
        assert (tmp_path / "trajectory.csv").exists()
        meta = json.loads((tmp_path / "trajectory.csv.meta.json").read_text())
        assert meta["seed"] == 11
        assert meta["stop_reason"] in ("hit_boundary", "horizon_reached")

    def test_noise_free_is_seed_independent(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        assert run(["simulate", "--sigma", "0", "--seed", "1", "--t-max", "2", "--out-dir", str(d1)]) == 0
        assert run(["simulate", "--sigma", "0", "--seed", "999", "--t-max", "2", "--out-dir", str(d2)]) == 0
        assert (d1 / "trajectory.csv").read_bytes() == (d2 / "trajectory.csv").read_bytes()

    def test_monte_carlo_block_in_manifest(self, tmp_path):
        out = str(tmp_path)
        assert run(["simulate", "--t-max", "4", "--n-paths", "64", "--seed", "5",
                    "--out-dir", out]) == 0
        manifest = read_manifest(out)
        block = manifest["mc_report"]
        assert block["n"] == 64
        assert 0.0 <= block["fraction_stopped"] <= 1.0
        assert block["std_error"] > 0.0

    def test_start_outside_domain_exits_2(self, tmp_path):
        assert run(["simulate", "--start", "1.5", "--out-dir", str(tmp_path)]) == 2

    def test_2d_run(self, tmp_path):
        out = str(tmp_path)
        assert run(["simulate", "--dim", "2", "--h", "0.05", "--tol", "1e-6",
                    "--t-max", "3", "--seed", "2", "--out-dir", out]) == 0
        lines = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert lines[0] == "t,y1,y2,cost"


class TestVerifyCommand:
    def test_1d_battery_passes(self, tmp_path):
        out = str(tmp_path)
        assert run(["verify", "--n-paths", "500", "--out-dir", out]) == 0
        report = (tmp_path / "verify_report.txt").read_text()
        for name in ("sandwich", "concavity_slices", "boundary_asymptotic",
                     "cross_solver", "martingale"):
            assert f"CHECK {name} PASS" in report

    def test_zero_cost_skips_asymptotic(self, tmp_path):
        out = str(tmp_path)
        assert run(["verify", "--cost", "const:0", "--n-paths", "200", "--out-dir", out]) == 0
        report = (tmp_path / "verify_report.txt").read_text()
        assert "CHECK boundary_asymptotic SKIP" in report

    def test_corrupted_solution_fails(self, tmp_path):
        solve_dir = tmp_path / "solve"
        assert run(["solve1d", "--out-dir", str(solve_dir)]) == 0
        csv = solve_dir / "solution1d.csv"
        lines = csv.read_text().splitlines()
        parts = lines[150].split(",")
        parts[1] = "0.5"  # u above the boundary constant
        lines[150] = ",".join(parts)
        csv.write_text("\n".join(lines) + "\n")
        out = tmp_path / "verify"
        code = run(["verify", "--in-dir", str(solve_dir), "--n-paths", "200",
                    "--out-dir", str(out)])
        assert code == 1
        report = (out / "verify_report.txt").read_text()
        assert "FAIL" in report


class TestReproducibility:
    def test_solve1d_byte_identical(self, tmp_path):
        d1, d2 = tmp_path / "r1", tmp_path / "r2"
        for d in (d1, d2):
            assert run(["solve1d", "--out-dir", str(d)]) == 0
        assert (d1 / "solution1d.csv").read_bytes() == (d2 / "solution1d.csv").read_bytes()
        assert (d1 / "manifest.json").read_bytes() == (d2 / "manifest.json").read_bytes()

    def test_simulate_byte_identical_across_threads(self, tmp_path, monkeypatch):
        outputs = []
        for threads, sub in (("1", "t1"), ("3", "t3")):
            monkeypatch.setenv("HJB_THREADS", threads)
            d = tmp_path / sub
            assert run(["simulate", "--t-max", "3", "--n-paths", "32", "--seed", "8",
                        "--out-dir", str(d)]) == 0
            manifest = read_manifest(str(d))
            outputs.append(((d / "trajectory.csv").read_bytes(), manifest["mc_report"]))
        assert outputs[0][0] == outputs[1][0]
        assert outputs[0][1] == outputs[1][1]
