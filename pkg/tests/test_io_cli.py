import json
import subprocess
import sys

import numpy as np
import pytest

from spurcorr.core import RngStream
from spurcorr.datagen import LinearModelSpec, lowrank_model, sdp_beta, sample_linear_model
from spurcorr.errors import ParseError, RaggedRows
from spurcorr.experiments import discovery_pipeline
from spurcorr.io import read_matrix, write_matrix, write_vector


def run_cli(*argv):
    proc = subprocess.run(
        [sys.executable, "-m", "spurcorr.cli", *argv],
        capture_output=True, text=True,
    )
    return proc.returncode, proc.stdout, proc.stderr


class TestReadMatrix:
    def test_basic(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,2\n3,4\n5,6\n")
        d = read_matrix(path)
        assert (d.n, d.p) == (3, 2)
        np.testing.assert_array_equal(d.x, [[1, 2], [3, 4], [5, 6]])

    def test_nan_token_location(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,2\n3,NaN\n5,6\n")
        with pytest.raises(ParseError) as err:
            read_matrix(path)
        assert err.value.row == 2 and err.value.col == 2

    def test_garbage_token_location(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,2\n3,4\nx,6\n")
        with pytest.raises(ParseError) as err:
            read_matrix(path)
        assert err.value.row == 3 and err.value.col == 1

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,2\n3\n")
        with pytest.raises(RaggedRows):
            read_matrix(path)

    def test_header_and_response_col(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b,resp\n1,2,9\n3,4,8\n5,6,7\n")
        d = read_matrix(path, header=True, response_col="resp")
        assert d.column_names == ("a", "b")
        np.testing.assert_array_equal(d.y, [9, 8, 7])

    def test_response_file(self, tmp_path):
        mpath, ypath = tmp_path / "m.csv", tmp_path / "y.csv"
        mpath.write_text("1,2\n3,4\n")
        ypath.write_text("0.5\n-0.5\n")
        d = read_matrix(mpath, response_path=ypath)
        np.testing.assert_array_equal(d.y, [0.5, -0.5])

    def test_roundtrip_exact(self, tmp_path):
        g = np.random.default_rng(0)
        x = g.standard_normal((10, 4))
        path = tmp_path / "m.csv"
        write_matrix(path, x)
        back = read_matrix(path)
        np.testing.assert_array_equal(back.x, x)


class TestCli:
    @pytest.fixture
    def small_data(self, tmp_path):
        g = np.random.default_rng(1)
        x = g.standard_normal((30, 8))
        y = g.standard_normal(30)
        write_matrix(tmp_path / "X.csv", x)
        write_vector(tmp_path / "y.csv", y)
        return tmp_path

    def test_maxcorr_happy_path(self, small_data):
        code, out, _ = run_cli(
            "maxcorr", "--data", str(small_data / "X.csv"),
            "--response", str(small_data / "y.csv"), "--s", "2", "--seed", "42",
        )
        assert code == 0
        payload = json.loads(out)
        assert 0.0 <= payload["r_hat"] <= 1.0
        assert len(payload["subset"]) == 2
        assert payload["method"] == "two_step(screen=40)"
        assert "versions" in payload and "config" in payload

    def test_invalid_s_exits_2(self, small_data):
        code, out, err = run_cli(
            "maxcorr", "--data", str(small_data / "X.csv"),
            "--response", str(small_data / "y.csv"), "--s", "0",
        )
        assert code == 2
        assert "--s" in err

    def test_computational_error_exits_1(self, small_data):
        code, out, _ = run_cli(
            "maxcorr", "--data", str(small_data / "X.csv"),
            "--response", str(small_data / "y.csv"), "--s", "20",
        )
        assert code == 1
        payload = json.loads(out)
        assert payload["error"] == "ValueError"

    def test_parse_error_reported(self, tmp_path):
        (tmp_path / "bad.csv").write_text("1,2\n3,oops\n")
        (tmp_path / "y.csv").write_text("1\n2\n")
        code, out, _ = run_cli(
            "maxcorr", "--data", str(tmp_path / "bad.csv"),
            "--response", str(tmp_path / "y.csv"), "--s", "1",
        )
        assert code == 1
        payload = json.loads(out)
        assert payload["error"] == "ParseError"
        assert (payload["row"], payload["col"]) == (2, 2)

    def test_header_names_in_report(self, tmp_path):
        g = np.random.default_rng(2)
        x = g.standard_normal((25, 3))
        write_matrix(tmp_path / "X.csv", x, header=["alpha", "beta", "gamma"])
        write_vector(tmp_path / "y.csv", g.standard_normal(25))
        code, out, _ = run_cli(
            "maxcorr", "--data", str(tmp_path / "X.csv"), "--header",
            "--response", str(tmp_path / "y.csv"), "--s", "1", "--method",
            "exhaustive",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["subset_names"] is not None
        assert payload["subset_names"][0] in ("alpha", "beta", "gamma")

    def test_null_quantile_deterministic_and_dump(self, small_data):
        args = (
            "null-quantile", "--data", str(small_data / "X.csv"), "--s", "1",
            "--alpha", "0.1", "--reps", "150", "--seed", "7",
            "--dump-reps", str(small_data / "reps.csv"),
        )
        code1, out1, _ = run_cli(*args)
        code2, out2, _ = run_cli(*args)
        assert code1 == code2 == 0
        assert out1 == out2
        dumped = np.loadtxt(small_data / "reps.csv", skiprows=1)
        assert dumped.shape == (150,)
        assert np.all(np.diff(dumped) >= 0)

    def test_rerun_echoed_config_reproduces(self, small_data):
        code, out, _ = run_cli(
            "null-quantile", "--data", str(small_data / "X.csv"), "--s", "2",
            "--reps", "120", "--seed", "3",
        )
        assert code == 0
        payload = json.loads(out)
        echo = payload["config"]
        argv = ["null-quantile"]
        for key, val in echo.items():
            if isinstance(val, bool):
                if val:
                    argv.append(f"--{key}")
            else:
                argv.extend([f"--{key}", str(val)])
        code2, out2, _ = run_cli(*argv)
        assert code2 == 0
        assert out2 == out

    def test_thread_flag_does_not_change_output(self, small_data):
        base = (
            "null-quantile", "--data", str(small_data / "X.csv"), "--s", "1",
            "--reps", "120", "--seed", "9",
        )
        _, out1, _ = run_cli(*base)
        _, out2, _ = run_cli("--threads", "3", *base)
        assert out1 == out2

    def test_exo_test_both_nulls(self, small_data):
        code, out, _ = run_cli(
            "exo-test", "--data", str(small_data / "X.csv"),
            "--response", str(small_data / "y.csv"), "--fit", "oracle",
            "--support", "0,1", "--null", "both", "--reps", "150", "--seed", "5",
        )
        assert code == 0
        payload = json.loads(out)
        assert set(payload["reports"]) == {"bootstrap_lla", "analytic"}
        assert "nulls_disagree" in payload

    def test_asym_grid(self, tmp_path):
        code, out, _ = run_cli(
            "asym", "--s", "2", "--t-min", "-2", "--t-max", "6", "--points", "5",
            "--grid-out", str(tmp_path / "grid.csv"),
        )
        assert code == 0
        grid = np.loadtxt(tmp_path / "grid.csv", delimiter=",", skiprows=1)
        assert grid.shape == (5, 2)
        assert np.all(np.diff(grid[:, 1]) >= 0)

    def test_simulate_then_check_discovery_matches_library(self, tmp_path):
        code, out, _ = run_cli(
            "simulate", "--scenario", "lowrank", "--n", "40", "--p", "30",
            "--r", "12", "--beta", "sdp", "--seed", "11",
            "--out", str(tmp_path / "X.csv"),
            "--response-out", str(tmp_path / "y.csv"),
        )
        assert code == 0
        code, out, _ = run_cli(
            "check-discovery", "--data", str(tmp_path / "X.csv"),
            "--response", str(tmp_path / "y.csv"), "--fit", "cv-lasso",
            "--alpha", "0.1", "--reps", "150", "--seed", "21",
        )
        assert code == 0
        cli_payload = json.loads(out)

        # identical pipeline run directly through the library
        spec = LinearModelSpec(beta=sdp_beta(30), cov=lowrank_model(30, 12))
        d = sample_linear_model(spec, 40, RngStream(11))
        report, spurious, info = discovery_pipeline(
            d, 0.1, 150, RngStream(21), method="forward", folds=10,
        )
        assert cli_payload["decision"] == report.decision
        assert cli_payload["statistic"] == report.statistic
        assert cli_payload["reference"]["value"] == report.reference["value"]
        assert cli_payload["fit"]["selected"] == info["selected"]

    def test_simulate_deterministic(self, tmp_path):
        for tag in ("a", "b"):
            run_cli(
                "simulate", "--scenario", "block", "--n", "15", "--p", "10",
                "--seed", "3", "--out", str(tmp_path / f"X{tag}.csv"),
            )
        assert (tmp_path / "Xa.csv").read_text() == (tmp_path / "Xb.csv").read_text()
