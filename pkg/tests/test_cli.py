import csv
import subprocess
import sys

import numpy as np
import pytest

from ppsync.cli import main


def run_cli(args, env_extra=None):
    import os

    env = os.environ.copy()
    env.pop("PPS_SEED", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "ppsync.cli"] + [str(a) for a in args],
        capture_output=True,
        text=True,
        env=env,
    )


def gen_args(d, n=6, m=8, kmin=2, kmax=4, q=0.0, seed=3):
    return [
        "gen", "--n", n, "--m", m, "--kmin", kmin, "--kmax", kmax,
        "--q", q, "--seed", seed, "--truth", d / "truth.ppsr", "--matches", d / "q.ppsq",
    ]


@pytest.fixture
def instance(tmp_path):
    assert main([str(a) for a in gen_args(tmp_path)]) == 0
    return tmp_path


class TestGen:
    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        a.mkdir(), b.mkdir()
        assert main([str(x) for x in gen_args(a)]) == 0
        assert main([str(x) for x in gen_args(b)]) == 0
        assert (a / "truth.ppsr").read_bytes() == (b / "truth.ppsr").read_bytes()
        assert (a / "q.ppsq").read_bytes() == (b / "q.ppsq").read_bytes()

    def test_q_zero_matches_truth_product(self, tmp_path):
        from ppsync import fileio, ground_truth_product

        assert main([str(x) for x in gen_args(tmp_path)]) == 0
        gt = fileio.read_registration(tmp_path / "truth.ppsr")
        Q = fileio.read_correspondence(tmp_path / "q.ppsq")
        assert Q.pairs == ground_truth_product(gt).pairs

    def test_single_image_identity(self, tmp_path):
        args = gen_args(tmp_path, n=1, m=4, kmin=2, kmax=4)
        assert main([str(x) for x in args]) == 0
        from ppsync import fileio

        Q = fileio.read_correspondence(tmp_path / "q.ppsq")
        assert Q.pairs == ()


class TestSolve:
    @pytest.mark.parametrize("formulation", ["weak", "strong"])
    def test_writes_duals_and_report(self, instance, formulation):
        rc = main([
            "solve", "--matches", str(instance / "q.ppsq"), "--formulation", formulation,
            "--beta", "2.0", "--max-iter", "5", "--seed", "1",
            "--duals", str(instance / "d.ppsd"), "--report", str(instance / "rep.csv"),
        ])
        assert rc == 0
        with open(instance / "rep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 5
        assert {"iteration", "residual", "matvecs", "seconds"} <= set(rows[0])

    def test_weak_respects_iteration_cap(self, instance):
        rc = main([
            "solve", "--matches", str(instance / "q.ppsq"),
            "--beta-scale", "20", "--seed", "0",
            "--duals", str(instance / "d.ppsd"), "--report", str(instance / "rep.csv"),
        ])
        assert rc == 0
        with open(instance / "rep.csv") as fh:
            assert len(list(csv.DictReader(fh))) <= 20

    def test_missing_input_exit_2(self, tmp_path):
        proc = run_cli([
            "solve", "--matches", tmp_path / "absent.ppsq",
            "--duals", tmp_path / "d", "--report", tmp_path / "r",
        ])
        assert proc.returncode == 2
        assert "absent.ppsq" in proc.stderr


def _solve(instance, formulation="weak", beta="2.0"):
    assert main([
        "solve", "--matches", str(instance / "q.ppsq"), "--formulation", formulation,
        "--beta", beta, "--max-iter", "40", "--s", "200", "--seed", "5",
        "--duals", str(instance / "d.ppsd"), "--report", str(instance / "rep.csv"),
    ]) == 0


class TestRecoverAndEval:
    def test_fast_recovery_reproduces_truth(self, instance):
        _solve(instance)
        assert main([
            "recover", "--matches", str(instance / "q.ppsq"), "--duals", str(instance / "d.ppsd"),
            "--recovery", "fast", "--seed", "2", "--out", str(instance / "reg.ppsr"),
        ]) == 0
        assert main([
            "eval", "--pred", str(instance / "reg.ppsr"), "--truth", str(instance / "truth.ppsr"),
            "--matches", str(instance / "q.ppsq"), "--out", str(instance / "m.csv"),
        ]) == 0
        with open(instance / "m.csv") as fh:
            row = next(csv.DictReader(fh))
        assert float(row["f1"]) == 1.0

    def test_eval_of_truth_is_perfect(self, instance):
        assert main([
            "eval", "--pred", str(instance / "truth.ppsr"), "--truth", str(instance / "truth.ppsr"),
            "--matches", str(instance / "q.ppsq"), "--out", str(instance / "m.csv"),
        ]) == 0
        with open(instance / "m.csv") as fh:
            row = next(csv.DictReader(fh))
        assert float(row["precision"]) == 1.0
        assert float(row["recall"]) == 1.0
        assert float(row["f1"]) == 1.0

    def test_slow_and_fast_agree(self, instance):
        _solve(instance)
        f1 = {}
        for mode in ["slow", "fast"]:
            assert main([
                "recover", "--matches", str(instance / "q.ppsq"), "--duals", str(instance / "d.ppsd"),
                "--recovery", mode, "--seed", "2", "--out", str(instance / f"{mode}.ppsr"),
            ]) == 0
            assert main([
                "eval", "--pred", str(instance / f"{mode}.ppsr"), "--truth", str(instance / "truth.ppsr"),
                "--matches", str(instance / "q.ppsq"), "--out", str(instance / f"{mode}.csv"),
            ]) == 0
            with open(instance / f"{mode}.csv") as fh:
                f1[mode] = float(next(csv.DictReader(fh))["f1"])
        assert abs(f1["slow"] - f1["fast"]) <= 0.05

    def test_thresh_percentile_retention(self, instance):
        _solve(instance)
        assert main([
            "recover", "--matches", str(instance / "q.ppsq"), "--duals", str(instance / "d.ppsd"),
            "--recovery", "thresh", "--percentile", "90", "--samples", "400", "--seed", "3",
            "--out", str(instance / "kept.ppsq"), "--hist", str(instance / "hist.csv"),
        ]) == 0
        from ppsync import fileio

        Q = fileio.read_correspondence(instance / "q.ppsq")
        kept = fileio.read_correspondence(instance / "kept.ppsq")
        target = 0.9 * len(Q.pairs)
        assert abs(len(kept.pairs) - target) <= 1.0 + 1e-9
        with open(instance / "hist.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 50
        assert sum(int(r["count"]) for r in rows) == len(Q.pairs)


class TestPrCurve:
    def test_rows_and_monotone_retained(self, instance):
        out = instance / "curve.csv"
        assert main([
            "prcurve", "--matches", str(instance / "q.ppsq"), "--truth", str(instance / "truth.ppsr"),
            "--beta", "2.0", "--trials", "3", "--thresholds", "25", "--samples", "100",
            "--seed", "1", "--out", str(out),
        ]) == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 25
        retained = [float(r["retained_mean"]) for r in rows]
        assert all(a >= b - 1e-12 for a, b in zip(retained, retained[1:]))
        assert any(float(r["precision_std"]) >= 0.0 for r in rows)

    def test_spectral_method(self, instance):
        out = instance / "spec.csv"
        assert main([
            "prcurve", "--matches", str(instance / "q.ppsq"), "--truth", str(instance / "truth.ppsr"),
            "--method", "spectral", "--trials", "2", "--thresholds", "10",
            "--seed", "1", "--out", str(out),
        ]) == 0
        with open(out) as fh:
            assert len(list(csv.DictReader(fh))) == 10


class TestEnvOverrides:
    def test_pps_seed_override(self, tmp_path):
        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        for d in (a, b, c):
            d.mkdir()
        proc = run_cli(gen_args(a, seed=1), env_extra={"PPS_SEED": "7"})
        assert proc.returncode == 0
        proc = run_cli(gen_args(b, seed=7))
        assert proc.returncode == 0
        proc = run_cli(gen_args(c, seed=1))
        assert proc.returncode == 0
        assert (a / "q.ppsq").read_bytes() == (b / "q.ppsq").read_bytes()
        assert (a / "q.ppsq").read_bytes() != (c / "q.ppsq").read_bytes()
