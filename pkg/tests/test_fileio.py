import numpy as np
import pytest

from ppsync import BlockPartition, GroundTruth, fileio, ground_truth_product, solve_strong, solve_weak
from ppsync.solvers import DualStrong, DualWeak

from conftest import random_ground_truth, random_instance


class TestCorrespondenceRoundTrip:
    def test_bytes_stable(self, tmp_path):
        part, Q, _ = random_instance(seed=5)
        p1 = tmp_path / "q.ppsq"
        fileio.write_correspondence(p1, Q)
        Q2 = fileio.read_correspondence(p1)
        p2 = tmp_path / "q2.ppsq"
        fileio.write_correspondence(p2, Q2)
        assert p1.read_bytes() == p2.read_bytes()
        assert Q2.pairs == Q.pairs

    def test_header_checked(self, tmp_path):
        p = tmp_path / "bad.ppsq"
        p.write_text("WRONG v9\n1\n1\n")
        with pytest.raises(fileio.FormatError):
            fileio.read_correspondence(p)


class TestRegistrationRoundTrip:
    def test_bytes_stable(self, tmp_path):
        gt = random_ground_truth(seed=8, n_images=4, m=6)
        p1 = tmp_path / "r.ppsr"
        fileio.write_registration(p1, gt)
        gt2 = fileio.read_registration(p1)
        p2 = tmp_path / "r2.ppsr"
        fileio.write_registration(p2, gt2)
        assert p1.read_bytes() == p2.read_bytes()
        assert np.array_equal(gt2.assignment, gt.assignment)
        assert gt2.registry_size == gt.registry_size

    def test_missing_assignment_detected(self, tmp_path):
        p = tmp_path / "r.ppsr"
        p.write_text("PPSR v1\n1\n2\n2\n1 1 1\n")
        with pytest.raises(fileio.FormatError):
            fileio.read_registration(p)


class TestDualsRoundTrip:
    def test_strong(self, tmp_path):
        gt = random_ground_truth(seed=2, n_images=3, m=5, k_max=3)
        Q = ground_truth_product(gt)
        duals, _ = solve_strong(Q, beta=1.0, S=32, max_iter=2, tol=0.0, seed=0)
        p = tmp_path / "d.ppsd"
        fileio.write_duals(p, duals, Q.partition, beta=1.0)
        loaded, part, beta = fileio.read_duals(p)
        assert isinstance(loaded, DualStrong)
        assert beta == 1.0
        for a, b in zip(loaded.lambdas, duals.lambdas):
            np.testing.assert_array_equal(a, b)

    def test_weak(self, tmp_path):
        gt = random_ground_truth(seed=3, n_images=4, m=5, k_max=3)
        Q = ground_truth_product(gt)
        duals, _ = solve_weak(Q, beta=2.0, S=8, max_iter=3, tol=0.0, seed=1)
        p = tmp_path / "d.ppsd"
        fileio.write_duals(p, duals, Q.partition, beta=2.0)
        loaded, part, beta = fileio.read_duals(p)
        assert isinstance(loaded, DualWeak)
        np.testing.assert_array_equal(loaded.lam, duals.lam)
        np.testing.assert_array_equal(loaded.mu, duals.mu)

    def test_bytes_deterministic(self, tmp_path):
        part = BlockPartition([2, 2])
        duals = DualWeak(lam=np.arange(4.0), mu=np.array([0.5, -0.5]))
        p1, p2 = tmp_path / "a", tmp_path / "b"
        fileio.write_duals(p1, duals, part, beta=0.75)
        fileio.write_duals(p2, duals, part, beta=0.75)
        assert p1.read_bytes() == p2.read_bytes()
