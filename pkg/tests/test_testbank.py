import numpy as np
import pytest

from ngif.dataset import normalized_domain
from ngif.errors import DataError
from ngif.models import EUCLIDEAN, DomainDescriptor, SnapshotDataset
from ngif.testbank import (
    TestBank, log_spaced_bandwidths, median_heuristic_bandwidth, round_to_pi_multiples, sample_bank,
)


def _bank(frequencies):
    frequencies = np.atleast_2d(np.asarray(frequencies, dtype=np.float64))
    return TestBank(frequencies=frequencies, bandwidths=np.ones(1),
                    band_index=np.zeros(frequencies.shape[0], dtype=int), seed=0)


def _points(points):
    points = np.asarray(points, dtype=np.float64)
    return SnapshotDataset(times=np.zeros(1), samples=points[None], domain=DomainDescriptor(EUCLIDEAN, points.shape[1]))


class TestBandwidths:
    def test_single_band(self):
        np.testing.assert_allclose(log_spaced_bandwidths(0.05, 0.05, 1), [0.05])

    def test_geometric_spacing(self):
        np.testing.assert_allclose(log_spaced_bandwidths(1, 100, 3), [1, 10, 100])
        np.testing.assert_allclose(log_spaced_bandwidths(4, 16, 2), [4, 16])

    @pytest.mark.parametrize('args', [(0, 1, 2), (-1, 1, 2), (2, 1, 2), (1, 2, 1), (1, 2, 0)])
    def test_rejected(self, args):
        with pytest.raises(ValueError):
            log_spaced_bandwidths(*args)


class TestSampling:
    def test_rounding_rule(self):
        np.testing.assert_allclose(round_to_pi_multiples(np.array([1.7, -0.2])), [np.pi, 0.0])

    def test_odd_count_rejected(self, torus):
        with pytest.raises(ValueError):
            sample_bank([1.0], 7, 2, torus, seed=0)

    def test_frequency_spread(self):
        bank = sample_bank([0.1], 20000, 2, DomainDescriptor(EUCLIDEAN, 2), seed=3)
        std = bank.frequencies.std(axis=0)
        assert np.all((std >= 9.5) & (std <= 10.5))

    def test_torus_frequencies_are_pi_multiples(self, torus):
        bank = sample_bank([0.3, 1.0], 200, 2, normalized_domain(torus), seed=1)
        ratio = bank.frequencies / np.pi
        np.testing.assert_allclose(ratio, np.round(ratio), atol=1e-12)
        assert bank.periodic

    def test_rounding_follows_the_period(self):
        np.testing.assert_allclose(round_to_pi_multiples(np.array([1.7, -0.2]), period=2 * np.pi), [2.0, 0.0])
        np.testing.assert_allclose(round_to_pi_multiples(np.array([1.7]), period=4.0), [np.pi / 2])

    def test_raw_torus_frequencies_are_integers(self, torus):
        bank = sample_bank([0.3, 1.0], 200, 2, torus, seed=1)
        np.testing.assert_allclose(bank.frequencies, np.round(bank.frequencies), atol=1e-12)
        assert np.any(bank.frequencies != 0)

    def test_contiguous_band_assignment(self):
        bank = sample_bank([1.0, 2.0, 3.0], 14, 1, DomainDescriptor(EUCLIDEAN, 1), seed=0)
        assert bank.band_index.tolist() == [0, 0, 0, 1, 1, 2, 2]

    def test_deterministic(self, torus):
        a = sample_bank([0.5], 64, 2, torus, seed=9)
        b = sample_bank([0.5], 64, 2, torus, seed=9)
        assert a.frequencies.tobytes() == b.frequencies.tobytes()


class TestEvaluation:
    def test_zero_frequency(self):
        bank = _bank([[0.0, 0.0]])
        np.testing.assert_allclose(bank.eval_tests(np.array([0.3, -1.2])), [0.0, 1.0])
        np.testing.assert_allclose(bank.eval_test_gradients(np.array([0.3, -1.2])), np.zeros((2, 2)))
        np.testing.assert_allclose(bank.eval_test_laplacians(np.array([0.3, -1.2])), [0.0, 0.0])

    def test_origin(self):
        bank = _bank([[1.3, -2.0]])
        np.testing.assert_allclose(bank.eval_tests(np.zeros(2)), [0.0, 1.0])

    def test_quarter_period(self):
        bank = _bank([[np.pi, 0.0]])
        np.testing.assert_allclose(bank.eval_tests(np.array([0.5, 0.3])), [1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(bank.eval_test_gradients(np.zeros(2)), [[np.pi, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(bank.eval_test_laplacians(np.zeros(2)), [0.0, -np.pi ** 2])

    def test_pairs_on_unit_circle(self, rng):
        bank = _bank(rng.normal(size=(16, 3)) * 4)
        values = bank.eval_tests(rng.normal(size=(50, 3)))
        np.testing.assert_allclose(values[:, 0::2] ** 2 + values[:, 1::2] ** 2, 1.0, atol=1e-12)
        assert np.all(np.abs(values) <= 1.0)

    def test_gradients_match_finite_differences(self, rng):
        bank = _bank(rng.normal(size=(8, 2)) * 2)
        x = rng.normal(size=2)
        h = 1e-6
        grads = bank.eval_test_gradients(x)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (bank.eval_tests(x + e) - bank.eval_tests(x - e)) / (2 * h)
            np.testing.assert_allclose(grads[:, j], fd, rtol=1e-8, atol=1e-8)

    def test_laplacians_match_second_differences(self, rng):
        bank = _bank(rng.normal(size=(8, 2)))
        x = rng.normal(size=2)
        h = 1e-4
        lap = np.zeros(bank.num_tests)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            lap += (bank.eval_tests(x + e) - 2 * bank.eval_tests(x) + bank.eval_tests(x - e)) / h ** 2
        np.testing.assert_allclose(bank.eval_test_laplacians(x), lap, rtol=1e-5, atol=1e-5)

    def test_periodicity_on_normalized_torus(self, rng, torus):
        bank = sample_bank([0.2, 1.0], 40, 2, normalized_domain(torus), seed=4)
        x = rng.uniform(-1, 1, size=(100, 2))
        for j in range(2):
            shifted = x.copy()
            shifted[:, j] += 2.0
            np.testing.assert_allclose(bank.eval_tests(shifted), bank.eval_tests(x), atol=1e-10)

    def test_periodicity_on_raw_torus(self, rng, torus):
        bank = sample_bank([0.2, 1.0], 40, 2, torus, seed=4)
        x = rng.uniform(0, 2 * np.pi, size=(100, 2))
        for j in range(2):
            shifted = x.copy()
            shifted[:, j] += 2 * np.pi
            np.testing.assert_allclose(bank.eval_tests(shifted), bank.eval_tests(x), atol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            _bank([[1.0, 2.0]]).eval_tests(np.zeros(3))


class TestMedianHeuristic:
    def test_two_points(self):
        assert median_heuristic_bandwidth(_points([[0.0, 0.0], [2.0, 0.0]])) == pytest.approx(2.0)

    def test_collinear_points(self):
        points = [[0.0], [1.0], [2.0], [3.0]]
        assert median_heuristic_bandwidth(_points(points)) == pytest.approx(1.5)

    def test_gaussian_cloud(self, rng):
        # 標準2次元ガウスでは |x - y| の中央値の真値が sqrt(2) * sqrt(2 ln 2) ≈ 1.665
        value = median_heuristic_bandwidth(_points(rng.standard_normal((10000, 2))), seed=0)
        assert 1.5 <= value <= 1.85

    def test_degenerate(self):
        with pytest.raises(DataError) as e:
            median_heuristic_bandwidth(_points(np.ones((5, 2))))
        assert e.value.code == 'degenerate data'
