"""
テスト共通のフィクスチャ
"""
import numpy as np
import pytest
import torch

from ngif.models import EUCLIDEAN, TORUS, DomainDescriptor, SnapshotDataset


@pytest.fixture(autouse=True)
def _quiet_torch():
    torch.set_num_threads(1)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def plane():
    return DomainDescriptor(EUCLIDEAN, 2)


@pytest.fixture
def torus():
    return DomainDescriptor(TORUS, 2, period=2 * np.pi)


@pytest.fixture
def gaussian_dataset(rng, plane):
    """平均が (t, 0) に沿って動く小さなガウス雲"""
    times = np.linspace(0.0, 1.0, 6)
    samples = rng.standard_normal((times.size, 300, 2)) * 0.3
    samples[..., 0] += times[:, None]
    return SnapshotDataset(times=times, samples=samples, domain=plane)


@pytest.fixture
def stationary_dataset(rng, plane):
    """全時刻で同じ点集合"""
    times = np.linspace(0.0, 1.0, 5)
    points = rng.uniform(-1.0, 1.0, size=(200, 2))
    return SnapshotDataset(times=times, samples=np.repeat(points[None], times.size, axis=0), domain=plane)
