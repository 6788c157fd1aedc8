"""
ランダムフーリエ特徴によるテスト関数バンク
phi_{2i-1}(x) = sin(w_i . x), phi_{2i}(x) = cos(w_i . x) とその勾配・ラプラシアン
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from ngif.errors import DataError
from ngif.models import TORUS, DomainDescriptor
from ngif.utils.rng import stream

logger = logging.getLogger(__name__)

MEDIAN_MAX_POINTS = 2000


def log_spaced_bandwidths(sigma_min: float, sigma_max: float, num: int) -> np.ndarray:
    """
    対数等間隔のバンド幅 sigma_b = sigma_min (sigma_max/sigma_min)^((b-1)/(B-1))

    Args:
        sigma_min: 最小バンド幅 (> 0)
        sigma_max: 最大バンド幅 (>= sigma_min)
        num: バンド数 B (>= 1)
    """
    if not (sigma_min > 0 and sigma_max > 0):
        raise ValueError("bandwidth bounds must be positive")
    if sigma_min > sigma_max:
        raise ValueError("sigma_min must not exceed sigma_max")
    if int(num) < 1:
        raise ValueError("number of bandwidths must be >= 1")
    if int(num) == 1:
        if sigma_min != sigma_max:
            raise ValueError("a single bandwidth requires sigma_min == sigma_max")
        return np.array([float(sigma_min)])
    return np.geomspace(sigma_min, sigma_max, int(num))


def round_to_pi_multiples(raw: np.ndarray, period: float = 2.0) -> np.ndarray:
    """
    周期領域用に各座標を 2pi/period の整数倍に丸める (偶数丸め)

    正規化座標 (period = 2) では pi の整数倍になる。
    """
    step = 2.0 * np.pi / float(period)
    return step * np.round(np.asarray(raw) / step)


@dataclass(frozen=True, eq=False)
class TestBank:
    """M/2 個の周波数と、その sin/cos 対からなる M 個のテスト関数"""

    __test__ = False  # pytest に収集させない

    frequencies: np.ndarray
    bandwidths: np.ndarray
    band_index: np.ndarray
    seed: int
    periodic: bool = False

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=np.float64)
        if freqs.ndim != 2:
            raise ValueError("frequencies must have shape [M/2, d]")
        if not np.all(np.isfinite(freqs)):
            raise ValueError("frequencies must be finite")
        freqs.setflags(write=False)
        object.__setattr__(self, 'frequencies', freqs)
        object.__setattr__(self, 'bandwidths', np.asarray(self.bandwidths, dtype=np.float64))
        object.__setattr__(self, 'band_index', np.asarray(self.band_index, dtype=np.int64))

    @property
    def num_tests(self) -> int:
        return 2 * self.frequencies.shape[0]

    @property
    def dimension(self) -> int:
        return self.frequencies.shape[1]

    @property
    def sq_norms(self) -> np.ndarray:
        return np.sum(self.frequencies ** 2, axis=1)

    def _projections(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dimension:
            raise ValueError(f"point dimension {x.shape[-1]} != bank dimension {self.dimension}")
        return x @ self.frequencies.T

    def eval_tests(self, x) -> np.ndarray:
        """テスト関数値 [..., M] (偶数番目 sin, 奇数番目 cos)"""
        proj = self._projections(x)
        return interleave(np.sin(proj), np.cos(proj))

    def eval_test_gradients(self, x) -> np.ndarray:
        """勾配 [..., M, d]"""
        proj = self._projections(x)
        sin_part = np.cos(proj)[..., None] * self.frequencies
        cos_part = -np.sin(proj)[..., None] * self.frequencies
        out = np.empty(proj.shape[:-1] + (self.num_tests, self.dimension))
        out[..., 0::2, :] = sin_part
        out[..., 1::2, :] = cos_part
        return out

    def eval_test_laplacians(self, x) -> np.ndarray:
        """ラプラシアン [..., M] = -|w|^2 * (同じ三角関数値)"""
        return -np.repeat(self.sq_norms, 2) * self.eval_tests(x)

    def to_dict(self):
        return {
            'seed': int(self.seed),
            'periodic': bool(self.periodic),
            'bandwidths': [float(b) for b in self.bandwidths],
            'band_index': [int(b) for b in self.band_index],
            'num_frequencies': int(self.frequencies.shape[0]),
            'dimension': int(self.dimension),
        }

    @classmethod
    def from_dict(cls, data, frequencies):
        return cls(
            frequencies=np.asarray(frequencies).reshape(int(data['num_frequencies']), int(data['dimension'])),
            bandwidths=np.asarray(data['bandwidths']),
            band_index=np.asarray(data['band_index']),
            seed=int(data['seed']),
            periodic=bool(data['periodic']),
        )


def interleave(sin_part, cos_part):
    """[..., M/2] の sin/cos を [..., M] に交互に並べる"""
    out = np.empty(sin_part.shape[:-1] + (2 * sin_part.shape[-1],), dtype=np.result_type(sin_part, cos_part))
    out[..., 0::2] = sin_part
    out[..., 1::2] = cos_part
    return out


def sample_bank(bandwidths, num_tests: int, dimension: int, domain: DomainDescriptor, seed: int) -> TestBank:
    """
    多重スケールの周波数をサンプリング

    M/2 個の周波数を各バンドに均等に割り当てる (割り切れない余りは先頭のバンドから順に1つずつ)。
    トーラス上では各座標を 2pi/period の整数倍に丸める (正規化座標では pi の整数倍)。

    Args:
        bandwidths: バンド幅の配列 sigma_b
        num_tests: テスト関数の総数 M (偶数)
        dimension: 空間次元 d
        domain: 領域記述子 (周期性の判定に使用)
        seed: マスターシード
    """
    num_tests = int(num_tests)
    if num_tests < 2 or num_tests % 2 != 0:
        raise ValueError(f"number of tests must be a positive even integer, got {num_tests}")
    bandwidths = np.asarray(bandwidths, dtype=np.float64).reshape(-1)
    if bandwidths.size == 0 or np.any(bandwidths <= 0):
        raise ValueError("bandwidths must be positive")

    half = num_tests // 2
    # 各バンドに連続したブロックで割り当てる (余りは先頭のバンドから1つずつ)
    band_index = np.arange(half) % bandwidths.size
    band_index = np.sort(band_index, kind='stable')

    rng = stream(seed, 'bank')
    raw = rng.standard_normal((half, int(dimension))) / bandwidths[band_index][:, None]
    periodic = domain.kind == TORUS
    frequencies = round_to_pi_multiples(raw, domain.period) if periodic else raw

    logger.info(f"Test bank sampled: M={num_tests}, B={bandwidths.size}, d={dimension}, periodic={periodic}")
    return TestBank(frequencies=frequencies, bandwidths=bandwidths, band_index=band_index,
                    seed=int(seed), periodic=periodic)


def median_heuristic_bandwidth(dataset, seed: int = 0, max_points: int = MEDIAN_MAX_POINTS) -> float:
    """
    全スナップショットから最大 max_points 点を一様に抽出し、ペア間距離の中央値を返す

    Raises:
        DataError: 全点が一致している場合
    """
    points = np.asarray(dataset.samples).reshape(-1, dataset.dimension)
    if points.shape[0] < 2:
        raise DataError("median heuristic needs at least two samples", code='degenerate data')
    if points.shape[0] > max_points:
        idx = stream(seed, 'median').choice(points.shape[0], size=max_points, replace=False)
        points = points[np.sort(idx)]
    distances = pdist(points)
    if not np.any(distances > 0):
        raise DataError("degenerate data: all points identical", code='degenerate data')
    return float(np.median(distances))
