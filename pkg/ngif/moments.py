"""
経験モーメントの事前計算
mu_hat[k, r] = (1/N) sum_i phi_r(x_i^{(k)}) と、平滑化スプラインによる時間微分
"""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline
from scipy.linalg import solveh_banded

from ngif.errors import DataError
from ngif.testbank import interleave
from ngif.utils.cache import cached_function, fingerprint

logger = logging.getLogger(__name__)

DEFAULT_SPLINE_PENALTY = 1e-5
MIN_SPLINE_KNOTS = 4
# 1チャンクあたりのサンプル数 (N x M/2 の行列がメモリに収まるように)
CHUNK_SIZE = 4096


@dataclass(frozen=True, eq=False)
class SmoothingSpline:
    """
    自然3次平滑化スプライン

    sum_k (y_k - f(t_k))^2 + penalty * int f''(t)^2 dt を最小化する。
    values は [K+1] または [K+1, M] (列ごとに独立なスプライン)。
    """

    knots: np.ndarray
    values: np.ndarray
    second_derivatives: np.ndarray
    penalty: float
    linear_fallback: bool = False

    @property
    def _piecewise(self):
        pp = self.__dict__.get('_pp')
        if pp is None:
            if self.linear_fallback:
                pp = None
            else:
                pp = CubicSpline(self.knots, self.values, axis=0, bc_type='natural')
            object.__setattr__(self, '_pp', pp)
        return pp

    def _check_range(self, t):
        t = np.asarray(t, dtype=np.float64)
        span = self.knots[-1] - self.knots[0]
        tol = 1e-12 * max(1.0, abs(span))
        if np.any(t < self.knots[0] - tol) or np.any(t > self.knots[-1] + tol):
            raise ValueError(f"spline evaluation outside [{self.knots[0]}, {self.knots[-1]}] (extrapolation)")
        return np.clip(t, self.knots[0], self.knots[-1])

    def _line(self):
        # 直線フォールバック: values は節点上の直線値
        if self.knots.size == 1:
            return np.zeros_like(self.values[0]), self.values[0]
        slope = (self.values[-1] - self.values[0]) / (self.knots[-1] - self.knots[0])
        return slope, self.values[0] - slope * self.knots[0]

    def value(self, t):
        t = self._check_range(t)
        if self.linear_fallback:
            slope, intercept = self._line()
            return np.multiply.outer(t, slope) + intercept
        return self._piecewise(t)

    def derivative(self, t):
        t = self._check_range(t)
        if self.linear_fallback:
            slope, _ = self._line()
            return np.broadcast_to(slope, np.shape(t) + np.shape(slope)).copy()
        return self._piecewise(t, 1)


def _reinsch_matrices(h):
    """Q^T (帯) と R (帯) を構築。内部節点数 n-2"""
    n_inner = h.size - 1
    inv_h = 1.0 / h
    # Q は n x (n-2): 列 j (内部節点 j+1) に 1/h_j, -1/h_j - 1/h_{j+1}, 1/h_{j+1}
    q_lower = inv_h[:-1]
    q_mid = -inv_h[:-1] - inv_h[1:]
    q_upper = inv_h[1:]
    r_diag = (h[:-1] + h[1:]) / 3.0
    r_off = h[1:-1] / 6.0
    return n_inner, q_lower, q_mid, q_upper, r_diag, r_off


def _apply_qt(y, q_lower, q_mid, q_upper):
    """Q^T y (y は [n, ...])"""
    return q_lower[:, None] * y[:-2] + q_mid[:, None] * y[1:-1] + q_upper[:, None] * y[2:]


def _apply_q(gamma, q_lower, q_mid, q_upper, n):
    """Q gamma (gamma は [n-2, ...])"""
    out = np.zeros((n,) + gamma.shape[1:])
    out[:-2] += q_lower[:, None] * gamma
    out[1:-1] += q_mid[:, None] * gamma
    out[2:] += q_upper[:, None] * gamma
    return out


def fit_smoothing_spline(times, values, penalty: float = DEFAULT_SPLINE_PENALTY) -> SmoothingSpline:
    """
    Reinsch 形式で平滑化スプラインを当てはめる

    (R + penalty * Q^T Q) gamma = Q^T y,  g = y - penalty * Q gamma
    を対称5重対角系として解き、節点値 g を自然3次スプラインで補間する
    (g を補間する自然スプラインが平滑化スプラインそのものになる)。

    Args:
        times: 節点 t_k (狭義単調増加)
        values: [K+1] または [K+1, M]
        penalty: 曲率ペナルティ lambda_spline (>= 0)
    """
    t = np.asarray(times, dtype=np.float64).reshape(-1)
    y = np.asarray(values, dtype=np.float64)
    squeeze = y.ndim == 1
    y2 = y.reshape(t.size, -1)
    if y2.shape[0] != t.size:
        raise ValueError("values must have one row per knot")
    if penalty < 0:
        raise ValueError("spline penalty must be >= 0")
    h = np.diff(t)
    if np.any(h <= 0):
        raise ValueError("spline knots must be distinct and increasing")

    n = t.size
    if n < MIN_SPLINE_KNOTS:
        logger.warning(f"Only {n} snapshots: falling back to a least-squares line for the moment derivative")
        if n == 1:
            fitted = y2.copy()
        else:
            design = np.column_stack([np.ones(n), t])
            coef, *_ = np.linalg.lstsq(design, y2, rcond=None)
            fitted = design @ coef
        fitted = fitted[:, 0] if squeeze else fitted
        return SmoothingSpline(t, fitted, np.zeros_like(fitted), float(penalty), linear_fallback=True)

    n_inner, q_lower, q_mid, q_upper, r_diag, r_off = _reinsch_matrices(h)

    # A = R + penalty * Q^T Q  (上側帯形式, 帯幅2)
    ab = np.zeros((3, n_inner))
    ab[2] = r_diag + penalty * (q_lower ** 2 + q_mid ** 2 + q_upper ** 2)
    ab[1, 1:] = r_off + penalty * (q_mid[:-1] * q_lower[1:] + q_upper[:-1] * q_mid[1:])
    ab[0, 2:] = penalty * (q_upper[:-2] * q_lower[2:])

    rhs = _apply_qt(y2, q_lower, q_mid, q_upper)
    gamma = solveh_banded(ab, rhs)
    fitted = y2 - penalty * _apply_q(gamma, q_lower, q_mid, q_upper, n)

    second = np.zeros_like(fitted)
    second[1:-1] = gamma
    if squeeze:
        fitted, second = fitted[:, 0], second[:, 0]
    return SmoothingSpline(t, fitted, second, float(penalty))


def spline_derivative(spline: SmoothingSpline, t):
    """当てはめた区分3次多項式の1階微分 (外挿は不可)"""
    return spline.derivative(t)


def spline_objective(times, values, fitted, penalty):
    """平滑化スプラインの目的関数値 (最適性チェック用)"""
    spline = CubicSpline(np.asarray(times), np.asarray(fitted), bc_type='natural')
    second = spline(np.asarray(times), 2)
    # f'' は区分線形なので台形則が厳密
    h = np.diff(times)
    curvature = np.sum(h * (second[:-1] ** 2 + second[:-1] * second[1:] + second[1:] ** 2) / 3.0)
    return float(np.sum((np.asarray(values) - np.asarray(fitted)) ** 2) + penalty * curvature)


@dataclass(frozen=True, eq=False)
class MomentTable:
    """mu, mu_dot, lap はすべて [K+1, M]"""

    mu: np.ndarray
    mu_dot: np.ndarray
    lap: np.ndarray
    times: np.ndarray
    linear_fallback: bool = False

    def __post_init__(self):
        for name in ('mu', 'mu_dot', 'lap', 'times'):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.mu.shape == self.mu_dot.shape == self.lap.shape):
            raise ValueError("moment arrays must share a shape")
        if self.mu.shape[0] != self.times.size:
            raise ValueError("moment table needs one row per time")

    @property
    def num_tests(self) -> int:
        return self.mu.shape[1]

    def targets(self, k: int, diffusion: float = 0.0) -> np.ndarray:
        """時刻 k の弱形式ターゲット mu_dot - (eps^2/2) * E[lap phi]"""
        return self.mu_dot[k] - 0.5 * diffusion ** 2 * self.lap[k]

    def to_frame(self, tests=None) -> pd.DataFrame:
        """診断用の長形式テーブル (t, test, mu, mu_dot, lap)"""
        tests = range(self.num_tests) if tests is None else list(tests)
        rows = []
        for r in tests:
            for k, t in enumerate(self.times):
                rows.append({'t': t, 'test': r, 'mu': self.mu[k, r],
                             'mu_dot': self.mu_dot[k, r], 'lap': self.lap[k, r]})
        return pd.DataFrame(rows, columns=['t', 'test', 'mu', 'mu_dot', 'lap'])


def _snapshot_averages(points, bank):
    """1スナップショットのテスト値・ラプラシアンの平均 (チャンク処理)"""
    n = points.shape[0]
    if n == 0:
        raise DataError("empty snapshot", code='empty')
    half = bank.frequencies.shape[0]
    sin_sum = np.zeros(half)
    cos_sum = np.zeros(half)
    for start in range(0, n, CHUNK_SIZE):
        proj = points[start:start + CHUNK_SIZE] @ bank.frequencies.T
        sin_sum += np.sin(proj).sum(axis=0)
        cos_sum += np.cos(proj).sum(axis=0)
    return sin_sum / n, cos_sum / n


def empirical_moments(dataset, bank) -> np.ndarray:
    """全サンプルで経験モーメント [K+1, M] を計算 (ミニバッチなし)"""
    if dataset.dimension != bank.dimension:
        raise DataError(f"dataset dimension {dataset.dimension} != bank dimension {bank.dimension}",
                        code='shape mismatch')
    rows = []
    for k in range(dataset.num_times):
        s, c = _snapshot_averages(dataset.samples[k], bank)
        rows.append(interleave(s, c))
    return np.array(rows)


def precompute_table(dataset, bank, spline_penalty: float = DEFAULT_SPLINE_PENALTY) -> MomentTable:
    """
    モーメント、スプライン微分、ラプラシアンモーメントを事前計算

    テーブルはモデルパラメータに依存せず、学習中は再利用される。
    """
    mu = empirical_moments(dataset, bank)
    # E[lap phi_r] = -|w|^2 * mu (同じ三角関数の平均)
    lap = -np.repeat(bank.sq_norms, 2)[None, :] * mu
    spline = fit_smoothing_spline(dataset.times, mu, spline_penalty)
    mu_dot = spline.derivative(dataset.times)
    if not (np.all(np.isfinite(mu_dot)) and np.all(np.isfinite(mu))):
        raise DataError("non-finite moments", code='non-finite')
    logger.info(f"Moment table precomputed: K+1={dataset.num_times}, M={bank.num_tests}, "
                f"spline penalty={spline_penalty}")
    return MomentTable(mu=mu, mu_dot=mu_dot, lap=lap, times=dataset.times,
                       linear_fallback=spline.linear_fallback)


def _table_key(dataset, bank, spline_penalty=DEFAULT_SPLINE_PENALTY):
    return fingerprint(dataset.times, dataset.samples, bank.frequencies, float(spline_penalty))


@cached_function('moment_table', key_fn=_table_key)
def cached_table(dataset, bank, spline_penalty: float = DEFAULT_SPLINE_PENALTY) -> MomentTable:
    """precompute_table のキャッシュ版 (同じデータ・バンクでのスイープで再利用)"""
    return precompute_table(dataset, bank, spline_penalty)
