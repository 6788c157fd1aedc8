"""
評価指標
生成サンプルと正解データの比較 (全変動距離、電場エネルギー誤差、速度場誤差)
"""
import logging

import numpy as np
from scipy.integrate import trapezoid

from ngif.errors import DataError
from ngif.models import DomainDescriptor

logger = logging.getLogger(__name__)

DEFAULT_BINS = 64
SENSITIVITY_BINS = (32, 64, 128)
EUCLIDEAN_PADDING = 0.05


def tv_from_histograms(p, q) -> float:
    """正規化済みヒストグラム同士の全変動距離 1/2 |p - q|_1"""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if p.shape != q.shape:
        raise ValueError("histograms must have the same number of bins")
    return 0.5 * float(np.abs(p - q).sum())


def _histogram_range(a, b, domain: DomainDescriptor):
    if domain.is_periodic:
        return [(domain.lower, domain.upper)] * 2
    both = np.concatenate([a, b], axis=0)
    lo, hi = both.min(axis=0), both.max(axis=0)
    pad = EUCLIDEAN_PADDING * np.where(hi > lo, hi - lo, 1.0)
    return [(lo[j] - pad[j], hi[j] + pad[j]) for j in range(2)]


def tv_distance(samples_a, samples_b, bins_x: int = DEFAULT_BINS, bins_y: int = DEFAULT_BINS,
                domain: DomainDescriptor = None) -> float:
    """
    2次元ヒストグラムの全変動距離

    トーラスでは領域を B_x x B_y の等分割、ユークリッド空間では両サンプルの
    和集合のバウンディングボックス (5% 余白) を分割する。

    Returns:
        float: [0, 1] の値
    """
    a = np.asarray(samples_a, dtype=np.float64)
    b = np.asarray(samples_b, dtype=np.float64)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise DataError("tv_distance needs nonempty sample sets", code='empty')
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != 2 or b.shape[1] != 2:
        raise DataError("tv_distance expects two sets of 2D points", code='shape mismatch')
    domain = domain or DomainDescriptor('euclidean', 2)
    bounds = _histogram_range(a, b, domain)
    bins = [int(bins_x), int(bins_y)]
    hist_a, _, _ = np.histogram2d(a[:, 0], a[:, 1], bins=bins, range=bounds)
    hist_b, _, _ = np.histogram2d(b[:, 0], b[:, 1], bins=bins, range=bounds)
    return tv_from_histograms(hist_a / a.shape[0], hist_b / b.shape[0])


def tv_curve(generated, truth, bins: int = DEFAULT_BINS, domain: DomainDescriptor = None):
    """各時刻の TV 距離 [T_steps]"""
    generated = np.asarray(generated)
    truth = np.asarray(truth)
    if generated.shape[0] != truth.shape[0]:
        raise DataError(f"{generated.shape[0]} generated snapshots but {truth.shape[0]} reference snapshots",
                        code='grid mismatch')
    return np.array([tv_distance(g, r, bins, bins, domain) for g, r in zip(generated, truth)])


def energy_rel_error(e_pred, e_true, times=None) -> float:
    """
    (1/T) int |E_true - E_pred| / |E_true| dt (台形則)

    Raises:
        DataError: E_true がどこかで 0、または系列長の不一致
    """
    e_pred = np.asarray(e_pred, dtype=np.float64)
    e_true = np.asarray(e_true, dtype=np.float64)
    if e_pred.shape != e_true.shape:
        raise DataError("energy series must share a time grid", code='grid mismatch')
    if np.any(e_true == 0):
        raise DataError("reference energy is zero at some node", code='zero reference')
    rel = np.abs(e_true - e_pred) / np.abs(e_true)
    if rel.size == 1:
        return float(rel[0])
    times = np.arange(rel.size, dtype=np.float64) if times is None else np.asarray(times, dtype=np.float64)
    if times.shape != rel.shape:
        raise DataError("time grid does not match the energy series", code='grid mismatch')
    return float(trapezoid(rel, times) / (times[-1] - times[0]))


def field_rel_l2(field, reference, samples, t=0.0) -> float:
    """
    sqrt(sum |u - v|^2 / sum |v|^2) を評価点上で計算

    Args:
        field: numpy クロージャ u(x, t) または numpy_closure を持つ速度場
        reference: 正解の numpy クロージャ v(x, t)
        samples: 評価点 [n, d]
    """
    x = np.asarray(samples, dtype=np.float64)
    u_fn = field.numpy_closure() if hasattr(field, 'numpy_closure') else field
    u = np.asarray(u_fn(x, t))
    v = np.asarray(reference(x, t))
    denom = float(np.sum(v ** 2))
    if denom == 0:
        raise DataError("reference field has zero norm on the evaluation set", code='zero reference')
    return float(np.sqrt(np.sum((u - v) ** 2) / denom))
