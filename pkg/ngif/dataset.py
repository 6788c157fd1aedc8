"""
スナップショットデータセットの正規化と保存・読み込み
"""
import logging

import numpy as np

from ngif.errors import DataError
from ngif.models import TORUS, DomainDescriptor, NormalizationStats, SnapshotDataset
from ngif.utils.binary_io import read_container, take_block, write_container

logger = logging.getLogger(__name__)

DATASET_MAGIC = 'NGIF-DS v1'


def compute_stats(datasets) -> NormalizationStats:
    """
    複数データセットの和集合から正規化統計量を計算

    トーラスでは領域 [lower, lower+period) をそのまま [-1, 1) に写す。
    ユークリッド空間では座標ごとの min/max を使用する。
    """
    datasets = list(datasets)
    if not datasets:
        raise ValueError("at least one dataset is required")
    domain = datasets[0].domain
    for ds in datasets[1:]:
        if ds.domain != domain:
            raise DataError("datasets with different domains cannot share normalization", code='shape mismatch')

    d = domain.dimension
    if domain.kind == TORUS:
        half = domain.period / 2.0
        return NormalizationStats(
            np.full(d, domain.lower + half), np.full(d, half), np.zeros(d, dtype=bool)
        )

    lo = np.min([ds.samples.reshape(-1, d).min(axis=0) for ds in datasets], axis=0)
    hi = np.max([ds.samples.reshape(-1, d).max(axis=0) for ds in datasets], axis=0)
    degenerate = hi - lo <= 0
    shift = np.where(degenerate, lo, (hi + lo) / 2.0)
    scale = np.where(degenerate, 1.0, (hi - lo) / 2.0)
    if np.any(degenerate):
        logger.warning(f"Degenerate coordinates (zero range): {np.flatnonzero(degenerate).tolist()}")
    return NormalizationStats(shift, scale, degenerate)


def normalized_domain(domain: DomainDescriptor) -> DomainDescriptor:
    """正規化後の領域 (トーラスは周期 2, 区間 [-1, 1))"""
    if domain.kind == TORUS:
        return DomainDescriptor(TORUS, domain.dimension, period=2.0, lower=-1.0)
    return domain


def apply_stats(dataset: SnapshotDataset, stats: NormalizationStats) -> SnapshotDataset:
    """既存の統計量でデータセットを正規化"""
    if stats.dimension != dataset.dimension:
        raise DataError(f"stats dimension {stats.dimension} != dataset dimension {dataset.dimension}",
                        code='shape mismatch')
    samples = (dataset.samples - stats.shift) / stats.scale
    return dataset.replace(samples=samples, domain=normalized_domain(dataset.domain))


def normalize(dataset: SnapshotDataset):
    """
    各座標を [-1, 1] に正規化

    Returns:
        tuple: (正規化済みデータセット, NormalizationStats)
    """
    if dataset.num_samples == 0 or dataset.num_times == 0:
        raise DataError("cannot normalize an empty dataset", code='empty')
    stats = compute_stats([dataset])
    return apply_stats(dataset, stats), stats


def denormalize_points(x, stats: NormalizationStats):
    """点群 [..., d] を元の座標系に戻す"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != stats.dimension:
        raise DataError(f"stats dimension {stats.dimension} != point dimension {x.shape[-1]}",
                        code='shape mismatch')
    return x * stats.scale + stats.shift


def denormalize(dataset: SnapshotDataset, stats: NormalizationStats, domain: DomainDescriptor = None):
    """
    正規化の逆写像

    Args:
        dataset: 正規化済みデータセット
        stats: normalize が返した統計量
        domain: 元の領域記述子 (省略時は統計量から復元)
    """
    samples = denormalize_points(dataset.samples, stats)
    if domain is None:
        domain = dataset.domain
        if dataset.domain.kind == TORUS:
            # 正規化時は shift = lower + period/2, scale = period/2
            period = 2.0 * float(stats.scale[0])
            domain = DomainDescriptor(TORUS, dataset.dimension, period=period,
                                      lower=float(stats.shift[0]) - period / 2.0)
    return dataset.replace(samples=samples, domain=domain)


def save_dataset(dataset: SnapshotDataset, path) -> None:
    """データセットを NGIF-DS v1 形式で保存"""
    write_container(path, DATASET_MAGIC, dataset.to_dict(), [dataset.samples])
    logger.info(f"Dataset written: {path} (K={dataset.num_times - 1}, N={dataset.num_samples}, d={dataset.dimension})")


def load_dataset(path) -> SnapshotDataset:
    """
    NGIF-DS v1 形式のデータセットを読み込み

    Raises:
        DataError: bad magic / truncated payload / shape mismatch
    """
    header, payload = read_container(path, DATASET_MAGIC)
    try:
        K, N, d = int(header['K']), int(header['N']), int(header['d'])
        times = np.asarray(header['times'], dtype=np.float64)
        domain = DomainDescriptor.from_dict(header['domain'])
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed header in {path}: {e}", code='bad header')

    if times.size != K + 1 or domain.dimension != d:
        raise DataError(f"header K/N/d inconsistent in {path}", code='shape mismatch')
    expected = (K + 1) * N * d
    if payload.size < expected:
        raise DataError(f"truncated payload in {path}", code='truncated payload')
    if payload.size > expected:
        raise DataError(f"payload longer than header declares in {path}", code='shape mismatch')

    samples, _ = take_block(payload, 0, (K + 1, N, d), path)
    return SnapshotDataset(
        times=times,
        samples=samples.copy(),
        domain=domain,
        scenario_param=header.get('scenario_param'),
        attrs=header.get('attrs') or {},
    )


def save_trajectories(times, trajectories, domain: DomainDescriptor, path, attrs=None) -> None:
    """軌道 [T_steps][N][d] を同じデータセット形式で保存"""
    dataset = SnapshotDataset(times=times, samples=trajectories, domain=domain,
                              attrs=dict(attrs or {}, kind='trajectory'))
    save_dataset(dataset, path)
