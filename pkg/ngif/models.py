"""
データモデル
スナップショットデータセット、領域記述子、正規化統計量
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

EUCLIDEAN = 'euclidean'
TORUS = 'torus'
DOMAIN_KINDS = (EUCLIDEAN, TORUS)


@dataclass(frozen=True)
class DomainDescriptor:
    """状態空間 X = R^d または T^d"""

    kind: str
    dimension: int
    period: float = 2 * np.pi
    lower: float = 0.0

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise ValueError(f"Unknown domain kind: {self.kind}")
        if int(self.dimension) < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind == TORUS and not self.period > 0:
            raise ValueError("period must be > 0 on a torus")

    @property
    def is_periodic(self) -> bool:
        return self.kind == TORUS

    @property
    def upper(self) -> float:
        return self.lower + self.period

    def to_dict(self):
        return {
            'kind': self.kind,
            'dimension': int(self.dimension),
            'period': float(self.period),
            'lower': float(self.lower),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            kind=data['kind'],
            dimension=int(data['dimension']),
            period=float(data.get('period', 2 * np.pi)),
            lower=float(data.get('lower', 0.0)),
        )


@dataclass(frozen=True, eq=False)
class SnapshotDataset:
    """時刻 t_0..t_K における対応関係のないサンプル集合"""

    times: np.ndarray
    samples: np.ndarray
    domain: DomainDescriptor
    scenario_param: Optional[float] = None
    attrs: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 3:
            raise ValueError(f"samples must have shape [K+1, N, d], got {samples.shape}")
        if samples.shape[0] != times.size:
            raise ValueError(f"{times.size} times but {samples.shape[0]} snapshots")
        if samples.shape[2] != self.domain.dimension:
            raise ValueError(f"sample dimension {samples.shape[2]} != domain dimension {self.domain.dimension}")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        times.setflags(write=False)
        samples.setflags(write=False)
        # frozen dataclass のため object.__setattr__ で正規化済み配列を格納
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'attrs', dict(self.attrs))

    @property
    def num_times(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def dimension(self) -> int:
        return self.samples.shape[2]

    def replace(self, **changes):
        """一部のフィールドを差し替えた新しいデータセットを返す"""
        values = {
            'times': self.times,
            'samples': self.samples,
            'domain': self.domain,
            'scenario_param': self.scenario_param,
            'attrs': self.attrs,
        }
        values.update(changes)
        return SnapshotDataset(**values)

    def to_dict(self):
        """ヘッダ用のメタデータ (サンプル本体は含まない)"""
        return {
            'K': self.num_times - 1,
            'N': self.num_samples,
            'd': self.dimension,
            'domain': self.domain.to_dict(),
            'times': [float(t) for t in self.times],
            'scenario_param': None if self.scenario_param is None else float(self.scenario_param),
            'attrs': self.attrs,
        }


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    """座標ごとのアフィン写像 x_norm = (x - shift) / scale"""

    shift: np.ndarray
    scale: np.ndarray
    degenerate: np.ndarray

    def __post_init__(self):
        shift = np.asarray(self.shift, dtype=np.float64).reshape(-1)
        scale = np.asarray(self.scale, dtype=np.float64).reshape(-1)
        degenerate = np.asarray(self.degenerate, dtype=bool).reshape(-1)
        if not (shift.size == scale.size == degenerate.size):
            raise ValueError("shift, scale and degenerate must share a length")
        if np.any(scale <= 0):
            raise ValueError("scale must be positive")
        object.__setattr__(self, 'shift', shift)
        object.__setattr__(self, 'scale', scale)
        object.__setattr__(self, 'degenerate', degenerate)

    @property
    def dimension(self) -> int:
        return self.shift.size

    @classmethod
    def identity(cls, dimension: int):
        return cls(np.zeros(dimension), np.ones(dimension), np.zeros(dimension, dtype=bool))

    def to_dict(self):
        # float の repr は往復で完全に一致する
        return {
            'shift': [float(v) for v in self.shift],
            'scale': [float(v) for v in self.scale],
            'degenerate': [bool(v) for v in self.degenerate],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(np.array(data['shift']), np.array(data['scale']), np.array(data['degenerate']))
