"""
円周上を回転するガウス混合
速度場 v(x) = omega * (-x2, x1) と、同じ周辺分布を生むポテンシャル phi_N
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np

from ngif.models import EUCLIDEAN, DomainDescriptor, SnapshotDataset
from ngif.utils.rng import stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GigliConfig:
    components: int = 8
    angular_velocity: float = 1.0
    component_std: float = 0.1
    num_samples: int = 4000
    num_steps: int = 40  # K
    t_end: float = 2 * np.pi

    def __post_init__(self):
        if self.components < 1:
            raise ValueError("components must be >= 1")
        if not self.component_std > 0:
            raise ValueError("component_std must be > 0")
        if self.num_samples < 1 or self.num_steps < 0:
            raise ValueError("num_samples must be >= 1 and num_steps >= 0")

    @property
    def times(self):
        if self.num_steps == 0:
            return np.zeros(1)
        return np.linspace(0.0, self.t_end, self.num_steps + 1)

    def to_dict(self):
        return asdict(self)


def gigli_field(x, angular_velocity: float = 1.0, xp=np):
    """v(x) = omega * Omega x,  Omega = [[0, -1], [1, 0]]"""
    return angular_velocity * xp.stack([-x[..., 1], x[..., 0]], -1)


def gigli_potential(x, t, components: int, angular_velocity: float = 1.0):
    """
    phi_N(t, x) = omega / N * r^N * sin(N (theta - omega t))

    x = 0 では極限値 0 を返す。
    """
    x = np.asarray(x, dtype=np.float64)
    r = np.hypot(x[..., 0], x[..., 1])
    theta = np.arctan2(x[..., 1], x[..., 0])
    value = angular_velocity / components * r ** components * np.sin(components * (theta - angular_velocity * t))
    return np.where(r == 0, 0.0, value)


def component_means(config: GigliConfig, t: float):
    """時刻 t における各成分の平均 [N_comp, 2]"""
    angles = 2 * np.pi * np.arange(config.components) / config.components + config.angular_velocity * t
    return np.stack([np.cos(angles), np.sin(angles)], axis=-1)


def gen_gigli(config: GigliConfig, seed: int = 0) -> SnapshotDataset:
    """各時刻で成分を一様に選び、回転した平均まわりの等方ガウスからサンプル"""
    rng = stream(seed, 'data')
    times = config.times
    samples = np.empty((times.size, config.num_samples, 2))
    for k, t in enumerate(times):
        labels = rng.integers(config.components, size=config.num_samples)
        noise = rng.standard_normal((config.num_samples, 2))
        samples[k] = component_means(config, t)[labels] + config.component_std * noise
    logger.info(f"Gigli data generated: K={times.size - 1}, N={config.num_samples}, "
                f"components={config.components}")
    return SnapshotDataset(times=times, samples=samples, domain=DomainDescriptor(EUCLIDEAN, 2),
                           attrs={'problem': 'gigli', **config.to_dict()})
