"""
トーラス上の非定常な発散ゼロ流れに乗るトレーサ粒子
流れ関数 psi から v = (d2 psi, -d1 psi) を作るので発散は厳密に 0
"""
import logging

import numpy as np

from ngif.models import TORUS, DomainDescriptor, SnapshotDataset
from ngif.simulate import integrate_ode
from ngif.utils.rng import stream

logger = logging.getLogger(__name__)

TRACER_DOMAIN = DomainDescriptor(TORUS, 2, period=2 * np.pi, lower=0.0)
DEFAULT_SUBSTEPS = 20


def tracer_stream_function(x, t, xp=np):
    """psi = sin x1 cos(x2 + sin 0.7t) + 0.6 cos(2x1 + 0.9t) sin x2 + 0.3 sin(3x2 + 1.3t)"""
    x1, x2 = x[..., 0], x[..., 1]
    return (xp.sin(x1) * xp.cos(x2 + xp.sin(0.7 * t))
            + 0.6 * xp.cos(2 * x1 + 0.9 * t) * xp.sin(x2)
            + 0.3 * xp.sin(3 * x2 + 1.3 * t))


def tracer_field(x, t, xp=np):
    """
    v = (d psi/d x2, -d psi/d x1)

    xp に torch を渡せば自動微分可能なテンソル演算になる。
    """
    if xp is not np:
        t = xp.as_tensor(t, dtype=x.dtype)
    x1, x2 = x[..., 0], x[..., 1]
    s = xp.sin(0.7 * t)
    d1 = xp.cos(x1) * xp.cos(x2 + s) - 1.2 * xp.sin(2 * x1 + 0.9 * t) * xp.sin(x2)
    d2 = (-xp.sin(x1) * xp.sin(x2 + s)
          + 0.6 * xp.cos(2 * x1 + 0.9 * t) * xp.cos(x2)
          + 0.9 * xp.cos(3 * x2 + 1.3 * t))
    return xp.stack([d2, -d1], -1)


def normalized_tracer_field(stats, xp=np):
    """
    正規化座標での解析場 u_n(x_n, t) = v(scale * x_n + shift, t) / scale
    """
    def closure(x, t):
        if xp is np:
            scale, shift = stats.scale, stats.shift
        else:
            scale = xp.as_tensor(stats.scale, dtype=x.dtype)
            shift = xp.as_tensor(stats.shift, dtype=x.dtype)
        return tracer_field(x * scale + shift, t, xp) / scale
    return closure


def gen_tracer(num_samples: int, t_grid, seed: int = 0, substeps: int = DEFAULT_SUBSTEPS) -> SnapshotDataset:
    """
    (pi, pi) 中心の標準ガウスから出発して RK4 で移流し、t_grid で記録

    保存時は粒子の対応を捨てる (各スナップショットを独立に並べ替える)。
    """
    t_grid = np.asarray(t_grid, dtype=np.float64).reshape(-1)
    rng = stream(seed, 'data')
    x0 = np.pi + rng.standard_normal((int(num_samples), 2))
    trajectories = integrate_ode(tracer_field, x0, t_grid, substeps, domain=TRACER_DOMAIN)
    for k in range(1, t_grid.size):
        trajectories[k] = trajectories[k][rng.permutation(trajectories.shape[1])]
    logger.info(f"Tracer data generated: K={t_grid.size - 1}, N={num_samples}")
    return SnapshotDataset(times=t_grid, samples=trajectories, domain=TRACER_DOMAIN,
                           attrs={'problem': 'tracer', 'substeps': int(substeps)})
