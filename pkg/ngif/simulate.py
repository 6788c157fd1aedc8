"""
学習済み・解析的な速度場によるサンプル生成
決定論的な流れの ODE (RK4) と SDE (Euler-Maruyama)、周期境界での折り返し
"""
import logging
from typing import Callable, Optional

import numpy as np

from ngif.errors import NumericError
from ngif.models import DomainDescriptor
from ngif.utils.rng import stream

logger = logging.getLogger(__name__)

# 単位時間あたりの SDE 既定サブステップ数
DEFAULT_SDE_SUBSTEPS = 200


def wrap_periodic(x, domain: DomainDescriptor):
    """各座標を [lower, lower + period) に折り返す (冪等)"""
    if not domain.is_periodic:
        raise ValueError("wrap_periodic requires a torus domain")
    x = np.asarray(x, dtype=np.float64)
    wrapped = np.mod(x - domain.lower, domain.period)
    # 丸めで period ちょうどになった値は 0 に戻す
    wrapped = np.where(wrapped >= domain.period, 0.0, wrapped)
    return wrapped + domain.lower


def _closure(field) -> Callable:
    if hasattr(field, 'numpy_closure'):
        return field.numpy_closure()
    return field


def _check_state(x, t):
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite state at t={t}")


def _check_grid(t_grid, substeps):
    t_grid = np.asarray(t_grid, dtype=np.float64).reshape(-1)
    if t_grid.size == 0:
        raise ValueError("time grid must not be empty")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    if int(substeps) < 1:
        raise ValueError("substeps must be >= 1")
    return t_grid, int(substeps)


def rk4_step(u, x, t, h):
    k1 = u(x, t)
    k2 = u(x + 0.5 * h * k1, t + 0.5 * h)
    k3 = u(x + 0.5 * h * k2, t + 0.5 * h)
    k4 = u(x + h * k3, t + h)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_ode(field, x0, t_grid, substeps: int = 10, domain: Optional[DomainDescriptor] = None):
    """
    古典的4次 Runge-Kutta で dx/dt = u(x, t) を積分

    Args:
        field: VelocityField / AnalyticField、または numpy クロージャ u(x [n, d], t) -> [n, d]
        x0: 初期点 [N, d]
        t_grid: 出力時刻 (狭義単調増加)
        substeps: 出力時刻の間の固定ステップ数
        domain: トーラスなら各ステップ後に折り返す

    Returns:
        np.ndarray: 軌道 [T_steps, N, d] (先頭は x0)
    """
    t_grid, substeps = _check_grid(t_grid, substeps)
    u = _closure(field)
    periodic = domain is not None and domain.is_periodic
    x = np.array(x0, dtype=np.float64)
    if periodic:
        x = wrap_periodic(x, domain)
    out = np.empty((t_grid.size,) + x.shape)
    out[0] = x
    for i in range(1, t_grid.size):
        t0 = t_grid[i - 1]
        h = (t_grid[i] - t0) / substeps
        for s in range(substeps):
            t = t0 + s * h
            x = rk4_step(u, x, t, h)
            if periodic:
                x = wrap_periodic(x, domain)
            _check_state(x, t + h)
        out[i] = x
    return out


def integrate_sde(field, x0, t_grid, diffusion: float, substeps: int = DEFAULT_SDE_SUBSTEPS,
                  seed: int = 0, domain: Optional[DomainDescriptor] = None):
    """
    Euler-Maruyama 法: x <- x + u dt + eps sqrt(dt) xi

    乱数は 'sde' ストリームから引くので同じシードなら同じ結果になる。
    diffusion = 0 では前進 Euler 法になる。

    Returns:
        np.ndarray: 各出力時刻のサンプル [T_steps, N, d]
    """
    if diffusion < 0:
        raise ValueError("diffusion must be >= 0")
    t_grid, substeps = _check_grid(t_grid, substeps)
    u = _closure(field)
    periodic = domain is not None and domain.is_periodic
    rng = stream(seed, 'sde')
    x = np.array(x0, dtype=np.float64)
    if periodic:
        x = wrap_periodic(x, domain)
    out = np.empty((t_grid.size,) + x.shape)
    out[0] = x
    for i in range(1, t_grid.size):
        t0 = t_grid[i - 1]
        dt = (t_grid[i] - t0) / substeps
        for s in range(substeps):
            t = t0 + s * dt
            x = x + u(x, t) * dt
            if diffusion > 0:
                x = x + diffusion * np.sqrt(dt) * rng.standard_normal(x.shape)
            if periodic:
                x = wrap_periodic(x, domain)
            _check_state(x, t + dt)
        out[i] = x
    return out


def normalized_closure(field, stats, mu=None) -> Callable:
    """
    正規化座標で学習した場を元の座標系で使うクロージャに変換

    u_raw(x, t) = scale * u_norm((x - shift) / scale, t)
    """
    u = field.numpy_closure(mu) if hasattr(field, 'numpy_closure') else field

    def closure(x, t):
        return stats.scale * u((x - stats.shift) / stats.scale, t)

    return closure
