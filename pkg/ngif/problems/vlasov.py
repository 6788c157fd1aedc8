"""
1次元 Vlasov-Poisson 系の粒子シミュレーション (二流体不安定性・バンプオンテイル不安定性)

    d/dt [x1, x2] = [x2, d phi/d x1],   -mu^2 phi'' = 1 - n

n は粒子密度 (平均 1 に正規化)。電荷は最近接格子点 (NGP) に割り当て、
周期格子上の2階中心差分を FFT で厳密に解く。粒子はリープフロッグ
(kick-drift-kick) で押す。初期条件は一般的な設定の再構成。
"""
import logging
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy import fft

from ngif.models import EUCLIDEAN, DomainDescriptor, SnapshotDataset
from ngif.utils.rng import stream

logger = logging.getLogger(__name__)

TWO_STREAM = 'two_stream'
BUMP_ON_TAIL = 'bump_on_tail'
INSTABILITIES = (TWO_STREAM, BUMP_ON_TAIL)

MEAN_TOLERANCE = 1e-10

# 学習用とテスト用の Debye 長
TRAIN_DEBYE_LENGTHS = tuple(np.round(np.arange(1.2, 1.95, 0.1), 2))
TEST_DEBYE_LENGTHS = (1.25, 1.85)


@dataclass(frozen=True)
class VlasovConfig:
    instability: str = TWO_STREAM
    debye_length: float = 1.5
    num_particles: int = 20000
    grid_size: int = 64
    box_length: Optional[float] = None  # None なら 4 pi mu
    t_end: float = 30.0
    num_steps: int = 60  # 出力スナップショット数 K
    dt: float = 0.1
    stream_speed: float = 1.0
    thermal_spread: float = 0.2
    amplitude: float = 0.01
    mode: int = 1
    bump_fraction: float = 0.1
    bump_speed: Optional[float] = None  # None なら 3 sigma_v
    bump_spread: Optional[float] = None  # None なら sigma_v / 2
    quiet_start: bool = True

    def __post_init__(self):
        if self.instability not in INSTABILITIES:
            raise ValueError(f"Unknown instability: {self.instability}")
        if not self.debye_length > 0:
            raise ValueError("Debye length must be > 0")
        if self.grid_size < 16 or self.grid_size % 2:
            raise ValueError("grid size must be even and >= 16")
        if abs(self.amplitude) > 0.1:
            raise ValueError("perturbation amplitude must be <= 0.1")
        if self.num_particles < 1 or self.num_steps < 0 or not self.dt > 0:
            raise ValueError("num_particles >= 1, num_steps >= 0 and dt > 0 are required")
        if self.mode < 1:
            raise ValueError("mode number must be >= 1")
        if not 0 <= self.bump_fraction < 1:
            raise ValueError("bump fraction must be in [0, 1)")

    @property
    def length(self) -> float:
        return self.box_length if self.box_length is not None else 4 * np.pi * self.debye_length

    @property
    def times(self):
        if self.num_steps == 0:
            return np.zeros(1)
        return np.linspace(0.0, self.t_end, self.num_steps + 1)

    def to_dict(self):
        data = asdict(self)
        data['box_length'] = self.length
        return data


def poisson_solve_1d(rhs, mu: float, box_length: float):
    """
    周期格子上で -mu^2 D2 phi = rhs を解く (phi の平均は 0)

    D2 は2階中心差分。固有値 (4/dx^2) sin^2(pi k / G) で割る厳密解。
    rhs の平均が 0 でなければ差し引いて警告する。

    Returns:
        tuple: (phi [G], d phi/d x1 [G] (中心差分))
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    grid = rhs.size
    dx = box_length / grid
    mean = rhs.mean()
    if abs(mean) > MEAN_TOLERANCE:
        logger.warning(f"Poisson right-hand side has mean {mean:.3e}; subtracting it")
    rhs = rhs - mean

    k = np.arange(grid // 2 + 1)
    eigen = mu ** 2 * (4.0 / dx ** 2) * np.sin(np.pi * k / grid) ** 2
    rhs_hat = fft.rfft(rhs)
    phi_hat = np.zeros_like(rhs_hat)
    phi_hat[1:] = rhs_hat[1:] / eigen[1:]
    phi = fft.irfft(phi_hat, n=grid)
    dphi = (np.roll(phi, -1) - np.roll(phi, 1)) / (2.0 * dx)
    return phi, dphi


def deposit(positions, grid_size: int, box_length: float):
    """最近接格子点への割り当て。平均 1 の密度 n [G] を返す"""
    dx = box_length / grid_size
    cells = np.floor(np.mod(positions, box_length) / dx).astype(np.int64) % grid_size
    counts = np.bincount(cells, minlength=grid_size)
    return counts * grid_size / positions.size, cells


def field_energy(dphi, mu: float, box_length: float) -> float:
    """E = mu^2/2 * int |d phi/d x1|^2 dx1 (周期格子上の台形則)"""
    dphi = np.asarray(dphi, dtype=np.float64)
    dx = box_length / dphi.size
    return float(0.5 * mu ** 2 * dx * np.sum(dphi ** 2))


def electric_energy(positions, mu: float, grid_size: int, box_length: float) -> float:
    """粒子位置 x1 から電場エネルギーを計算"""
    density, _ = deposit(np.asarray(positions, dtype=np.float64), grid_size, box_length)
    _, dphi = poisson_solve_1d(1.0 - density, mu, box_length)
    return field_energy(dphi, mu, box_length)


def self_consistent_acceleration(mu: float, grid_size: int, box_length: float) -> Callable:
    """粒子位置 -> 加速度 d phi/d x1 (NGP 補間)"""
    def acceleration(positions):
        density, cells = deposit(positions, grid_size, box_length)
        _, dphi = poisson_solve_1d(1.0 - density, mu, box_length)
        return dphi[cells]
    return acceleration


def leapfrog_step(position, velocity, acceleration, dt: float, accel_fn: Callable, box_length: float):
    """
    kick-drift-kick の1ステップ

    Returns:
        tuple: (position, velocity, 新しい位置での acceleration)
    """
    velocity = velocity + 0.5 * dt * acceleration
    position = np.mod(position + dt * velocity, box_length)
    acceleration = accel_fn(position)
    velocity = velocity + 0.5 * dt * acceleration
    return position, velocity, acceleration


def _initial_positions(config: VlasovConfig, rng):
    """密度 1 + alpha cos(k x) に従う位置。quiet_start なら逆累積分布を格子点で評価"""
    L, n = config.length, config.num_particles
    k = 2 * np.pi * config.mode / L
    alpha = config.amplitude
    if config.quiet_start:
        target = (np.arange(n) + 0.5) * L / n
        x = target.copy()
        # F(x) = x + (alpha/k) sin(kx) は単調なので Newton 法が収束する
        for _ in range(20):
            x = x - (x + alpha / k * np.sin(k * x) - target) / (1.0 + alpha * np.cos(k * x))
        return np.mod(x, L)
    positions = np.empty(0)
    while positions.size < n:
        candidate = rng.uniform(0.0, L, size=2 * n)
        accept = rng.uniform(0.0, 1.0 + abs(alpha), size=2 * n) < 1.0 + alpha * np.cos(k * candidate)
        positions = np.concatenate([positions, candidate[accept]])
    return positions[:n]


def _initial_velocities(config: VlasovConfig, rng):
    n, sigma = config.num_particles, config.thermal_spread
    if config.instability == TWO_STREAM:
        # 偶数番目と奇数番目で逆向きのビーム (quiet start でも両ビームが一様になる)
        signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        return signs * config.stream_speed + sigma * rng.standard_normal(n)
    bump_speed = config.bump_speed if config.bump_speed is not None else 3.0 * sigma
    bump_spread = config.bump_spread if config.bump_spread is not None else 0.5 * sigma
    in_bump = rng.uniform(size=n) < config.bump_fraction
    return np.where(in_bump,
                    bump_speed + bump_spread * rng.standard_normal(n),
                    sigma * rng.standard_normal(n))


def gen_vlasov(config: VlasovConfig, seed: int = 0) -> SnapshotDataset:
    """
    粒子を初期化してリープフロッグで押し、出力時刻ごとに対応を捨てたスナップショットを記録

    scenario_param には Debye 長 mu を入れる。
    """
    rng = stream(seed, 'data')
    L, mu = config.length, config.debye_length
    times = config.times
    accel_fn = self_consistent_acceleration(mu, config.grid_size, L)

    position = _initial_positions(config, rng)
    velocity = _initial_velocities(config, rng)
    acceleration = accel_fn(position)

    samples = np.empty((times.size, config.num_particles, 2))
    samples[0] = np.column_stack([position, velocity])
    for i in range(1, times.size):
        interval = times[i] - times[i - 1]
        steps = max(1, int(np.ceil(interval / config.dt - 1e-9)))
        dt = interval / steps
        for _ in range(steps):
            position, velocity, acceleration = leapfrog_step(position, velocity, acceleration, dt, accel_fn, L)
        samples[i] = np.column_stack([position, velocity])[rng.permutation(config.num_particles)]

    logger.info(f"Vlasov data generated: {config.instability}, mu={mu}, N={config.num_particles}, "
                f"K={times.size - 1}, L={L:.4f}")
    attrs = {'problem': 'vlasov', **config.to_dict()}
    return SnapshotDataset(times=times, samples=samples, domain=DomainDescriptor(EUCLIDEAN, 2),
                           scenario_param=float(mu), attrs=attrs)


def energy_series(samples, mu: float, grid_size: int, box_length: float):
    """各スナップショットの電場エネルギー [T_steps]"""
    return np.array([electric_energy(snapshot[:, 0], mu, grid_size, box_length) for snapshot in samples])
