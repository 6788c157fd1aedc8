"""
弱形式残差とゲージ正則化
L_k = (1/M) sum_r l(target_r, T_r),  l(a, b) = (a - b)^2 / (a^2 + b^2 + eps_loss)
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np
import torch

from ngif.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

GAUGE_NONE = 'none'
GAUGE_KINETIC = 'kinetic'
GAUGE_CURL = 'curl'
GAUGE_DIVERGENCE = 'divergence'

DEFAULT_LOSS_TOLERANCE = 1e-8

DTYPE = torch.float64


@dataclass(frozen=True)
class GaugeSpec:
    kind: str = GAUGE_NONE
    weight: float = 0.0

    def __post_init__(self):
        if self.kind not in (GAUGE_NONE, GAUGE_KINETIC, GAUGE_CURL, GAUGE_DIVERGENCE):
            raise ValueError(f"Unknown gauge: {self.kind}")
        if not (np.isfinite(self.weight) and self.weight >= 0):
            raise ValueError("gauge weight must be finite and >= 0")


@dataclass(frozen=True)
class LossConfig:
    diffusion: float = 0.0
    loss_tolerance: float = DEFAULT_LOSS_TOLERANCE
    gauge: GaugeSpec = GaugeSpec()
    batch_size: int = 256

    def __post_init__(self):
        if self.diffusion < 0:
            raise ValueError("diffusion must be >= 0")
        if not self.loss_tolerance > 0:
            raise ValueError("loss tolerance must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data['gauge'] = GaugeSpec(**data.get('gauge', {}))
        return cls(**data)


def dual_relative(a, b, tolerance: float = DEFAULT_LOSS_TOLERANCE):
    """双相対誤差 (a - b)^2 / (a^2 + b^2 + tol) (要素ごと)"""
    if not tolerance > 0:
        raise ValueError("tolerance must be > 0")
    return (a - b) ** 2 / (a ** 2 + b ** 2 + tolerance)


def _as_tensor(x):
    return torch.as_tensor(np.asarray(x) if not torch.is_tensor(x) else x, dtype=DTYPE)


def transport_term(field, batch, t, bank, mu=None, weights=None):
    """
    T_r = mean_i grad phi_r(x_i) . u(x_i, t)   ([M] テンソル)

    weights を渡すと一様平均の代わりに重み付き和 (求積) になる。
    """
    x = _as_tensor(batch)
    if x.shape[0] == 0:
        raise ValueError("transport term needs a nonempty batch")
    freqs = torch.as_tensor(bank.frequencies, dtype=DTYPE)
    u = field(x, t, mu)
    proj = x @ freqs.T
    flow = u @ freqs.T  # w_i . u
    sin_part = torch.cos(proj) * flow
    cos_part = -torch.sin(proj) * flow
    if weights is None:
        sin_mean, cos_mean = sin_part.mean(0), cos_part.mean(0)
    else:
        w = _as_tensor(weights)[:, None]
        sin_mean, cos_mean = (w * sin_part).sum(0), (w * cos_part).sum(0)
    return torch.stack([sin_mean, cos_mean], dim=-1).reshape(-1)


def weak_loss_at_time(field, k, batch, table, bank, config: LossConfig, mu=None, weights=None):
    """時刻 t_k の弱形式損失 L_k (拡散項はターゲット側に畳み込む)"""
    if table.num_tests != bank.num_tests:
        raise DataError(f"moment table has {table.num_tests} tests, bank has {bank.num_tests}",
                        code='shape mismatch')
    target = torch.as_tensor(table.targets(k, config.diffusion), dtype=DTYPE)
    transport = transport_term(field, batch, float(table.times[k]), bank, mu, weights)
    return dual_relative(target, transport, config.loss_tolerance).mean()


def gauge_kinetic(field, batch, t, mu=None):
    """(1/|B|) sum 1/2 |u|^2"""
    u = field(_as_tensor(batch), t, mu)
    return 0.5 * (u ** 2).sum(-1).mean()


def gauge_curl(field, batch, t, mu=None):
    """(1/|B|) sum 1/2 |J - J^T|_F^2"""
    jac = field.jacobian(_as_tensor(batch), t, mu)
    anti = jac - jac.transpose(-1, -2)
    return 0.5 * (anti ** 2).sum((-1, -2)).mean()


def gauge_divergence(field, batch, t, mu=None):
    """(1/|B|) sum (div u)^2"""
    return (field.divergence(_as_tensor(batch), t, mu) ** 2).mean()


# ゲージを追加するときはここに1関数登録すれば良い
GAUGES = {
    GAUGE_KINETIC: gauge_kinetic,
    GAUGE_CURL: gauge_curl,
    GAUGE_DIVERGENCE: gauge_divergence,
}


def gauge_value(field, batch, t, gauge: GaugeSpec, mu=None):
    if gauge.kind == GAUGE_NONE:
        return torch.zeros((), dtype=DTYPE)
    return GAUGES[gauge.kind](field, batch, t, mu)


def loss_terms(field, k, batch, table, bank, config: LossConfig, mu=None, weights=None):
    """(弱形式損失, ゲージ値) の組"""
    weak = weak_loss_at_time(field, k, batch, table, bank, config, mu, weights)
    if config.gauge.kind == GAUGE_NONE or config.gauge.weight == 0:
        return weak, torch.zeros((), dtype=DTYPE)
    return weak, gauge_value(field, batch, float(table.times[k]), config.gauge, mu)


def total_loss(field, k, batch, table, bank, config: LossConfig, mu=None, weights=None):
    """弱形式損失 + lambda * ゲージ (同じバッチで評価)"""
    weak, gauge = loss_terms(field, k, batch, table, bank, config, mu, weights)
    return weak + config.gauge.weight * gauge


def empirical_objective(field, dataset, table, bank, config: LossConfig, mu=None, chunk: int = 4096):
    """
    全時刻・全サンプルでの目的関数 (1/(K+1)) sum_k L_k + lambda * G (診断用)

    Returns:
        dict: weak, gauge, total (float)
    """
    weak_total = 0.0
    gauge_total = 0.0
    for k in range(dataset.num_times):
        points = dataset.samples[k]
        t = float(dataset.times[k])
        transport = torch.zeros(bank.num_tests, dtype=DTYPE)
        gauge_sum = 0.0
        for start in range(0, points.shape[0], chunk):
            part = points[start:start + chunk]
            share = part.shape[0] / points.shape[0]
            transport = transport + share * transport_term(field, part, t, bank, mu).detach()
            if config.gauge.kind != GAUGE_NONE:
                gauge_sum += share * float(gauge_value(field, part, t, config.gauge, mu).detach())
        target = torch.as_tensor(table.targets(k, config.diffusion), dtype=DTYPE)
        weak_total += float(dual_relative(target, transport, config.loss_tolerance).mean())
        gauge_total += gauge_sum
    weak = weak_total / dataset.num_times
    gauge = gauge_total / dataset.num_times
    return {'weak': weak, 'gauge': gauge, 'total': weak + config.gauge.weight * gauge}


def resolve_gauge(kind: str, weight: float, field_kind: str = 'vector') -> GaugeSpec:
    """
    設定値から GaugeSpec を作る

    'none' に正の重みが指定された場合は警告して lambda = 0 にする。

    Raises:
        ConfigError: 未知のゲージ、またはポテンシャル型と curl の組み合わせ
    """
    if kind != GAUGE_NONE and kind not in GAUGES:
        raise ConfigError(f"Unknown gauge: {kind} (choose from none, {', '.join(GAUGES)})")
    if kind == GAUGE_NONE and weight:
        logger.warning(f"Gauge 'none' with weight {weight}: forcing weight to 0")
        weight = 0.0
    if field_kind == 'potential' and kind == GAUGE_CURL:
        # 勾配場のヤコビアンは常に対称なので curl ゲージは無意味
        raise ConfigError("curl gauge is vacuous for a potential field")
    if weight < 0:
        raise ConfigError(f"gauge weight must be >= 0, got {weight}")
    return GaugeSpec(kind, float(weight))
