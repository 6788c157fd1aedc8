"""
学習ループ
Adam + コサイン減衰、1時刻ミニバッチ、チェックポイントの保存・読み込み
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import torch

from ngif.errors import DataError, NumericError
from ngif.models import DomainDescriptor, NormalizationStats
from ngif.objective import LossConfig, loss_terms
from ngif.testbank import TestBank
from ngif.utils.binary_io import read_container, take_block, write_container
from ngif.utils.csv_io import write_csv
from ngif.utils.rng import stream
from ngif.velocity_model import MlpArchitecture, VelocityField

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = 'NGIF-CKPT v1'
TELEMETRY_EVERY = 100
TELEMETRY_COLUMNS = ['iteration', 'lr', 'weak_loss', 'gauge']

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 50000
    learning_rate: float = 5e-4
    seed: int = 0
    loss: LossConfig = LossConfig()
    checkpoint_every: int = 0  # 0 なら途中保存しない

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be > 0")

    @property
    def batch_size(self) -> int:
        return self.loss.batch_size

    def to_dict(self):
        return {
            'iterations': int(self.iterations),
            'learning_rate': float(self.learning_rate),
            'seed': int(self.seed),
            'loss': self.loss.to_dict(),
            'checkpoint_every': int(self.checkpoint_every),
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data['loss'] = LossConfig.from_dict(data.get('loss', {}))
        return cls(**data)


@dataclass(eq=False)
class Checkpoint:
    """
    サンプリング・評価に必要なものをすべて含む学習結果

    domain は正規化前の元の領域 (非正規化に使用)。
    """

    arch: MlpArchitecture
    theta: np.ndarray
    bank: TestBank
    stats: NormalizationStats
    domain: DomainDescriptor
    config: Dict[str, Any]
    iteration: int
    rng_state: Dict[str, Any]
    scenario_params: Optional[List[float]] = None
    telemetry: Optional[pd.DataFrame] = field(default=None, repr=False)

    def velocity_field(self) -> VelocityField:
        """theta を読み込んだ速度場を復元"""
        velocity = VelocityField.from_architecture(self.arch)
        velocity.load_theta(self.theta)
        return velocity

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig.from_dict(self.config['train_config'])

    def header(self):
        return {
            'arch': self.arch.to_dict(),
            'bank': self.bank.to_dict(),
            'stats': self.stats.to_dict(),
            'domain': self.domain.to_dict(),
            'config': self.config,
            'iteration': int(self.iteration),
            'rng_state': self.rng_state,
            'scenario_params': self.scenario_params,
            'num_params': int(self.theta.size),
        }


def adam_step(state: torch.optim.Adam, theta, grad, lr: float):
    """
    Adam の1ステップ (beta1=0.9, beta2=0.999, eps=1e-8, バイアス補正あり)

    Args:
        state: theta を管理する torch.optim.Adam
        theta: パラメータテンソルのリスト
        grad: theta と同じ形の勾配のリスト
        lr: このステップの学習率

    Raises:
        NumericError: 勾配が非有限 (更新は行わない)
    """
    theta = list(theta)
    grad = list(grad)
    if len(theta) != len(grad):
        raise ValueError("theta and grad must have the same number of tensors")
    for index, (p, g) in enumerate(zip(theta, grad)):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {tuple(g.shape)} != parameter shape {tuple(p.shape)}")
        if not torch.all(torch.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter {index}; update skipped")

    for p, g in zip(theta, grad):
        p.grad = g.detach().clone()
    for group in state.param_groups:
        group['lr'] = lr
    state.step()
    state.zero_grad(set_to_none=True)
    return state, theta


def make_optimizer(params, lr: float) -> torch.optim.Adam:
    return torch.optim.Adam(params, lr=lr, betas=ADAM_BETAS, eps=ADAM_EPS)


def cosine_lr(step: int, total: int, lr0: float) -> float:
    """lr0 * (1 + cos(pi * step / total)) / 2"""
    if total <= 0:
        return lr0
    if not 0 <= step <= total:
        raise ValueError(f"step {step} outside [0, {total}]")
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * step / total))


def _rng_state(rng: np.random.Generator):
    """Philox の状態を JSON 化可能な dict に変換"""
    state = rng.bit_generator.state

    def plain(value):
        if isinstance(value, dict):
            return {k: plain(v) for k, v in value.items()}
        if isinstance(value, np.ndarray):
            return [int(v) for v in value]
        if isinstance(value, np.integer):
            return int(value)
        return value

    return plain(state)


def restore_rng(state) -> np.random.Generator:
    """チェックポイントの rng_state から Generator を復元"""
    bit_generator = np.random.Philox()
    restored = dict(state)
    restored['state'] = {k: np.asarray(v, dtype=np.uint64) for k, v in state['state'].items()}
    restored['buffer'] = np.asarray(state['buffer'], dtype=np.uint64)
    bit_generator.state = restored
    return np.random.Generator(bit_generator)


def _draw_minibatch(rng, num_samples: int, batch_size: int):
    if batch_size >= num_samples:
        return np.arange(num_samples)
    return rng.choice(num_samples, size=batch_size, replace=False)


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def train(dataset, bank: TestBank, table, arch: MlpArchitecture, config: TrainConfig,
          stats: NormalizationStats = None, domain: DomainDescriptor = None,
          config_echo: Dict[str, Any] = None, telemetry_path=None, checkpoint_path=None) -> Checkpoint:
    """
    弱形式損失の確率的最適化

    各反復でデータセット (mu 条件付きの場合)、時刻 k、スナップショット k からの
    非復元ミニバッチを順に抽出し、同じバッチで弱形式損失とゲージを評価する。

    Args:
        dataset: 正規化済み SnapshotDataset (mu 条件付き学習ではリスト)
        bank: テスト関数バンク
        table: dataset から計算した MomentTable (リストなら dataset と同じ順)
        arch: ネットワーク構成
        config: 学習設定
        stats: 正規化統計量 (チェックポイントに保存)
        domain: 正規化前の領域
        config_echo: チェックポイントに埋め込む解決済み設定
        telemetry_path: 損失 CSV の出力先 (任意)
        checkpoint_path: 途中保存先 (checkpoint_every > 0 のとき)

    Raises:
        NumericError: 損失が非有限になった場合 (反復番号、k、損失内訳を含む)
    """
    datasets = _as_list(dataset)
    tables = _as_list(table)
    if len(datasets) != len(tables):
        raise DataError(f"{len(datasets)} datasets but {len(tables)} moment tables", code='shape mismatch')
    for ds, tb in zip(datasets, tables):
        if tb.num_tests != bank.num_tests or tb.times.size != ds.num_times:
            raise DataError("moment table was not built from this dataset and bank", code='shape mismatch')
    params_mu = [ds.scenario_param for ds in datasets] if arch.conditional else None
    if arch.conditional and any(p is None for p in params_mu):
        raise DataError("conditional training needs scenario_param on every dataset", code='missing param')

    stats = stats or NormalizationStats.identity(arch.dimension)
    domain = domain or datasets[0].domain
    velocity = VelocityField.from_architecture(arch, config.seed)
    params = velocity.parameters()
    optimizer = make_optimizer(params, config.learning_rate)
    rng = stream(config.seed, 'minibatch')
    echo = dict(config_echo or {})
    echo['train_config'] = config.to_dict()

    def snapshot(iteration):
        return Checkpoint(
            arch=arch, theta=velocity.theta.numpy(), bank=bank, stats=stats, domain=domain,
            config=echo, iteration=iteration, rng_state=_rng_state(rng),
            scenario_params=[float(p) for p in params_mu] if params_mu else None,
        )

    rows = []
    total = config.iterations
    logger.info(f"Training started: iterations={total}, lr={config.learning_rate}, "
                f"batch={config.batch_size}, gauge={config.loss.gauge.kind}({config.loss.gauge.weight}), "
                f"params={velocity.theta.numel()}")

    for iteration in range(total):
        j = int(rng.integers(len(datasets))) if len(datasets) > 1 else 0
        ds, tb = datasets[j], tables[j]
        k = int(rng.integers(ds.num_times))
        idx = _draw_minibatch(rng, ds.num_samples, config.batch_size)
        batch = torch.as_tensor(ds.samples[k][idx])
        mu = params_mu[j] if params_mu else None

        weak, gauge = loss_terms(velocity, k, batch, tb, bank, config.loss, mu)
        loss = weak + config.loss.gauge.weight * gauge
        if not torch.isfinite(loss):
            raise NumericError(
                f"non-finite loss at iteration {iteration}, k={k}: "
                f"weak={weak.item()}, gauge={gauge.item()}, lambda={config.loss.gauge.weight}"
            )
        grads = torch.autograd.grad(loss, params, allow_unused=True)
        grads = [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]
        lr = cosine_lr(iteration, total, config.learning_rate)
        adam_step(optimizer, params, grads, lr)

        if iteration % TELEMETRY_EVERY == 0 or iteration == total - 1:
            rows.append({'iteration': iteration, 'lr': lr, 'weak_loss': weak.item(), 'gauge': gauge.item()})
            logger.info(f"iter {iteration}: lr={lr:.3e} weak={weak.item():.4e} gauge={gauge.item():.4e}")
        if checkpoint_path and config.checkpoint_every and (iteration + 1) % config.checkpoint_every == 0:
            save_checkpoint(snapshot(iteration + 1), checkpoint_path)

    telemetry = pd.DataFrame(rows, columns=TELEMETRY_COLUMNS)
    if telemetry_path:
        write_csv(telemetry, telemetry_path, echo)
        logger.info(f"Telemetry written: {telemetry_path}")

    checkpoint = snapshot(total)
    checkpoint.telemetry = telemetry
    return checkpoint


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    """NGIF-CKPT v1 形式で保存 (theta, 周波数の順)"""
    write_container(path, CHECKPOINT_MAGIC, checkpoint.header(),
                    [checkpoint.theta, checkpoint.bank.frequencies])
    logger.info(f"Checkpoint written: {path} (iteration {checkpoint.iteration})")


def load_checkpoint(path) -> Checkpoint:
    """
    チェックポイントを読み込み

    Raises:
        DataError: マジック不一致、ヘッダ破損、ペイロード長の不整合
    """
    header, payload = read_container(path, CHECKPOINT_MAGIC)
    try:
        arch = MlpArchitecture.from_dict(header['arch'])
        bank_meta = header['bank']
        num_params = int(header['num_params'])
        freq_shape = (int(bank_meta['num_frequencies']), int(bank_meta['dimension']))
        stats = NormalizationStats.from_dict(header['stats'])
        domain = DomainDescriptor.from_dict(header['domain'])
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed checkpoint header in {path}: {e}", code='bad header')

    theta, offset = take_block(payload, 0, (num_params,), path)
    frequencies, offset = take_block(payload, offset, freq_shape, path)
    if offset != payload.size:
        raise DataError(f"payload longer than header declares in {path}", code='shape mismatch')

    return Checkpoint(
        arch=arch,
        theta=theta.copy(),
        bank=TestBank.from_dict(bank_meta, frequencies.copy()),
        stats=stats,
        domain=domain,
        config=header.get('config') or {},
        iteration=int(header['iteration']),
        rng_state=header.get('rng_state') or {},
        scenario_params=header.get('scenario_params'),
    )
