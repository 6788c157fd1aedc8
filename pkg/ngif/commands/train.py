import logging

from ngif.commands import Command, load_run_config, output_path, sibling_path, with_config_arguments
from ngif.dataset import apply_stats, compute_stats, load_dataset
from ngif.errors import ConfigError
from ngif.moments import cached_table
from ngif.objective import LossConfig, resolve_gauge
from ngif.testbank import log_spaced_bandwidths, median_heuristic_bandwidth, sample_bank
from ngif.trainer import TrainConfig, save_checkpoint, train as run_training
from ngif.velocity_model import FIELD_KINDS, MlpArchitecture

logger = logging.getLogger(__name__)

train_cmd = with_config_arguments(Command('train', 'train a velocity field on snapshot data'))
train_cmd.argument('datasets', nargs='+', help='dataset file(s); several files train a mu-conditioned model')
train_cmd.argument('--output', '-o', help='checkpoint path')


def build_bank(config, dataset):
    """
    テスト関数バンクを構築

    sigma_min / sigma_max が未設定ならメディアンヒューリスティックから
    [sigma_med / 10, 10 sigma_med] を使う。
    """
    section = config.section('bank')
    sigma_min, sigma_max = section['sigma_min'], section['sigma_max']
    if sigma_min is None or sigma_max is None:
        sigma_med = median_heuristic_bandwidth(dataset, seed=int(section['seed']))
        sigma_min = sigma_min if sigma_min is not None else sigma_med / 10.0
        sigma_max = sigma_max if sigma_max is not None else sigma_med * 10.0
        logger.info(f"Median heuristic bandwidth {sigma_med:.4g}: window [{sigma_min:.4g}, {sigma_max:.4g}]")
    bandwidths = log_spaced_bandwidths(float(sigma_min), float(sigma_max), int(section['num_bands']))
    return sample_bank(bandwidths, int(section['num_tests']), dataset.dimension, dataset.domain,
                       int(section['seed']))


def build_architecture(config, dataset, conditional):
    section = config.section('model')
    kind = section['kind']
    if kind not in FIELD_KINDS:
        raise ConfigError(f"Unknown model kind: {kind} (choose from {', '.join(FIELD_KINDS)})", code='model.kind')
    t_end = float(dataset.times[-1])
    return MlpArchitecture(
        dimension=dataset.dimension,
        width=int(section['width']),
        depth=int(section['depth']),
        harmonics=int(section['harmonics']),
        period=dataset.domain.period if dataset.domain.is_periodic else None,
        conditional=conditional,
        kind=kind,
        time_scale=1.0 / t_end if t_end > 0 else 1.0,
    )


def build_train_config(config, field_kind):
    section = config.section('train')
    gauge = resolve_gauge(section['gauge'], float(section['gauge_weight']), field_kind)
    loss = LossConfig(
        diffusion=float(section['diffusion']),
        loss_tolerance=float(section['loss_tolerance']),
        gauge=gauge,
        batch_size=int(section['batch_size']),
    )
    return TrainConfig(
        iterations=int(section['iterations']),
        learning_rate=float(section['learning_rate']),
        seed=int(section['seed']),
        loss=loss,
        checkpoint_every=int(section['checkpoint_every']),
    )


def fit_model(config, datasets, checkpoint_path=None, telemetry_path=None):
    """
    正規化 -> バンク -> モーメントテーブル -> 学習 の一連の処理

    Returns:
        Checkpoint
    """
    stats = compute_stats(datasets)
    normalized = [apply_stats(ds, stats) for ds in datasets]
    domain = datasets[0].domain
    conditional = bool(config.get('model', 'conditional')) or len(datasets) > 1

    bank = build_bank(config, normalized[0])
    penalty = float(config.get('train', 'spline_penalty'))
    tables = [cached_table(ds, bank, penalty) for ds in normalized]
    arch = build_architecture(config, normalized[0], conditional)
    train_config = build_train_config(config, arch.kind)

    return run_training(
        normalized if conditional else normalized[0],
        bank,
        tables if conditional else tables[0],
        arch,
        train_config,
        stats=stats,
        domain=domain,
        config_echo=config.to_dict(),
        telemetry_path=telemetry_path,
        checkpoint_path=checkpoint_path,
    )


@train_cmd.route
def train(args):
    """データを読み込んで学習し、チェックポイントと損失 CSV を書き出す"""
    config = load_run_config(args)
    datasets = [load_dataset(path) for path in args.datasets]

    path = output_path(args.output, 'checkpoint.ngif')
    telemetry = sibling_path(path, '.telemetry.csv')
    checkpoint = fit_model(config, datasets, checkpoint_path=path, telemetry_path=telemetry)
    save_checkpoint(checkpoint, path)
    print(f"{path}: iterations={checkpoint.iteration}, params={checkpoint.theta.size}, "
          f"gauge={config.get('train', 'gauge')}")
    return 0
