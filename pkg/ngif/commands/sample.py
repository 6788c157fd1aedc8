import logging
import math

import numpy as np

from ngif.commands import Command, load_run_config, output_path, with_config_arguments
from ngif.dataset import denormalize_points, load_dataset, normalized_domain, save_dataset
from ngif.errors import ConfigError, DataError
from ngif.models import SnapshotDataset
from ngif.simulate import integrate_ode, integrate_sde
from ngif.trainer import load_checkpoint
from ngif.utils.rng import stream

logger = logging.getLogger(__name__)

INTEGRATORS = ('auto', 'ode', 'sde')

sample_cmd = with_config_arguments(Command('sample', 'generate samples from a trained checkpoint'))
sample_cmd.argument('checkpoint', help='checkpoint path')
sample_cmd.argument('dataset', help='dataset whose t_0 samples and times are used')
sample_cmd.argument('--output', '-o', help='generated dataset path')
sample_cmd.argument('--diffusion', type=float, help='noise amplitude (default: value used in training)')
sample_cmd.argument('--substeps', type=int, help='integration steps per unit time')
sample_cmd.argument('--num-samples', type=int, help='number of generated samples (default: N of the dataset)')
sample_cmd.argument('--seed', type=int, help='seed for resampling and noise')
sample_cmd.argument('--mu', type=float, help='Debye length for a conditional model (default: dataset value)')


def steps_per_interval(times, per_unit_time):
    """出力時刻の間のステップ数 (最大間隔に合わせる)"""
    if len(times) < 2:
        return 1
    return max(1, int(math.ceil(per_unit_time * float(np.max(np.diff(times))) - 1e-9)))


def generate_samples(checkpoint, dataset, diffusion=None, substeps=200, num_samples=None, seed=0,
                     integrator='auto', mu=None):
    """
    学習済みの場で dataset の t_0 サンプルから各時刻のサンプルを生成

    積分は正規化座標で行い (時間は元の単位)、結果を元の座標に戻す。

    Returns:
        SnapshotDataset: dataset と同じ時刻を持つ生成データ
    """
    if integrator not in INTEGRATORS:
        raise ConfigError(f"Unknown integrator: {integrator} (choose from {', '.join(INTEGRATORS)})")
    if dataset.dimension != checkpoint.arch.dimension:
        raise DataError(f"dataset dimension {dataset.dimension} != model dimension {checkpoint.arch.dimension}",
                        code='shape mismatch')
    if diffusion is None:
        diffusion = checkpoint.train_config.loss.diffusion
    if checkpoint.arch.conditional:
        mu = mu if mu is not None else dataset.scenario_param
        if mu is None:
            raise ConfigError("conditional model needs a Debye length (--mu)")

    x0 = dataset.samples[0]
    n_out = int(num_samples) if num_samples else dataset.num_samples
    if n_out != dataset.num_samples:
        idx = stream(seed, 'resample').choice(dataset.num_samples, size=n_out, replace=True)
        x0 = x0[idx]

    stats = checkpoint.stats
    domain = normalized_domain(checkpoint.domain)
    closure = checkpoint.velocity_field().numpy_closure(mu)
    start = (x0 - stats.shift) / stats.scale
    steps = steps_per_interval(dataset.times, substeps)

    use_sde = integrator == 'sde' or (integrator == 'auto' and diffusion > 0)
    if use_sde:
        trajectories = integrate_sde(closure, start, dataset.times, diffusion, steps, seed, domain)
    else:
        trajectories = integrate_ode(closure, start, dataset.times, steps, domain)
    logger.info(f"Sampled {n_out} particles with {'SDE' if use_sde else 'ODE'} "
                f"(diffusion={diffusion}, steps per interval={steps})")

    return SnapshotDataset(
        times=dataset.times,
        samples=denormalize_points(trajectories, stats),
        domain=checkpoint.domain,
        scenario_param=mu if mu is not None else dataset.scenario_param,
        attrs={k: v for k, v in dataset.attrs.items() if k != 'config'},
    )


@sample_cmd.route
def sample(args):
    """チェックポイントからサンプルを生成して保存"""
    config = load_run_config(args)
    section = config.section('sample')
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)

    generated = generate_samples(
        checkpoint,
        dataset,
        diffusion=args.diffusion if args.diffusion is not None else section['diffusion'],
        substeps=args.substeps or int(section['substeps']),
        num_samples=args.num_samples or section['num_samples'],
        seed=args.seed if args.seed is not None else int(section['seed']),
        integrator=section['integrator'],
        mu=args.mu,
    )
    generated = generated.replace(attrs=dict(generated.attrs, generated=True, config=config.to_dict()))
    path = output_path(args.output, 'generated.ngif')
    save_dataset(generated, path)
    print(f"{path}: K={generated.num_times - 1}, N={generated.num_samples}, d={generated.dimension}")
    return 0
