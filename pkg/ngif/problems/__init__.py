"""
組み込み問題の登録
設定セクションからデータ生成器を呼び出し、解析的な参照速度場を返す
"""
import numpy as np

from ngif.errors import ConfigError
from ngif.problems.gigli import GigliConfig, gen_gigli, gigli_field
from ngif.problems.tracer import gen_tracer, tracer_field
from ngif.problems.vlasov import VlasovConfig, gen_vlasov

PROBLEMS = ('gigli', 'tracer', 'vlasov')


def _pick(params, names):
    return {name: params[name] for name in names if params.get(name) is not None}


def parse_list(value):
    """'1.2, 1.3' のようなカンマ区切りを float のリストに"""
    if isinstance(value, (int, float)):
        return [float(value)]
    try:
        return [float(v) for v in str(value).split(',') if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {value!r}")


def generate(name, params, seed=0):
    """
    問題名と [problem] セクションからデータセットを生成

    Returns:
        list: SnapshotDataset のリスト (vlasov は Debye 長ごとに1つ)

    Raises:
        ConfigError: 未知の問題、不正なパラメータ
    """
    try:
        if name == 'gigli':
            config = GigliConfig(
                components=int(params['components']),
                angular_velocity=float(params['angular_velocity']),
                component_std=float(params['component_std']),
                num_samples=int(params['num_samples']),
                num_steps=int(params['num_steps']),
                t_end=float(params['t_end']),
            )
            return [gen_gigli(config, seed)]
        if name == 'tracer':
            times = np.linspace(0.0, float(params['t_end']), int(params['num_steps']) + 1)
            return [gen_tracer(int(params['num_samples']), times, seed, int(params['substeps']))]
        if name == 'vlasov':
            datasets = []
            for mu in parse_list(params['debye_lengths']):
                fields = _pick(params, ['instability', 't_end', 'dt', 'stream_speed', 'thermal_spread',
                                        'amplitude', 'bump_fraction', 'bump_speed', 'bump_spread',
                                        'box_length', 'quiet_start'])
                config = VlasovConfig(
                    debye_length=mu,
                    num_particles=int(params['num_particles']),
                    grid_size=int(params['grid_size']),
                    num_steps=int(params['num_steps']),
                    mode=int(params['mode']),
                    **fields,
                )
                datasets.append(gen_vlasov(config, seed))
            return datasets
    except KeyError as e:
        raise ConfigError(f"missing required config key: problem.{e.args[0]}", code=f"problem.{e.args[0]}")
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad {name} parameters: {e}")
    raise ConfigError(f"unknown problem: {name} (choose from {', '.join(PROBLEMS)})", code='problem.name')


def reference_field(dataset, xp=np):
    """
    データセットの生成元の解析的速度場 v(x, t) (元の座標系)

    Returns:
        callable または None (解析場のない問題)
    """
    problem = dataset.attrs.get('problem')
    if problem == 'gigli':
        omega = float(dataset.attrs.get('angular_velocity', 1.0))
        return lambda x, t: gigli_field(x, omega, xp)
    if problem == 'tracer':
        return lambda x, t: tracer_field(x, t, xp)
    return None
