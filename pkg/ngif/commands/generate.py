import logging

import pandas as pd

from ngif.commands import Command, load_run_config, output_path, sibling_path, with_config_arguments
from ngif.dataset import save_dataset
from ngif.problems import generate as generate_problem
from ngif.problems.vlasov import energy_series
from ngif.utils.csv_io import write_csv

logger = logging.getLogger(__name__)

generate_cmd = with_config_arguments(Command('generate', 'generate a ground-truth dataset'))
generate_cmd.argument('--output', '-o', help='dataset path (vlasov appends _mu<value> per Debye length)')


def write_energy_csv(dataset, path):
    """Vlasov データの正解エネルギー系列 (t, energy)"""
    attrs = dataset.attrs
    energy = energy_series(dataset.samples, dataset.scenario_param, int(attrs['grid_size']),
                           float(attrs['box_length']))
    write_csv(pd.DataFrame({'t': dataset.times, 'energy': energy}), path, attrs.get('config'))
    logger.info(f"Energy series written: {path}")
    return energy


@generate_cmd.route
def generate(args):
    """設定に従ってデータセット (vlasov はエネルギー CSV も) を書き出す"""
    config = load_run_config(args)
    name = config.problem_name
    params = config.section('problem')
    datasets = generate_problem(name, params, int(params['seed']))

    base = output_path(args.output or params.get('output'), f"{name}.ngif")
    for dataset in datasets:
        path = base
        if name == 'vlasov':
            path = sibling_path(base, f"_mu{dataset.scenario_param:g}.ngif")
        dataset = dataset.replace(attrs=dict(dataset.attrs, config=config.to_dict()))
        save_dataset(dataset, path)
        if name == 'vlasov':
            write_energy_csv(dataset, sibling_path(path, '.energy.csv'))
        print(f"{path}: K={dataset.num_times - 1}, N={dataset.num_samples}, d={dataset.dimension}, "
              f"domain={dataset.domain.kind}")
    return 0
