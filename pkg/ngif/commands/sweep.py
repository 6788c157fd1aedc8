import logging

import pandas as pd

from ngif.commands import Command, load_run_config, output_path, with_config_arguments
from ngif.commands.evaluate import compute_metrics
from ngif.commands.sample import generate_samples
from ngif.commands.train import fit_model
from ngif.config import RunConfig
from ngif.dataset import load_dataset
from ngif.objective import GAUGES
from ngif.problems import parse_list
from ngif.utils.cache import get_cache_stats
from ngif.utils.csv_io import write_csv

logger = logging.getLogger(__name__)

DEFAULT_WEIGHTS = '1e-5,1e-4,1e-3,1e-2'

# 問題ごとの比較指標 (evaluate の要約キー)
SWEEP_METRIC = {
    'vlasov': ('energy', 'e_rel'),
    'tracer': ('tv', 'tv_mean'),
    'gigli': ('field', 'field_rel_l2'),
}

sweep_cmd = with_config_arguments(Command('sweep', 'train/sample/evaluate over gauges and weights'))
sweep_cmd.argument('dataset', help='training dataset (also the reference for evaluation)')
sweep_cmd.argument('--gauges', default=','.join(GAUGES), help='comma-separated gauges')
sweep_cmd.argument('--weights', default=DEFAULT_WEIGHTS, help='comma-separated gauge weights')
sweep_cmd.argument('--output', '-o', help='table CSV path (rows: weight, columns: gauge)')


def run_sweep(base: RunConfig, dataset, gauges, weights, problem):
    """
    各 (ゲージ, 重み) で学習・サンプル生成・評価を行う

    モーメントテーブルは theta に依存しないのでキャッシュを再利用する。

    Returns:
        pd.DataFrame: 長形式 (gauge, weight, metric)
    """
    metric, key = SWEEP_METRIC[problem]
    sample_section = base.section('sample')
    rows = []
    for gauge in gauges:
        for weight in weights:
            values = base.to_dict()
            values['train'] = dict(values['train'], gauge=gauge, gauge_weight=float(weight))
            config = RunConfig(values)
            checkpoint = fit_model(config, [dataset])
            generated = generate_samples(
                checkpoint, dataset,
                diffusion=sample_section['diffusion'],
                substeps=int(sample_section['substeps']),
                seed=int(sample_section['seed']),
                integrator=sample_section['integrator'],
            )
            _, summary = compute_metrics(generated, dataset, [metric], sensitivity=False, checkpoint=checkpoint)
            logger.info(f"Sweep {gauge} lambda={weight:g}: {key}={summary[key]:.4g}")
            rows.append({'gauge': gauge, 'weight': float(weight), key: summary[key]})
    logger.info(f"Moment table cache: {get_cache_stats()['hits']} hits")
    return pd.DataFrame(rows, columns=['gauge', 'weight', key])


@sweep_cmd.route
def sweep(args):
    """重みを行、ゲージを列にした表を書き出す"""
    config = load_run_config(args)
    problem = config.problem_name
    dataset = load_dataset(args.dataset)
    gauges = [g.strip() for g in args.gauges.split(',') if g.strip()]
    weights = parse_list(args.weights)

    results = run_sweep(config, dataset, gauges, weights, problem)
    key = results.columns[-1]
    table = results.pivot(index='weight', columns='gauge', values=key).reindex(columns=gauges)
    path = output_path(args.output, 'sweep.csv')
    write_csv(table, path, {'run': config.to_dict(), 'gauges': gauges, 'weights': weights}, index=True)
    print(table.to_string())
    return 0
