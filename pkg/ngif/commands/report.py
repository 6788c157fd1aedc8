import logging
import os

import pandas as pd

from ngif.commands import Command, output_path
from ngif.dataset import apply_stats, load_dataset
from ngif.errors import DataError
from ngif.moments import DEFAULT_SPLINE_PENALTY, precompute_table
from ngif.objective import empirical_objective
from ngif.trainer import TELEMETRY_COLUMNS, load_checkpoint
from ngif.utils.csv_io import read_csv, write_csv

logger = logging.getLogger(__name__)

report_cmd = Command('report', 'collect telemetry and metric CSVs into one plot-ready table')
report_cmd.argument('inputs', nargs='*', help='telemetry or evaluate CSV files')
report_cmd.argument('--checkpoint', help='checkpoint for the full-data objective')
report_cmd.argument('--dataset', help='dataset for the full-data objective and moment dump')
report_cmd.argument('--moments', help='also write the moment table (t, test, mu, mu_dot, lap) here')
report_cmd.argument('--output', '-o', help='combined CSV path (series, t, value)')

LONG_COLUMNS = ['series', 't', 'value']


def to_long(frame, source):
    """テレメトリ CSV または evaluate の CSV を (series, t, value) に変換"""
    if list(frame.columns) == LONG_COLUMNS:
        return frame
    if list(frame.columns) == TELEMETRY_COLUMNS:
        long = frame.melt(id_vars='iteration', value_vars=['lr', 'weak_loss', 'gauge'],
                          var_name='series', value_name='value')
        return long.rename(columns={'iteration': 't'})[LONG_COLUMNS]
    if {'t', 'energy'} <= set(frame.columns):
        return frame.assign(series='energy').rename(columns={'energy': 'value'})[LONG_COLUMNS]
    raise DataError(f"unrecognised CSV layout in {source}: {list(frame.columns)}", code='bad header')


def objective_rows(checkpoint, dataset, moments_path=None):
    """全データでの目的関数の内訳 (series=objective_*, t=学習反復数)"""
    spline_penalty = float(checkpoint.config.get('train', {}).get('spline_penalty', DEFAULT_SPLINE_PENALTY))
    normalized = apply_stats(dataset, checkpoint.stats)
    table = precompute_table(normalized, checkpoint.bank, spline_penalty)
    if moments_path:
        write_csv(table.to_frame(), moments_path, {'config': checkpoint.config, 'spline_penalty': spline_penalty})
        logger.info(f"Moment table written: {moments_path}")
    loss = checkpoint.train_config.loss
    mu = dataset.scenario_param if checkpoint.arch.conditional else None
    values = empirical_objective(checkpoint.velocity_field(), normalized, table, checkpoint.bank, loss, mu)
    return pd.DataFrame([{'series': f"objective_{name}", 't': float(checkpoint.iteration), 'value': value}
                         for name, value in values.items()], columns=LONG_COLUMNS)


@report_cmd.route
def report(args):
    """CSV を (series, t, value) の長形式にまとめる"""
    frames = []
    for path in args.inputs:
        frame = to_long(read_csv(path), path)
        prefix = os.path.splitext(os.path.basename(path))[0]
        frames.append(frame.assign(series=prefix + ':' + frame['series']))

    if args.checkpoint and args.dataset:
        frames.append(objective_rows(load_checkpoint(args.checkpoint), load_dataset(args.dataset),
                                     args.moments))

    combined = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=LONG_COLUMNS)
    path = output_path(args.output, 'combined.csv')
    echo = {'inputs': list(args.inputs), 'checkpoint': args.checkpoint, 'dataset': args.dataset}
    write_csv(combined, path, echo)
    print(f"{path}: {len(combined)} rows, {combined['series'].nunique()} series")
    return 0
