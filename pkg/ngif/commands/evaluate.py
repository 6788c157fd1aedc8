import logging

import numpy as np
import pandas as pd

from ngif.commands import Command, load_run_config, output_path, sibling_path, with_config_arguments
from ngif.dataset import load_dataset
from ngif.errors import ConfigError, DataError
from ngif.metrics import DEFAULT_BINS, SENSITIVITY_BINS, energy_rel_error, field_rel_l2, tv_curve
from ngif.problems import reference_field
from ngif.problems.vlasov import energy_series
from ngif.simulate import normalized_closure
from ngif.trainer import load_checkpoint
from ngif.utils.csv_io import write_csv

logger = logging.getLogger(__name__)

METRICS = ('tv', 'energy', 'field')
REPORT_COLUMNS = ['series', 't', 'value']

evaluate_cmd = with_config_arguments(Command('evaluate', 'compare generated samples with ground truth'))
evaluate_cmd.argument('generated', help='generated dataset')
evaluate_cmd.argument('truth', help='ground-truth dataset')
evaluate_cmd.argument('--metrics', help='comma-separated subset of tv,energy,field')
evaluate_cmd.argument('--checkpoint', help='checkpoint (needed for the field metric)')
evaluate_cmd.argument('--bins', type=int, help='histogram bins per axis for TV')
evaluate_cmd.argument('--output', '-o', help='report CSV path (series, t, value)')


def check_grids(generated, truth):
    if generated.num_times != truth.num_times or not np.array_equal(generated.times, truth.times):
        raise DataError("generated and reference time grids differ", code='grid mismatch')
    if generated.dimension != truth.dimension:
        raise DataError("generated and reference dimensions differ", code='shape mismatch')


def _rows(series, times, values):
    return [{'series': series, 't': float(t), 'value': float(v)} for t, v in zip(times, values)]


def compute_metrics(generated, truth, metrics, bins=DEFAULT_BINS, sensitivity=True, checkpoint=None):
    """
    指定された指標を計算

    Returns:
        tuple: (長形式 DataFrame [series, t, value], 要約 dict)
    """
    check_grids(generated, truth)
    rows = []
    summary = {}
    times = truth.times

    for metric in metrics:
        if metric not in METRICS:
            raise ConfigError(f"Unknown metric: {metric} (choose from {', '.join(METRICS)})")

    if 'tv' in metrics:
        curve = tv_curve(generated.samples, truth.samples, bins, truth.domain)
        rows += _rows('tv', times, curve)
        summary['tv_mean'] = float(curve.mean())
        summary['tv_final'] = float(curve[-1])
        if sensitivity:
            for b in SENSITIVITY_BINS:
                if b == bins:
                    continue
                extra = tv_curve(generated.samples, truth.samples, b, truth.domain)
                rows += _rows(f"tv_{b}", times, extra)
                summary[f"tv_mean_{b}"] = float(extra.mean())

    if 'energy' in metrics:
        attrs = truth.attrs
        if truth.scenario_param is None or 'grid_size' not in attrs:
            raise DataError("energy metric needs a Vlasov reference dataset", code='not vlasov')
        grid, length = int(attrs['grid_size']), float(attrs['box_length'])
        e_true = energy_series(truth.samples, truth.scenario_param, grid, length)
        e_pred = energy_series(generated.samples, truth.scenario_param, grid, length)
        rows += _rows('energy_true', times, e_true) + _rows('energy_pred', times, e_pred)
        summary['e_rel'] = energy_rel_error(e_pred, e_true, times)

    if 'field' in metrics:
        reference = reference_field(truth)
        if reference is None:
            raise DataError("field metric needs a problem with an analytic velocity field", code='no reference')
        if checkpoint is None:
            raise ConfigError("field metric needs --checkpoint")
        mu = truth.scenario_param if checkpoint.arch.conditional else None
        learned = normalized_closure(checkpoint.velocity_field(), checkpoint.stats, mu)
        errors = [field_rel_l2(learned, reference, snapshot, t) for t, snapshot in zip(times, truth.samples)]
        rows += _rows('field_rel_l2', times, errors)
        summary['field_rel_l2'] = float(np.mean(errors))

    return pd.DataFrame(rows, columns=REPORT_COLUMNS), summary


@evaluate_cmd.route
def evaluate(args):
    """指標の曲線 CSV と要約を書き出す"""
    config = load_run_config(args)
    section = config.section('evaluate')
    metrics = [m.strip() for m in (args.metrics or section['metrics']).split(',') if m.strip()]
    generated = load_dataset(args.generated)
    truth = load_dataset(args.truth)
    checkpoint = load_checkpoint(args.checkpoint) if args.checkpoint else None

    report, summary = compute_metrics(generated, truth, metrics, bins=args.bins or int(section['bins']),
                                      sensitivity=bool(section['sensitivity']), checkpoint=checkpoint)
    path = output_path(args.output, 'report.csv')
    echo = {'run': config.to_dict(), 'metrics': metrics, 'generated': args.generated, 'truth': args.truth,
            'checkpoint': args.checkpoint}
    write_csv(report, path, echo)
    write_csv(pd.DataFrame({'metric': list(summary), 'value': list(summary.values())}),
              sibling_path(path, '.summary.csv'), echo)
    logger.info(f"Report written: {path}")
    for name, value in summary.items():
        print(f"{name}: {value:.6g}")
    return 0
