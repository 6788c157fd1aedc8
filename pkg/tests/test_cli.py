"""
CLI の結合テスト
小さな設定で generate -> train -> sample -> evaluate -> report を通す
"""
import numpy as np
import pytest

from ngif.app import main
from ngif.dataset import load_dataset
from ngif.trainer import load_checkpoint
from ngif.utils.csv_io import read_config_echo, read_csv

GIGLI = ['--set', 'problem.name=gigli', '--set', 'problem.components=2', '--set', 'problem.num_samples=60',
         '--set', 'problem.num_steps=4']

TINY_TRAIN = ['--set', 'train.iterations=3', '--set', 'train.batch_size=16', '--set', 'model.width=8',
              '--set', 'model.depth=2', '--set', 'bank.num_tests=8']


def _sets(*items):
    return [arg for item in items for arg in ('--set', item)]


@pytest.fixture
def gigli_run(tmp_path):
    data = tmp_path / 'gigli.ngif'
    ckpt = tmp_path / 'model.ngif'
    assert main(['generate', *GIGLI, '-o', str(data)]) == 0
    assert main(['train', *GIGLI, *TINY_TRAIN, str(data), '-o', str(ckpt)]) == 0
    return tmp_path, data, ckpt


class TestPipeline:
    def test_generate_train_sample_evaluate(self, gigli_run):
        tmp_path, data, ckpt = gigli_run
        checkpoint = load_checkpoint(ckpt)
        assert checkpoint.iteration == 3
        assert checkpoint.train_config.loss.gauge.kind == 'curl'
        telemetry = read_csv(tmp_path / 'model.telemetry.csv')
        assert list(telemetry['iteration']) == [0, 2]

        generated = tmp_path / 'generated.ngif'
        assert main(['sample', str(ckpt), str(data), '--substeps', '5', '-o', str(generated)]) == 0
        truth = load_dataset(data)
        sampled = load_dataset(generated)
        assert sampled.samples.shape == truth.samples.shape
        np.testing.assert_allclose(sampled.samples[0], truth.samples[0], rtol=1e-12, atol=1e-12)

        report = tmp_path / 'report.csv'
        assert main(['evaluate', str(generated), str(data), '--metrics', 'tv,field', '--checkpoint', str(ckpt),
                     '-o', str(report)]) == 0
        frame = read_csv(report)
        assert list(frame.columns) == ['series', 't', 'value']
        assert {'tv', 'field_rel_l2'} <= set(frame['series'])
        assert frame.loc[frame['series'] == 'tv', 'value'].between(0, 1).all()
        summary = read_csv(tmp_path / 'report.summary.csv')
        assert {'tv_mean', 'tv_final', 'field_rel_l2'} <= set(summary['metric'])

        combined = tmp_path / 'combined.csv'
        assert main(['report', str(tmp_path / 'model.telemetry.csv'), str(report), '--checkpoint', str(ckpt),
                     '--dataset', str(data), '--moments', str(tmp_path / 'moments.csv'), '-o', str(combined)]) == 0
        series = set(read_csv(combined)['series'])
        assert 'model.telemetry:weak_loss' in series
        assert 'report:tv' in series
        assert 'objective_weak' in series
        assert {'t', 'test', 'mu', 'mu_dot', 'lap'} <= set(read_csv(tmp_path / 'moments.csv').columns)

    def test_resampled_sde(self, gigli_run):
        tmp_path, data, ckpt = gigli_run
        generated = tmp_path / 'noisy.ngif'
        assert main(['sample', str(ckpt), str(data), '--substeps', '5', '--diffusion', '0.1',
                     '--num-samples', '25', '--seed', '4', '-o', str(generated)]) == 0
        assert load_dataset(generated).num_samples == 25

    def test_vlasov_writes_one_dataset_per_debye_length(self, tmp_path):
        base = tmp_path / 'vlasov.ngif'
        args = _sets('problem.name=vlasov', 'problem.debye_lengths=1.5,1.6', 'problem.num_particles=400',
                     'problem.grid_size=16', 'problem.t_end=0.5', 'problem.num_steps=5')
        assert main(['generate', *args, '-o', str(base)]) == 0
        for mu in ('1.5', '1.6'):
            dataset = load_dataset(tmp_path / f"vlasov_mu{mu}.ngif")
            assert dataset.scenario_param == pytest.approx(float(mu))
            energy = read_csv(tmp_path / f"vlasov_mu{mu}.energy.csv")
            assert list(energy.columns) == ['t', 'energy']
            assert len(energy) == dataset.num_times
            assert read_config_echo(tmp_path / f"vlasov_mu{mu}.energy.csv")['problem']['name'] == 'vlasov'

        report = tmp_path / 'energy.csv'
        path = str(tmp_path / 'vlasov_mu1.5.ngif')
        assert main(['evaluate', path, path, '--metrics', 'energy', '-o', str(report)]) == 0
        summary = read_csv(tmp_path / 'energy.summary.csv')
        assert summary.loc[summary['metric'] == 'e_rel', 'value'].iloc[0] == 0.0

    def test_sweep_table(self, gigli_run):
        tmp_path, data, _ = gigli_run
        table = tmp_path / 'sweep.csv'
        assert main(['sweep', str(data), *GIGLI, *TINY_TRAIN, '--set', 'sample.substeps=5',
                     '--gauges', 'kinetic,curl', '--weights', '1e-3,1e-2', '-o', str(table)]) == 0
        frame = read_csv(table, index_col='weight')
        assert list(frame.columns) == ['kinetic', 'curl']
        assert list(frame.index) == [1e-3, 1e-2]
        assert read_config_echo(table)['gauges'] == ['kinetic', 'curl']

    def test_every_csv_starts_with_config_echo(self, gigli_run):
        tmp_path, data, ckpt = gigli_run
        report = tmp_path / 'echo_report.csv'
        combined = tmp_path / 'echo_combined.csv'
        assert main(['evaluate', str(data), str(data), '--metrics', 'tv', '-o', str(report)]) == 0
        assert main(['report', str(tmp_path / 'model.telemetry.csv'), str(report), '--checkpoint', str(ckpt),
                     '--dataset', str(data), '--moments', str(tmp_path / 'echo_moments.csv'),
                     '-o', str(combined)]) == 0
        for name in ('model.telemetry.csv', 'echo_report.csv', 'echo_report.summary.csv', 'echo_moments.csv',
                     'echo_combined.csv'):
            first = (tmp_path / name).read_text(encoding='utf-8').splitlines()[0]
            assert first.startswith('# config: {')
        assert read_config_echo(tmp_path / 'model.telemetry.csv')['problem']['name'] == 'gigli'
        assert read_config_echo(report)['metrics'] == ['tv']
        assert read_config_echo(combined)['checkpoint'] == str(ckpt)

    def test_check_config(self, tmp_path, capsys):
        path = tmp_path / 'run.ini'
        path.write_text('[problem]\nname = tracer\n', encoding='utf-8')
        assert main(['check-config', str(path)]) == 0
        assert 'gauge = divergence' in capsys.readouterr().out


class TestExitCodes:
    def test_missing_problem_name(self, tmp_path):
        assert main(['generate', '-o', str(tmp_path / 'x.ngif')]) == 2

    def test_bad_override(self, tmp_path):
        assert main(['generate', '--set', 'problem.name', '-o', str(tmp_path / 'x.ngif')]) == 2

    def test_bad_environment(self, monkeypatch):
        monkeypatch.setenv('NGIF_LOG_LEVEL', 'LOUD')
        assert main(['check-config']) == 2

    def test_missing_dataset(self, tmp_path):
        assert main(['train', *TINY_TRAIN, str(tmp_path / 'absent.ngif'), '-o', str(tmp_path / 'm.ngif')]) == 3

    def test_grid_mismatch(self, tmp_path):
        a, b = tmp_path / 'a.ngif', tmp_path / 'b.ngif'
        assert main(['generate', *GIGLI, '-o', str(a)]) == 0
        assert main(['generate', *GIGLI, '--set', 'problem.num_steps=5', '-o', str(b)]) == 0
        assert main(['evaluate', str(a), str(b), '--metrics', 'tv', '-o', str(tmp_path / 'r.csv')]) == 3

    def test_curl_gauge_on_potential_field(self, gigli_run):
        tmp_path, data, _ = gigli_run
        args = [*TINY_TRAIN, *_sets('model.kind=potential', 'train.gauge=curl')]
        assert main(['train', *args, str(data), '-o', str(tmp_path / 'p.ngif')]) == 2

    def test_none_gauge_with_weight_warns(self, gigli_run, caplog):
        tmp_path, data, _ = gigli_run
        ckpt = tmp_path / 'plain.ngif'
        args = [*GIGLI, *TINY_TRAIN, *_sets('train.gauge=none', 'train.gauge_weight=0.5')]
        assert main(['train', *args, str(data), '-o', str(ckpt)]) == 0
        assert 'forcing weight to 0' in caplog.text
        assert load_checkpoint(ckpt).train_config.loss.gauge.weight == 0.0
