import pytest

from ngif.commands import load_run_config
from ngif.config import RunConfig, validate_config
from ngif.errors import ConfigError


def _write(tmp_path, text):
    path = tmp_path / 'run.ini'
    path.write_text(text, encoding='utf-8')
    return path


class TestValidateConfig:
    def test_defaults_pass(self, monkeypatch):
        for name in ('NGIF_THREADS', 'NGIF_LOG_LEVEL', 'NGIF_DEFAULT_SEED'):
            monkeypatch.delenv(name, raising=False)
        validate_config()

    @pytest.mark.parametrize('name, value', [
        ('NGIF_THREADS', 'many'),
        ('NGIF_THREADS', '0'),
        ('NGIF_LOG_LEVEL', 'LOUD'),
        ('NGIF_DEFAULT_SEED', '-3'),
    ])
    def test_invalid_values(self, monkeypatch, name, value):
        monkeypatch.setenv(name, value)
        with pytest.raises(ValueError) as e:
            validate_config()
        assert name in str(e.value)


class TestRunConfig:
    def test_builtin_defaults(self):
        config = RunConfig.load()
        assert config.get('train', 'iterations') == 50000
        assert config.get('train', 'learning_rate') == 5e-4
        assert config.get('bank', 'num_tests') == 2000
        assert config.get('bank', 'sigma_min') is None

    def test_problem_defaults(self):
        config = RunConfig.load(overrides={'problem.name': 'tracer'})
        assert config.get('train', 'gauge') == 'divergence'
        assert config.get('train', 'gauge_weight') == 1e-3
        assert config.get('problem', 'substeps') == 20

    def test_resolution_order(self, tmp_path):
        path = _write(tmp_path, '[problem]\nname = gigli\n\n[train]\ngauge_weight = 0.01\niterations = 10\n')
        config = RunConfig.load(path, {'train.iterations': '20'})
        assert config.get('train', 'gauge') == 'curl'
        assert config.get('train', 'gauge_weight') == 0.01
        assert config.get('train', 'iterations') == 20

    def test_typed_values(self, tmp_path):
        path = _write(tmp_path, '[model]\nconditional = yes\n\n[sample]\nnum_samples = 500\ndiffusion = none\n')
        config = RunConfig.load(path)
        assert config.get('model', 'conditional') is True
        assert config.get('sample', 'num_samples') == 500.0
        assert config.get('sample', 'diffusion') is None

    def test_bad_value_names_the_key(self):
        with pytest.raises(ConfigError) as e:
            RunConfig.load(overrides={'train.iterations': 'lots'})
        assert e.value.code == 'train.iterations'

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(_write(tmp_path, '[database]\nurl = x\n'))

    def test_unknown_problem(self):
        with pytest.raises(ConfigError) as e:
            RunConfig.load(overrides={'problem.name': 'landau'})
        assert e.value.code == 'problem.name'

    def test_unknown_key_warns(self, caplog):
        RunConfig.load(overrides={'train.momentum': '0.9'})
        assert 'train.momentum' in caplog.text

    def test_missing_problem_name(self):
        with pytest.raises(ConfigError) as e:
            RunConfig.load().problem_name
        assert 'problem.name' in str(e.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(tmp_path / 'absent.ini')

    def test_to_dict_is_a_copy(self):
        config = RunConfig.load()
        values = config.to_dict()
        values['train']['iterations'] = 1
        assert config.get('train', 'iterations') == 50000


class TestCommandOverrides:
    class Args:
        config = None

        def __init__(self, overrides):
            self.overrides = overrides

    def test_set_arguments(self):
        config = load_run_config(self.Args(['train.batch_size=64', 'problem.name=gigli']))
        assert config.get('train', 'batch_size') == 64
        assert config.problem_name == 'gigli'

    def test_malformed_override(self):
        with pytest.raises(ConfigError):
            load_run_config(self.Args(['train.batch_size']))
