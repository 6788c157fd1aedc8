import configparser
import logging
import math
import os

from dotenv import load_dotenv

from ngif.errors import ConfigError

# 環境変数を読み込み
load_dotenv()

logger = logging.getLogger(__name__)

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


def validate_config():
    """重要な環境変数が正しい値かチェック"""
    invalid_vars = []

    threads = os.getenv('NGIF_THREADS')
    if threads is not None and (not threads.isdigit() or int(threads) < 1):
        invalid_vars.append('NGIF_THREADS')

    level = os.getenv('NGIF_LOG_LEVEL', 'INFO')
    if level.upper() not in LOG_LEVELS:
        invalid_vars.append('NGIF_LOG_LEVEL')

    seed = os.getenv('NGIF_DEFAULT_SEED', '0')
    if not seed.isdigit():
        invalid_vars.append('NGIF_DEFAULT_SEED')

    if invalid_vars:
        raise ValueError(f"Invalid environment variables: {', '.join(invalid_vars)}")


class Config:
    # 並列数 (未設定なら torch の既定値)
    THREADS = int(os.getenv('NGIF_THREADS')) if (os.getenv('NGIF_THREADS') or '').isdigit() else None

    # ログ設定
    LOG_LEVEL = os.getenv('NGIF_LOG_LEVEL', 'INFO').upper()

    # 出力先
    OUTPUT_DIR = os.getenv('NGIF_OUTPUT_DIR', 'runs')

    # マスターシード
    DEFAULT_SEED = int(os.getenv('NGIF_DEFAULT_SEED', '0')) if os.getenv('NGIF_DEFAULT_SEED', '0').isdigit() else 0


# 実行設定の既定値 (セクション -> キー -> 値)。None は「未設定」
DEFAULTS = {
    'problem': {
        'name': None,
        'seed': Config.DEFAULT_SEED,
        'output': 'dataset.ngif',
    },
    'bank': {
        'num_tests': 2000,
        'sigma_min': None,  # 未設定ならメディアンヒューリスティック
        'sigma_max': None,
        'num_bands': 3,
        'seed': Config.DEFAULT_SEED,
    },
    'model': {
        'kind': 'vector',
        'width': 196,
        'depth': 7,
        'harmonics': 4,
        'conditional': False,
    },
    'train': {
        'iterations': 50000,
        'learning_rate': 5e-4,
        'batch_size': 256,
        'gauge': 'none',
        'gauge_weight': 0.0,
        'diffusion': 0.0,
        'loss_tolerance': 1e-8,
        'spline_penalty': 1e-5,
        'checkpoint_every': 0,
        'seed': Config.DEFAULT_SEED,
    },
    'sample': {
        'integrator': 'auto',
        'substeps': 200,
        'num_samples': None,  # 未設定ならデータセットの N
        'diffusion': None,  # 未設定ならチェックポイントの値
        'seed': Config.DEFAULT_SEED,
    },
    'evaluate': {
        'bins': 64,
        'metrics': 'tv',
        'sensitivity': True,
    },
}

# 問題ごとの既定値
PROBLEM_DEFAULTS = {
    'gigli': {
        'problem': {
            'components': 8,
            'angular_velocity': 1.0,
            'component_std': 0.1,
            'num_samples': 4000,
            'num_steps': 40,
            't_end': 2 * math.pi,
        },
        'bank': {'sigma_min': 0.05, 'sigma_max': 0.05, 'num_bands': 1},
        'train': {'gauge': 'curl', 'gauge_weight': 1e-3, 'batch_size': 512},
    },
    'tracer': {
        'problem': {
            'num_samples': 10000,
            'num_steps': 20,
            't_end': 4.0,
            'substeps': 20,
        },
        'model': {'harmonics': 4},
        'train': {'gauge': 'divergence', 'gauge_weight': 1e-3, 'batch_size': 512},
        'evaluate': {'metrics': 'tv'},
    },
    'vlasov': {
        'problem': {
            'instability': 'two_stream',
            'debye_lengths': '1.5',
            'num_particles': 20000,
            'grid_size': 64,
            'box_length': None,
            't_end': 30.0,
            'num_steps': 60,
            'dt': 0.1,
            'stream_speed': 1.0,
            'thermal_spread': 0.2,
            'amplitude': 0.01,
            'mode': 1,
            'bump_fraction': 0.1,
            'bump_speed': None,
            'bump_spread': None,
            'quiet_start': True,
        },
        'train': {'gauge': 'curl', 'gauge_weight': 1e-3, 'batch_size': 1024},
        'evaluate': {'metrics': 'energy'},
    },
}

_TRUE = {'1', 'yes', 'true', 'on'}
_FALSE = {'0', 'no', 'false', 'off'}


def _coerce(section, key, value, default):
    """文字列の設定値を既定値の型に変換"""
    if not isinstance(value, str):
        return value
    text = value.strip()
    if text.lower() in ('none', ''):
        return None
    try:
        if isinstance(default, bool):
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {section}.{key}: {value!r}", code=f"{section}.{key}")
    if default is None:
        # 既定値のないキーは数値として読めれば数値にする
        try:
            return float(text)
        except ValueError:
            return text
    return text


class RunConfig:
    """
    1回の実行設定 (INI 形式)

    解決順: 組み込み既定値 -> 問題ごとの既定値 -> ファイル -> コマンドライン上書き
    """

    def __init__(self, values):
        self._values = values

    @classmethod
    def load(cls, path=None, overrides=None):
        """
        設定ファイルと上書き指定から RunConfig を作成

        Args:
            path: INI ファイルのパス (None ならファイルなし)
            overrides: {'section.key': value} の上書き

        Raises:
            ConfigError: ファイルが読めない、未知のセクション、値の型不一致
        """
        raw = {}
        if path is not None:
            parser = configparser.ConfigParser()
            try:
                with open(path, encoding='utf-8') as f:
                    parser.read_file(f)
            except (OSError, configparser.Error) as e:
                raise ConfigError(f"cannot read config {path}: {e}")
            for section in parser.sections():
                raw[section] = dict(parser.items(section))
        for dotted, value in (overrides or {}).items():
            if '.' not in dotted:
                raise ConfigError(f"override must look like section.key=value, got {dotted!r}")
            section, key = dotted.split('.', 1)
            raw.setdefault(section, {})[key] = value

        for section in raw:
            if section not in DEFAULTS:
                raise ConfigError(f"unknown config section: [{section}]", code=section)

        name = raw.get('problem', {}).get('name')
        name = name.strip() if isinstance(name, str) else name
        if name and name not in PROBLEM_DEFAULTS:
            raise ConfigError(f"unknown problem: {name} (choose from {', '.join(PROBLEM_DEFAULTS)})",
                              code='problem.name')

        values = {section: dict(keys) for section, keys in DEFAULTS.items()}
        for section, keys in PROBLEM_DEFAULTS.get(name, {}).items():
            values[section].update(keys)
        for section, keys in raw.items():
            for key, value in keys.items():
                if key not in values[section]:
                    logger.warning(f"Unknown config key {section}.{key}")
                values[section][key] = _coerce(section, key, value, values[section].get(key))
        return cls(values)

    def get(self, section, key, default=None):
        return self._values.get(section, {}).get(key, default)

    def require(self, section, key):
        """必須キーを取得。未設定なら ConfigError (キー名付き)"""
        value = self.get(section, key)
        if value is None:
            raise ConfigError(f"missing required config key: {section}.{key}", code=f"{section}.{key}")
        return value

    def section(self, name):
        return dict(self._values.get(name, {}))

    @property
    def problem_name(self):
        return self.require('problem', 'name')

    def to_dict(self):
        """出力ヘッダに埋め込む解決済み設定"""
        return {section: dict(keys) for section, keys in self._values.items()}
