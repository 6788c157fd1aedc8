"""
CLI サブコマンド
各モジュールが Command を1つ定義し、app.create_app() で登録する
"""
import os

from ngif.config import Config, RunConfig
from ngif.errors import ConfigError


class Command:
    """argparse のサブパーサと処理関数の組"""

    def __init__(self, name, help):
        self.name = name
        self.help = help
        self.handler = None
        self._arguments = []

    def argument(self, *args, **kwargs):
        self._arguments.append((args, kwargs))
        return self

    def route(self, func):
        """処理関数を登録するデコレータ"""
        self.handler = func
        return func

    def attach(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        for args, kwargs in self._arguments:
            parser.add_argument(*args, **kwargs)
        parser.set_defaults(handler=self.handler, command=self.name)
        return parser


def with_config_arguments(command: Command) -> Command:
    """実行設定ファイルと --set 上書きの共通引数"""
    command.argument('--config', '-c', help='run config (INI)')
    command.argument('--set', dest='overrides', action='append', default=[], metavar='SECTION.KEY=VALUE',
                     help='override one config value (repeatable)')
    return command


def load_run_config(args) -> RunConfig:
    overrides = {}
    for item in getattr(args, 'overrides', None) or []:
        if '=' not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        key, value = item.split('=', 1)
        overrides[key.strip()] = value
    return RunConfig.load(getattr(args, 'config', None), overrides)


def output_path(path, default_name):
    """出力先 (未指定なら NGIF_OUTPUT_DIR 以下)"""
    path = path or os.path.join(Config.OUTPUT_DIR, default_name)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    return path


def sibling_path(path, suffix):
    """path の拡張子を suffix に置き換えたパス"""
    root, _ = os.path.splitext(path)
    return root + suffix
