import argparse
import logging
import sys

import torch

from ngif.config import Config, validate_config
from ngif.commands import Command
from ngif.commands.evaluate import evaluate_cmd
from ngif.commands.generate import generate_cmd
from ngif.commands.report import report_cmd
from ngif.commands.sample import sample_cmd
from ngif.commands.sweep import sweep_cmd
from ngif.commands.train import train_cmd
from ngif.errors import NgifError

logger = logging.getLogger(__name__)

check_config_cmd = Command('check-config', 'show the resolved environment and run configuration')
check_config_cmd.argument('config', nargs='?', help='run config (INI)')


@check_config_cmd.route
def check_config(args):
    from ngif.check_config import main as check_main
    return check_main(args.config)


def create_app():
    # 環境変数のバリデーション
    validate_config()

    # ログ設定
    logging.basicConfig(level=getattr(logging, Config.LOG_LEVEL),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    # 並列数の上限
    if Config.THREADS:
        torch.set_num_threads(Config.THREADS)
        logger.info(f"torch threads capped at {Config.THREADS}")

    parser = argparse.ArgumentParser(prog='ngif', description='weak-form velocity inference from snapshot data')
    subparsers = parser.add_subparsers(dest='command', required=True)

    # サブコマンドを登録
    for command in (generate_cmd, train_cmd, sample_cmd, evaluate_cmd, report_cmd, sweep_cmd, check_config_cmd):
        command.attach(subparsers)

    return parser


def main(argv=None):
    """
    CLI エントリポイント

    Returns:
        int: 終了コード (0 正常, 2 設定エラー, 3 データエラー, 4 数値エラー)
    """
    try:
        parser = create_app()
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return 2

    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except NgifError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except ValueError as e:
        logger.error(f"{args.command} failed: invalid parameter: {e}")
        return 2
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return 3
