#!/usr/bin/env python3
"""
設定確認スクリプト
現在の環境変数設定と解決済みの実行設定を表示し、設定ミスを発見しやすくする
"""

import os

from dotenv import load_dotenv

from ngif.config import RunConfig, validate_config
from ngif.errors import ConfigError


def main(path=None):
    print("=" * 50)
    print("環境変数設定確認")
    print("=" * 50)

    # .envファイルを読み込み
    load_dotenv()

    try:
        # 設定の検証
        validate_config()
        print("✅ 環境変数の検証: OK")
    except ValueError as e:
        print(f"❌ 環境変数の検証: エラー - {e}")
        return 1

    print("\n📋 現在の設定:")
    print("-" * 30)
    print(f"NGIF_THREADS: {os.getenv('NGIF_THREADS') or '未設定 (torch の既定値)'}")
    print(f"NGIF_LOG_LEVEL: {os.getenv('NGIF_LOG_LEVEL', 'INFO')}")
    print(f"NGIF_OUTPUT_DIR: {os.getenv('NGIF_OUTPUT_DIR', 'runs')}")
    print(f"NGIF_DEFAULT_SEED: {os.getenv('NGIF_DEFAULT_SEED', '0')}")

    if path:
        try:
            config = RunConfig.load(path)
        except ConfigError as e:
            print(f"\n❌ 実行設定: エラー - {e}")
            return 1
        print(f"\n📋 実行設定 ({path}):")
        for section, values in config.to_dict().items():
            print(f"[{section}]")
            for key, value in values.items():
                print(f"  {key} = {'未設定' if value is None else value}")

    print("\n" + "=" * 50)
    print("設定確認完了")
    return 0


if __name__ == '__main__':
    exit(main())
