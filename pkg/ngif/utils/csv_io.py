"""
CSV 入出力
先頭に "# config: <JSON>" の1行を付け、出力を作った設定を残す
"""
import json

import pandas as pd

CONFIG_PREFIX = '# config: '


def write_csv(frame: pd.DataFrame, path, config=None, index: bool = False) -> None:
    """
    設定のエコー行つきで CSV を書き込み

    Args:
        frame: 書き出す表
        path: 出力先パス
        config: JSON 化できる設定 (None は空の dict)
        index: インデックス列も書くか
    """
    echo = json.dumps(config or {}, sort_keys=True, separators=(',', ':'), default=str)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(CONFIG_PREFIX + echo + '\n')
        frame.to_csv(f, index=index)


def read_csv(path, **kwargs) -> pd.DataFrame:
    """'#' で始まる行を読み飛ばして読み込み"""
    return pd.read_csv(path, comment='#', **kwargs)


def read_config_echo(path) -> dict:
    """先頭行の設定エコー (無ければ空の dict)"""
    with open(path, encoding='utf-8') as f:
        first = f.readline()
    if not first.startswith(CONFIG_PREFIX):
        return {}
    return json.loads(first[len(CONFIG_PREFIX):])
