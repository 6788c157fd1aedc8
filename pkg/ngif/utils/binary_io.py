"""
バイナリコンテナ
マジック行 + JSON ヘッダ行 + float64 (リトルエンディアン) ブロックの共通フォーマット
データセットとチェックポイントの両方で使用する
"""
import json
import os
import tempfile

import numpy as np

from ngif.errors import DataError

FLOAT_DTYPE = np.dtype('<f8')


def write_container(path, magic: str, header: dict, blocks: list) -> None:
    """
    コンテナを書き込み (一時ファイルに書いてからリネーム)

    Args:
        path: 出力先パス
        magic: 1行目のマジック文字列
        header: JSON 化可能なメタデータ
        blocks: float64 配列のリスト (この順で連結される)
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)

    header_line = json.dumps(header, sort_keys=True, separators=(',', ':'))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.ngif-', suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write((magic + '\n').encode('utf-8'))
            f.write((header_line + '\n').encode('utf-8'))
            for block in blocks:
                f.write(np.ascontiguousarray(block, dtype=FLOAT_DTYPE).tobytes(order='C'))
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def read_container(path, magic: str):
    """
    コンテナを読み込み

    Returns:
        tuple: (header dict, payload の float64 1次元配列)

    Raises:
        DataError: マジック不一致、ヘッダ破損、ペイロード長の不整合
    """
    with open(path, 'rb') as f:
        first = f.readline()
        if first.rstrip(b'\n').decode('utf-8', errors='replace') != magic:
            raise DataError(f"bad magic in {path}", code='bad magic')
        try:
            header = json.loads(f.readline().decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DataError(f"malformed header in {path}: {e}", code='bad header')
        raw = f.read()

    if len(raw) % FLOAT_DTYPE.itemsize != 0:
        raise DataError(f"truncated payload in {path}", code='truncated payload')
    return header, np.frombuffer(raw, dtype=FLOAT_DTYPE).astype(np.float64)


def take_block(payload: np.ndarray, offset: int, shape, path='<memory>'):
    """ペイロードから指定形状のブロックを切り出す"""
    size = int(np.prod(shape)) if len(shape) else 1
    if offset + size > payload.size:
        raise DataError(f"truncated payload in {path}", code='truncated payload')
    return payload[offset:offset + size].reshape(shape), offset + size
