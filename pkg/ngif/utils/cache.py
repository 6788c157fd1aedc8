"""
簡易キャッシュシステム
モーメントテーブルなど、パラメータに依存しない前計算結果をキャッシュして再利用する
"""
import hashlib
import threading
import time
from typing import Any, Callable, Dict, Optional

import numpy as np


class SimpleCache:
    """シンプルなインメモリキャッシュ"""

    def __init__(self):
        self._cache: Dict[str, Dict[str, Any]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: str, ttl_seconds: Optional[float] = None) -> Optional[Any]:
        """キャッシュから値を取得 (ttl_seconds=None なら期限なし)"""
        with self._lock:
            if key not in self._cache:
                self.misses += 1
                return None

            entry = self._cache[key]
            if ttl_seconds is not None and time.time() - entry['timestamp'] > ttl_seconds:
                # TTL期限切れ
                del self._cache[key]
                self.misses += 1
                return None

            self.hits += 1
            return entry['value']

    def set(self, key: str, value: Any) -> None:
        """キャッシュに値を設定"""
        with self._lock:
            self._cache[key] = {
                'value': value,
                'timestamp': time.time()
            }

    def clear(self) -> None:
        """キャッシュをクリア"""
        with self._lock:
            self._cache.clear()
            self.hits = 0
            self.misses = 0


# グローバルキャッシュインスタンス
_global_cache = SimpleCache()


def fingerprint(*values) -> str:
    """配列やスカラーの内容から決まるキー"""
    digest = hashlib.sha1()
    for value in values:
        if isinstance(value, np.ndarray):
            digest.update(str(value.shape).encode())
            digest.update(np.ascontiguousarray(value).tobytes())
        else:
            digest.update(repr(value).encode())
    return digest.hexdigest()


def cached_function(cache_key: str, key_fn: Callable = None, ttl_seconds: Optional[float] = None):
    """
    関数の戻り値をキャッシュするデコレータ

    key_fn を渡すとその戻り値をキーに使う (配列引数は fingerprint で要約する)。
    """
    def decorator(func: Callable):
        def wrapper(*args, **kwargs):
            # キャッシュキーを引数から生成
            suffix = key_fn(*args, **kwargs) if key_fn else f"{args}:{kwargs}"
            full_key = f"{cache_key}:{suffix}"

            # キャッシュから取得を試行
            cached_value = _global_cache.get(full_key, ttl_seconds)
            if cached_value is not None:
                return cached_value

            # キャッシュにない場合は関数を実行
            result = func(*args, **kwargs)

            # 結果をキャッシュに保存
            _global_cache.set(full_key, result)

            return result
        wrapper.__wrapped__ = func
        return wrapper
    return decorator


def get_cache_stats() -> Dict[str, Any]:
    """キャッシュの統計情報を取得"""
    with _global_cache._lock:
        return {
            'cache_size': len(_global_cache._cache),
            'hits': _global_cache.hits,
            'misses': _global_cache.misses,
            'entries': list(_global_cache._cache.keys())
        }


def clear_cache() -> None:
    """キャッシュをクリア"""
    _global_cache.clear()
