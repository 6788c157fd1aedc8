"""
乱数ストリーム
1つのマスターシードから用途別に独立した Philox (カウンタベース) ストリームを生成する
"""
import numpy as np

# ストリームIDは固定。追加する場合は末尾に足すこと
STREAM_IDS = {
    'bank': 0,
    'minibatch': 1,
    'init': 2,
    'sde': 3,
    'data': 4,
    'median': 5,
    'resample': 6,
}


def stream_seed(seed: int, name: str) -> np.random.SeedSequence:
    """名前付きストリームの SeedSequence を取得"""
    if name not in STREAM_IDS:
        raise KeyError(f"Unknown RNG stream: {name}")
    return np.random.SeedSequence(int(seed), spawn_key=(STREAM_IDS[name],))


def stream(seed: int, name: str) -> np.random.Generator:
    """
    名前付きストリームの Generator を作成

    Args:
        seed: マスターシード
        name: ストリーム名 (STREAM_IDS のキー)

    Returns:
        np.random.Generator: Philox ベースの乱数生成器
    """
    return np.random.Generator(np.random.Philox(stream_seed(seed, name)))


def torch_seed(seed: int, name: str = 'init') -> int:
    """torch.Generator 用の 63bit シードをストリームから導出"""
    return int(stream(seed, name).integers(0, 2**63 - 1))
