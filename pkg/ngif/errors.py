"""
NGIF 例外クラス
CLI の終了コードと対応づけたエラー階層
"""


class NgifError(Exception):
    """NGIF の基底例外"""

    exit_code = 1

    def __init__(self, message, code=None):
        super().__init__(message)
        self.code = code


class ConfigError(NgifError):
    """設定ファイル・パラメータの不備"""

    exit_code = 2


class DataError(NgifError):
    """データファイルの破損・不整合"""

    exit_code = 3


class NumericError(NgifError):
    """非有限値などの数値的な失敗"""

    exit_code = 4
