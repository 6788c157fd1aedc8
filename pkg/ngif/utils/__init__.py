# ユーティリティパッケージ
