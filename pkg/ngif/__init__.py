# NGIF パッケージ
