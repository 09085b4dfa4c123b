# Leitura de arquivos de sessão JSONL
