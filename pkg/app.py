"""
BiLCNet - Classificação de tráfego 5G a partir de registros de canais físicos
Ponto de entrada da linha de comando
"""

import sys
from pathlib import Path

# Adicionar src ao path
sys.path.append(str(Path(__file__).parent / "src"))

from cli import main

if __name__ == "__main__":
    sys.exit(main())
