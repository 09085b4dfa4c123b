# Gerador sintético de tráfego 5G
