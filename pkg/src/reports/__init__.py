# Figuras de relatório
