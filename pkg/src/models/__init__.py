# Registros de canais físicos, sessões, esquema de atributos e datasets
