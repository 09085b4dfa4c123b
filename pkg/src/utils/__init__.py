# Utilitários
