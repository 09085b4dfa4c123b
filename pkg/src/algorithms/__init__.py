# Engenharia de atributos, pré-processamento, treino e avaliação
