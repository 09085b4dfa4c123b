# Autograd em numpy e camadas do BiLCNet
