# Spectral and functional-analytic toolbox
