# Core simulation modules: photons, converters, interference, Monte Carlo and fitting
