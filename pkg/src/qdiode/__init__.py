"""Two-atom nonreciprocal waveguide scatterer: operators, steady states,
scattering, correlations and the flapping-mirror reduction."""

__version__ = "0.1.0"
