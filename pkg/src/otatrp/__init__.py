"""Over-the-air total radiated power assessment toolbox.

Simulation library for spherical-surface TRP measurement methodology:
spherical-wave field engines, synthetic emission sources, sparse sampling
grids with error margins, uv-plane pattern multiplication, beam-sweeping
averages, near-field power-flux and probe analysis, and the Monte Carlo
studies tying them together.
"""

__version__ = "0.1.0"

from . import montecarlo, nearfield, sampling, sources, sphmath, swe

__all__ = ["montecarlo", "nearfield", "sampling", "sources", "sphmath",
           "swe", "__version__"]
