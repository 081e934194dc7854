"""Physical constants (SI)."""

BOLTZMANN = 1.380649e-23  # J/K
SPEED_OF_LIGHT = 299_792_458.0  # m/s
T0 = 290.0  # K, noise-figure reference temperature
