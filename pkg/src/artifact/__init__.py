"""FTH-SS: time-domain 2D acoustic scattering by frequency-time hybrid with singularity subtraction."""

__version__ = "0.1.0"
