"""Graph approximations, resistance forms and Laplacian spectra of the
basilica Julia set of z**2 - 1."""

__version__ = "0.1.0"
