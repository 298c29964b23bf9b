"""Linearized and nonlinear Vlasov-Poisson-Fokker-Planck on the 2D torus with hypocoercivity diagnostics."""
__version__ = "0.1.0"
