"""Non-Bayesian social learning with imperfect private signal structures."""

__version__ = "0.1.0"
