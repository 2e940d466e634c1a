"""Covert messages embedded in an innocent broadcast codebook over binary-input DMCs."""

__version__ = "0.1.0"
