"""Multiuser I-MMSE: mutual information, MMSE and interference terms for the
K-user Gaussian multiple-access channel."""

__version__ = "0.1.0"
