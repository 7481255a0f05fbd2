"""Wavelet and Fourier feature pipeline for normal / cancerous mammogram classification."""

__version__ = "0.1.0"
