"""Photonic blind source separation simulator."""
