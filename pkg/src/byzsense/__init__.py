"""Robust outlier thresholds for detecting malicious users in cooperative spectrum sensing."""

__version__ = "0.1.0"
