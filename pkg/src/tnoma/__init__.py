"""Time-offset NOMA transceivers: channel model, SVD baseline, auto-encoders."""

__version__ = "0.1.0"
