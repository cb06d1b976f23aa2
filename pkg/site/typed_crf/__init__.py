"""Multi-type conditional random fields with ADMM inference under logic constraints."""

__version__ = "1.0.0"
