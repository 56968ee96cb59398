"""Risk parity with ICA factors and Mixed Tempered Stable marginals."""

__version__ = "0.1.0"
