"""Mean-bPoE and Mean-CVaR dynamic allocation for defined-contribution plans."""

__version__ = "0.1.0"
