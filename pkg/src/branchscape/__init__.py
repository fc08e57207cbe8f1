"""Phase-field solver and analysis tools for the branched-transport unit-ball problem."""

__version__ = "0.1.0"
