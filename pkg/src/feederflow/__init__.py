"""feederflow: unbalanced distribution feeder parsing, formulation and solution."""

__version__ = "0.1.0"
