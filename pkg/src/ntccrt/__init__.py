"""Runtime for ntcc process-calculus models over discrete time-units."""

__version__ = "0.1.0"
