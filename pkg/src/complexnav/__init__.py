"""Social-navigation complexity benchmark: scenarios, policies, simulation and analysis."""

__version__ = "0.1.0"
