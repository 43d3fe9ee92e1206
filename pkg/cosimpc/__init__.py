"""Co-simulation with rolling-horizon MPC for district-heating plants."""

__version__ = "0.1.0"
