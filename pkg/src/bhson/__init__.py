"""Flow-level simulator of backhaul-constrained cellular load balancing."""

__version__ = "0.1.0"
