"""Deterministic simulator for role-play attacks on AMM, lending and vault primitives."""

__version__ = "0.1.0"
