"""Learned BDD variable ordering and reversible-circuit synthesis toolkit."""

__version__ = "0.1.0"
