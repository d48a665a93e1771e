"""Markov-chain prediction of an opposing robot-soccer team's formations."""

__version__ = "0.1.0"
