"""Agent-centered state transformations for deep Q-learning on a fruit-collection gridworld."""

__version__ = "0.1.0"
