"""Deterministic roundabout traffic simulator with a safety-pruned
multi-agent MCTS planner for mixed AV/HDV traffic."""

__version__ = "0.1.0"
