"""Desk-scale synthetic manipulation-data pipeline.

Config-driven task composition over an annotated asset registry, skill-to-
waypoint compilation, domain randomization, kinematic planning and
validation, a decoupled pipelined planner/renderer, and a LeRobot-style
episode store with statistics tooling.
"""

__version__ = "0.1.0"
