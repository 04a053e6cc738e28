"""Discrete potential theory on weighted graphs and metric-measure point clouds."""

__version__ = "0.1.0"
