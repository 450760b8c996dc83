"""Topology-controlled surface reconstruction from point clouds."""

__version__ = "0.1.0"
