"""Robust energy-storage planning with scenario-approach risk certificates."""

__version__ = "0.1.0"
