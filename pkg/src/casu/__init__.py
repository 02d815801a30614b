"""Simulation of a hardware-enforced secure update architecture for low-end MCUs."""
from .layout import LayoutConfig, Region, default_layout
from .protocol import Simulation, provision

__all__ = ["LayoutConfig", "Region", "Simulation", "default_layout", "provision"]
