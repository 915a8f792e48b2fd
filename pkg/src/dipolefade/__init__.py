"""Coupled-dipole wireless channel simulation with RIS, adjustable fading and
over-the-air equalization."""
from __future__ import annotations

__version__ = "0.1.0"
