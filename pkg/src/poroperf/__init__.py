"""Poroelastic perfusion with synthetic vascular trees."""
__version__ = "0.1.0"
