"""Dynamics of geometrically exact viscoelastic beams by isogeometric collocation."""

__version__ = "0.1.0"
