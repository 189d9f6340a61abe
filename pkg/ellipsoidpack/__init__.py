"""
ellipsoidpack - Stochastically evolving ellipsoids for lattice sphere packing

Simulates a constrained matrix Brownian motion that grows lattice contact
points on an ellipsoid boundary until the ellipsoid is frozen, together with
the analytic quantities used to check such runs (hitting bounds, Siegel
Monte Carlo, shell integrals).
"""

from ellipsoidpack.__version__ import __version__

__all__ = ["__version__"]
