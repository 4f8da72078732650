"""Planar quasistatic contact-rich manipulation.

A controller that decides continuous motion and contact modes jointly by
solving a quadratic program with linear complementarity constraints every
step, verified in closed loop against an in-house quasistatic
time-stepping simulator.
"""

__version__ = "0.1.0"
