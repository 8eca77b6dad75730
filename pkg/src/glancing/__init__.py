"""2D high-frequency boundary-integral toolkit.

Operator symbols (principal and Airy/Fock glancing), Nystrom discretisation
of the Calderon-preconditioned combined field integral equations, exact
circle oracles, Fock-region surface currents and an SVD-filtered Woodbury
direct solver.
"""

__version__ = "0.1.0"
