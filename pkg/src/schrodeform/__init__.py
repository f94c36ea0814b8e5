"""Schrodinger dynamics on time-deforming domains.

The moving-domain problem is transported to a fixed reference grid through
a unitary, Jacobian-weighted change of variables; the transported generator
is a magnetic Hamiltonian assembled from the deformation, so norm-preserving
time integration, spectral projections, and adiabatic sweeps all run on one
fixed grid.
"""

__version__ = "0.1.0"
