"""conesv: cone-constrained singular values.

Solvers for the least (P,Q)-singular value of a matrix over polyhedral
cones, maximal angles between cones, and Pareto singular values.
"""

__version__ = "0.1.0"
