"""Adaptive local basis DG eigensolver for periodic Schrodinger operators.

Subpackages are organized along the solver pipeline: mesh and quadrature
(`mesh`), local spectral solves (`local_solver`), basis construction
(`basis`), DG assembly (`dg`), dense eigensolver (`eigsolve`), a posteriori
error estimation (`estimator`), the adaptive refinement driver (`refine`),
model potentials and the SCF loop (`model`), the command line front end
(`cli`), and the numerical property battery (`properties`).
"""

__version__ = "0.1.0"
