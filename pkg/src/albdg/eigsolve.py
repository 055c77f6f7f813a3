"""Dense symmetric eigensolver for the assembled DG Hamiltonian.

The per-element bases are orthonormal under LGL quadrature, so the global
mass matrix is the identity and the DG eigenproblem is a standard dense
symmetric one. Desk scale only: the dimension is capped and exceeding it
is an error rather than a silent fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .basis import BasisFamily, evaluate_field
from .dg import DGHamiltonian
from .errors import NumericalError

DENSE_DOF_CAP = 8192
RESIDUAL_TOL = 1e-9


@dataclass
class EigenSolution:
    """Lowest eigenpairs of the DG Hamiltonian.

    coefficients has shape (total_dof, n); columns are orthonormal, which
    by basis orthonormality is the broken L2 orthonormality of the
    eigenfunctions. Each column is sign-fixed so its largest-magnitude
    entry is positive.
    """
    eigenvalues: np.ndarray
    coefficients: np.ndarray
    family: BasisFamily
    n: int


def lowest_eigenpairs(ham: DGHamiltonian, n: int,
                      family: BasisFamily = None) -> EigenSolution:
    dof = ham.total_dof
    if not 1 <= n <= dof:
        raise ValueError(f"need 1 <= n <= {dof}, got {n}")
    if dof > DENSE_DOF_CAP:
        raise NumericalError(
            f"dense solve capped at {DENSE_DOF_CAP} dof, got {dof}; "
            "reduce basis counts or element resolution")
    vals, vecs = scipy.linalg.eigh(ham.matrix, subset_by_index=[0, n - 1])

    scale = max(1.0, float(np.linalg.norm(ham.matrix, ord=2)))
    resid = ham.matrix @ vecs - vecs * vals[None, :]
    worst = float(np.max(np.linalg.norm(resid, axis=0)))
    if worst > RESIDUAL_TOL * scale:
        raise NumericalError(f"eigen residual {worst:.3e} exceeds {RESIDUAL_TOL} * ||H||")

    signs = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(n)])
    signs[signs == 0] = 1.0
    vecs = vecs * signs[None, :]
    return EigenSolution(eigenvalues=vals, coefficients=vecs, family=family, n=n)


def density_from_solution(sol: EigenSolution, occupied: int, grid=None) -> np.ndarray:
    """Density sum_{i <= occupied} |u_i|^2 on the global uniform grid."""
    if occupied > sol.n:
        raise ValueError(f"occupied {occupied} exceeds computed pairs {sol.n}")
    if sol.family is None:
        raise ValueError("solution carries no basis family")
    if grid is None:
        grid = sol.family.mesh.domain.global_grid
    rho = np.zeros(tuple(int(g) for g in grid))
    for i in range(occupied):
        u = evaluate_field(sol.family, sol.coefficients[:, i], grid)
        rho += u ** 2
    return rho
