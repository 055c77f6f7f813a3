"""Fourier-spectral eigenproblem solvers on periodic boxes.

Used in two roles: solving -1/2 Laplacian + V on each extended element to
generate local basis candidates, and solving the same operator on the whole
domain at fine resolution as the validation oracle. Both are dense
real-space solves with the kinetic operator built in Fourier space, so the
returned eigenpairs are variational in the planewave space of the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .fourier import kinetic_matrix, resample
from .mesh import Box, Domain

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class SpectralProblem:
    """Periodic -1/2 Laplacian + V eigenproblem on a box.

    `potential` is sampled on the uniform C-ordered grid; `element` tags
    the originating mesh element (-1 for the global domain).
    """
    box: Box
    grid: Tuple[int, ...]
    potential: np.ndarray
    element: int = -1

    def __post_init__(self):
        if any(g < 8 or g % 2 for g in self.grid):
            raise ValueError(f"grid counts must be even and >= 8, got {self.grid}")
        if tuple(self.potential.shape) != tuple(self.grid):
            raise ValueError(f"potential shape {self.potential.shape} does not match grid {self.grid}")
        if not np.all(np.isfinite(self.potential)):
            raise ValueError("potential contains non-finite values")


@dataclass(frozen=True)
class LocalEigenSet:
    """Lowest eigenpairs of a SpectralProblem.

    Eigenvectors are real fields on the problem grid, orthonormal under the
    uniform-grid L2 inner product on the box.
    """
    element: int
    box: Box
    grid: Tuple[int, ...]
    eigenvalues: np.ndarray          # (J,), ascending
    eigenvectors: np.ndarray         # (J, *grid)

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    @property
    def cell_volume(self) -> float:
        return self.box.volume / float(np.prod(self.grid))


def solve_local(problem: SpectralProblem, count: int) -> LocalEigenSet:
    """Lowest `count` eigenpairs of -1/2 Laplacian + V, periodic on the box.

    Dense symmetric solve; eigenvalues ascending, vectors sign-fixed so the
    largest-magnitude sample is positive. Raises NumericalError if any
    returned pair violates the residual tolerance.
    """
    total = int(np.prod(problem.grid))
    if not 1 <= count <= total:
        raise ValueError(f"count must be in [1, {total}], got {count}")
    sizes = problem.box.sizes
    ham = kinetic_matrix(problem.grid, sizes)
    ham[np.diag_indices_from(ham)] += problem.potential.ravel()
    vals, vecs = scipy.linalg.eigh(ham, subset_by_index=[0, count - 1])

    resid = ham @ vecs - vecs * vals[None, :]
    worst = np.max(np.linalg.norm(resid, axis=0))
    if worst > RESIDUAL_TOL:
        raise NumericalError(f"eigensolve residual {worst:.3e} exceeds {RESIDUAL_TOL}")

    cell = problem.box.volume / total
    fields = (vecs / math.sqrt(cell)).T.reshape((count,) + tuple(problem.grid))
    flat = fields.reshape(count, -1)
    signs = np.sign(flat[np.arange(count), np.argmax(np.abs(flat), axis=1)])
    signs[signs == 0] = 1.0
    fields = fields * signs.reshape((count,) + (1,) * len(problem.grid))
    return LocalEigenSet(element=problem.element, box=problem.box,
                         grid=tuple(problem.grid), eigenvalues=vals,
                         eigenvectors=fields)


def solve_reference(domain: Domain, potential: np.ndarray, count: int,
                    grid=None) -> LocalEigenSet:
    """Fine-grid spectral oracle for the global periodic problem.

    `potential` is sampled uniformly on the domain at any resolution; it is
    resampled by trigonometric interpolation onto `grid` (default: twice
    the domain's global grid per direction) before the dense solve.
    """
    if grid is None:
        grid = tuple(2 * g for g in domain.global_grid)
    grid = tuple(int(g) for g in grid)
    box = Box(lo=(0.0,) * domain.dim, hi=tuple(domain.lengths))
    pot = np.asarray(potential, dtype=float)
    if tuple(pot.shape) != grid:
        targets = [np.arange(g) * (L / g) for g, L in zip(grid, domain.lengths)]
        pot = resample(pot, domain.lengths, targets)
    problem = SpectralProblem(box=box, grid=grid, potential=pot, element=-1)
    return solve_local(problem, count)


def planewave_count(e_cut: float, volume: float, dim: int = 3) -> float:
    """Planewave count of a kinetic-energy cutoff: (sqrt(2 E_cut)/pi)^dim * Vol."""
    if e_cut <= 0 or volume <= 0:
        raise ValueError("e_cut and volume must be positive")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return (math.sqrt(2.0 * e_cut) / math.pi) ** dim * volume
