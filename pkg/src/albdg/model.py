"""Desk-scale model potentials and the self-consistent field loop.

The ionic potential is a constant shift minus a sum of periodized Gaussian
wells. The nonlinearity is a model Hartree term (periodic Poisson solve with
coupling kappa) plus a local density term -c_x rho^(1/3). Setting
kappa = c_x = 0 recovers the linear eigenvalue problem, which the SCF loop
detects through exact array equality of successive effective potentials and
finishes after a single solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .basis import BasisFamily, FamilyBuilder
from .dg import PenaltyConfig, assemble_hamiltonian
from .eigsolve import EigenSolution, density_from_solution, lowest_eigenpairs
from .errors import ConfigError, NonConvergenceError
from .fourier import kinetic_matrix, wavenumbers
from .mesh import Domain

# Effective potentials are shifted up so their minimum is at least this
# value before the local solves; eigenvalues are shifted back on report.
POSITIVITY_FLOOR = 0.1

# Gaussian image sums stop once the next image contributes less than this.
IMAGE_TRUNCATION = 1e-14


@dataclass
class GaussianWell:
    center: Tuple[float, ...]
    depth: float
    width: float


@dataclass
class PotentialSpec:
    """Periodic well-cluster potential with a model nonlinearity."""
    wells: List[GaussianWell] = field(default_factory=list)
    constant_shift: float = 0.0
    electrons: int = 1

    def __post_init__(self):
        self.wells = [w if isinstance(w, GaussianWell) else GaussianWell(*w)
                      for w in self.wells]
        for w in self.wells:
            if w.depth <= 0:
                raise ConfigError(f"well depth must be positive, got {w.depth}")
            if w.width <= 0:
                raise ConfigError(f"well width must be positive, got {w.width}")
        if self.electrons < 1:
            raise ConfigError(f"electron count must be >= 1, got {self.electrons}")


@dataclass
class SCFConfig:
    mixing: float = 0.5
    tol: float = 1e-6
    max_iter: int = 100
    kappa: float = 0.0
    c_x: float = 0.0
    freeze_basis_after: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.mixing <= 1.0:
            raise ConfigError(f"mixing must lie in (0, 1], got {self.mixing}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.kappa < 0 or self.c_x < 0:
            raise ConfigError("kappa and c_x must be nonnegative")


def periodized_gaussian(x: np.ndarray, center: float, width: float,
                        length: float) -> np.ndarray:
    """Sum of Gaussian images exp(-(x - c + mL)^2 / (2 w^2)) over m."""
    reach = width * math.sqrt(-2.0 * math.log(IMAGE_TRUNCATION))
    m_max = int(math.ceil((reach + length) / length))
    out = np.zeros_like(x, dtype=float)
    for m in range(-m_max, m_max + 1):
        out += np.exp(-((x - center + m * length) ** 2) / (2.0 * width ** 2))
    return out


def build_ionic_potential(spec: PotentialSpec, domain: Domain) -> np.ndarray:
    """Sampled V_ion = shift - sum of separable periodized Gaussian wells."""
    axes = [np.arange(n) * (L / n)
            for n, L in zip(domain.global_grid, domain.lengths)]
    v = np.full(domain.global_grid, spec.constant_shift, dtype=float)
    for w in spec.wells:
        if len(w.center) != domain.dim:
            raise ConfigError(
                f"well center {w.center} does not match dimension {domain.dim}")
        factors = [periodized_gaussian(axes[a], w.center[a] % domain.lengths[a],
                                       w.width, domain.lengths[a])
                   for a in range(domain.dim)]
        term = factors[0]
        for f in factors[1:]:
            term = np.multiply.outer(term, f)
        v -= w.depth * term
    return v


def hartree_potential(rho: np.ndarray, domain: Domain,
                      kappa: float) -> np.ndarray:
    """Zero-mean solution of -Lap V_H = kappa (rho - mean rho), periodic."""
    if kappa == 0.0:
        return np.zeros_like(rho)
    rho_hat = np.fft.fftn(rho)
    k2 = np.zeros(rho.shape)
    for a, (n, L) in enumerate(zip(rho.shape, domain.lengths)):
        shape = [1] * rho.ndim
        shape[a] = n
        k2 = k2 + (wavenumbers(n, L) ** 2).reshape(shape)
    k2flat = k2.reshape(-1)
    vh_hat = np.zeros_like(rho_hat).reshape(-1)
    nz = k2flat > 0
    vh_hat[nz] = kappa * rho_hat.reshape(-1)[nz] / k2flat[nz]
    return np.fft.ifftn(vh_hat.reshape(rho.shape)).real


def xc_potential(rho: np.ndarray, c_x: float) -> np.ndarray:
    """Local density term -c_x rho^(1/3); negative samples are clipped."""
    if c_x == 0.0:
        return np.zeros_like(rho)
    return -c_x * np.cbrt(np.maximum(rho, 0.0))


def effective_potential(spec: PotentialSpec, domain: Domain, rho: np.ndarray,
                        scf: SCFConfig, v_ion: Optional[np.ndarray] = None
                        ) -> np.ndarray:
    if v_ion is None:
        v_ion = build_ionic_potential(spec, domain)
    return v_ion + hartree_potential(rho, domain, scf.kappa) \
        + xc_potential(rho, scf.c_x)


@dataclass
class SCFResult:
    """Converged self-consistent state.

    rho is the final unmixed density; eigenvalues in `solution` and the
    stored v_eff have the positivity shift removed, so the residual pairing
    (V_eff - eps_i) is unchanged from the solved system.
    """
    rho: np.ndarray
    solution: EigenSolution
    v_eff: np.ndarray
    v_elements: List[np.ndarray]
    family: BasisFamily
    shift: float
    iterations: int
    residuals: List[float]


def scf_solve(spec: PotentialSpec, scf: SCFConfig, builder: FamilyBuilder,
              penalty: PenaltyConfig, counts, n_eigen: Optional[int] = None,
              rho0: Optional[np.ndarray] = None) -> SCFResult:
    """Fixed-point iteration on the density with simple mixing.

    The adaptive bases are rebuilt from the current effective potential in
    every iteration (unless frozen), the lowest n_eigen pairs are solved,
    and the density is assembled from the first `spec.electrons` of them.
    """
    mesh = builder.mesh
    domain = mesh.domain
    n_occ = spec.electrons
    if n_eigen is None:
        n_eigen = n_occ
    if n_eigen < n_occ:
        raise ConfigError(
            f"n_eigen={n_eigen} smaller than electron count {n_occ}")
    counts = np.asarray(counts, dtype=int)
    if counts.ndim == 0:
        counts = np.full(mesh.n_elements, int(counts))
    if int(counts.sum()) < n_eigen:
        raise ConfigError(
            f"total basis count {int(counts.sum())} cannot hold "
            f"{n_eigen} eigenpairs")

    v_ion = build_ionic_potential(spec, domain)
    rho = rho0.copy() if rho0 is not None else np.full(
        domain.global_grid, n_occ / domain.volume)

    prev_v_raw = None
    family = None
    state = None
    residuals: List[float] = []
    for it in range(1, scf.max_iter + 1):
        v_raw = effective_potential(spec, domain, rho, scf, v_ion=v_ion)
        if prev_v_raw is not None and np.array_equal(v_raw, prev_v_raw):
            # Potential is exactly stationary (always the case after one
            # solve when kappa = c_x = 0); the last solve is already final.
            return state
        prev_v_raw = v_raw
        shift = max(0.0, POSITIVITY_FLOOR - float(v_raw.min()))
        v_shifted = v_raw + shift
        frozen = (scf.freeze_basis_after is not None
                  and it > scf.freeze_basis_after and family is not None)
        if not frozen:
            family = builder.build(v_shifted, counts)
        v_elements = builder.potential_on_elements(v_shifted)
        ham = assemble_hamiltonian(family, v_elements, penalty)
        sol = lowest_eigenpairs(ham, n_eigen, family=family)
        rho_new = density_from_solution(sol, occupied=n_occ)
        residual = float(np.linalg.norm(rho_new - rho)
                         / max(np.linalg.norm(rho), 1e-300))
        residuals.append(residual)
        reported = EigenSolution(eigenvalues=sol.eigenvalues - shift,
                                 coefficients=sol.coefficients,
                                 family=family, n=sol.n)
        state = SCFResult(rho=rho_new, solution=reported,
                          v_eff=v_raw,
                          v_elements=[v - shift for v in v_elements],
                          family=family, shift=shift, iterations=it,
                          residuals=residuals)
        if residual < scf.tol:
            return state
        rho = (1.0 - scf.mixing) * rho + scf.mixing * rho_new
    last = residuals[-1] if residuals else math.inf
    raise NonConvergenceError(
        f"SCF did not reach tol={scf.tol} in {scf.max_iter} iterations "
        f"(last residual {last:.3e})", residual=last)


def scf_reference(spec: PotentialSpec, scf: SCFConfig, domain: Domain,
                  grid: Optional[Sequence[int]] = None,
                  n_eigen: Optional[int] = None,
                  rho0: Optional[np.ndarray] = None):
    """Independent spectral SCF oracle on a uniform Fourier grid.

    Same functional and mixing as scf_solve but with a dense planewave
    discretization of the whole domain and no DG machinery. Returns
    (rho, eigenvalues, iterations) with unshifted eigenvalues.
    """
    if grid is None:
        grid = tuple(2 * n for n in domain.global_grid)
    grid = tuple(int(n) for n in grid)
    n_occ = spec.electrons
    if n_eigen is None:
        n_eigen = n_occ
    ref_domain = Domain(dim=domain.dim, lengths=domain.lengths,
                        global_grid=grid)
    v_ion = build_ionic_potential(spec, ref_domain)
    npts = int(np.prod(grid))
    dv = ref_domain.volume / npts
    kin = kinetic_matrix(grid, domain.lengths)
    rho = rho0.copy() if rho0 is not None else np.full(
        grid, n_occ / ref_domain.volume)

    prev_v_raw = None
    out = None
    from scipy.linalg import eigh
    for it in range(1, scf.max_iter + 1):
        v_raw = effective_potential(spec, ref_domain, rho, scf, v_ion=v_ion)
        if prev_v_raw is not None and np.array_equal(v_raw, prev_v_raw):
            return out
        prev_v_raw = v_raw
        shift = max(0.0, POSITIVITY_FLOOR - float(v_raw.min()))
        h = kin + np.diag(v_raw.reshape(-1) + shift)
        vals, vecs = eigh(h, subset_by_index=[0, n_eigen - 1])
        psi = vecs / math.sqrt(dv)
        rho_new = np.sum(psi[:, :n_occ] ** 2, axis=1).reshape(grid)
        residual = float(np.linalg.norm(rho_new - rho)
                         / max(np.linalg.norm(rho), 1e-300))
        out = (rho_new, vals - shift, it)
        if residual < scf.tol:
            return out
        rho = (1.0 - scf.mixing) * rho + scf.mixing * rho_new
    raise NonConvergenceError(
        f"reference SCF did not reach tol={scf.tol} in "
        f"{scf.max_iter} iterations", residual=residual)
