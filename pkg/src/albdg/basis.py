"""Element-local orthonormal basis construction from local eigenvectors.

Local eigenvectors living on an extended element are restricted to the
element's LGL grid by trigonometric interpolation, orthonormalized by a
weighted SVD, and post-processed so the constant function on the element
lies in the span. Values, gradients and Laplacians are all evaluated from
the Fourier representation before restriction, so differentiated data is
spectrally consistent with the values. Face traces are slices of the
volume tensors (LGL grids contain the element boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .fourier import interp_matrix
from .local_solver import LocalEigenSet, SpectralProblem, solve_local
from .mesh import Mesh, extended_element

SVD_TOL = 1e-8

SideKey = Tuple[int, bool]   # (axis, is_high_side)


@dataclass
class ElementBasis:
    """Orthonormal basis data of one element on its LGL grid.

    values/gradients/laplacians are flattened C order over the LGL tensor
    grid; face_values/face_gradients are keyed by (axis, is_high) and hold
    traces on that side's face nodes, transverse C order.
    """
    element: int
    count: int
    values: np.ndarray                      # (J, n_nodes)
    gradients: np.ndarray                   # (J, d, n_nodes)
    laplacians: np.ndarray                  # (J, n_nodes)
    face_values: Dict[SideKey, np.ndarray]     # (J, nf)
    face_gradients: Dict[SideKey, np.ndarray]  # (J, d, nf)
    truncated: bool = False


@dataclass
class BasisFamily:
    """Per-element bases plus global degree-of-freedom bookkeeping."""
    mesh: Mesh
    bases: List[ElementBasis]
    counts: np.ndarray = field(init=False)
    offsets: np.ndarray = field(init=False)

    def __post_init__(self):
        self.counts = np.array([b.count for b in self.bases], dtype=int)
        self.offsets = np.concatenate(([0], np.cumsum(self.counts)))

    @property
    def total_dof(self) -> int:
        return int(self.offsets[-1])

    def dof_slice(self, k: int) -> slice:
        return slice(int(self.offsets[k]), int(self.offsets[k + 1]))


def _empty_basis(mesh: Mesh, k: int) -> ElementBasis:
    d = mesh.domain.dim
    n = mesh.n_volume_nodes()
    fvals, fgrads = {}, {}
    for a in range(d):
        nf = len(mesh.face_quad_weights(a))
        for high in (False, True):
            fvals[(a, high)] = np.zeros((0, nf))
            fgrads[(a, high)] = np.zeros((0, d, nf))
    return ElementBasis(element=k, count=0, values=np.zeros((0, n)),
                        gradients=np.zeros((0, d, n)), laplacians=np.zeros((0, n)),
                        face_values=fvals, face_gradients=fgrads)


def _orthonormal_coefficients(rows: np.ndarray, weights: np.ndarray,
                              keep: Optional[int] = None,
                              tol: float = SVD_TOL) -> np.ndarray:
    """Coefficient matrix C (J x r) with C.T @ rows orthonormal under weights.

    Directions with singular value below tol * sigma_max are dropped; at
    most `keep` directions are returned.
    """
    a = (rows * np.sqrt(weights)[None, :]).T
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((rows.shape[0], 0))
    r = int(np.sum(s >= tol * s[0]))
    if keep is not None:
        r = min(r, keep)
    return vt[:r].T / s[:r]


def _slice_faces(tensors: np.ndarray, orders) -> Dict[SideKey, np.ndarray]:
    """Slice (J, [d,] o_0, ..., o_{d-1}) stacks at each element boundary."""
    d = len(orders)
    lead = tensors.ndim - d   # 1 for values/laplacians, 2 for gradients
    out: Dict[SideKey, np.ndarray] = {}
    for a in range(d):
        for high in (False, True):
            sl = [slice(None)] * tensors.ndim
            sl[lead + a] = -1 if high else 0
            face = tensors[tuple(sl)]
            out[(a, high)] = face.reshape(face.shape[:lead] + (-1,))
    return out


def _assemble_basis(mesh: Mesh, k: int, vals: np.ndarray, grads: np.ndarray,
                    laps: np.ndarray, truncated: bool) -> ElementBasis:
    """Package tensor-shaped (J, ...) arrays into an ElementBasis."""
    d = mesh.domain.dim
    orders = mesh.lgl_orders
    j = vals.shape[0]
    fvals = _slice_faces(vals, orders)
    fgrads = _slice_faces(grads, orders)
    return ElementBasis(
        element=k, count=j,
        values=vals.reshape(j, -1),
        gradients=grads.reshape(j, d, -1),
        laplacians=laps.reshape(j, -1),
        face_values=fvals, face_gradients=fgrads, truncated=truncated)


def restrict_orthonormalize(localset: LocalEigenSet, mesh: Mesh, k: int,
                            target_j: int, svd_tol: float = SVD_TOL,
                            ensure_constant: bool = True) -> ElementBasis:
    """Restrict local eigenvectors to element k and orthonormalize.

    The first target_j eigenvectors are evaluated (with gradients and
    Laplacians) on the element LGL grid, orthonormalized under LGL
    quadrature by SVD with relative threshold svd_tol, and the constant
    mode is enforced unless disabled. Returns fewer functions with the
    truncation flag set when the restricted vectors are rank deficient;
    dropped directions are genuinely dependent on the element (their
    content lives in the buffer), so truncation does not cost accuracy.
    """
    if target_j < 0:
        raise ValueError(f"target_j must be >= 0, got {target_j}")
    if target_j == 0:
        return _empty_basis(mesh, k)
    if localset.count < target_j:
        raise ValueError(f"local set has {localset.count} vectors, need {target_j}")

    d = mesh.domain.dim
    orders = mesh.lgl_orders
    qlen = localset.box.sizes
    nodes_1d = mesh.element_nodes_1d(k)
    emats = [interp_matrix(localset.grid[a], qlen[a], localset.box.lo[a],
                           nodes_1d[a], 0) for a in range(d)]
    dmats = [interp_matrix(localset.grid[a], qlen[a], localset.box.lo[a],
                           nodes_1d[a], 1) for a in range(d)]
    lmats = [interp_matrix(localset.grid[a], qlen[a], localset.box.lo[a],
                           nodes_1d[a], 2) for a in range(d)]

    def apply_stack(mats, fields):
        out = fields
        for a, m in enumerate(mats):
            out = np.moveaxis(np.tensordot(m, out, axes=(1, a + 1)), 0, a + 1)
        return out

    raw = localset.eigenvectors[:target_j]
    vals = apply_stack(emats, raw)
    grads = np.stack([apply_stack([dmats[a] if b == a else emats[b] for b in range(d)], raw)
                      for a in range(d)], axis=1)
    laps = np.zeros_like(vals)
    for a in range(d):
        laps += apply_stack([lmats[a] if b == a else emats[b] for b in range(d)], raw)

    w = mesh.quad_weights
    coef = _orthonormal_coefficients(vals.reshape(target_j, -1), w, tol=svd_tol)
    r = coef.shape[1]
    truncated = r < target_j

    def combine(stack):
        return np.tensordot(coef.T, stack, axes=(1, 0))

    basis = _assemble_basis(mesh, k, combine(vals), combine(grads),
                            combine(laps), truncated)
    if ensure_constant:
        basis = ensure_constant_mode(basis, mesh)
    return basis


def ensure_constant_mode(basis: ElementBasis, mesh: Mesh) -> ElementBasis:
    """Force the normalized constant into the span, preserving the count.

    The first output function is the normalized constant; the remaining
    input functions are projected against it and re-orthonormalized, with
    the weakest direction dropped so the count is unchanged.
    """
    j = basis.count
    if j == 0:
        return basis
    w = mesh.quad_weights
    c0 = 1.0 / math.sqrt(float(np.sum(w)))

    alpha = (basis.values * w[None, :]) @ np.full(len(w), c0)   # (J,)
    proj_vals = basis.values - np.outer(alpha, np.full(len(w), c0))
    coef = _orthonormal_coefficients(proj_vals, w, keep=j - 1)

    def combine(tail_stack, const_stack):
        tail = np.tensordot(coef.T, tail_stack, axes=(1, 0))
        return np.concatenate([const_stack[None], tail], axis=0)

    d = basis.gradients.shape[1]
    n = basis.values.shape[1]
    new_vals = combine(proj_vals, np.full(n, c0))
    new_grads = combine(basis.gradients, np.zeros((d, n)))
    new_laps = combine(basis.laplacians, np.zeros(n))

    fvals, fgrads = {}, {}
    for key, fv in basis.face_values.items():
        nf = fv.shape[1]
        proj_fv = fv - np.outer(alpha, np.full(nf, c0))
        fvals[key] = combine(proj_fv, np.full(nf, c0))
        fgrads[key] = combine(basis.face_gradients[key], np.zeros((d, nf)))

    return ElementBasis(element=basis.element, count=new_vals.shape[0],
                        values=new_vals, gradients=new_grads, laplacians=new_laps,
                        face_values=fvals, face_gradients=fgrads,
                        truncated=basis.truncated or new_vals.shape[0] < j)


def _barycentric_matrix(ref_nodes: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Interpolation matrix from values at ref_nodes to `targets` (both 1D)."""
    bw = np.ones(len(ref_nodes))
    for i, x in enumerate(ref_nodes):
        bw[i] = 1.0 / np.prod(np.delete(ref_nodes - x, i))
    diff = targets[:, None] - ref_nodes[None, :]
    exact_row, exact_col = np.nonzero(diff == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = bw[None, :] / diff
        m /= m.sum(axis=1)[:, None]
    for r, c in zip(exact_row, exact_col):
        m[r] = 0.0
        m[r, c] = 1.0
    return m


def _global_index_range(coord: int, n_elem: int, n_grid: int) -> Tuple[int, int]:
    """Global grid index range [start, stop) of element `coord` along one axis."""
    start = -((-coord * n_grid) // n_elem)
    stop = -((-(coord + 1) * n_grid) // n_elem)
    return start, stop


def evaluate_field(family: BasisFamily, coefficients: np.ndarray,
                   grid=None) -> np.ndarray:
    """Evaluate a coefficient vector on the global uniform grid.

    Per element, nodal LGL values are interpolated to the global grid
    points inside that element by barycentric Lagrange interpolation per
    direction. Every global point belongs to exactly one element.
    """
    mesh = family.mesh
    dom = mesh.domain
    if grid is None:
        grid = dom.global_grid
    grid = tuple(int(g) for g in grid)
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape != (family.total_dof,):
        raise ValueError(f"coefficient length {coefficients.shape} != ({family.total_dof},)")

    out = np.zeros(grid)
    spacing = [L / g for L, g in zip(dom.lengths, grid)]
    for k in range(mesh.n_elements):
        basis = family.bases[k]
        if basis.count == 0:
            continue
        c = coefficients[family.dof_slice(k)]
        nodal = np.tensordot(c, basis.values, axes=(0, 0)).reshape(mesh.lgl_orders)
        coords = mesh.element_coords(k)
        box = mesh.elements[k]
        mats, ranges = [], []
        for a in range(dom.dim):
            start, stop = _global_index_range(coords[a], mesh.element_counts[a], grid[a])
            targets = np.arange(start, stop) * spacing[a]
            # reference coordinates keep the barycentric weights scale free
            t_ref = 2.0 * (targets - box.lo[a]) / mesh.element_size[a] - 1.0
            mats.append(_barycentric_matrix(mesh.ref_nodes[a], t_ref))
            ranges.append(np.arange(start, stop))
        block = nodal
        for a, m in enumerate(mats):
            block = np.moveaxis(np.tensordot(m, block, axes=(1, a)), 0, a)
        out[np.ix_(*ranges)] += block
    return out


@dataclass
class FamilyBuilder:
    """Builds BasisFamily objects for a mesh from a global potential field.

    Precomputes extended elements and the trigonometric resampling matrices
    from the global grid onto each extended element's grid and onto the
    element LGL nodes. `budget` is the number of local eigenpairs solved
    per element, an upper bound for any requested count.

    Unless the extended element spans the whole period, the restricted
    potential is discontinuous at the artificial periodic seam of the
    extended element, which gives the local eigenvectors slowly decaying
    spectral tails that alias through the quadrature. With seam_blend on
    (the default) the potential is blended to its extended-element mean
    across the outer half of the buffer with a flat C-infinity ramp, which
    removes the seam without touching the potential on the element or the
    inner buffer.
    """
    mesh: Mesh
    budget: int
    points_per_element: Optional[Tuple[int, ...]] = None
    svd_tol: float = SVD_TOL
    ensure_constant: bool = True
    seam_blend: bool = True

    def __post_init__(self):
        dom = self.mesh.domain
        self.extended = [extended_element(self.mesh, k, self.points_per_element)
                         for k in range(self.mesh.n_elements)]
        self._qmats = []
        self._emats = []
        self._blend = []
        for k, ee in enumerate(self.extended):
            qm, em = [], []
            for a in range(dom.dim):
                step = ee.box.sizes[a] / ee.grid[a]
                qpoints = ee.box.lo[a] + step * np.arange(ee.grid[a])
                qm.append(interp_matrix(dom.global_grid[a], dom.lengths[a], 0.0, qpoints, 0))
                em.append(interp_matrix(dom.global_grid[a], dom.lengths[a], 0.0,
                                        self.mesh.element_nodes_1d(k)[a], 0))
            self._qmats.append(qm)
            self._emats.append(em)
            self._blend.append(self._blend_weights(k, ee) if self.seam_blend
                               else None)

    def _blend_weights(self, k: int, ee) -> Optional[List[Optional[np.ndarray]]]:
        """Per-axis seam-blend weight vectors on the extended grid, or None."""
        dom = self.mesh.domain
        h = self.mesh.element_size
        weights: List[Optional[np.ndarray]] = []
        any_seam = False
        for a in range(dom.dim):
            qlen = ee.box.sizes[a]
            if qlen >= dom.lengths[a] - 1e-12 * dom.lengths[a]:
                weights.append(None)      # true period, no artificial seam
                continue
            delta = (qlen - h[a]) / 4.0   # outer half of the buffer
            if delta <= 0.0:
                weights.append(None)      # no buffer to blend in
                continue
            any_seam = True
            step = qlen / ee.grid[a]
            t = step * np.arange(ee.grid[a])
            dist = np.minimum(t, qlen - t)
            u = np.clip(dist / delta, 0.0, 1.0)
            with np.errstate(divide="ignore", over="ignore"):
                f = np.where(u > 0.0, np.exp(-1.0 / np.where(u > 0.0, u, 1.0)), 0.0)
                g = np.where(u < 1.0, np.exp(-1.0 / np.where(u < 1.0, 1.0 - u, 1.0)), 0.0)
            weights.append(f / (f + g))
        return weights if any_seam else None

    def _tensor(self, mats, fld):
        out = fld
        for a, m in enumerate(mats):
            out = np.moveaxis(np.tensordot(m, out, axes=(1, a)), 0, a)
        return out

    def potential_on_elements(self, v_global: np.ndarray) -> List[np.ndarray]:
        """Potential at each element's LGL nodes, flattened C order."""
        return [self._tensor(self._emats[k], v_global).ravel()
                for k in range(self.mesh.n_elements)]

    def local_sets(self, v_global: np.ndarray) -> List[LocalEigenSet]:
        sets = []
        for k, ee in enumerate(self.extended):
            v_q = self._tensor(self._qmats[k], v_global)
            blend = self._blend[k]
            if blend is not None:
                w = np.ones_like(v_q)
                for a, wa in enumerate(blend):
                    if wa is not None:
                        shape = [1] * v_q.ndim
                        shape[a] = len(wa)
                        w = w * wa.reshape(shape)
                c_star = float(v_q.mean())
                v_q = w * (v_q - c_star) + c_star
            prob = SpectralProblem(box=ee.box, grid=ee.grid, potential=v_q, element=k)
            sets.append(solve_local(prob, self.budget))
        return sets

    def build(self, v_global: np.ndarray, counts) -> BasisFamily:
        counts = np.asarray(counts, dtype=int)
        if counts.shape != (self.mesh.n_elements,):
            raise ValueError("counts must have one entry per element")
        if np.any(counts > self.budget):
            raise ValueError(f"requested counts exceed local solve budget {self.budget}")
        sets = self.local_sets(v_global)
        bases = [restrict_orthonormalize(sets[k], self.mesh, k, int(counts[k]),
                                         svd_tol=self.svd_tol,
                                         ensure_constant=self.ensure_constant)
                 for k in range(self.mesh.n_elements)]
        return BasisFamily(mesh=self.mesh, bases=bases)
