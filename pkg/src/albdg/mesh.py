"""Periodic rectangular meshes, faces, extended elements, LGL quadrature.

The global domain is a d-dimensional box with periodic boundary conditions,
tiled by a uniform grid of rectangular elements. Every face is interior
(periodic wrap); a direction with a single element produces "self faces"
that join an element to itself. Each element carries a tensor
Legendre-Gauss-Lobatto grid; face quadrature is the trace of that grid,
so all face integrals are nodal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.special import eval_legendre, roots_jacobi


def lgl_nodes(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Legendre-Gauss-Lobatto nodes and weights on [-1, 1].

    `order` is the number of nodes; quadrature is exact for polynomials of
    degree <= 2*order - 3. Interior nodes are the roots of P'_{order-1},
    obtained as Jacobi(1,1) roots.
    """
    if order < 2:
        raise ValueError(f"LGL quadrature needs at least 2 nodes, got {order}")
    if order == 2:
        nodes = np.array([-1.0, 1.0])
    else:
        interior = roots_jacobi(order - 2, 1.0, 1.0)[0]
        nodes = np.concatenate(([-1.0], np.sort(interior), [1.0]))
    n = order
    weights = 2.0 / (n * (n - 1) * eval_legendre(n - 1, nodes) ** 2)
    return nodes, weights


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by lower and upper corners."""
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    @property
    def sizes(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sizes))

    @property
    def diameter(self) -> float:
        return float(np.sqrt(np.sum(self.sizes ** 2)))


@dataclass(frozen=True)
class Domain:
    """Periodic rectangular computational domain.

    global_grid gives the uniform sampling counts used for density and
    potential fields on the whole domain.
    """
    dim: int
    lengths: Tuple[float, ...]
    global_grid: Tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(self.lengths) != self.dim or len(self.global_grid) != self.dim:
            raise ValueError("lengths and global_grid must have dim entries")
        if any(L <= 0 for L in self.lengths):
            raise ValueError(f"domain lengths must be positive, got {self.lengths}")
        if any(g < 4 for g in self.global_grid):
            raise ValueError(f"global grid counts must be >= 4, got {self.global_grid}")

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))


@dataclass(frozen=True)
class Face:
    """Interior face between plus and minus elements (periodic wrap allowed).

    normal_plus is the unit outward normal of the plus element, always the
    positive coordinate axis of `direction`. Self faces (plus == minus)
    occur when a direction has a single element.
    """
    id: int
    plus_element: int
    minus_element: int
    direction: int
    normal_plus: Tuple[float, ...]
    nodes: np.ndarray       # (nf, d) coordinates on the face plane
    weights: np.ndarray     # (nf,) quadrature weights, sum = face measure


@dataclass
class Mesh:
    domain: Domain
    element_counts: Tuple[int, ...]
    element_size: Tuple[float, ...]
    lgl_orders: Tuple[int, ...]
    elements: List[Box]
    faces: List[Face]
    # per element: dict keyed by (axis, is_high) -> (face id, element is plus side)
    sides: List[Dict[Tuple[int, bool], Tuple[int, bool]]] = field(repr=False, default_factory=list)
    ref_nodes: Tuple[np.ndarray, ...] = field(repr=False, default=())
    ref_weights: Tuple[np.ndarray, ...] = field(repr=False, default=())

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def h_element(self) -> float:
        """Element diameter h_K, identical for all elements."""
        return float(np.sqrt(np.sum(np.asarray(self.element_size) ** 2)))

    def element_coords(self, k: int) -> Tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(k, self.element_counts))

    def element_index(self, coords) -> int:
        return int(np.ravel_multi_index([c % n for c, n in zip(coords, self.element_counts)],
                                        self.element_counts, mode="wrap"))

    def neighbor(self, k: int, axis: int, step: int) -> int:
        coords = list(self.element_coords(k))
        coords[axis] += step
        return self.element_index(coords)

    def element_nodes_1d(self, k: int) -> List[np.ndarray]:
        """Per-direction LGL node coordinates of element k."""
        box = self.elements[k]
        out = []
        for a in range(self.domain.dim):
            h = self.element_size[a]
            out.append(box.lo[a] + 0.5 * (self.ref_nodes[a] + 1.0) * h)
        return out

    def element_nodes(self, k: int) -> np.ndarray:
        """All LGL nodes of element k as an (n_nodes, d) array, C order."""
        axes = self.element_nodes_1d(k)
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @property
    def quad_weights(self) -> np.ndarray:
        """Flattened volume quadrature weights, shared by all elements."""
        w = np.ones(1)
        for a in range(self.domain.dim):
            w = np.outer(w, self.ref_weights[a] * 0.5 * self.element_size[a]).ravel()
        return w

    def face_quad_weights(self, axis: int) -> np.ndarray:
        """Flattened face quadrature weights for faces normal to `axis`."""
        w = np.ones(1)
        for a in range(self.domain.dim):
            if a == axis:
                continue
            w = np.outer(w, self.ref_weights[a] * 0.5 * self.element_size[a]).ravel()
        return w

    def n_volume_nodes(self) -> int:
        return int(np.prod(self.lgl_orders))

    def summary(self) -> dict:
        """JSON-friendly mesh description (ids, boxes, face adjacency)."""
        return {
            "dim": self.domain.dim,
            "lengths": list(self.domain.lengths),
            "element_counts": list(self.element_counts),
            "element_size": list(self.element_size),
            "lgl_orders": list(self.lgl_orders),
            "elements": [{"id": k, "lo": list(b.lo), "hi": list(b.hi)}
                         for k, b in enumerate(self.elements)],
            "faces": [{"id": f.id, "plus": f.plus_element, "minus": f.minus_element,
                       "direction": f.direction} for f in self.faces],
        }


def build_mesh(domain: Domain, element_counts, lgl_orders) -> Mesh:
    """Tile the domain with a uniform element grid and enumerate faces.

    Elements and faces are ordered lexicographically by integer coordinates
    (faces additionally grouped by direction) so ids are reproducible.
    """
    counts = tuple(int(c) for c in element_counts)
    orders = tuple(int(o) for o in lgl_orders)
    d = domain.dim
    if len(counts) != d or len(orders) != d:
        raise ValueError("element_counts and lgl_orders must have dim entries")
    if any(c < 1 for c in counts):
        raise ValueError(f"element counts must be >= 1, got {counts}")
    if any(o < 3 for o in orders):
        raise ValueError(f"lgl orders must be >= 3, got {orders}")

    size = tuple(L / c for L, c in zip(domain.lengths, counts))
    ref = [lgl_nodes(o) for o in orders]
    ref_nodes = tuple(r[0] for r in ref)
    ref_weights = tuple(r[1] for r in ref)

    elements: List[Box] = []
    for flat in range(int(np.prod(counts))):
        coords = np.unravel_index(flat, counts)
        lo = tuple(c * s for c, s in zip(coords, size))
        hi = tuple((c + 1) * s for c, s in zip(coords, size))
        elements.append(Box(lo=lo, hi=hi))

    mesh = Mesh(domain=domain, element_counts=counts, element_size=size,
                lgl_orders=orders, elements=elements, faces=[],
                sides=[dict() for _ in elements],
                ref_nodes=ref_nodes, ref_weights=ref_weights)

    faces: List[Face] = []
    for axis in range(d):
        normal = tuple(1.0 if a == axis else 0.0 for a in range(d))
        fw = mesh.face_quad_weights(axis)
        for k in range(mesh.n_elements):
            minus = mesh.neighbor(k, axis, +1)
            fid = len(faces)
            axes_1d = mesh.element_nodes_1d(k)
            coord_axes = [axes_1d[a] if a != axis else np.array([elements[k].hi[axis]])
                          for a in range(d)]
            grids = np.meshgrid(*coord_axes, indexing="ij")
            nodes = np.stack([g.ravel() for g in grids], axis=-1)
            faces.append(Face(id=fid, plus_element=k, minus_element=minus,
                              direction=axis, normal_plus=normal,
                              nodes=nodes, weights=fw))
            mesh.sides[k][(axis, True)] = (fid, True)
            mesh.sides[minus][(axis, False)] = (fid, False)
    mesh.faces = faces
    return mesh


@dataclass(frozen=True)
class ExtendedElement:
    """Buffered box around an element on which the local problem is solved.

    The box extends the element threefold per direction when that direction
    has at least 3 elements, and degenerates to the element itself
    otherwise; the element is always centered. Coordinates may leave
    [0, L) and are understood modulo the periodic domain.
    """
    element: int
    box: Box
    grid: Tuple[int, ...]
    factors: Tuple[int, ...]


def extended_element(mesh: Mesh, k: int, points_per_element=None) -> ExtendedElement:
    """Build the extended element of element k with its Fourier grid.

    points_per_element fixes the uniform grid resolution per element length
    in each direction (made even, minimum 8 total per direction); the
    default is twice the LGL order.
    """
    if not 0 <= k < mesh.n_elements:
        raise IndexError(f"element index {k} out of range")
    d = mesh.domain.dim
    if points_per_element is None:
        points_per_element = [2 * o for o in mesh.lgl_orders]
    elif np.isscalar(points_per_element):
        points_per_element = [int(points_per_element)] * d
    box = mesh.elements[k]
    lo, hi, grid, factors = [], [], [], []
    for a in range(d):
        factor = 3 if mesh.element_counts[a] >= 3 else 1
        h = mesh.element_size[a]
        lo.append(box.lo[a] - (factor // 2) * h)
        hi.append(box.hi[a] + (factor // 2) * h)
        n = factor * int(points_per_element[a])
        n += n % 2
        grid.append(max(n, 8))
        factors.append(factor)
    return ExtendedElement(element=k, box=Box(lo=tuple(lo), hi=tuple(hi)),
                           grid=tuple(grid), factors=tuple(factors))
