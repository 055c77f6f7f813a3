"""Interior-penalty DG algebra: bilinear form, penalties, lifting operator.

The symmetric interior penalty form for the broken basis is

    A(u, v) = 1/2 <grad u, grad v>_T - 1/2 <{grad u}, [v]>_S
              - 1/2 <{grad v}, [u]>_S + sum_F alpha_F <[u], [v]>_F

with {.} the face average and [.] the face jump. All face integrals are
nodal on the trace of the element LGL grids. Assembly goes through a set
of dense Gram matrices over the global degrees of freedom; at desk scale
(a few thousand dof) this is simpler and faster than sparse bookkeeping,
and the block sparsity pattern is still checkable on the dense arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .basis import BasisFamily
from .errors import NumericalError

CJ_MARGIN = 2.01          # strict-inequality margin for the certified penalty
GRAM_RANK_TOL = 1e-10     # relative rank cutoff for the gradient volume Gram


@dataclass
class PenaltyConfig:
    """Penalty parameter policy.

    mode "formula" uses alpha(J_K) = gamma * max(J_K, 1)^2 / h_K with the
    face value the maximum over the two neighbors. mode "cj_condition"
    uses the certified uniform value 2.01 * C_J^2 + gamma / h_K, which
    requires the lifting constant of the family being assembled.
    """
    gamma: float = 20.0
    mode: str = "formula"

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.mode not in ("formula", "cj_condition"):
            raise ValueError(f"unknown penalty mode {self.mode!r}")


def penalty_alpha(j_k: int, h_k: float, gamma: float) -> float:
    """Element penalty gamma * max(J_K, 1)^2 / h_K (floor at J_K = 0)."""
    if h_k <= 0 or gamma <= 0:
        raise ValueError("h_k and gamma must be positive")
    return gamma * max(int(j_k), 1) ** 2 / h_k


def face_alpha(alpha_plus: float, alpha_minus: float) -> float:
    return max(alpha_plus, alpha_minus)


def jump_average(face, traces_plus: np.ndarray, traces_minus: np.ndarray,
                 vector: bool = False):
    """Face jump and average of nodal traces.

    Scalar traces (..., nf): jump is vector valued, (..., d, nf), equal to
    v+ n+ + v- n-; average is (v+ + v-)/2. Vector traces (..., d, nf):
    jump is the scalar q+ . n+ + q- . n-, average the componentwise mean.
    """
    tp = np.asarray(traces_plus, dtype=float)
    tm = np.asarray(traces_minus, dtype=float)
    if tp.shape != tm.shape:
        raise ValueError(f"trace shapes differ: {tp.shape} vs {tm.shape}")
    n_plus = np.asarray(face.normal_plus)
    if vector:
        jump = np.tensordot(tp, n_plus, axes=(-2, 0)) - np.tensordot(tm, n_plus, axes=(-2, 0))
        mean = 0.5 * (tp + tm)
    else:
        diff = tp - tm
        jump = diff[..., None, :] * n_plus[:, None]
        mean = 0.5 * (tp + tm)
    return jump, mean


@dataclass
class DGForms:
    """Gram matrices of the DG form over global dof, plus penalty data.

    grad_gram:        <grad phi_i, grad phi_j>_T (block diagonal)
    jump_gram:        sum_F <[phi_i], [phi_j]>_F (unweighted)
    jump_gram_alpha:  sum_F alpha_F <[phi_i], [phi_j]>_F
    cross_gram:       B[i, j] = <[phi_i], {grad phi_j}>_S
    mean_grad_gram:   sum_F <{grad phi_i}, {grad phi_j}>_F (all components)
    """
    family: BasisFamily
    penalty: PenaltyConfig
    alpha_element: np.ndarray
    alpha_face: np.ndarray
    grad_gram: np.ndarray
    jump_gram: np.ndarray
    jump_gram_alpha: np.ndarray
    cross_gram: np.ndarray
    mean_grad_gram: np.ndarray

    def stiffness(self) -> np.ndarray:
        """Matrix of A(phi_i, phi_j) (no potential term)."""
        sym_cross = 0.5 * (self.cross_gram + self.cross_gram.T)
        return 0.5 * self.grad_gram - sym_cross + self.jump_gram_alpha


@dataclass
class DGHamiltonian:
    """Assembled symmetric DG Hamiltonian over (element, basis) dof."""
    matrix: np.ndarray
    counts: np.ndarray
    offsets: np.ndarray
    alpha_element: np.ndarray
    alpha_face: np.ndarray
    asymmetry: float
    forms: Optional[DGForms] = field(default=None, repr=False)

    @property
    def total_dof(self) -> int:
        return self.matrix.shape[0]


@dataclass
class LiftingData:
    """Whitened Gram data of the discrete gradient space and its constant.

    c_j is the operator norm of the face-average trace on the gradient
    space: sup ||{q}||_S / ||q||_T. maximizer holds the dof coefficients
    of a q attaining the sup; empty is set when the gradient space is {0}.
    """
    c_j: float
    whitener: np.ndarray
    grad_gram: np.ndarray
    maximizer: Optional[np.ndarray]
    empty: bool = False


def _compute_alphas(family: BasisFamily, penalty: PenaltyConfig,
                    c_j: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    mesh = family.mesh
    h_k = mesh.h_element
    if penalty.mode == "formula":
        alpha_k = np.array([penalty_alpha(j, h_k, penalty.gamma) for j in family.counts])
    else:
        if c_j is None:
            c_j = lifting_constant(family).c_j
        alpha_k = np.full(mesh.n_elements, CJ_MARGIN * c_j ** 2 + penalty.gamma / h_k)
    alpha_f = np.array([face_alpha(alpha_k[f.plus_element], alpha_k[f.minus_element])
                        for f in mesh.faces])
    return alpha_k, alpha_f


def assemble_forms(family: BasisFamily, penalty: PenaltyConfig,
                   c_j: Optional[float] = None) -> DGForms:
    """Build all volume and face Gram matrices of the DG form."""
    mesh = family.mesh
    d = mesh.domain.dim
    n = family.total_dof
    w = mesh.quad_weights

    grad_gram = np.zeros((n, n))
    jump_gram = np.zeros((n, n))
    jump_gram_alpha = np.zeros((n, n))
    cross_gram = np.zeros((n, n))
    mean_grad_gram = np.zeros((n, n))

    for k, b in enumerate(family.bases):
        if b.count == 0:
            continue
        sl = family.dof_slice(k)
        grad_gram[sl, sl] = np.einsum("idn,n,jdn->ij", b.gradients, w, b.gradients)

    alpha_k, alpha_f = _compute_alphas(family, penalty, c_j)

    for f in mesh.faces:
        axis = f.direction
        wf = f.weights
        # (element, jump sign, value traces, full gradient traces)
        side_data = []
        for elem, high, sign in ((f.plus_element, True, 1.0),
                                 (f.minus_element, False, -1.0)):
            b = family.bases[elem]
            side_data.append((elem, sign, b.face_values[(axis, high)],
                              b.face_gradients[(axis, high)]))
        for elem_a, sign_a, vals_a, grads_a in side_data:
            if vals_a.shape[0] == 0:
                continue
            sa = family.dof_slice(elem_a)
            for elem_b, sign_b, vals_b, grads_b in side_data:
                if vals_b.shape[0] == 0:
                    continue
                sb = family.dof_slice(elem_b)
                jv = (sign_a * sign_b) * ((vals_a * wf[None, :]) @ vals_b.T)
                jump_gram[sa, sb] += jv
                jump_gram_alpha[sa, sb] += alpha_f[f.id] * jv
                # [phi_a] . {grad phi_b} = sign_a * v_a * (grad_b . n+)/2
                cross_gram[sa, sb] += 0.5 * sign_a * ((vals_a * wf[None, :])
                                                      @ grads_b[:, axis, :].T)
                mean_grad_gram[sa, sb] += 0.25 * np.einsum(
                    "idn,n,jdn->ij", grads_a, wf, grads_b)

    return DGForms(family=family, penalty=penalty, alpha_element=alpha_k,
                   alpha_face=alpha_f, grad_gram=grad_gram, jump_gram=jump_gram,
                   jump_gram_alpha=jump_gram_alpha, cross_gram=cross_gram,
                   mean_grad_gram=mean_grad_gram)


def assemble_hamiltonian(family: BasisFamily, v_elements, penalty: PenaltyConfig,
                         forms: Optional[DGForms] = None) -> DGHamiltonian:
    """Assemble H[(K,j),(K',j')] = A(phi, phi') + <V phi, phi'>_T.

    v_elements holds the effective potential at each element's LGL nodes
    (see FamilyBuilder.potential_on_elements). The result is symmetrized;
    the pre-symmetrization asymmetry is recorded and checked.
    """
    if forms is None:
        forms = assemble_forms(family, penalty)
    mesh = family.mesh
    w = mesh.quad_weights
    h = forms.stiffness().copy()
    for k, b in enumerate(family.bases):
        if b.count == 0:
            continue
        sl = family.dof_slice(k)
        vw = np.asarray(v_elements[k]).ravel() * w
        h[sl, sl] += (b.values * vw[None, :]) @ b.values.T

    scale = max(1.0, float(np.max(np.abs(h))))
    asym = float(np.max(np.abs(h - h.T))) / scale
    if asym > 1e-9:
        raise NumericalError(f"assembled Hamiltonian asymmetry {asym:.3e}")
    h = 0.5 * (h + h.T)
    return DGHamiltonian(matrix=h, counts=family.counts.copy(),
                         offsets=family.offsets.copy(),
                         alpha_element=forms.alpha_element,
                         alpha_face=forms.alpha_face,
                         asymmetry=asym, forms=forms)


def energy_norm(family: BasisFamily, coefficients: np.ndarray,
                penalty: PenaltyConfig, forms: Optional[DGForms] = None) -> float:
    """Squared energy norm  1/2 sum_K ||grad u||_K^2 + sum_F alpha_F ||[u]||_F^2."""
    if forms is None:
        forms = assemble_forms(family, penalty)
    c = np.asarray(coefficients, dtype=float)
    return float(0.5 * c @ forms.grad_gram @ c + c @ forms.jump_gram_alpha @ c)


def lifting_constant(family: BasisFamily, forms: Optional[DGForms] = None) -> LiftingData:
    """Operator norm C_J of the face-average map on the gradient space.

    C_J^2 is the largest eigenvalue of the whitened face-average Gram: rank
    deficient directions of the gradient volume Gram (relative threshold
    1e-10) are removed, and the mean-trace Gram is diagonalized in the
    whitened coordinates.
    """
    if forms is None:
        forms = assemble_forms(family, PenaltyConfig())
    g = forms.grad_gram
    lam, u = np.linalg.eigh(g)
    if lam.size == 0 or lam[-1] <= 0.0:
        return LiftingData(c_j=0.0, whitener=np.zeros_like(g), grad_gram=g,
                           maximizer=None, empty=True)
    keep = lam > GRAM_RANK_TOL * lam[-1]
    y = u[:, keep] / np.sqrt(lam[keep])[None, :]
    small = y.T @ forms.mean_grad_gram @ y
    mu, vecs = np.linalg.eigh(small)
    c_j = float(np.sqrt(max(mu[-1], 0.0)))
    maximizer = y @ vecs[:, -1]
    return LiftingData(c_j=c_j, whitener=y, grad_gram=g, maximizer=maximizer,
                       empty=False)


def apply_lifting(lift: LiftingData, forms: DGForms,
                  v_coefficients: np.ndarray) -> np.ndarray:
    """Coefficients (over {grad phi_i}) of the lifting of v's jump data.

    Solves <L v, q>_T = <[v], {q}>_S for all q in the gradient space via
    the pseudo-inverse on the retained rank of the volume Gram, and checks
    the defining identity on the retained directions.
    """
    c = np.asarray(v_coefficients, dtype=float)
    rhs = forms.cross_gram.T @ c
    if lift.empty:
        return np.zeros_like(c)
    b = lift.whitener @ (lift.whitener.T @ rhs)
    resid = lift.grad_gram @ b - rhs
    scale = max(1.0, float(np.linalg.norm(rhs)))
    if float(np.linalg.norm(resid)) > 1e-9 * scale:
        raise NumericalError("lifting identity residual exceeds tolerance")
    return b


def extended_bilinear(family: BasisFamily, u_coefficients, v_coefficients,
                      penalty: PenaltyConfig, forms: Optional[DGForms] = None,
                      lift: Optional[LiftingData] = None) -> float:
    """Lifting-based extension of the DG form, evaluated on basis vectors.

    Agrees with A(u, v) on the discrete space; exercised by the property
    battery for the coercivity and continuity bounds.
    """
    if forms is None:
        forms = assemble_forms(family, penalty)
    if lift is None:
        lift = lifting_constant(family, forms)
    cu = np.asarray(u_coefficients, dtype=float)
    cv = np.asarray(v_coefficients, dtype=float)
    bu = apply_lifting(lift, forms, cu)
    bv = apply_lifting(lift, forms, cv)
    g = forms.grad_gram
    return float(0.5 * cu @ g @ cv - 0.5 * bu @ g @ cv - 0.5 * bv @ g @ cu
                 + cu @ forms.jump_gram_alpha @ cv)


def coordinate_dump(ham: DGHamiltonian, path, threshold: float = 0.0) -> None:
    """Write the matrix as 'row col value' text lines for inspection."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for i in range(ham.total_dof):
            for j in range(ham.total_dof):
                v = ham.matrix[i, j]
                if abs(v) > threshold:
                    fh.write(f"{i} {j} {v!r}\n")
