"""Residual-based a posteriori error estimator for DG eigenpairs.

Per eigenpair i and element K three squared terms are computed:

    residual:       gamma1(J_K) ||(-1/2 Lap + V - eps_i) u_i||_K^2
    gradient jump:  1/4 sum_{F in dK} gamma2(J_F) ||[grad u_i]||_F^2
    value jump:     1/4 sum_{F in dK} gamma2(J_F) alpha(J_F)^2 ||[u_i]||_F^2

with gamma1(J) = h^2 / max(J,1)^2 and gamma2(J) = h / max(J,1), the face
gamma2 being the maximum over the two neighbors. Rollups over i and K use
math.fsum in a fixed order so reports are bit-reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .basis import BasisFamily
from .dg import PenaltyConfig, _compute_alphas
from .eigsolve import EigenSolution


@dataclass
class EstimatorConstants:
    """Per-element and per-face approximation and penalty constants."""
    gamma1_element: np.ndarray
    gamma2_element: np.ndarray
    gamma2_face: np.ndarray
    alpha_element: np.ndarray
    alpha_face: np.ndarray
    gamma: float


def build_constants(family: BasisFamily, penalty: PenaltyConfig,
                    c_j: Optional[float] = None) -> EstimatorConstants:
    mesh = family.mesh
    h = mesh.h_element
    jeff = np.maximum(family.counts, 1).astype(float)
    gamma1 = h ** 2 / jeff ** 2
    gamma2 = h / jeff
    alpha_k, alpha_f = _compute_alphas(family, penalty, c_j)
    gamma2_face = np.array([max(gamma2[f.plus_element], gamma2[f.minus_element])
                            for f in mesh.faces])
    return EstimatorConstants(gamma1_element=gamma1, gamma2_element=gamma2,
                              gamma2_face=gamma2_face, alpha_element=alpha_k,
                              alpha_face=alpha_f, gamma=penalty.gamma)


def residual_term(sol: EigenSolution, i: int, k: int, v_elements,
                  constants: EstimatorConstants) -> float:
    """Squared residual term of eigenpair i on element k."""
    family = sol.family
    b = family.bases[k]
    if b.count == 0:
        return 0.0
    w = family.mesh.quad_weights
    c = sol.coefficients[family.dof_slice(k), i]
    v = np.asarray(v_elements[k]).ravel()
    r = c @ (-0.5 * b.laplacians + (v - sol.eigenvalues[i])[None, :] * b.values)
    return float(constants.gamma1_element[k] * np.sum(w * r * r))


def _side_traces(family: BasisFamily, sol: EigenSolution, face, axis: int):
    """Solution value and axis-gradient traces of both face sides, (N, nf)."""
    out = []
    for elem, high in ((face.plus_element, True), (face.minus_element, False)):
        b = family.bases[elem]
        c = sol.coefficients[family.dof_slice(elem), :]
        if b.count == 0:
            nf = len(face.weights)
            out.append((np.zeros((sol.n, nf)), np.zeros((sol.n, nf))))
        else:
            vals = c.T @ b.face_values[(axis, high)]
            gax = c.T @ b.face_gradients[(axis, high)][:, axis, :]
            out.append((vals, gax))
    return out


def face_terms(sol: EigenSolution, i: int, k: int,
               constants: EstimatorConstants):
    """(gradient-jump, value-jump) squared terms of eigenpair i on element k.

    Iterates the element's 2d sides; a self face (single element in a
    direction) is seen from both sides and therefore counted twice, which
    keeps the sum over elements equal to twice the face-set sum.
    """
    family = sol.family
    mesh = family.mesh
    eta_g = 0.0
    eta_v = 0.0
    for (axis, _high), (fid, _is_plus) in sorted(mesh.sides[k].items()):
        face = mesh.faces[fid]
        (vp, gp), (vm, gm) = _side_traces(family, sol, face, axis)
        jump_val = vp[i] - vm[i]
        jump_grad = gp[i] - gm[i]
        g2 = constants.gamma2_face[fid]
        af = constants.alpha_face[fid]
        eta_g += 0.25 * g2 * float(np.sum(face.weights * jump_grad ** 2))
        eta_v += 0.25 * g2 * af ** 2 * float(np.sum(face.weights * jump_val ** 2))
    return eta_g, eta_v


@dataclass
class EstimatorReport:
    """Per-(i, K) estimator terms with fixed-order rollups."""
    eta_r2: np.ndarray       # (N, M)
    eta_g2: np.ndarray       # (N, M)
    eta_v2: np.ndarray       # (N, M)
    eta_ik2: np.ndarray      # (N, M)
    eta_k2: np.ndarray       # (M,)
    eta_i2: np.ndarray       # (N,)
    eta2: float
    counts: np.ndarray
    gamma: float
    step: int = 0

    def quintiles(self) -> List[float]:
        """Quintile values (20th..100th percentile) of the element rollups."""
        return [float(q) for q in np.quantile(self.eta_k2, [0.2, 0.4, 0.6, 0.8, 1.0])]


def build_report(sol: EigenSolution, v_elements, constants: EstimatorConstants,
                 step: int = 0) -> EstimatorReport:
    family = sol.family
    m = family.mesh.n_elements
    n = sol.n
    eta_r2 = np.zeros((n, m))
    eta_g2 = np.zeros((n, m))
    eta_v2 = np.zeros((n, m))
    for k in range(m):
        for i in range(n):
            eta_r2[i, k] = residual_term(sol, i, k, v_elements, constants)
            eta_g2[i, k], eta_v2[i, k] = face_terms(sol, i, k, constants)
    eta_ik2 = np.zeros((n, m))
    for i in range(n):
        for k in range(m):
            eta_ik2[i, k] = math.fsum((eta_r2[i, k], eta_g2[i, k], eta_v2[i, k]))
    eta_k2 = np.array([math.fsum(eta_ik2[:, k]) for k in range(m)])
    eta_i2 = np.array([math.fsum(eta_ik2[i, :]) for i in range(n)])
    eta2 = math.fsum(eta_k2)
    return EstimatorReport(eta_r2=eta_r2, eta_g2=eta_g2, eta_v2=eta_v2,
                           eta_ik2=eta_ik2, eta_k2=eta_k2, eta_i2=eta_i2,
                           eta2=eta2, counts=family.counts.copy(),
                           gamma=constants.gamma, step=step)


def write_report_csv(reports, path) -> None:
    """CSV export: one row per (step, element, eigenpair) with the terms."""
    if not isinstance(reports, (list, tuple)):
        reports = [reports]
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "element", "i", "eta_R2", "eta_G2", "eta_V2",
                         "eta_iK2", "eta_K2"])
        for rep in reports:
            n, m = rep.eta_ik2.shape
            for k in range(m):
                for i in range(n):
                    writer.writerow([rep.step, k, i,
                                     repr(float(rep.eta_r2[i, k])),
                                     repr(float(rep.eta_g2[i, k])),
                                     repr(float(rep.eta_v2[i, k])),
                                     repr(float(rep.eta_ik2[i, k])),
                                     repr(float(rep.eta_k2[k]))])


def summary_dict(report: EstimatorReport) -> Dict:
    """JSON-friendly rollup summary of one report."""
    return {
        "step": report.step,
        "eta2": float(report.eta2),
        "eta_i2": [float(x) for x in report.eta_i2],
        "eta_K2": [float(x) for x in report.eta_k2],
        "counts": [int(c) for c in report.counts],
        "quintiles": report.quintiles(),
    }
