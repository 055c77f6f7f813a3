"""Trigonometric interpolation and spectral differentiation utilities.

Everything here works on uniform periodic grids. A field sampled on n
points of a periodic interval of given length is identified with its
band-limited trigonometric interpolant; the routines below evaluate that
interpolant (and its derivatives) at arbitrary target points, resample
whole d-dimensional fields, and build the dense real-space kinetic matrix
used by the local eigenproblem solvers.
"""

from __future__ import annotations

import numpy as np


def wavenumbers(n: int, length: float) -> np.ndarray:
    """Angular wavenumbers of the length-n DFT on a periodic interval."""
    return 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)


def interp_matrix(n: int, length: float, origin: float, targets, deriv: int = 0) -> np.ndarray:
    """Dense real matrix mapping n uniform samples to values at `targets`.

    The matrix evaluates the real trigonometric interpolant of the samples
    (or its `deriv`-th derivative, deriv in {0, 1, 2}) at the target
    coordinates. For even n the Nyquist mode is treated as a pure cosine;
    its first derivative is set to zero, the standard spectral-derivative
    convention.
    """
    if deriv not in (0, 1, 2):
        raise ValueError(f"deriv must be 0, 1 or 2, got {deriv}")
    t = np.asarray(targets, dtype=float).ravel()
    k = wavenumbers(n, length)
    if deriv == 0:
        mult = np.ones_like(k)
    elif deriv == 1:
        mult = 1j * k
        if n % 2 == 0:
            mult[n // 2] = 0.0
    else:
        mult = -(k ** 2)
    # rows of the DFT applied to nodal values: F[g, j] = exp(-i k_g x_j)
    dft = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    phases = np.exp(1j * np.outer(t - origin, k)) * mult
    return np.real(phases @ dft) / n


def tensor_apply(mats, field: np.ndarray) -> np.ndarray:
    """Apply one matrix per axis to a d-dimensional field.

    mats[a] has shape (m_a, n_a) and acts along axis a of `field`
    (shape (n_0, ..., n_{d-1})); the result has shape (m_0, ..., m_{d-1}).
    """
    out = field
    for axis, m in enumerate(mats):
        out = np.moveaxis(np.tensordot(m, out, axes=(1, axis)), 0, axis)
    return out


def resample(field: np.ndarray, lengths, targets_per_axis, origin=None,
             derivs=None) -> np.ndarray:
    """Evaluate a periodic gridded field at a tensor product of targets.

    `targets_per_axis[a]` holds the target coordinates along axis a;
    `derivs[a]` (default all zero) selects the derivative order applied
    along that axis. Sequential one-axis interpolation of a real field is
    exact for the band-limited interpolant, so matrices are applied one
    axis at a time.
    """
    field = np.asarray(field, dtype=float)
    d = field.ndim
    if origin is None:
        origin = [0.0] * d
    if derivs is None:
        derivs = [0] * d
    mats = [interp_matrix(field.shape[a], lengths[a], origin[a],
                          targets_per_axis[a], derivs[a]) for a in range(d)]
    return tensor_apply(mats, field)


def kinetic_matrix_1d(n: int, length: float) -> np.ndarray:
    """Dense real-space matrix of -1/2 d^2/dx^2 on a uniform periodic grid."""
    k = wavenumbers(n, length)
    col = np.fft.ifft(0.5 * k ** 2).real
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    t = col[idx]
    return 0.5 * (t + t.T)


def kinetic_matrix(grid, lengths) -> np.ndarray:
    """Dense matrix of -1/2 Laplacian on a uniform periodic tensor grid.

    Row/column ordering is C order over the grid, matching `ravel()` of
    fields sampled on the same grid.
    """
    grid = tuple(int(g) for g in grid)
    total = int(np.prod(grid))
    out = np.zeros((total, total))
    for axis, (n, length) in enumerate(zip(grid, lengths)):
        t1 = kinetic_matrix_1d(n, length)
        left = int(np.prod(grid[:axis], dtype=int))
        right = int(np.prod(grid[axis + 1:], dtype=int))
        out += np.kron(np.kron(np.eye(left), t1), np.eye(right))
    return out
