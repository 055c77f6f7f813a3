"""Trigonometric interpolation, resampling and spectral kinetic matrices."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from albdg.fourier import (interp_matrix, kinetic_matrix, kinetic_matrix_1d,
                           resample, tensor_apply, wavenumbers)


def test_wavenumbers_layout():
    k = wavenumbers(8, 4.0)
    base = 2 * np.pi / 4.0
    assert np.allclose(k, base * np.array([0, 1, 2, 3, -4, -3, -2, -1]))


def _trig(x, length):
    w = 2 * np.pi / length
    return (0.7 + np.sin(w * x + 0.3) - 0.4 * np.cos(3 * w * x)), \
           (w * np.cos(w * x + 0.3) + 1.2 * w * np.sin(3 * w * x)), \
           (-w ** 2 * np.sin(w * x + 0.3) + 3.6 * w ** 2 * np.cos(3 * w * x))


@pytest.mark.parametrize("n,origin", [(16, 0.0), (17, 0.0), (16, -1.3)])
def test_interp_matrix_reproduces_band_limited_field(n, origin):
    length = 5.0
    x = origin + length * np.arange(n) / n
    targets = origin + np.array([0.11, 1.57, 2.9, 4.99, 0.0])
    f, df, d2f = _trig(x, length)
    ft, dft, d2ft = _trig(targets, length)
    for deriv, expected in ((0, ft), (1, dft), (2, d2ft)):
        mat = interp_matrix(n, length, origin, targets, deriv=deriv)
        assert np.allclose(mat @ f, expected, atol=1e-11)


def test_interp_matrix_identity_on_grid():
    n, length = 12, 3.0
    x = length * np.arange(n) / n
    mat = interp_matrix(n, length, 0.0, x, deriv=0)
    assert np.allclose(mat, np.eye(n), atol=1e-12)


def test_interp_matrix_rejects_high_derivative():
    with pytest.raises(ValueError):
        interp_matrix(8, 1.0, 0.0, [0.5], deriv=3)


def test_nyquist_first_derivative_convention():
    """The pure Nyquist cosine has zero spectral first derivative."""
    n, length = 8, 2.0
    x = length * np.arange(n) / n
    f = np.cos(np.pi * n / length * x)  # alternating +-1
    mat = interp_matrix(n, length, 0.0, x + 0.01, deriv=1)
    assert np.max(np.abs(mat @ f)) < 1e-10


def test_tensor_apply_matches_kron():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((5, 6))
    field = rng.standard_normal((4, 6))
    out = tensor_apply([a, b], field)
    expected = (np.kron(a, b) @ field.ravel()).reshape(3, 5)
    assert np.allclose(out, expected, atol=1e-12)


def test_resample_2d_separable_with_derivatives():
    lengths = (2.0, 3.0)
    n = (16, 18)
    x = lengths[0] * np.arange(n[0]) / n[0]
    y = lengths[1] * np.arange(n[1]) / n[1]
    wx, wy = 2 * np.pi / lengths[0], 2 * np.pi / lengths[1]
    field = np.outer(np.sin(wx * x), np.cos(2 * wy * y))
    tx = np.array([0.2, 1.1, 1.9])
    ty = np.array([0.5, 2.2])
    got = resample(field, lengths, [tx, ty], derivs=[1, 0])
    expected = np.outer(wx * np.cos(wx * tx), np.cos(2 * wy * ty))
    assert np.allclose(got, expected, atol=1e-11)


def test_kinetic_matrix_1d_plane_wave_eigenpairs():
    n, length = 16, 2 * np.pi
    t = kinetic_matrix_1d(n, length)
    assert np.allclose(t, t.T, atol=1e-14)
    x = length * np.arange(n) / n
    for m in (0, 1, 3):
        for f in (np.cos(m * x), np.sin(m * x)):
            if np.allclose(f, 0):
                continue
            assert np.allclose(t @ f, 0.5 * m ** 2 * f, atol=1e-10)


def test_kinetic_matrix_2d_separable_eigenvector():
    grid, lengths = (8, 10), (1.0, 2.0)
    t = kinetic_matrix(grid, lengths)
    x = lengths[0] * np.arange(grid[0]) / grid[0]
    y = lengths[1] * np.arange(grid[1]) / grid[1]
    kx, ky = 2 * np.pi / lengths[0], 2 * 2 * np.pi / lengths[1]
    f = np.outer(np.sin(kx * x), np.cos(ky * y)).ravel()
    assert np.allclose(t @ f, 0.5 * (kx ** 2 + ky ** 2) * f, atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(min_value=8, max_value=40).filter(lambda v: v % 2 == 0),
       seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_interpolation_exact_on_random_band_limited_fields(n, seed):
    """Random fields below the Nyquist mode are reproduced exactly."""
    length = 7.0
    rng = np.random.default_rng(seed)
    x = length * np.arange(n) / n
    targets = rng.uniform(0, length, size=6)
    f = np.zeros(n)
    ft = np.zeros(6)
    for m in range(n // 2):  # strictly below Nyquist
        a, b = rng.standard_normal(2)
        w = 2 * np.pi * m / length
        f += a * np.cos(w * x) + b * np.sin(w * x)
        ft += a * np.cos(w * targets) + b * np.sin(w * targets)
    mat = interp_matrix(n, length, 0.0, targets)
    assert np.allclose(mat @ f, ft, atol=1e-8 * (1 + np.max(np.abs(f))))
