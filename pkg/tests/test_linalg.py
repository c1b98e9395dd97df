import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from qstat.linalg import (
    GradientGrid, apply_hermitian, dilate, hhl_solve, jordan_gradient, phase_scale, qpca,
    simulate_density_exponential, swap_trick_step,
)
from qstat.state import StateVector
from conftest import random_unitary, random_vector, seeds

PLUS = StateVector(np.array([1, 1]) / math.sqrt(2))


def hermitian_with_spectrum(rng, values):
    u = random_unitary(rng, len(values))
    return (u * np.asarray(values, dtype=float)) @ u.conj().T


def fidelity(a, b):
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return abs(np.vdot(a, b)) ** 2


# ----------------------------------------------------- apply_hermitian


def test_apply_identity():
    rng = np.random.default_rng(0)
    s = StateVector(random_vector(rng, 4))
    run = apply_hermitian(np.eye(4), s, 4, scale=2.0, constant=2.0)
    assert fidelity(run.state.amplitudes, s.amplitudes) == pytest.approx(1, abs=1e-12)
    assert run.success_probability == pytest.approx(1 / 4, abs=1e-12)


def test_apply_z_on_plus():
    run = apply_hermitian(np.diag([1.0, -1.0]), PLUS, 3, scale=2.0)
    minus = np.array([1, -1]) / math.sqrt(2)
    assert fidelity(run.state.amplitudes, minus) == pytest.approx(1, abs=1e-12)


@given(seeds)
def test_apply_hermitian_on_grid_spectrum(seed):
    rng = np.random.default_rng(seed)
    # scale 2, m = 4: decodable eigenvalues are multiples of 1/4
    values = rng.choice([-1.75, -1.25, -0.5, 0.25, 0.75, 1.5], size=4, replace=False)
    h = hermitian_with_spectrum(rng, values)
    s = StateVector(random_vector(rng, 4))
    run = apply_hermitian(h, s, 4, scale=2.0)
    assert fidelity(run.state.amplitudes, h @ s.amplitudes) >= 1 - 1e-9
    # success probability is sum |lam beta / C|^2 for on-grid eigenvalues
    assert run.success_probability == pytest.approx(np.linalg.norm(h @ s.amplitudes) ** 2 / 4, abs=1e-10)
    # the phase register is uncomputed: all flag-1 weight sits at phase 0
    assert run.flag_probability == pytest.approx(run.success_probability, abs=1e-10)


def test_apply_hermitian_rejects_small_constant():
    with pytest.raises(ValueError):
        apply_hermitian(np.diag([1.0, -1.0]), PLUS, 3, scale=2.0, constant=1.0)
    with pytest.raises(ValueError):
        apply_hermitian(np.array([[0, 1], [0, 0]]), PLUS, 3)


def test_phase_scale_rules():
    h = np.array([[1, 2], [2, -1]], dtype=float)
    assert phase_scale(h, "spectral", margin=0) == pytest.approx(math.sqrt(5))
    assert phase_scale(h, "one_norm", margin=0) == pytest.approx(3)
    with pytest.raises(ValueError):
        phase_scale(h, "bogus")


# ---------------------------------------------------------------- HHL


def test_hhl_identity():
    b = np.array([0.6, 0.8j])
    res = hhl_solve(np.eye(2), b)
    assert fidelity(res.solution, b) == pytest.approx(1, abs=1e-10)


def test_hhl_diagonal():
    res = hhl_solve(np.diag([1.0, 0.5]), np.array([1, 1]) / math.sqrt(2), m=7)
    assert fidelity(res.solution, np.array([1, 2]) / math.sqrt(5)) >= 0.999


@pytest.mark.parametrize("dim,seed", [(4, 1), (4, 2), (8, 3), (8, 4)])
def test_hhl_random_hermitian(dim, seed):
    rng = np.random.default_rng(seed)
    mags = np.geomspace(1, 1 / 8, dim) * rng.choice([-1, 1], dim)
    a = hermitian_with_spectrum(rng, mags)
    b = random_vector(rng, dim)
    res = hhl_solve(a, b, m=7)
    assert res.kappa <= 8 + 1e-9
    assert fidelity(res.solution, np.linalg.solve(a, b)) >= 0.999


def test_hhl_scale_invariance():
    rng = np.random.default_rng(5)
    a = hermitian_with_spectrum(rng, [1.0, -0.4, 0.3, 0.8])
    b = random_vector(rng, 4)
    one = hhl_solve(a, b).solution
    for c in (0.1, 3.0, 40.0):
        assert fidelity(hhl_solve(c * a, b).solution, one) == pytest.approx(1, abs=1e-9)


def test_hhl_non_hermitian_dilation():
    rng = np.random.default_rng(6)
    u = random_unitary(rng, 4)
    v = random_unitary(rng, 6)
    sig = np.zeros((4, 6))
    sig[range(4), range(4)] = [1, 0.7, 0.45, 0.3]
    a = u @ sig @ v.conj().T
    b = random_vector(rng, 4)
    res = hhl_solve(a, b, m=7)
    assert res.fidelity >= 0.99
    assert fidelity(res.solution, np.linalg.pinv(a) @ b) == pytest.approx(res.fidelity, abs=1e-12)


@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_dilation_eigenpairs(seed, rows, cols):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    big = dilate(a)
    u, svals, vh = np.linalg.svd(a)
    for k, sigma in enumerate(svals):
        for sign in (1, -1):
            vec = np.concatenate([u[:, k], sign * vh[k].conj()]) / math.sqrt(2)
            assert np.allclose(big @ vec, sign * sigma * vec, atol=1e-10)


def test_hhl_errors():
    with pytest.raises(ValueError):
        hhl_solve(np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        hhl_solve(np.diag([1.0, 1e-4]), np.array([0, 1.0]), kappa_target=4)


# ---------------------------------------------------------- gradient

GRID = GradientGrid(2, 6, 0.01, 100.0)   # resolution 1/64


def test_gradient_constant_and_linear():
    zero = jordan_gradient(lambda x: 3.0, [0.2, -0.1], GRID)
    assert np.allclose(zero.gradient, 0) and zero.oracle_calls == 1
    g = np.array([5 / 64, -11 / 64])
    lin = jordan_gradient(lambda x: float(g @ x), [0.0, 0.0], GRID)
    assert np.allclose(lin.gradient, g, atol=1e-12)
    assert lin.probability == pytest.approx(1, abs=1e-10)


def test_gradient_quadratic_within_one_step():
    g = np.array([0.13, -0.27])
    hess = np.array([[0.02, 0.01], [0.01, -0.03]])
    res = jordan_gradient(lambda x: float(g @ x + 0.5 * x @ hess @ x), [0.0, 0.0], GRID)
    assert np.max(np.abs(res.gradient - g)) <= GRID.resolution


@pytest.mark.parametrize("seed", range(20))
def test_gradient_vs_central_differences(seed):
    rng = np.random.default_rng(seed)
    g = rng.uniform(-0.35, 0.35, 2)
    w = rng.uniform(-0.05, 0.05, 2)
    x0 = rng.uniform(-1, 1, 2)

    def field(x):
        return float(g @ x + w[0] * math.sin(x[0] + x[1]) + w[1] * x[0] * x[1])

    h = 1e-5
    fd = np.array([(field(x0 + h * e) - field(x0 - h * e)) / (2 * h) for e in np.eye(2)])
    res = jordan_gradient(field, x0, GRID)
    assert np.max(np.abs(res.gradient - fd)) <= GRID.resolution


def test_gradient_wrap_guard():
    with pytest.raises(ValueError, match="wrap"):
        jordan_gradient(lambda x: float(3 * x.sum()), [0.0, 0.0], GRID)


# --------------------------------------------------------------- QPCA


def test_qpca_pure_state():
    res = qpca(np.diag([1.0, 0.0]), 1000, 2, PLUS, t=math.pi, epsilon=0.01)
    found = {round(v, 9) for v, p in res.estimates if p > 0.01}
    assert found == {0.0, 1.0}


def test_qpca_diagonal_on_grid():
    res = qpca(np.diag([0.75, 0.25]), 4000, 2, PLUS, t=2 * math.pi, epsilon=0.01)
    top = sorted(v for v, _ in res.estimates[:2])
    assert top == pytest.approx([0.25, 0.75], abs=1e-12)
    assert res.estimates[0][1] + res.estimates[1][1] >= 0.99


def test_qpca_copy_budget():
    with pytest.raises(ValueError, match="copies"):
        qpca(np.diag([0.5, 0.5]), 10, 2, PLUS, t=2 * math.pi, epsilon=0.01)


def test_swap_trick_second_order():
    rng = np.random.default_rng(2)
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    psi = random_vector(rng, 2)
    sigma = np.outer(psi, psi.conj())
    dts = np.geomspace(1e-3, 1e-1, 6)
    errs = []
    for dt in dts:
        exact = expm(-1j * rho * dt)
        diff = swap_trick_step(rho, sigma, dt) - exact @ sigma @ exact.conj().T
        errs.append(np.abs(np.linalg.eigvalsh(diff)).sum())
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert 1.8 <= slope <= 2.2


def test_many_steps_approach_exponential():
    rho = np.diag([0.7, 0.3]).astype(complex)
    sigma = np.full((2, 2), 0.5, dtype=complex)
    exact = expm(-1j * rho * 1.0)
    target = exact @ sigma @ exact.conj().T
    err = np.abs(np.linalg.eigvalsh(simulate_density_exponential(rho, sigma, 1.0, 200) - target)).sum()
    # leading error term is t^2 / steps
    assert err <= 2 * 1.0 ** 2 / 200
