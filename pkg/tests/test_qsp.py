import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import chebyshev as C
from scipy.linalg import expm

from qstat import qsp
from qstat.amplitude import grover_success_closed_form
from qstat.state import StateVector
from conftest import random_unitary, random_vector, seeds

GRID = np.linspace(-1, 1, 2001)


def cheb_coeffs_of_p(phases, degree):
    """Chebyshev coefficients of the realised P, fitted on many nodes."""
    nodes = np.cos(np.pi * (np.arange(4 * degree + 8) + 0.5) / (4 * degree + 8))
    p, _ = qsp.qsp_values(phases, nodes)
    return C.chebfit(nodes, p, degree + 4)


# ------------------------------------------------------------ scalar QSP


def test_zero_phase_examples():
    for x in (-0.8, -0.1, 0.0, 0.4, 1.0):
        assert qsp.qsp_evaluate([0, 0], x)[1] == pytest.approx(x, abs=1e-14)
        assert qsp.qsp_evaluate([0, 0, 0], x)[1] == pytest.approx(2 * x * x - 1, abs=1e-14)
    for d in range(1, 12):
        p, _ = qsp.qsp_values(qsp.chebyshev_phases(d), GRID)
        assert np.allclose(p, np.cos(d * np.arccos(GRID)), atol=1e-12)


def test_evaluate_rejects_out_of_range():
    with pytest.raises(ValueError):
        qsp.qsp_evaluate([0, 0], 1.1)


def test_vectorised_values_match_matrix_product():
    phases = np.random.default_rng(1).uniform(-np.pi, np.pi, 6)
    p, _ = qsp.qsp_values(phases, GRID[::97])
    for x, val in zip(GRID[::97], p):
        u, px = qsp.qsp_evaluate(phases, x)
        assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-12)
        assert val == pytest.approx(px, abs=1e-12)


@given(seeds, st.integers(0, 20))
def test_identity_and_parity_law(seed, d):
    phases = np.random.default_rng(seed).uniform(-np.pi, np.pi, d + 1)
    assert qsp.qsp_identity_error(phases) <= 1e-8
    coeffs = cheb_coeffs_of_p(phases, d)
    wrong = [c for k, c in enumerate(coeffs) if k > d or k % 2 != d % 2]
    assert np.max(np.abs(wrong)) < 1e-8


def test_plus_basis_readout():
    u, val = qsp.qsp_evaluate([0.3, -0.2, 0.7], 0.5, signal_basis="+")
    plus = np.array([1, 1]) / math.sqrt(2)
    assert val == pytest.approx(plus @ u @ plus)
    with pytest.raises(ValueError):
        qsp.qsp_evaluate([0.0], 0.5, signal_basis="y")


def test_phase_sequence_json():
    seq = qsp.PhaseSequence([0.1, 0.2, 0.3], "demo")
    back = qsp.PhaseSequence.from_json(seq.to_json())
    assert np.array_equal(back.phases, seq.phases) and back.degree == 2 and back.parity == 0
    assert np.array_equal(qsp.PhaseSequence.from_json("[0.5, 0.25]").phases, [0.5, 0.25])
    with pytest.raises(ValueError):
        qsp.PhaseSequence.from_json('{"phases": [0.1], "extra": 1}')
    with pytest.raises(ValueError):
        qsp.PhaseSequence.from_json('{"phases": [0.1, 0.2], "degree": 5}')


# ----------------------------------------------------------- phase solver


def realised_error(seq, coeffs):
    p, _ = qsp.qsp_values(seq, GRID)
    return float(np.max(np.abs(p.real - C.chebval(GRID, coeffs))))


def test_solver_recovers_x_and_t4():
    seq = qsp.solve_phases([0, 1])
    assert seq.degree == 1 and realised_error(seq, [0, 1]) <= 1e-10
    t4 = [0, 0, 0, 0, 1]
    seq = qsp.solve_phases(t4)
    assert seq.degree == 4 and realised_error(seq, t4) <= 1e-10


def test_solver_sign_polynomial_degree_15():
    coeffs = qsp.sign_polynomial(15)
    seq = qsp.solve_phases(coeffs, parity=1)
    assert realised_error(seq, coeffs) <= 1e-6
    assert qsp.qsp_identity_error(seq) <= 1e-8


@given(seeds, st.integers(1, 16))
def test_solver_random_parity_targets(seed, d):
    rng = np.random.default_rng(seed)
    coeffs = np.zeros(d + 1)
    coeffs[d % 2::2] = rng.normal(size=coeffs[d % 2::2].size)
    coeffs *= rng.uniform(0.3, 0.95) / np.max(np.abs(C.chebval(GRID, coeffs)))
    seq = qsp.solve_phases(coeffs)
    assert realised_error(seq, coeffs) <= 1e-6


def test_solver_monomial_basis():
    seq = qsp.solve_phases([0, 0.5, 0, 0.25], basis="monomial")   # 0.5x + 0.25x^3
    p, _ = qsp.qsp_values(seq, GRID)
    assert np.max(np.abs(p.real - (0.5 * GRID + 0.25 * GRID ** 3))) <= 1e-6


def test_solver_errors():
    with pytest.raises(ValueError, match="parity"):
        qsp.solve_phases([0.1, 0.5])
    with pytest.raises(ValueError, match="exceeds 1"):
        qsp.solve_phases([0, 1.5])
    with pytest.raises(ValueError, match="cap"):
        qsp.solve_phases(np.eye(43)[42] * 0.5)


# --------------------------------------------------------- block encoding


@given(seeds, st.integers(1, 5), st.booleans())
def test_block_encoding_probe(seed, n, hermitian):
    rng = np.random.default_rng(seed)
    dim = 1 << n
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    if hermitian:
        a = a + a.conj().T
    a /= np.linalg.norm(a, 2) * 1.01
    enc = qsp.block_encode(a)
    assert np.allclose(enc.U.conj().T @ enc.U, np.eye(2 * dim), atol=1e-10)
    # <0|<j| U |0>|k> with the auxiliary above the system register
    for j in range(dim):
        for k in range(dim):
            assert abs(enc.U[j, k] - a[j, k]) <= 1e-10
    assert enc.hermitian == hermitian


def test_block_encoding_errors():
    with pytest.raises(ValueError, match="norm"):
        qsp.block_encode(2 * np.eye(2))
    with pytest.raises(ValueError, match="square"):
        qsp.block_encode(np.ones((2, 3)))
    assert qsp.block_encode(2 * np.eye(2), scale=2).probe_error() <= 1e-14


# -------------------------------------------------------------------- QET


def test_qet_matches_scalar_qsp():
    phases = np.random.default_rng(5).uniform(-np.pi, np.pi, 7)
    for x in (-0.9, -0.2, 0.35, 0.8):
        res = qsp.qet_apply(np.array([[x]]), phases, StateVector(np.array([1.0])))
        val = res.unnormalized[0]
        assert val == pytest.approx(qsp.qsp_evaluate(phases, x)[1], abs=1e-12)


@given(seeds)
def test_qet_against_eigendecomposition(seed):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = h + h.conj().T
    h /= np.linalg.norm(h, 2)
    phases = rng.uniform(-np.pi, np.pi, 6)
    s = StateVector(random_vector(rng, 4))
    vals, vecs = np.linalg.eigh(h)
    poly = np.array([qsp.qsp_evaluate(phases, v)[1] for v in vals])
    expected = vecs @ (poly * (vecs.conj().T @ s.amplitudes))
    res = qsp.qet_apply(h, phases, s)
    assert np.allclose(res.unnormalized, expected, atol=1e-8)
    assert res.success_probability == pytest.approx(np.linalg.norm(expected) ** 2, abs=1e-10)
    real = qsp.qet_apply(h, phases, s, real_part=True)
    assert np.allclose(real.unnormalized, vecs @ (poly.real * (vecs.conj().T @ s.amplitudes)), atol=1e-8)


def test_qet_examples():
    rng = np.random.default_rng(6)
    h = np.diag([0.6, -0.3, 0.1, 0.9])
    s = StateVector(random_vector(rng, 4))
    res = qsp.qet_apply(h, [0, 0], s)
    assert np.allclose(res.unnormalized, h @ s.amplitudes, atol=1e-12)
    z = np.diag([1.0, -1.0])
    t2 = qsp.qet_apply(z, [0, 0, 0], StateVector(random_vector(rng, 2)))
    assert t2.success_probability == pytest.approx(1, abs=1e-12)
    const = qsp.qet_apply(h, [0.0], s)
    assert const.success_probability == pytest.approx(1) and np.allclose(const.state.amplitudes, s.amplitudes)
    with pytest.raises(ValueError):
        qsp.qet_apply(np.array([[0, 0.5], [0.1, 0]]), [0, 0], StateVector.basis(1))
    with pytest.raises(ValueError, match="zero"):
        qsp.qet_apply(np.zeros((2, 2)), [0, 0], StateVector.basis(1))


# ------------------------------------------------------------------- QSVT


@given(seeds, st.integers(0, 7))
def test_qsvt_against_svd_oracle(seed, d):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    a /= np.linalg.norm(a, 2) * 1.05
    phases = rng.uniform(-np.pi, np.pi, d + 1)
    s = StateVector(random_vector(rng, 4))
    side = "wv" if d % 2 else "vv"
    expected = qsp.svt_oracle(a, lambda x: qsp.qsp_evaluate(phases, x)[1], side) @ s.amplitudes
    res = qsp.qsvt_apply(a, phases, s)
    assert np.allclose(res.unnormalized, expected, atol=1e-8)


def test_qsvt_examples():
    rng = np.random.default_rng(9)
    s = StateVector(random_vector(rng, 4))
    u = random_unitary(rng, 4)
    res = qsp.qsvt_apply(u, [0, 0], s)
    assert np.allclose(res.unnormalized, u @ s.amplitudes, atol=1e-10)
    half = qsp.qsvt_apply(0.5 * np.eye(4), [0, 0], s)
    assert np.allclose(half.unnormalized, 0.5 * s.amplitudes) and half.success_probability == pytest.approx(0.25)
    t3 = lambda x: 4 * x ** 3 - 3 * x
    s2 = StateVector(random_vector(rng, 2))
    out = qsp.qsvt_apply(np.diag([0.9, 0.3]), [0, 0, 0, 0], s2)
    assert np.allclose(out.unnormalized, np.array([t3(0.9), t3(0.3)]) * s2.amplitudes, atol=1e-12)
    with pytest.raises(ValueError, match="realises"):
        qsp.qsvt_apply(np.eye(2), [0, 0, 0], s2, side="wv")


# ------------------------------------------------------------ fixed point


def test_fixed_point_trivial_and_budget_error():
    start = StateVector(np.array([1.0, 0.0]))
    res = qsp.fixed_point_search(start, [0], 0.1, 1, 1.0)
    assert res.queries == 1 and res.success_probability == pytest.approx(1)
    assert qsp.fixed_point_min_queries(1.0, 0.1) == 1
    with pytest.raises(ValueError, match="below the minimum"):
        qsp.fixed_point_search(StateVector(np.full(64, 1 / 8)), [3], 0.1, 3, 1 / 8)


def test_fixed_point_n64_monotone_and_versus_grover():
    start = StateVector(np.full(64, 1 / 8))
    c = 1 / 8
    L_min = qsp.fixed_point_min_queries(c, 0.1)
    successes = []
    for budget in range(L_min, L_min + 40, 2):
        res = qsp.fixed_point_search(start, [17], 0.1, budget, c)
        assert res.success_probability >= 0.99
        assert 1 - res.success_probability <= res.bound + 1e-12
        successes.append(res.success_probability)
    assert all(b >= a - 1e-12 for a, b in zip(successes, successes[1:]))
    # Grover overshoots: success at twice the optimal count collapses.
    grover = [grover_success_closed_form(64, 1, t) for t in range(6, 20)]
    assert min(grover) < 0.5 and max(1 - s for s in successes) <= 0.01


@given(st.floats(0.05, 0.9), st.floats(0.01, 0.5))
def test_fixed_point_query_count_law(c, delta):
    L = qsp.fixed_point_min_queries(c, delta)
    assert L % 2 == 1
    gamma = 1 / math.sqrt(1 - c * c)
    assert qsp.chebyshev_t(L, gamma) >= 1 / delta - 1e-9
    if L > 2:
        assert qsp.chebyshev_t(L - 2, gamma) < 1 / delta


# -------------------------------------------------------------- inversion


def test_invert_identity_and_diag():
    b = StateVector(random_vector(np.random.default_rng(10), 2))
    ident = qsp.qsvt_invert(np.eye(2), 1.0, 1e-3, b)
    assert ident.degree == 1 and ident.fidelity == pytest.approx(1, abs=1e-12)
    plus = StateVector(np.array([1, 1]) / math.sqrt(2))
    res = qsp.qsvt_invert(np.diag([1, 0.5]), 2, 1e-3, plus)
    direction = np.array([1, 2]) / math.sqrt(5)
    assert abs(np.vdot(direction, res.state.amplitudes)) ** 2 >= 0.999
    assert res.fidelity >= 1 - 1e-3


def test_invert_random_kappa4():
    rng = np.random.default_rng(11)
    u, v = random_unitary(rng, 4), random_unitary(rng, 4)
    a = u @ np.diag([1, 0.7, 0.4, 0.25]) @ v
    b = StateVector(random_vector(rng, 4))
    res = qsp.qsvt_invert(a, 4, 1e-3, b)
    assert res.fidelity >= 1 - 1e-3
    with pytest.raises(ValueError, match="singular values"):
        qsp.qsvt_invert(np.diag([1, 0.1]), 4, 1e-3, b if b.dim == 2 else StateVector.basis(1))


def test_inverse_polynomial_degree_growth():
    eps = 1e-3
    ratios = []
    for kappa in (2, 4, 8, 16):
        coeffs, _ = qsp.inverse_polynomial(kappa, eps)
        xs = np.linspace(1 / kappa, 1, 2001)
        assert np.max(np.abs(C.chebval(xs, coeffs) - 1 / xs)) <= 2 * eps * kappa
        ratios.append((coeffs.size - 1) / (kappa * math.log(kappa / eps)))
    assert max(ratios) <= 2.5


# --------------------------------------------------- Hamiltonian simulation


def test_qsp_simulation_examples():
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    s = StateVector(random_vector(np.random.default_rng(12), 2))
    zero = qsp.qsp_hamiltonian_sim(x, 0.0, 1e-8, s)
    assert np.allclose(zero.state.amplitudes, s.amplitudes)
    res = qsp.qsp_hamiltonian_sim(x, 1.0, 1e-8, s)
    assert abs(np.vdot(expm(-1j * x) @ s.amplitudes, res.state.amplitudes)) ** 2 >= 1 - 1e-8
    assert res.fidelity_to_exact >= 1 - 1e-8
    with pytest.raises(ValueError, match="degree"):
        qsp.jacobi_anger_degree(200.0, 1e-10, cap=20)


def test_cos_sin_split_recombines_to_unitary():
    rng = np.random.default_rng(13)
    h = rng.normal(size=(4, 4))
    h = (h + h.T) / 2
    alpha = np.linalg.norm(h, 2)
    vals, vecs = np.linalg.eigh(h / alpha)
    tau = alpha * 1.3
    deg = qsp.jacobi_anger_degree(tau, 1e-12)
    cos_c, sin_c = qsp.jacobi_anger(tau, deg + 1)
    op = vecs @ np.diag(C.chebval(vals, cos_c) - 1j * C.chebval(vals, sin_c)) @ vecs.T
    assert np.allclose(op.conj().T @ op, np.eye(4), atol=1e-9)
    assert np.allclose(op, expm(-1j * h * 1.3), atol=1e-9)


@given(seeds, st.floats(0.1, 3.0))
def test_qsp_simulation_fidelity(seed, t):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = (h + h.conj().T) / 4
    s = StateVector(random_vector(rng, 4))
    res = qsp.qsp_hamiltonian_sim(h, t, 1e-6, s)
    assert abs(np.vdot(expm(-1j * h * t) @ s.amplitudes, res.state.amplitudes)) ** 2 >= 1 - 1e-6
    assert res.tail_bound <= 1e-6 / 8
