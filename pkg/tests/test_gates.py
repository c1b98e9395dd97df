import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qstat.gates import (
    Circuit, CircuitOp, apply, apply_unitary, controlled_rotation_f, drop_qubits, postselect,
    rx, ry, rz, walsh_hadamard,
)
from qstat.state import StateVector, uniform_state
from conftest import random_unitary, random_vector, seeds

S2 = 1 / math.sqrt(2)


def dense_reference(matrix, n, targets, controls=()):
    """Index-by-index construction of the full operator, independent of the kernels."""
    dim = 1 << n
    full = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        if not all((col >> c) & 1 for c in controls):
            full[col, col] = 1
            continue
        sub = sum(((col >> t) & 1) << k for k, t in enumerate(targets))
        base = col
        for t in targets:
            base &= ~(1 << t)
        for row_sub in range(matrix.shape[0]):
            row = base
            for k, t in enumerate(targets):
                row |= ((row_sub >> k) & 1) << t
            full[row, col] += matrix[row_sub, sub]
    return full


def test_hadamard_x_and_bell():
    plus = apply(CircuitOp("H", (0,)), StateVector.basis(1, 0))
    assert np.allclose(plus.amplitudes, [S2, S2])
    one = apply(CircuitOp("X", (0,)), StateVector.basis(1, 0))
    assert one == StateVector.basis(1, 1)
    c = Circuit(2).add("H", 0).add("CNOT", 1, controls=0)
    assert np.allclose(c.run(StateVector.basis(2, 0)).amplitudes, [S2, 0, 0, S2])


def test_rotation_matrices():
    assert np.allclose(rx(math.pi), [[0, -1j], [-1j, 0]])
    assert np.allclose(ry(math.pi), [[0, -1], [1, 0]])
    assert np.allclose(rz(math.pi), np.diag([-1j, 1j]))


def test_op_validation():
    with pytest.raises(ValueError):
        CircuitOp("CNOT", (0,), (0,))
    with pytest.raises(ValueError):
        CircuitOp("DenseUnitary", (0,), unitary=np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValueError):
        CircuitOp("Bogus", (0,))
    with pytest.raises(ValueError):
        Circuit(2).add("X", 2)


ops = st.sampled_from(["H", "X", "Y", "Z", "Rx", "Ry", "Rz", "CNOT", "Toffoli", "CSwap", "DU", "CU"])


@given(seeds, ops, st.integers(3, 6))
def test_dense_oracle_equivalence(seed, kind, n):
    rng = np.random.default_rng(seed)
    qubits = [int(q) for q in rng.permutation(n)]
    if kind in ("H", "X", "Y", "Z"):
        op = CircuitOp(kind, (qubits[0],))
    elif kind in ("Rx", "Ry", "Rz"):
        op = CircuitOp(kind, (qubits[0],), params=(float(rng.uniform(-7, 7)),))
    elif kind == "CNOT":
        op = CircuitOp(kind, (qubits[0],), (qubits[1],))
    elif kind == "Toffoli":
        op = CircuitOp(kind, (qubits[0],), (qubits[1], qubits[2]))
    elif kind == "CSwap":
        op = CircuitOp(kind, (qubits[0], qubits[1]), (qubits[2],))
    elif kind == "DU":
        op = CircuitOp("DenseUnitary", tuple(qubits[:2]), unitary=random_unitary(rng, 4))
    else:
        op = CircuitOp("ControlledUnitary", (qubits[0],), tuple(qubits[1:3]), unitary=random_unitary(rng, 2))
    s = StateVector(random_vector(rng, 1 << n))
    ref = dense_reference(op.matrix(), n, op.targets, op.controls) @ s.amplitudes
    out = apply(op, s)
    assert np.allclose(out.amplitudes, ref, atol=1e-12, rtol=0)
    assert out.norm() == pytest.approx(1.0, abs=1e-10)


def random_circuit(rng, n, length):
    c = Circuit(n)
    for _ in range(length):
        q = [int(x) for x in rng.permutation(n)]
        choice = rng.integers(5)
        if choice == 0:
            c.add("H", q[0])
        elif choice == 1:
            c.add("Ry", q[0], params=float(rng.uniform(-3, 3)))
        elif choice == 2:
            c.add("CNOT", q[0], controls=q[1])
        elif choice == 3:
            c.add("DenseUnitary", q[:2], unitary=random_unitary(rng, 4))
        else:
            c.add("Rz", q[0], controls=q[1], params=float(rng.uniform(-3, 3)))
    return c


@given(seeds, st.integers(2, 5), st.integers(1, 25))
def test_inverse_restores_input(seed, n, length):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, n, length)
    s = StateVector(random_vector(rng, 1 << n))
    back = c.inverse().run(c.run(s))
    assert np.allclose(back.amplitudes, s.amplitudes, atol=1e-10)
    assert [op.kind for op in c.inverse().ops] == [op.kind for op in reversed(c.ops)]


@given(seeds)
def test_circuit_json_round_trip(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, 3, 8)
    again = Circuit.loads(c.dumps())
    assert np.allclose(again.unitary(), c.unitary(), atol=1e-14)


def test_circuit_json_schema():
    c = Circuit.from_json({"n_qubits": 2, "ops": [{"kind": "H", "t": [0]}, {"kind": "CNOT", "c": [0], "t": [1]}]})
    assert np.allclose(c.run(StateVector.basis(2)).amplitudes, [S2, 0, 0, S2])
    with pytest.raises(ValueError):
        Circuit.from_json({"n_qubits": 1, "ops": [{"kind": "H", "t": [0], "x": 1}]})


@given(seeds)
def test_controlled_unitary_identity(seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng, 4)
    psi = random_vector(rng, 4)
    # control is qubit 2 (high); system on qubits 0,1
    off = StateVector(np.concatenate([psi, np.zeros(4)]))
    on = StateVector(np.concatenate([np.zeros(4), psi]))
    assert np.allclose(apply_unitary(off, u, (0, 1), (2,)).amplitudes, off.amplitudes)
    assert np.allclose(apply_unitary(on, u, (0, 1), (2,)).amplitudes[4:], u @ psi)


def test_walsh_hadamard_examples():
    assert np.allclose(walsh_hadamard(StateVector.basis(1), [0]).amplitudes, [S2, S2])
    out = walsh_hadamard(StateVector.basis(3), range(3))
    assert np.allclose(out.amplitudes, np.full(8, 1 / math.sqrt(8)))


@given(seeds, st.integers(1, 5))
def test_walsh_hadamard_involution(seed, n):
    rng = np.random.default_rng(seed)
    s = StateVector(random_vector(rng, 1 << n))
    twice = walsh_hadamard(walsh_hadamard(s, range(n)), range(n))
    assert np.allclose(twice.amplitudes, s.amplitudes, atol=1e-12)


def test_controlled_rotation_examples():
    data = uniform_state(2).extend(StateVector.basis(1))  # aux is qubit 2
    same = controlled_rotation_f(data, [0, 1], 2, lambda x: 0.0)
    assert np.allclose(same.amplitudes, data.amplitudes)
    flipped = controlled_rotation_f(StateVector.basis(3, 2), [0, 1], 2, lambda x: math.pi / 2)
    assert np.allclose(flipped.amplitudes, np.eye(8)[6], atol=1e-15)
    for x in range(4):
        s = controlled_rotation_f(StateVector.basis(3, x), [0, 1], 2, lambda v: math.asin(v / 4))
        assert s.amplitudes[4 + x].real == pytest.approx(x / 4, abs=1e-15)
    with pytest.raises(ValueError):
        controlled_rotation_f(data, [0, 1], 2, lambda x: float("nan"))


@given(seeds)
def test_rotation_then_postselect_is_nonlinear_map(seed):
    rng = np.random.default_rng(seed)
    psi = random_vector(rng, 4)
    angles = rng.uniform(0.2, 1.3, 4)
    s = StateVector(psi).extend(StateVector.basis(1))
    res = postselect(controlled_rotation_f(s, [0, 1], 2, lambda x: angles[x]), 2, 1)
    want = psi * np.sin(angles)
    assert res.probability == pytest.approx(np.linalg.norm(want) ** 2, abs=1e-12)
    got = drop_qubits(res.state, [2], values=1).amplitudes
    assert np.allclose(got, want / np.linalg.norm(want), atol=1e-12)


def test_postselect_examples():
    res = postselect(StateVector.basis(1, 1), 0, 1)
    assert res.probability == 1 and res.state == StateVector.basis(1, 1)
    a, b = StateVector.basis(1, 0), StateVector(np.array([0.6, 0.8]))
    s = StateVector(np.concatenate([a.amplitudes, b.amplitudes]) / math.sqrt(2))  # aux on qubit 1
    res = postselect(s, 1, 1)
    assert res.probability == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(drop_qubits(res.state, [1], 1).amplitudes, b.amplitudes)
    with pytest.raises(ValueError):
        postselect(StateVector.basis(1, 0), 0, 1)


def test_sampled_postselection_attempts_average_inverse_probability():
    s = StateVector(np.array([math.sqrt(0.8), math.sqrt(0.2)]))
    attempts = [postselect(s, 0, 1, mode="sampled", rng_seed=k).attempts for k in range(4000)]
    mean = float(np.mean(attempts))
    sigma = math.sqrt((1 - 0.2) / 0.2 ** 2 / len(attempts))
    assert abs(mean - 5.0) <= 4 * sigma
