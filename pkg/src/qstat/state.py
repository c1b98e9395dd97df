"""Quantum state containers, measurement, and reduced states.

Basis ordering is little-endian throughout the package: qubit ``q`` is bit
``q`` of the basis index, so ``|q2 q1 q0>`` has index ``4*q2 + 2*q1 + q0``.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .rng import make_rng

NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
DEFAULT_MAX_QUBITS = 24
_DUMP_MAGIC = b"QSV1"


def max_qubits() -> int:
    """Dense-state qubit cap, read from ``QSTAT_MAX_QUBITS`` (default 24)."""
    raw = os.environ.get("QSTAT_MAX_QUBITS")
    if raw is None:
        return DEFAULT_MAX_QUBITS
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"QSTAT_MAX_QUBITS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError("QSTAT_MAX_QUBITS must be positive")
    return min(value, DEFAULT_MAX_QUBITS)


def check_qubit_count(n_qubits: int) -> None:
    if n_qubits < 0:
        raise ValueError("qubit count must be non-negative")
    cap = max_qubits()
    if n_qubits > cap:
        raise ValueError(f"{n_qubits} qubits exceeds the dense-state cap of {cap}")


def as_qubits(register, n_qubits: int | None = None) -> tuple[int, ...]:
    """Normalise a register description (int, range, or sequence) to a tuple."""
    if isinstance(register, (int, np.integer)):
        qubits = (int(register),)
    else:
        qubits = tuple(int(q) for q in register)
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"repeated qubit in register {qubits}")
    if n_qubits is not None:
        for q in qubits:
            if not 0 <= q < n_qubits:
                raise ValueError(f"qubit {q} outside 0..{n_qubits - 1}")
    return qubits


def register_values(indices: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Integer value held by ``qubits`` (first qubit = least significant) per basis index."""
    out = np.zeros_like(indices)
    for bit, q in enumerate(qubits):
        out |= ((indices >> q) & 1) << bit
    return out


class StateVector:
    """A pure state on ``n_qubits`` qubits stored as a dense complex array.

    The public API treats instances as values: operations return new states.
    ``copy`` exists because the simulator is classical; on hardware an unknown
    state cannot be duplicated (no-cloning), so callers that copy a state are
    doing something only a simulator can do.
    """

    __slots__ = ("amplitudes", "n_qubits")

    def __init__(self, amplitudes, n_qubits: int | None = None, *, check_norm: bool = True):
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        size = amps.shape[0]
        if size == 0 or size & (size - 1):
            raise ValueError(f"amplitude length {size} is not a power of two")
        inferred = size.bit_length() - 1
        if n_qubits is not None and n_qubits != inferred:
            raise ValueError(f"{size} amplitudes do not describe {n_qubits} qubits")
        check_qubit_count(inferred)
        if check_norm:
            norm = np.linalg.norm(amps)
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"state norm {norm!r} differs from 1 by more than {NORM_TOL}")
        self.amplitudes = amps
        self.n_qubits = inferred

    @classmethod
    def basis(cls, n_qubits: int, index: int = 0) -> "StateVector":
        check_qubit_count(n_qubits)
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def from_unnormalized(cls, vector) -> "StateVector":
        vec = np.asarray(vector, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ValueError("cannot normalise the zero vector")
        return cls(vec / norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def renormalize(self) -> "StateVector":
        """Return a copy rescaled to unit norm; the only place drift is removed."""
        return StateVector.from_unnormalized(self.amplitudes)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "StateVector":
        # Simulator-only: a quantum device cannot clone an unknown state.
        return StateVector(self.amplitudes.copy(), check_norm=False)

    def extend(self, other: "StateVector") -> "StateVector":
        """Tensor ``other`` onto new high-order qubits above this state's qubits."""
        return StateVector(np.kron(other.amplitudes, self.amplitudes), check_norm=False)

    def marginal(self, qubits) -> np.ndarray:
        """Outcome distribution of measuring ``qubits`` (first qubit = low bit)."""
        qubits = as_qubits(qubits, self.n_qubits)
        values = register_values(np.arange(self.dim), qubits)
        return np.bincount(values, weights=self.probabilities(), minlength=1 << len(qubits))

    def __eq__(self, other) -> bool:  # exact equality, used by golden checks
        return isinstance(other, StateVector) and np.array_equal(self.amplitudes, other.amplitudes)

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits})"


def uniform_state(n_qubits: int) -> StateVector:
    check_qubit_count(n_qubits)
    size = 1 << n_qubits
    return StateVector(np.full(size, 1 / np.sqrt(size), dtype=np.complex128))


@dataclass
class RegisterLayout:
    """Named, contiguous qubit ranges allocated from qubit 0 upward."""

    registers: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def add(self, name: str, width: int) -> tuple[int, ...]:
        if name in self.registers:
            raise ValueError(f"register {name!r} already exists")
        if width < 0:
            raise ValueError("register width must be non-negative")
        start = self.total_qubits
        qubits = tuple(range(start, start + width))
        self.registers[name] = qubits
        return qubits

    @property
    def total_qubits(self) -> int:
        return sum(len(q) for q in self.registers.values())

    def __getitem__(self, name: str) -> tuple[int, ...]:
        return self.registers[name]

    def validate(self) -> None:
        seen = sorted(q for qs in self.registers.values() for q in qs)
        if seen != list(range(len(seen))):
            raise ValueError("register ranges must be disjoint and cover 0..n-1")


def _check_hermitian(matrix: np.ndarray, what: str) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{what} must be a square matrix")
    if not np.allclose(matrix, matrix.conj().T, atol=HERMITIAN_TOL, rtol=0):
        raise ValueError(f"{what} is not Hermitian")


class DensityMatrix:
    """A mixed state ``rho``: Hermitian, unit trace, positive semidefinite."""

    __slots__ = ("matrix", "n_qubits")

    def __init__(self, matrix, *, check: bool = True):
        rho = np.asarray(matrix, dtype=np.complex128)
        _check_hermitian(rho, "density matrix")
        dim = rho.shape[0]
        if dim & (dim - 1):
            raise ValueError(f"dimension {dim} is not a power of two")
        if check:
            if abs(np.trace(rho).real - 1) > NORM_TOL:
                raise ValueError("density matrix trace differs from 1")
            if np.linalg.eigvalsh(rho).min() < -NORM_TOL:
                raise ValueError("density matrix has a negative eigenvalue")
        self.matrix = rho
        self.n_qubits = dim.bit_length() - 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def copy(self) -> "DensityMatrix":
        # Simulator-only copy; the QPCA protocol consumes fresh copies of rho.
        return DensityMatrix(self.matrix.copy(), check=False)

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        """``other`` on the high qubits, ``self`` on the low qubits."""
        return DensityMatrix(np.kron(other.matrix, self.matrix), check=False)


class Observable:
    """Hermitian operator with a lazily computed eigendecomposition."""

    def __init__(self, matrix):
        mat = np.asarray(matrix, dtype=np.complex128)
        _check_hermitian(mat, "observable")
        self.matrix = mat
        self._eig: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        if self._eig is None:
            self._eig = np.linalg.eigh(self.matrix)
        return self._eig

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass
class MeasurementRecord:
    outcome: int
    probability: float
    post_state: StateVector


def inner_product(a: StateVector, b: StateVector) -> complex:
    """``<a|b> = sum_i conj(a_i) b_i``."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def project(s: StateVector, qubits, values: int) -> tuple[np.ndarray, float]:
    """Unnormalised projection of ``s`` onto ``qubits == values`` and its Born weight."""
    qubits = as_qubits(qubits, s.n_qubits)
    mask = register_values(np.arange(s.dim), qubits) == values
    projected = np.where(mask, s.amplitudes, 0)
    return projected, float(np.sum(np.abs(projected) ** 2))


def measure_computational(s: StateVector, qubits, rng_seed) -> MeasurementRecord:
    """Measure ``qubits`` in the computational basis and collapse the state."""
    qubits = as_qubits(qubits, s.n_qubits)
    if not qubits:
        raise ValueError("cannot measure an empty qubit set")
    rng = make_rng(rng_seed)
    dist = s.marginal(qubits)
    dist = dist / dist.sum()
    outcome = int(rng.choice(dist.shape[0], p=dist))
    projected, prob = project(s, qubits, outcome)
    post = StateVector(projected / np.sqrt(prob))
    return MeasurementRecord(outcome=outcome, probability=prob, post_state=post)


def sample_counts(s: StateVector, qubits, shots: int, rng_seed) -> np.ndarray:
    """Outcome histogram of ``shots`` independent measurements of ``qubits``."""
    if shots < 1:
        raise ValueError("shots must be positive")
    dist = s.marginal(qubits)
    rng = make_rng(rng_seed)
    return rng.multinomial(shots, dist / dist.sum())


def expectation(s: StateVector, observable) -> float:
    """``<psi|K|psi>`` for a Hermitian observable (matrix or :class:`Observable`)."""
    obs = observable if isinstance(observable, Observable) else Observable(observable)
    if obs.dim != s.dim:
        raise ValueError(f"observable dimension {obs.dim} does not match state {s.dim}")
    value = np.vdot(s.amplitudes, obs.matrix @ s.amplitudes)
    if abs(value.imag) > HERMITIAN_TOL * max(1.0, abs(value.real)):
        raise ValueError("expectation has an imaginary part; observable not Hermitian?")
    return float(value.real)


def to_density(s: StateVector) -> DensityMatrix:
    return DensityMatrix(np.outer(s.amplitudes, s.amplitudes.conj()), check=False)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out every qubit not in ``keep``.

    Qubit ``keep[i]`` becomes qubit ``i`` of the reduced state.
    """
    n = rho.n_qubits
    keep = as_qubits(keep, n)
    if not keep:
        raise ValueError("must keep at least one qubit")
    drop = [q for q in range(n) if q not in keep]
    # Tensor axis of qubit q is n-1-q for rows and 2n-1-q for columns.
    order = [n - 1 - q for q in reversed(keep)] + [n - 1 - q for q in drop]
    tensor = rho.matrix.reshape((2,) * (2 * n))
    tensor = tensor.transpose(order + [n + a for a in order])
    dk, dd = 1 << len(keep), 1 << len(drop)
    reduced = np.einsum("ajbj->ab", tensor.reshape(dk, dd, dk, dd))
    return DensityMatrix(reduced, check=False)


def dump_state(s: StateVector) -> bytes:
    """Serialise to the QSV1 binary layout: 16-byte header then (re, im) f64 pairs."""
    header = _DUMP_MAGIC + struct.pack("<I", s.n_qubits) + bytes(8)
    body = np.ascontiguousarray(s.amplitudes).view(np.float64).astype("<f8").tobytes()
    return header + body


def load_state(blob: bytes) -> StateVector:
    if len(blob) < 16 or blob[:4] != _DUMP_MAGIC:
        raise ValueError("not a QSV1 state dump")
    (n_qubits,) = struct.unpack("<I", blob[4:8])
    check_qubit_count(n_qubits)
    expected = 16 + 16 * (1 << n_qubits)
    if len(blob) != expected:
        raise ValueError(f"dump length {len(blob)} does not match {n_qubits} qubits")
    values = np.frombuffer(blob[16:], dtype="<f8")
    amps = values[0::2] + 1j * values[1::2]
    return StateVector(amps, check_norm=False)


def save_state(s: StateVector, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_state(s))


def read_state(path) -> StateVector:
    with open(path, "rb") as fh:
        return load_state(fh.read())


def kron_all(states: Iterable[StateVector]) -> StateVector:
    """Product state; the first state occupies the lowest qubits."""
    it = iter(states)
    out = next(it)
    for s in it:
        out = out.extend(s)
    return out
