"""Data encoders and the oracles the algorithm modules query.

Oracles count their own applications; the benchmarks report those counts
rather than wall-clock time. Memory-style oracles (QRAM/QROM in the
literature) are plain array lookups here.
"""

from __future__ import annotations

import csv
import json
import math
import threading
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .gates import apply_permutation
from .state import StateVector, as_qubits, check_qubit_count, register_values


def _width_for(length: int) -> int:
    return max(0, math.ceil(math.log2(length))) if length > 1 else 0


def amplitude_encode(x, n_qubits: int | None = None) -> StateVector:
    """Amplitudes ``x_i / ||x||`` on ``|i>``, zero-padded at the high indices."""
    vec = np.asarray(x, dtype=np.complex128).reshape(-1)
    norm = np.linalg.norm(vec)
    if vec.size == 0 or norm == 0:
        raise ValueError("cannot amplitude-encode a zero vector")
    width = _width_for(vec.size) if n_qubits is None else n_qubits
    if (1 << width) < vec.size:
        raise ValueError(f"{vec.size} entries do not fit in {width} qubits")
    check_qubit_count(width)
    amps = np.zeros(1 << width, dtype=np.complex128)
    amps[: vec.size] = vec / norm
    return StateVector(amps)


def basis_encode(dataset: Sequence[str]) -> StateVector:
    """Uniform superposition over bit strings; ``"01"`` denotes basis index 1."""
    if not dataset:
        raise ValueError("dataset is empty")
    width = len(dataset[0])
    if any(len(row) != width for row in dataset):
        raise ValueError("all bit strings must have the same length")
    if any(set(row) - {"0", "1"} for row in dataset):
        raise ValueError("dataset rows must be binary strings")
    indices = [int(row, 2) if row else 0 for row in dataset]
    if len(set(indices)) != len(indices):
        raise ValueError("dataset contains duplicate strings")
    check_qubit_count(width)
    amps = np.zeros(1 << width, dtype=np.complex128)
    amps[indices] = 1 / math.sqrt(len(indices))
    return StateVector(amps)


def qsample_encode(p) -> StateVector:
    """Quantum sample state with amplitudes ``sqrt(p_i)``."""
    probs = np.asarray(p, dtype=np.float64).reshape(-1)
    if np.any(probs < 0):
        raise ValueError("probabilities must be non-negative")
    if abs(probs.sum() - 1) > 1e-12:
        raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
    width = _width_for(probs.size)
    amps = np.zeros(1 << width, dtype=np.complex128)
    amps[: probs.size] = np.sqrt(probs)
    return StateVector(amps)


class FunctionOracle:
    """Reversible oracle ``|x>|y> -> |x>|y XOR f(x)>`` with a call counter.

    ``f`` is given as a table of length ``2^domain_bits`` or as a callable,
    which is tabulated once at construction.
    """

    def __init__(self, domain_bits: int, codomain_bits: int, f):
        self.domain_bits = domain_bits
        self.codomain_bits = codomain_bits
        size = 1 << domain_bits
        if callable(f):
            table = np.array([int(f(x)) for x in range(size)], dtype=np.int64)
        else:
            table = np.asarray(f, dtype=np.int64).reshape(-1)
        if table.shape[0] != size:
            raise ValueError(f"table has {table.shape[0]} entries, domain needs {size}")
        if np.any(table < 0) or np.any(table >= (1 << codomain_bits)):
            raise ValueError("function values do not fit in the codomain")
        self.table = table
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self._calls

    def reset_calls(self) -> None:
        with self._lock:
            self._calls = 0

    def count(self, n: int = 1) -> None:
        with self._lock:
            self._calls += n

    def __call__(self, x: int) -> int:
        """Classical evaluation; also counted, since it is one query to ``f``."""
        self.count()
        return int(self.table[x])

    def permutation(self, n_qubits: int, in_register, out_register) -> np.ndarray:
        """Destination index of every basis state under the oracle."""
        inp = as_qubits(in_register, n_qubits)
        out = as_qubits(out_register, n_qubits)
        if set(inp) & set(out):
            raise ValueError("input and output registers overlap")
        if len(inp) != self.domain_bits:
            raise ValueError(f"input register has {len(inp)} qubits, oracle expects {self.domain_bits}")
        if len(out) < self.codomain_bits:
            raise ValueError("output register narrower than the codomain")
        idx = np.arange(1 << n_qubits)
        fx = self.table[register_values(idx, inp)]
        flip = np.zeros_like(idx)
        for bit, q in enumerate(out):
            flip |= ((fx >> bit) & 1) << q
        return idx ^ flip

    def apply(self, s: StateVector, in_register, out_register) -> StateVector:
        dest = self.permutation(s.n_qubits, in_register, out_register)
        self.count()
        return StateVector(apply_permutation(s.amplitudes, dest), check_norm=False)

    def phase_flip(self, s: StateVector, register) -> StateVector:
        """Phase-kickback form ``|x> -> (-1)^{f(x)} |x>`` for a one-bit oracle.

        Equivalent to querying with the output qubit prepared in ``|->``.
        """
        if self.codomain_bits != 1:
            raise ValueError("phase flip needs a one-bit oracle")
        reg = as_qubits(register, s.n_qubits)
        signs = 1 - 2 * self.table[register_values(np.arange(s.dim), reg)]
        self.count()
        return StateVector(s.amplitudes * signs, check_norm=False)

    def marked(self) -> np.ndarray:
        return np.flatnonzero(self.table)


def apply_function_oracle(o: FunctionOracle, s: StateVector, in_register, out_register) -> StateVector:
    return o.apply(s, in_register, out_register)


class PhaseOracle:
    """Diagonal oracle ``|y> -> e^{i g(y)} |y>`` with a call counter."""

    def __init__(self, g: Callable[[int], float] | Sequence[float], width: int):
        size = 1 << width
        if callable(g):
            table = np.array([float(g(y)) for y in range(size)])
        else:
            table = np.asarray(g, dtype=np.float64).reshape(-1)
        if table.shape[0] != size or not np.all(np.isfinite(table)):
            raise ValueError("phase table must be finite with one entry per basis state")
        self.width = width
        self.table = table
        self.calls = 0

    def apply(self, s: StateVector, register) -> StateVector:
        reg = as_qubits(register, s.n_qubits)
        if len(reg) != self.width:
            raise ValueError(f"register has {len(reg)} qubits, oracle expects {self.width}")
        phases = self.table[register_values(np.arange(s.dim), reg)]
        self.calls += 1
        return StateVector(s.amplitudes * np.exp(1j * phases), check_norm=False)


class SparseHamiltonianAccess:
    """Sparse-access model of a Hermitian matrix: entry oracle plus column oracle."""

    def __init__(self, matrix, tol: float = 1e-10):
        csr = sp.csr_matrix(np.asarray(matrix, dtype=np.complex128) if not sp.issparse(matrix) else matrix,
                            dtype=np.complex128)
        if csr.shape[0] != csr.shape[1]:
            raise ValueError("Hamiltonian must be square")
        diff = csr - csr.conj().T
        if diff.nnz and np.max(np.abs(diff.data)) > tol:
            raise ValueError("Hamiltonian access is not Hermitian")
        csr.eliminate_zeros()
        csr.sort_indices()
        self.csr = csr
        self.dim = csr.shape[0]
        self.sparsity = int(np.max(np.diff(csr.indptr))) if self.dim else 0
        self.entry_calls = 0
        self.column_calls = 0
        self._norms: dict[str, float] | None = None

    def entry(self, j: int, k: int) -> complex:
        self.entry_calls += 1
        return complex(self.csr[j, k])

    def column(self, j: int, l: int) -> int | None:
        """Column of the ``l``-th nonzero in row ``j``; ``None`` when the row is shorter."""
        self.column_calls += 1
        start, stop = self.csr.indptr[j], self.csr.indptr[j + 1]
        if l >= stop - start:
            return None
        return int(self.csr.indices[start + l])

    def dense(self) -> np.ndarray:
        return self.csr.toarray()

    @property
    def norms(self) -> dict[str, float]:
        if self._norms is None:
            dense = self.dense()
            self._norms = {
                "spectral": float(np.linalg.norm(dense, 2)),
                "one": float(np.abs(dense).sum(axis=0).max()),
                "max": float(np.abs(dense).max()) if dense.size else 0.0,
                "frobenius": float(np.linalg.norm(dense, "fro")),
            }
        return self._norms


def load_dataset_csv(path) -> np.ndarray:
    """One vector per CSV row."""
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return np.array(rows)


def load_probabilities_json(path) -> np.ndarray:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError("probability file must hold a JSON list")
    return np.asarray(data, dtype=np.float64)
