"""Quantum Fourier transform and phase estimation.

Sign convention: ``qft`` maps ``sum_j x_j |j>`` to ``sum_k y_k |k>`` with
``y_k = N^{-1/2} sum_j x_j exp(+2 pi i j k / N)``, i.e. ``sqrt(N) * ifft(x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gates import Circuit, apply_unitary
from .rng import make_rng
from .state import StateVector, as_qubits


def _phase_gate(angle: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * angle)]).astype(np.complex128)


def qft_circuit(n_qubits: int, register) -> Circuit:
    """Hadamards and controlled phases in product form, then the reversal swaps."""
    reg = as_qubits(register, n_qubits)
    width = len(reg)
    circ = Circuit(n_qubits)
    for i in range(width - 1, -1, -1):
        circ.add("H", reg[i])
        for j in range(i - 1, -1, -1):
            circ.add("ControlledUnitary", reg[i], controls=reg[j],
                     unitary=_phase_gate(math.pi / (1 << (i - j))))
    for i in range(width // 2):
        a, b = reg[i], reg[width - 1 - i]
        circ.add("CNOT", a, b).add("CNOT", b, a).add("CNOT", a, b)
    return circ


def qft(s: StateVector, register=None) -> StateVector:
    reg = tuple(range(s.n_qubits)) if register is None else register
    return qft_circuit(s.n_qubits, reg).run(s)


def iqft(s: StateVector, register=None) -> StateVector:
    reg = tuple(range(s.n_qubits)) if register is None else register
    return qft_circuit(s.n_qubits, reg).inverse().run(s)


def qft_matrix(width: int) -> np.ndarray:
    """Dense QFT matrix, probed column by column from the circuit."""
    return qft_circuit(width, range(width)).unitary()


@dataclass
class QPEResult:
    distribution: np.ndarray   # probability of each phase-register value y
    state: StateVector         # joint system + phase-register state
    system_qubits: tuple[int, ...]
    phase_qubits: tuple[int, ...]
    outcome: int               # most likely y (exact mode) or a sampled y
    oracle_calls: int

    @property
    def m(self) -> int:
        return len(self.phase_qubits)

    @property
    def phase(self) -> float:
        """Estimated phase ``y / 2^m`` in ``[0, 1)``."""
        return self.outcome / (1 << self.m)


def power_provider(unitary: np.ndarray) -> Callable[[int], np.ndarray]:
    """``k -> U^k`` using cached repeated squaring for powers of two."""
    cache = {1: np.asarray(unitary, dtype=np.complex128)}

    def power(k: int) -> np.ndarray:
        if k in cache:
            return cache[k]
        if k & (k - 1) == 0:
            half = power(k // 2)
            cache[k] = half @ half
            return cache[k]
        return np.linalg.matrix_power(cache[1], k)

    return power


def qpe(unitary, s: StateVector, m: int, mode: str = "exact", rng_seed=None,
        system_qubits=None) -> QPEResult:
    """Phase estimation of ``unitary`` on ``s`` with an ``m``-qubit phase register.

    ``unitary`` is a dense matrix acting on ``system_qubits`` (default: every
    qubit of ``s``) or a callable ``k -> U^k``. The phase register is appended
    above the existing qubits and is read out in standard binary order.
    Each controlled ``U^(2^j)`` is charged as ``2^j`` calls to ``U``.
    """
    if m < 1:
        raise ValueError("phase estimation needs at least one phase bit")
    power = unitary if callable(unitary) else power_provider(unitary)
    n = s.n_qubits
    system = tuple(range(n)) if system_qubits is None else as_qubits(system_qubits, n)
    phase = tuple(range(n, n + m))
    state = s.extend(StateVector.basis(m, 0))
    total = n + m
    circ = Circuit(total)
    for q in phase:
        circ.add("H", q)
    state = circ.run(state)
    for j, q in enumerate(phase):
        state = apply_unitary(state, power(1 << j), system, controls=(q,))
    state = iqft(state, phase)
    dist = state.marginal(phase)
    if mode == "exact":
        outcome = int(np.argmax(dist))
    elif mode == "sampled":
        rng = make_rng(rng_seed)
        outcome = int(rng.choice(dist.shape[0], p=dist / dist.sum()))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return QPEResult(dist, state, system, phase, outcome, (1 << m) - 1)


def qpe_median(unitary, s: StateVector, m: int, repetitions: int, rng_seed) -> float:
    """Median of repeated sampled phase estimates (the usual boosting wrapper).

    Phases are unwrapped around the first estimate so a result near 0/1 is
    not split across the branch cut.
    """
    rng = make_rng(rng_seed)
    first = qpe(unitary, s, m, mode="exact")
    draws = rng.choice(first.distribution.shape[0], size=repetitions,
                       p=first.distribution / first.distribution.sum()) / (1 << m)
    centre = draws[0]
    unwrapped = (draws - centre + 0.5) % 1 + centre - 0.5
    return float(np.median(unwrapped) % 1)


def signed_phase(y: np.ndarray | int, m: int) -> np.ndarray | float:
    """Map an ``m``-bit outcome to a phase in ``[-1/2, 1/2)``."""
    size = 1 << m
    y = np.asarray(y)
    out = np.where(y >= size // 2, y - size, y) / size
    return out if out.ndim else float(out)
