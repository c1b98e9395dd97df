"""Gate kernels, circuits, and postselection.

A gate on ``k`` target qubits is a ``2^k x 2^k`` matrix whose row index is
built from the targets with ``targets[0]`` as the least significant bit.
Controls are handled by masking (only the slice where every control is 1 is
touched), not by decomposing into single-qubit gates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .rng import make_rng
from .state import StateVector, as_qubits, project, register_values

UNITARY_TOL = 1e-10

_SQ2 = 1 / math.sqrt(2)
_FIXED = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128),
}


def rx(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def ry(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=tol, rtol=0))


# ---------------------------------------------------------------- raw kernels


def apply_matrix(amps: np.ndarray, n_qubits: int, matrix: np.ndarray,
                 targets: Sequence[int], controls: Sequence[int] = ()) -> np.ndarray:
    """Return ``amps`` after applying ``matrix`` to ``targets`` conditioned on ``controls``."""
    k = len(targets)
    if matrix.shape != (1 << k, 1 << k):
        raise ValueError(f"matrix shape {matrix.shape} does not fit {k} targets")
    out = np.array(amps, dtype=np.complex128, copy=True)
    view = out.reshape((2,) * n_qubits)
    index: list = [slice(None)] * n_qubits
    for c in controls:
        index[n_qubits - 1 - c] = 1
    sub = view[tuple(index)]
    # Axes of ``sub`` are the uncontrolled qubits, highest qubit first.
    free = [q for q in range(n_qubits - 1, -1, -1) if q not in controls]
    target_axes = [free.index(t) for t in reversed(targets)]
    tensor = matrix.reshape((2,) * (2 * k))
    moved = np.tensordot(tensor, sub, axes=(list(range(k, 2 * k)), target_axes))
    view[tuple(index)] = np.moveaxis(moved, list(range(k)), target_axes)
    return out


def apply_diagonal(amps: np.ndarray, diagonal: np.ndarray) -> np.ndarray:
    return amps * diagonal


def apply_permutation(amps: np.ndarray, destination: np.ndarray) -> np.ndarray:
    """Basis map ``|i> -> |destination[i]>``."""
    out = np.empty_like(amps)
    out[destination] = amps
    return out


# ------------------------------------------------------------------- circuits


@dataclass
class CircuitOp:
    """One gate. ``kind`` is a name from :data:`GATE_KINDS`."""

    kind: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    params: tuple[float, ...] = ()
    unitary: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.targets = as_qubits(self.targets)
        self.controls = as_qubits(self.controls)
        self.params = tuple(float(p) for p in self.params)
        if set(self.targets) & set(self.controls):
            raise ValueError(f"{self.kind}: controls and targets overlap")
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = GATE_KINDS[self.kind]
        if arity is not None and len(self.targets) != arity:
            raise ValueError(f"{self.kind} takes {arity} target(s), got {len(self.targets)}")
        if self.kind == "CNOT" and len(self.controls) != 1:
            raise ValueError("CNOT takes exactly one control")
        if self.kind == "Toffoli" and len(self.controls) != 2:
            raise ValueError("Toffoli takes exactly two controls")
        if self.kind == "CSwap" and len(self.controls) != 1:
            raise ValueError("CSwap takes exactly one control")
        if self.kind in ("Rx", "Ry", "Rz") and len(self.params) != 1:
            raise ValueError(f"{self.kind} takes one angle")
        if self.kind in ("DenseUnitary", "ControlledUnitary"):
            if self.unitary is None:
                raise ValueError(f"{self.kind} needs a matrix")
            u = np.asarray(self.unitary, dtype=np.complex128)
            if u.shape != (1 << len(self.targets),) * 2:
                raise ValueError(f"{self.kind}: matrix shape {u.shape} does not fit targets")
            if not is_unitary(u):
                raise ValueError(f"{self.kind}: matrix is not unitary")
            self.unitary = u

    def matrix(self) -> np.ndarray:
        """The gate's action on its targets alone (controls excluded)."""
        kind = self.kind
        if kind in _FIXED:
            return _FIXED[kind]
        if kind in ("CNOT", "Toffoli"):
            return _FIXED["X"]
        if kind == "CSwap":
            return _FIXED["SWAP"]
        if kind == "Rx":
            return rx(self.params[0])
        if kind == "Ry":
            return ry(self.params[0])
        if kind == "Rz":
            return rz(self.params[0])
        return self.unitary

    def inverse(self) -> "CircuitOp":
        if self.kind in ("Rx", "Ry", "Rz"):
            return CircuitOp(self.kind, self.targets, self.controls, (-self.params[0],))
        if self.kind in ("DenseUnitary", "ControlledUnitary"):
            return CircuitOp(self.kind, self.targets, self.controls, unitary=self.unitary.conj().T)
        return CircuitOp(self.kind, self.targets, self.controls, self.params)

    def qubits(self) -> tuple[int, ...]:
        return self.targets + self.controls

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind, "t": list(self.targets)}
        if self.controls:
            out["c"] = list(self.controls)
        if self.params:
            out["params"] = list(self.params)
        if self.unitary is not None:
            out["U"] = [[[z.real, z.imag] for z in row] for row in self.unitary]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "CircuitOp":
        allowed = {"kind", "t", "c", "params", "U"}
        extra = set(obj) - allowed
        if extra:
            raise ValueError(f"unknown op keys {sorted(extra)}")
        unitary = None
        if "U" in obj:
            unitary = np.array([[complex(re, im) for re, im in row] for row in obj["U"]])
        return cls(obj["kind"], tuple(obj.get("t", ())), tuple(obj.get("c", ())),
                   tuple(obj.get("params", ())), unitary)


# Target arity per kind; None means "any number of targets".
GATE_KINDS: dict[str, int | None] = {
    "H": 1, "X": 1, "Y": 1, "Z": 1, "Rx": 1, "Ry": 1, "Rz": 1,
    "CNOT": 1, "Toffoli": 1, "CSwap": 2,
    "ControlledUnitary": None, "DenseUnitary": None,
}


class Circuit:
    """An ordered, replayable list of gates on ``n_qubits`` qubits."""

    def __init__(self, n_qubits: int, ops: Sequence[CircuitOp] = ()):
        self.n_qubits = n_qubits
        self.ops: list[CircuitOp] = []
        for op in ops:
            self.append(op)

    def append(self, op: CircuitOp) -> "Circuit":
        for q in op.qubits():
            if not 0 <= q < self.n_qubits:
                raise ValueError(f"{op.kind} touches qubit {q}, circuit has {self.n_qubits}")
        self.ops.append(op)
        return self

    def add(self, kind: str, targets, controls=(), params=(), unitary=None) -> "Circuit":
        if isinstance(targets, (int, np.integer)):
            targets = (targets,)
        if isinstance(controls, (int, np.integer)):
            controls = (controls,)
        if isinstance(params, (int, float)):
            params = (params,)
        return self.append(CircuitOp(kind, tuple(targets), tuple(controls), tuple(params), unitary))

    def extend(self, other: "Circuit") -> "Circuit":
        for op in other.ops:
            self.append(op)
        return self

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, [op.inverse() for op in reversed(self.ops)])

    def __len__(self) -> int:
        return len(self.ops)

    def run(self, s: StateVector) -> StateVector:
        if s.n_qubits != self.n_qubits:
            raise ValueError(f"circuit on {self.n_qubits} qubits given a {s.n_qubits}-qubit state")
        amps = s.amplitudes
        for op in self.ops:
            amps = apply_matrix(amps, self.n_qubits, op.matrix(), op.targets, op.controls)
        return StateVector(amps, check_norm=False)

    def unitary(self) -> np.ndarray:
        """Dense matrix of the whole circuit, built by probing basis columns."""
        dim = 1 << self.n_qubits
        cols = np.eye(dim, dtype=np.complex128)
        for op in self.ops:
            cols = np.stack([apply_matrix(c, self.n_qubits, op.matrix(), op.targets, op.controls)
                             for c in cols])
        return cols.T

    def to_json(self) -> dict:
        return {"n_qubits": self.n_qubits, "ops": [op.to_json() for op in self.ops]}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: dict) -> "Circuit":
        extra = set(obj) - {"n_qubits", "ops"}
        if extra:
            raise ValueError(f"unknown circuit keys {sorted(extra)}")
        return cls(int(obj["n_qubits"]), [CircuitOp.from_json(o) for o in obj["ops"]])

    @classmethod
    def loads(cls, text: str) -> "Circuit":
        return cls.from_json(json.loads(text))


def apply(op, s: StateVector) -> StateVector:
    """Apply a :class:`CircuitOp` or a whole :class:`Circuit` to ``s``."""
    if isinstance(op, Circuit):
        return op.run(s)
    for q in op.qubits():
        if not 0 <= q < s.n_qubits:
            raise ValueError(f"qubit {q} outside a {s.n_qubits}-qubit state")
    return StateVector(apply_matrix(s.amplitudes, s.n_qubits, op.matrix(), op.targets, op.controls),
                       check_norm=False)


def apply_unitary(s: StateVector, matrix: np.ndarray, targets, controls=()) -> StateVector:
    """Apply a dense unitary to a target register, optionally controlled."""
    targets = as_qubits(targets, s.n_qubits)
    controls = as_qubits(controls, s.n_qubits)
    if set(targets) & set(controls):
        raise ValueError("controls and targets overlap")
    return StateVector(apply_matrix(s.amplitudes, s.n_qubits, np.asarray(matrix, dtype=np.complex128),
                                    targets, controls), check_norm=False)


def embed(matrix: np.ndarray, n_qubits: int, targets, controls=()) -> np.ndarray:
    """Full ``2^n x 2^n`` matrix of a (controlled) gate; the dense reference path."""
    dim = 1 << n_qubits
    cols = [apply_matrix(col, n_qubits, matrix, as_qubits(targets), as_qubits(controls))
            for col in np.eye(dim, dtype=np.complex128)]
    return np.array(cols).T


def walsh_hadamard(s: StateVector, register) -> StateVector:
    """``H`` on every qubit of ``register``."""
    amps = s.amplitudes
    for q in as_qubits(register, s.n_qubits):
        amps = apply_matrix(amps, s.n_qubits, _FIXED["H"], (q,))
    return StateVector(amps, check_norm=False)


def controlled_rotation_f(s: StateVector, data_register, aux_qubit: int,
                          f: Callable[[int], float]) -> StateVector:
    """``|x>|0> -> |x>(cos f(x)|0> + sin f(x)|1>)``, extended linearly.

    ``f`` maps the integer held by ``data_register`` to an angle in radians.
    """
    data = as_qubits(data_register, s.n_qubits)
    (aux,) = as_qubits(aux_qubit, s.n_qubits)
    if aux in data:
        raise ValueError("auxiliary qubit is part of the data register")
    width = len(data)
    table = np.array([f(x) for x in range(1 << width)], dtype=np.float64)
    if not np.all(np.isfinite(table)):
        raise ValueError("rotation angle function returned NaN or Inf")
    idx = np.arange(s.dim)
    low = idx[((idx >> aux) & 1) == 0]
    high = low | (1 << aux)
    angle = table[register_values(low, data)]
    c, sn = np.cos(angle), np.sin(angle)
    amps = s.amplitudes.copy()
    a0, a1 = amps[low], amps[high]
    amps[low] = c * a0 - sn * a1
    amps[high] = sn * a0 + c * a1
    return StateVector(amps, check_norm=False)


class PostselectResult(NamedTuple):
    state: StateVector
    probability: float
    attempts: int


def postselect(s: StateVector, qubit: int, desired: int, mode: str = "exact",
               rng_seed=None, max_attempts: int = 1_000_000) -> PostselectResult:
    """Keep only the branch where ``qubit`` reads ``desired``.

    ``exact`` returns the renormalised conditional state and its probability.
    ``sampled`` re-prepares and measures until the desired outcome appears,
    reporting the attempt count (about ``1/p`` on average).
    """
    if desired not in (0, 1):
        raise ValueError("desired outcome must be 0 or 1")
    projected, prob = project(s, (qubit,), desired)
    if mode == "exact":
        if prob <= 1e-14:
            raise ValueError(f"postselection branch has probability {prob:.3g}")
        return PostselectResult(StateVector(projected / math.sqrt(prob)), prob, 1)
    if mode != "sampled":
        raise ValueError(f"unknown postselection mode {mode!r}")
    if prob == 0:
        raise ValueError("postselection branch has zero probability")
    rng = make_rng(rng_seed)
    for attempt in range(1, max_attempts + 1):
        if rng.random() < prob:
            return PostselectResult(StateVector(projected / math.sqrt(prob)), prob, attempt)
    raise RuntimeError(f"postselection did not succeed in {max_attempts} attempts")


def drop_qubits(s: StateVector, qubits, values: int = 0, tol: float = 1e-9) -> StateVector:
    """Remove qubits known to hold ``values``; raises if they are entangled."""
    qubits = as_qubits(qubits, s.n_qubits)
    projected, prob = project(s, qubits, values)
    if abs(prob - 1) > tol:
        raise ValueError(f"qubits {qubits} are not in state {values} (weight {prob:.3g})")
    keep = [q for q in range(s.n_qubits) if q not in qubits]
    idx = np.arange(1 << len(keep))
    full = np.zeros_like(idx)
    for bit, q in enumerate(keep):
        full |= ((idx >> bit) & 1) << q
    for bit, q in enumerate(qubits):
        full |= ((values >> bit) & 1) << q
    return StateVector(s.amplitudes[full], check_norm=False)
