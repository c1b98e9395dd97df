"""Coin walks, Szegedy walks over Markov chains, and annealed quantum MCMC.

Szegedy register order: a chain on ``N`` states uses two registers of
``k = ceil(log2 N)`` qubits each. The basis index of ``|x>|y>`` is
``x * 2^k + y``, so the first register ``x`` sits on the high qubits.
Padding states beyond ``N`` are given self-loops and zero stationary mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .amplitude import unitary_with_first_column
from .fourier import qpe
from .state import StateVector, project


# ------------------------------------------------------------------ coin walks


def cycle_graph(n_vertices: int) -> np.ndarray:
    """Neighbour table of a cycle: label 0 steps to ``v-1``, label 1 to ``v+1``."""
    v = np.arange(n_vertices)
    return np.stack([(v - 1) % n_vertices, (v + 1) % n_vertices], axis=1)


HADAMARD_COIN = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)


def _walk_dims(neighbors: np.ndarray) -> tuple[int, int]:
    nv, degree = neighbors.shape
    if degree & (degree - 1):
        raise ValueError("coin dimension (graph degree) must be a power of two")
    for e in range(degree):
        if sorted(neighbors[:, e]) != list(range(nv)):
            raise ValueError(f"edge label {e} does not define a permutation of the vertices; "
                             "pad the graph to a regular labelled form")
    return nv, degree


def shift_operator(neighbors) -> np.ndarray:
    """``S|e>|v> = |e>|u>`` with ``u = neighbors[v, e]``; coin on the high qubits."""
    nb = np.asarray(neighbors, dtype=np.int64)
    nv, degree = _walk_dims(nb)
    vdim = 1 << max(0, math.ceil(math.log2(nv)))
    dim = degree * vdim
    s = np.zeros((dim, dim))
    for e in range(degree):
        for v in range(vdim):
            u = nb[v, e] if v < nv else v
            s[e * vdim + u, e * vdim + v] = 1
    return s


def walk_unitary(neighbors, coin) -> np.ndarray:
    """One step ``U = S (C x I)``."""
    s = shift_operator(neighbors)
    vdim = s.shape[0] // np.asarray(coin).shape[0]
    return s @ np.kron(np.asarray(coin, dtype=np.complex128), np.eye(vdim))


def coin_walk_step(neighbors, coin, s: StateVector) -> StateVector:
    u = walk_unitary(neighbors, coin)
    if u.shape[0] != s.dim:
        raise ValueError("state does not match the coin x vertex space")
    return StateVector(u @ s.amplitudes, check_norm=False)


def position_distribution(s: StateVector, n_vertices: int, degree: int) -> np.ndarray:
    vdim = s.dim // degree
    probs = s.probabilities().reshape(degree, vdim).sum(axis=0)
    return probs[:n_vertices]


def walk_start(n_vertices: int, degree: int, edge: int = 0, vertex: int = 0) -> StateVector:
    vdim = 1 << max(0, math.ceil(math.log2(n_vertices)))
    return StateVector.basis(int(math.log2(degree * vdim)), edge * vdim + vertex)


def coin_walk_distributions(neighbors, coin, s0: StateVector, steps: int) -> np.ndarray:
    """Row ``t-1`` holds ``P_t(v | psi_0)`` for ``t = 1..steps``."""
    nb = np.asarray(neighbors)
    u = walk_unitary(nb, coin)
    amps = s0.amplitudes
    rows = []
    degree = nb.shape[1]
    for _ in range(steps):
        amps = u @ amps
        rows.append(np.abs(amps.reshape(degree, -1)) ** 2)
    return np.array([r.sum(axis=0)[: nb.shape[0]] for r in rows])


def coin_walk_cesaro(neighbors, coin, s0: StateVector, steps: int) -> np.ndarray:
    """Time-averaged position distribution ``(1/T) sum_{t=1..T} P_t``."""
    if steps < 1:
        raise ValueError("need at least one step")
    return coin_walk_distributions(neighbors, coin, s0, steps).mean(axis=0)


# ------------------------------------------------------------- Markov chains


@dataclass
class MarkovChainSpec:
    P: np.ndarray
    pi: np.ndarray | None = None
    reversible: bool = False

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        if self.P.ndim != 2 or self.P.shape[0] != self.P.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(self.P < -1e-15) or not np.allclose(self.P.sum(axis=1), 1, atol=1e-12, rtol=0):
            raise ValueError("transition matrix is not row-stochastic")
        if self.pi is None:
            self.pi = stationary_distribution(self.P)
        else:
            self.pi = np.asarray(self.pi, dtype=np.float64)
        if self.reversible:
            flow = self.pi[:, None] * self.P
            if not np.allclose(flow, flow.T, atol=1e-10, rtol=0):
                raise ValueError("chain flagged reversible violates detailed balance")

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def spectral_gap(self) -> float:
        vals = np.sort(np.abs(np.linalg.eigvals(self.P)))[::-1]
        return float(1 - vals[1]) if vals.size > 1 else 1.0

    @property
    def pi_min(self) -> float:
        return float(self.pi.min())


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eig(np.asarray(P).T)
    idx = int(np.argmin(np.abs(vals - 1)))
    pi = np.real(vecs[:, idx])
    pi = np.abs(pi) / np.abs(pi).sum()
    return pi


def metropolis_chain(pi, laziness: float = 0.0) -> np.ndarray:
    """Metropolis chain for ``pi`` with a uniform proposal over the other states.

    Acceptance is ``min(1, pi_y / pi_x)``; ``laziness`` mixes in the identity,
    which keeps every eigenvalue non-negative when it is at least 1/2.
    """
    target = np.asarray(pi, dtype=np.float64)
    n = target.size
    P = np.zeros((n, n))
    for x in range(n):
        for y in range(n):
            if x != y:
                P[x, y] = min(1.0, target[y] / target[x]) / (n - 1)
        P[x, x] = 1 - P[x].sum()
    return laziness * np.eye(n) + (1 - laziness) * P


def load_chain_json(obj: dict) -> MarkovChainSpec:
    extra = set(obj) - {"P", "pi", "reversible"}
    if extra:
        raise ValueError(f"unknown chain keys {sorted(extra)}")
    return MarkovChainSpec(np.array(obj["P"]), None if obj.get("pi") is None else np.array(obj["pi"]),
                           bool(obj.get("reversible", False)))


# ----------------------------------------------------------------- Szegedy


@dataclass
class WalkOperator:
    W: np.ndarray
    U_P: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    S: np.ndarray
    chain: MarkovChainSpec
    register_qubits: int
    stationary_checked: bool = True
    lifted_stationary: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    def lift(self, first_register: np.ndarray) -> np.ndarray:
        """``U_P (|psi> x |0>)`` for a vector on the first register."""
        d = 1 << self.register_qubits
        vec = np.zeros(d * d, dtype=np.complex128)
        vec[np.arange(d) * d] = first_register
        return self.U_P @ vec


def _padded_chain(P: np.ndarray, d: int) -> np.ndarray:
    out = np.eye(d)
    out[: P.shape[0], : P.shape[1]] = P
    return out


def build_szegedy(chain: MarkovChainSpec) -> WalkOperator:
    """Walk ``W = S R1 S R1`` with ``R1 = 2 Pi - I`` and ``Pi`` onto ``span{U_P|x,0>}``."""
    n = chain.n_states
    k = max(1, math.ceil(math.log2(n)))
    d = 1 << k
    P = _padded_chain(chain.P, d)
    dim = d * d
    u_p = np.zeros((dim, dim), dtype=np.complex128)
    columns = np.zeros((dim, d), dtype=np.complex128)
    for x in range(d):
        block = unitary_with_first_column(np.sqrt(P[x]))
        u_p[x * d:(x + 1) * d, x * d:(x + 1) * d] = block
        columns[x * d:(x + 1) * d, x] = np.sqrt(P[x])
    proj = columns @ columns.conj().T
    r1 = 2 * proj - np.eye(dim)
    swap = np.zeros((dim, dim))
    for x in range(d):
        for y in range(d):
            swap[y * d + x, x * d + y] = 1
    r2 = swap @ r1 @ swap
    w = r2 @ r1
    pi = np.zeros(d)
    pi[:n] = chain.pi
    op = WalkOperator(w, u_p, r1, r2, swap, chain, k, stationary_checked=chain.reversible)
    op.lifted_stationary = op.lift(np.sqrt(pi))
    return op


def walk_eigenphase_gap(op: WalkOperator, tol: float = 1e-9) -> float:
    """Smallest nonzero |eigenphase| of ``W`` restricted to span(A + B)."""
    d = 1 << op.register_qubits
    a_cols = op.U_P[:, np.arange(d) * d]
    # A and B always share the lifted stationary state, so the span is
    # rank-deficient; keep only the directions that are actually spanned.
    u, svals, _ = np.linalg.svd(np.hstack([a_cols, op.S @ a_cols]), full_matrices=False)
    basis = u[:, svals > 1e-10 * svals[0]]
    sub = basis.conj().T @ op.W @ basis
    phases = np.abs(np.angle(np.linalg.eigvals(sub)))
    nonzero = phases[phases > tol]
    return float(nonzero.min()) if nonzero.size else math.pi


# -------------------------------------------------------------------- QMCMC


@dataclass
class QMCMCResult:
    state: StateVector                 # qsample on the first register
    fidelity: float                    # against the exact |pi_r>
    walk_steps: int
    stage_fidelities: list[float]
    stage_success: list[float]         # postselection probability per stage
    stage_bits: list[int]
    stage_repeats: list[int]


def _filter_repeats(m: int, gap_phase: float, overlap: float, target: float) -> int:
    """Phase-0 filter repetitions so leftover amplitude falls below ``target``.

    For an eigenphase ``phi`` (in turns) the zero outcome keeps amplitude at
    most ``1 / (2 M |phi|)`` with ``M = 2^m``.
    """
    size = 1 << m
    phi = gap_phase / (2 * math.pi)
    bound = min(0.999, 1.0 / (2 * size * phi)) if phi > 0 else 0.999
    start = math.sqrt(max(1e-300, 1 - overlap ** 2)) / max(overlap, 1e-12)
    if start <= target:
        return 1
    return max(1, math.ceil(math.log(target / start) / math.log(bound)))


def qmcmc_prepare(chains: Sequence, overlap_floor: float, epsilon: float) -> QMCMCResult:
    """Anneal through ``|pi_0> .. |pi_r>`` with phase-estimation filters.

    ``chains`` are transition matrices (or :class:`MarkovChainSpec`). Stage 0
    is prepared exactly. Each later stage lifts the current qsample with
    ``U_P`` of the new chain, applies ``k`` rounds of phase estimation on the
    walk with ``m = ceil(log2(1/sqrt(delta))) + 2`` bits keeping only outcome
    0, then maps back with ``U_P^dagger`` and keeps the ``|0>`` branch of the
    second register.
    """
    specs = [c if isinstance(c, MarkovChainSpec) else MarkovChainSpec(np.asarray(c), reversible=True)
             for c in chains]
    r = len(specs) - 1
    pis = [s.pi for s in specs]
    for i in range(r):
        overlap = float(np.dot(np.sqrt(pis[i]), np.sqrt(pis[i + 1])))
        if overlap < overlap_floor:
            raise ValueError(f"stage {i + 1}: overlap {overlap:.4f} below the floor {overlap_floor}")
    n = specs[0].n_states
    k = max(1, math.ceil(math.log2(n)))
    d = 1 << k
    current = np.zeros(d, dtype=np.complex128)
    current[:n] = np.sqrt(pis[0])
    fidelities = [1.0]
    successes = [1.0]
    bits_used = [0]
    repeats_used = [0]
    steps = 0
    per_stage = epsilon / max(r, 1)
    for i in range(1, r + 1):
        op = build_szegedy(specs[i])
        delta = max(specs[i].spectral_gap, 1e-12)
        m = math.ceil(math.log2(1 / math.sqrt(delta))) + 2
        overlap = float(np.dot(np.sqrt(pis[i - 1]), np.sqrt(pis[i])))
        repeats = _filter_repeats(m, walk_eigenphase_gap(op), overlap, math.sqrt(per_stage) / 4)
        state = StateVector.from_unnormalized(op.lift(current))
        stage_p = 1.0
        for _ in range(repeats):
            res = qpe(op.W, state, m)
            projected, prob = project(res.state, res.phase_qubits, 0)
            stage_p *= prob
            amps = projected.reshape(1 << m, -1)[0]
            state = StateVector(amps / math.sqrt(prob))
            steps += res.oracle_calls
        back = op.U_P.conj().T @ state.amplitudes
        first = back[np.arange(d) * d]
        stage_p *= float(np.sum(np.abs(first) ** 2))
        current = first / np.linalg.norm(first)
        exact = np.zeros(d)
        exact[:n] = np.sqrt(pis[i])
        fidelities.append(float(abs(np.vdot(exact, current)) ** 2))
        successes.append(stage_p)
        bits_used.append(m)
        repeats_used.append(repeats)
    exact = np.zeros(d)
    exact[:n] = np.sqrt(pis[-1])
    final = StateVector(current)
    return QMCMCResult(final, float(abs(np.vdot(exact, current)) ** 2), steps, fidelities,
                       successes, bits_used, repeats_used)


def tempered_chains(energies, temperatures, laziness: float = 0.5) -> list[MarkovChainSpec]:
    """Metropolis chains for ``pi_T(x) ~ exp(-E(x)/T)`` at each temperature."""
    e = np.asarray(energies, dtype=np.float64)
    out = []
    for t in temperatures:
        w = np.exp(-(e - e.min()) / t) if np.isfinite(t) else np.ones_like(e)
        pi = w / w.sum()
        out.append(MarkovChainSpec(metropolis_chain(pi, laziness), pi, reversible=True))
    return out
