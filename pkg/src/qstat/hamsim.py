"""Hamiltonian evolution: product formula, Taylor-series LCU, qubitization walk.

Pauli strings are read left to right from the highest qubit down, so
``"XZ"`` is X on qubit 1 and Z on qubit 0 (the matrix is ``kron(X, Z)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.linalg import expm
from scipy.special import jv

from .amplitude import unitary_with_first_column
from .oracles import SparseHamiltonianAccess
from .state import StateVector

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def pauli_matrix(label: str) -> np.ndarray:
    if not label or set(label) - set(PAULI):
        raise ValueError(f"bad Pauli string {label!r}")
    return reduce(np.kron, (PAULI[c] for c in label))


def pauli_decompose(h, tol: float = 1e-12) -> list[tuple[float, str]]:
    """Real weights ``alpha_P`` with ``H = sum alpha_P P`` over Pauli strings."""
    mat = np.asarray(h, dtype=np.complex128)
    dim = mat.shape[0]
    n = int(round(math.log2(dim)))
    if (1 << n) != dim or n > 6:
        raise ValueError("Pauli decomposition needs a 2^n x 2^n matrix with n <= 6")
    if not np.allclose(mat, mat.conj().T, atol=1e-10):
        raise ValueError("matrix is not Hermitian")
    out = []
    for idx in range(4 ** n):
        label = "".join("IXYZ"[(idx // 4 ** (n - 1 - k)) % 4] for k in range(n))
        coeff = np.trace(pauli_matrix(label) @ mat).real / dim
        if abs(coeff) > tol:
            out.append((float(coeff), label))
    return out


@dataclass
class HamiltonianSum:
    """``H = sum_l alpha_l H_l`` with each ``H_l`` Hermitian."""

    terms: list[tuple[float, np.ndarray]]
    t: float = 1.0
    labels: list[str] | None = None

    def __post_init__(self):
        if not self.terms:
            raise ValueError("Hamiltonian needs at least one term")
        cleaned = []
        for alpha, mat in self.terms:
            m = np.asarray(mat, dtype=np.complex128)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("each term must be a square matrix")
            if np.abs(m - m.conj().T).max() > 1e-10:
                raise ValueError("term is not Hermitian")
            cleaned.append((float(alpha), m))
        if len({m.shape for _, m in cleaned}) != 1:
            raise ValueError("terms act on different dimensions")
        self.terms = cleaned

    @classmethod
    def from_paulis(cls, weighted: list[tuple[float, str]], t: float = 1.0) -> "HamiltonianSum":
        return cls([(a, pauli_matrix(p)) for a, p in weighted], t, [p for _, p in weighted])

    @classmethod
    def from_matrix(cls, h, t: float = 1.0) -> "HamiltonianSum":
        return cls.from_paulis(pauli_decompose(h), t)

    @property
    def dim(self) -> int:
        return self.terms[0][1].shape[0]

    def matrix(self) -> np.ndarray:
        return sum(a * m for a, m in self.terms)

    @property
    def is_unitary_sum(self) -> bool:
        eye = np.eye(self.dim)
        return all(np.allclose(m @ m.conj().T, eye, atol=1e-10) for _, m in self.terms)

    def lcu_terms(self) -> list[tuple[float, np.ndarray]]:
        """Positive weights with unitary terms; a negative sign moves into the term."""
        if not self.is_unitary_sum:
            raise ValueError("LCU mode needs every term to be unitary")
        return [(abs(a), m if a >= 0 else -m) for a, m in self.terms if a != 0]

    @property
    def norms(self) -> dict[str, float]:
        h = self.matrix()
        return {"spectral": float(np.linalg.norm(h, 2)),
                "one": float(np.abs(h).sum(axis=0).max()),
                "weights": float(sum(abs(a) for a, _ in self.terms))}

    def exact(self, t: float | None = None) -> np.ndarray:
        return expm(-1j * self.matrix() * (self.t if t is None else t))


def load_hamiltonian_json(obj: dict) -> HamiltonianSum:
    extra = set(obj) - {"terms", "t"}
    if extra:
        raise ValueError(f"unknown Hamiltonian keys {sorted(extra)}")
    weighted = []
    for term in obj["terms"]:
        if set(term) - {"alpha", "pauli"}:
            raise ValueError(f"unknown term keys {sorted(set(term) - {'alpha', 'pauli'})}")
        weighted.append((float(term["alpha"]), str(term["pauli"])))
    return HamiltonianSum.from_paulis(weighted, float(obj.get("t", 1.0)))


# ------------------------------------------------------------- product formula


def trotter_unitary(h: HamiltonianSum, t: float, r: int) -> np.ndarray:
    if r < 1:
        raise ValueError("need at least one Trotter step")
    step = reduce(lambda acc, term: expm(-1j * term[0] * term[1] * t / r) @ acc,
                  h.terms, np.eye(h.dim, dtype=np.complex128))
    return np.linalg.matrix_power(step, r)


def trotter_evolve(h: HamiltonianSum, t: float, r: int, s: StateVector) -> StateVector:
    """First-order product formula ``(prod_j exp(-i H_j t / r))^r``."""
    return StateVector(trotter_unitary(h, t, r) @ s.amplitudes, check_norm=False)


# ----------------------------------------------------------------- Taylor LCU


@dataclass
class LCUResult:
    state: StateVector
    success_probability: float
    segments: int
    truncation: int
    normalization: float        # Taylor sum s for one segment
    lcu_terms: int              # distinct unitaries after merging equal products


def taylor_normalization(weight_sum: float, t: float, K: int) -> float:
    return sum((weight_sum * t) ** k / math.factorial(k) for k in range(K + 1))


def taylor_tail(weight_sum: float, t: float, K: int) -> float:
    x = weight_sum * abs(t)
    return x ** (K + 1) / math.factorial(K + 1)


def _canonical_key(mat: np.ndarray) -> tuple[bytes, complex]:
    flat = mat.reshape(-1)
    pivot = flat[np.argmax(np.abs(flat) > 1e-12)]
    phase = pivot / abs(pivot)
    return np.round(mat / phase, 10).tobytes(), phase


def _taylor_terms(terms, t: float, K: int) -> list[tuple[complex, np.ndarray]]:
    """Merge ``sum_k (-it)^k/k! sum alpha_{l1}..alpha_{lk} V_{l1}..V_{lk}`` by product."""
    dim = terms[0][1].shape[0]
    layer = {}
    key, phase = _canonical_key(np.eye(dim, dtype=np.complex128))
    layer[key] = [complex(1), np.eye(dim, dtype=np.complex128) / phase]
    total = {k: [v[0], v[1]] for k, v in layer.items()}
    for k in range(1, K + 1):
        nxt = {}
        for coeff, base in layer.values():
            for alpha, v in terms:
                prod = v @ base
                key, phase = _canonical_key(prod)
                c = coeff * alpha * (-1j * t) / k * phase
                if key in nxt:
                    nxt[key][0] += c
                else:
                    nxt[key] = [c, prod / phase]
        layer = nxt
        for key, (c, mat) in layer.items():
            if key in total:
                total[key][0] += c
            else:
                total[key] = [c, mat]
    return [(c, m) for c, m in total.values() if abs(c) > 1e-15]


def _lcu_segment_block(merged, dim: int) -> tuple[np.ndarray, int]:
    """Unitary ``W = R_flag x (B^dagger SELECT B)`` whose all-zero block is ``U_trunc / 2``.

    Layout: system on the low qubits, index register above it, one idle flag
    qubit on top. The flag's rotation pads the LCU normalization up to 2.
    """
    weights = np.array([abs(c) for c, _ in merged])
    unitaries = [(c / abs(c)) * m for c, m in merged]
    s_lcu = float(weights.sum())
    if s_lcu > 2 + 1e-12:
        raise ValueError(f"segment normalization {s_lcu:.4f} exceeds 2")
    idx_bits = max(1, math.ceil(math.log2(len(unitaries))))
    size = 1 << idx_bits
    first = np.zeros(size)
    first[: len(weights)] = np.sqrt(weights / s_lcu)
    prep = unitary_with_first_column(first)
    select = np.zeros((size * dim, size * dim), dtype=np.complex128)
    for j in range(size):
        select[j * dim:(j + 1) * dim, j * dim:(j + 1) * dim] = unitaries[j] if j < len(unitaries) else np.eye(dim)
    prep_full = np.kron(prep, np.eye(dim))
    core = prep_full.conj().T @ select @ prep_full
    cos_half = min(1.0, s_lcu / 2)
    flag = np.array([[cos_half, -math.sqrt(1 - cos_half ** 2)], [math.sqrt(1 - cos_half ** 2), cos_half]])
    return np.kron(flag, core), idx_bits + 1


def lcu_evolve(h: HamiltonianSum, t: float, K: int | None, s: StateVector,
               segments: int | None = None) -> LCUResult:
    """Taylor-series LCU with one round of oblivious amplitude amplification per segment.

    ``segments=None`` picks the fewest segments whose Taylor normalization is
    at most 2; an explicit count that violates that raises. ``K=None`` picks
    the smallest truncation with per-segment tail below 1e-13.
    """
    terms = h.lcu_terms()
    weight_sum = sum(a for a, _ in terms)
    if segments is None:
        segments = max(1, math.ceil(weight_sum * abs(t) / math.log(2) - 1e-12))
    seg_t = t / segments
    if K is None:
        K = 1
        while taylor_tail(weight_sum, seg_t, K) > 1e-13:
            K += 1
    if K < 0:
        raise ValueError("truncation order must be non-negative")
    s_taylor = taylor_normalization(weight_sum, abs(seg_t), K)
    if s_taylor > 2 + 1e-12:
        raise ValueError(f"segment normalization s = {s_taylor:.4f} > 2; use more segments")
    merged = _taylor_terms(terms, seg_t, K)
    dim = h.dim
    w, anc_bits = _lcu_segment_block(merged, dim)
    anc_dim = 1 << anc_bits
    reflect = np.ones(anc_dim * dim)
    reflect[dim:] = -1                      # 2|0><0| - I on the ancilla
    amps = s.amplitudes.astype(np.complex128)
    success = 1.0
    for _ in range(segments):
        vec = np.zeros(anc_dim * dim, dtype=np.complex128)
        vec[:dim] = amps
        vec = w @ vec
        vec = -(w @ (reflect * (w.conj().T @ (reflect * vec))))
        good = vec[:dim]
        p = float(np.vdot(good, good).real)
        success *= p
        amps = good / math.sqrt(p)
    return LCUResult(StateVector(amps, check_norm=False), success, segments, K, s_taylor, len(merged))


# -------------------------------------------------------------- qubitization


@dataclass
class QubitizationWalk:
    U: np.ndarray
    T: np.ndarray
    S: np.ndarray
    H: np.ndarray
    norm_one: float
    system_dim: int

    def eigenphase_report(self) -> float:
        """Max error of the walk eigenphases against ``+-arcsin(lambda/||H||_1)``.

        Compared on the invariant subspace spanned by ``T|j,0>`` and
        ``S T|j,0>``; at ``|lambda| = ||H||_1`` the two vectors coincide and only
        one eigenphase exists.
        """
        lams = np.linalg.eigvalsh(self.H)
        cols = self.T[:, : self.system_dim]
        left, sing, _ = np.linalg.svd(np.hstack([cols, self.S @ cols]), full_matrices=False)
        basis = left[:, sing > 1e-9]
        sub = basis.conj().T @ self.U @ basis
        got = np.angle(np.linalg.eigvals(sub))
        x = np.clip(lams / self.norm_one, -1, 1) if self.norm_one else np.zeros_like(lams)
        expected = list(np.arcsin(x))
        expected += [math.pi - a for a, v in zip(np.arcsin(x), x) if abs(abs(v) - 1) > 1e-9]
        if len(expected) != len(got):
            return math.inf
        return _phase_set_distance(got, np.array(expected))


def _phase_set_distance(got: np.ndarray, expected: np.ndarray) -> float:
    """Greedy matching of unit-circle phases; returns the worst chord mismatch."""
    left = list(np.exp(1j * np.asarray(expected)))
    worst = 0.0
    for g in np.exp(1j * np.asarray(got)):
        dists = [abs(g - e) for e in left]
        k = int(np.argmin(dists))
        worst = max(worst, dists[k])
        left.pop(k)
    return worst


def build_qubitization(access: SparseHamiltonianAccess | np.ndarray) -> QubitizationWalk:
    """Walk ``U = i S (2 T T^dagger - I)`` normalised by the induced one-norm.

    Each register is (system, flag). ``|phi_j0>`` holds
    ``sum_l c_jl |l>|0> + sqrt(1 - sum_l |H_jl|/X) |0>|1>`` with ``X = ||H||_1``
    and ``c_jl = sqrt(|H_jl|/X) e^{-i arg(H_jl)/2}``; ``|phi_j1> = |0>|1>``.
    The principal square root gives the wrong sign on negative real entries,
    so the swap carries a ``-1`` on exactly those ``|j,0>|l,0>`` pairs. The
    signed swap is still a symmetric involution.
    """
    if not isinstance(access, SparseHamiltonianAccess):
        access = SparseHamiltonianAccess(access)
    h = access.dense()
    n = h.shape[0]
    x = access.norms["one"]
    reg = 2 * n                              # (system, flag) with flag as the high bit
    big = reg * reg
    t_mat = np.zeros((big, reg), dtype=np.complex128)
    negative = np.zeros((n, n), dtype=bool)
    for j in range(n):
        col_j = j                            # |j>|b=0> in the first register
        if x > 0:
            mags = np.abs(h[j])
            phases = np.angle(h[j])
            neg = (mags > 0) & (np.abs(np.abs(phases) - np.pi) < 1e-12)
            negative[j] = neg
            coeffs = np.sqrt(mags / x) * np.where(neg, 1.0, np.exp(-0.5j * phases))
            rest = max(0.0, 1 - mags.sum() / x)
        else:
            coeffs = np.zeros(n)
            rest = 1.0
        phi = np.zeros(reg, dtype=np.complex128)
        phi[:n] = coeffs
        phi[n] += math.sqrt(rest)            # |0>|1>
        t_mat[col_j * reg:(col_j + 1) * reg, col_j] = phi
        one = np.zeros(reg, dtype=np.complex128)
        one[n] = 1
        t_mat[(n + j) * reg:(n + j + 1) * reg, n + j] = one
    swap = np.zeros((big, big))
    for a in range(reg):
        for b in range(reg):
            sign = -1.0 if (a < n and b < n and negative[a, b]) else 1.0
            swap[b * reg + a, a * reg + b] = sign
    u = 1j * swap @ (2 * t_mat @ t_mat.conj().T - np.eye(big))
    return QubitizationWalk(u, t_mat, swap, h, x, n)


def bessel_tail(tau: float, k_max: int) -> float:
    """``sum_{|m| > k_max} |J_m(tau)|``, summed until the terms vanish."""
    top = max(k_max + 40, int(abs(tau)) * 2 + 60)
    m = np.arange(k_max + 1, top + 1)
    return float(2 * np.abs(jv(m, tau)).sum())


def qw_truncation(tau: float, epsilon: float) -> int:
    k = 0
    while bessel_tail(tau, k) > epsilon:
        k += 1
    return k


@dataclass
class WalkEvolution:
    state: StateVector
    success_probability: float
    tail: float
    k_max: int


def qw_lcu_evolve(walk: QubitizationWalk, t: float, k_max: int, s: StateVector,
                  epsilon: float | None = None) -> WalkEvolution:
    """``T^dagger (sum_{|m|<=k} J_m(-tau) U^m) T`` applied to ``s``, ``tau = t ||H||_1``.

    Success probability is the squared norm of the kept branch divided by
    ``(sum |J_m|)^2``, the LCU normalization.
    """
    if s.dim != walk.system_dim:
        raise ValueError("state does not match the encoded Hamiltonian")
    tau = t * walk.norm_one
    tail = bessel_tail(tau, k_max)
    if epsilon is not None and tail > epsilon:
        raise ValueError(f"k_max={k_max} leaves Bessel tail {tail:.3e} > {epsilon}")
    reg = 2 * walk.system_dim
    start = np.zeros(reg, dtype=np.complex128)
    start[: walk.system_dim] = s.amplitudes
    lifted = walk.T @ start
    acc = jv(0, -tau) * lifted
    fwd = lifted.copy()
    bwd = lifted.copy()
    for m in range(1, k_max + 1):
        fwd = walk.U @ fwd
        bwd = walk.U.conj().T @ bwd
        acc = acc + jv(m, -tau) * fwd + jv(-m, -tau) * bwd
    out = (walk.T.conj().T @ acc)[: walk.system_dim]
    weight = float(sum(abs(jv(m, -tau)) for m in range(-k_max, k_max + 1)))
    norm = float(np.linalg.norm(out))
    return WalkEvolution(StateVector(out / norm, check_norm=False),
                         (norm / weight) ** 2, tail, k_max)
