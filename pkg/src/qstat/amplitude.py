"""Grover search, amplitude amplification and estimation, and their statistics uses.

All routines run in "exact" mode by default: success probabilities are read
off the simulated state. Wherever an outcome is drawn, a seed is required.
Costs are reported as oracle calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .fourier import qpe
from .gates import Circuit
from .oracles import FunctionOracle, qsample_encode
from .rng import make_rng
from .state import StateVector, uniform_state

# ------------------------------------------------------------------ helpers


def _good_mask(good, dim: int) -> np.ndarray:
    """Boolean mask of the good subspace from a mask, index set, predicate, or oracle."""
    if isinstance(good, FunctionOracle):
        table = good.table
        if table.shape[0] != dim:
            raise ValueError("oracle domain does not match the state dimension")
        return table.astype(bool)
    if callable(good):
        return np.array([bool(good(i)) for i in range(dim)])
    arr = np.asarray(list(good) if not isinstance(good, np.ndarray) else good)
    if arr.dtype == bool:
        if arr.shape != (dim,):
            raise ValueError("good-subspace mask has the wrong length")
        return arr
    mask = np.zeros(dim, dtype=bool)
    mask[arr.astype(np.int64)] = True
    return mask


def _as_matrix(preparer, n_qubits: int | None = None) -> np.ndarray:
    if isinstance(preparer, Circuit):
        return preparer.unitary()
    mat = np.asarray(preparer, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("state preparer must be a Circuit or a square unitary")
    return mat


def amplification_operator(preparer: np.ndarray, good: np.ndarray) -> np.ndarray:
    """``Q = -A (I - 2|0><0|) A^dagger (I - 2 P_good)`` as a dense matrix."""
    dim = preparer.shape[0]
    reflect_zero = np.eye(dim, dtype=np.complex128)
    reflect_zero[0, 0] = -1
    reflect_good = np.diag(np.where(good, -1.0, 1.0)).astype(np.complex128)
    return -preparer @ reflect_zero @ preparer.conj().T @ reflect_good


def unitary_with_first_column(column: np.ndarray) -> np.ndarray:
    """A unitary whose first column is ``column`` (Householder completion)."""
    v = np.asarray(column, dtype=np.complex128).reshape(-1)
    v = v / np.linalg.norm(v)
    dim = v.shape[0]
    e0 = np.zeros(dim, dtype=np.complex128)
    e0[0] = 1
    phase = v[0] / abs(v[0]) if abs(v[0]) > 1e-15 else 1.0
    w = e0 * phase - v
    norm = np.linalg.norm(w)
    if norm < 1e-15:
        return np.eye(dim, dtype=np.complex128) * phase
    w /= norm
    house = np.eye(dim, dtype=np.complex128) - 2 * np.outer(w, w.conj())
    # house maps phase*e0 to v, so house @ (phase e0) = v; absorb phase.
    return house * phase


# ------------------------------------------------------------------- Grover


@dataclass
class GroverProblem:
    """Search over ``n`` qubits for basis states flagged by a one-bit oracle."""

    n: int
    oracle: FunctionOracle
    preparer: Circuit | None = None

    def __post_init__(self):
        if self.oracle.domain_bits != self.n or self.oracle.codomain_bits != 1:
            raise ValueError("Grover oracle must map n bits to one bit")
        if self.preparer is None:
            self.preparer = Circuit(self.n)
            for q in range(self.n):
                self.preparer.add("H", q)

    @classmethod
    def from_marked(cls, n: int, marked: Iterable[int]) -> "GroverProblem":
        table = np.zeros(1 << n, dtype=np.int64)
        table[list(marked)] = 1
        return cls(n, FunctionOracle(n, 1, table))

    @property
    def size(self) -> int:
        return 1 << self.n

    @property
    def marked(self) -> np.ndarray:
        return self.oracle.marked()


@dataclass
class GroverResult:
    outcome: int
    success_probability: float
    oracle_calls: int
    iterations: int
    state: StateVector = field(repr=False)


def default_iterations(size: int, n_marked: int) -> int:
    return int(round(math.pi / 4 * math.sqrt(size / n_marked)))


def grover_step(problem: GroverProblem, s: StateVector) -> StateVector:
    """One iteration ``U_s U_f``: oracle phase flip then reflection about ``A|0>``."""
    s = problem.oracle.phase_flip(s, range(problem.n))
    return _reflect_about_prepared(problem.preparer, s)


def _reflect_about_prepared(preparer: Circuit, s: StateVector) -> StateVector:
    # 2|s><s| - I  =  -A (I - 2|0><0|) A^dagger
    back = preparer.inverse().run(s)
    amps = -back.amplitudes
    amps[0] = -amps[0]
    return preparer.run(StateVector(amps, check_norm=False))


def grover_search(problem: GroverProblem, iterations: int | None = None, *, rng_seed) -> GroverResult:
    marked = problem.marked
    if marked.size == 0:
        raise ValueError("Grover search needs at least one marked item")
    t = default_iterations(problem.size, marked.size) if iterations is None else int(iterations)
    start_calls = problem.oracle.calls
    state = problem.preparer.run(StateVector.basis(problem.n))
    for _ in range(t):
        state = grover_step(problem, state)
    probs = state.probabilities()
    success = float(probs[marked].sum())
    rng = make_rng(rng_seed)
    outcome = int(rng.choice(probs.shape[0], p=probs / probs.sum()))
    return GroverResult(outcome, success, problem.oracle.calls - start_calls, t, state)


def grover_success_closed_form(size: int, n_marked: int, t: int) -> float:
    """``sin^2((t + 1/2) theta)`` with ``sin(theta/2) = sqrt(M/N)``."""
    theta = 2 * math.asin(math.sqrt(n_marked / size))
    return math.sin((t + 0.5) * theta) ** 2


def grover_plane_leakage(problem: GroverProblem, iterations: int) -> float:
    """Largest norm of the state outside span{good, uniform-bad} over the run."""
    n_marked = problem.marked.size
    good = np.zeros(problem.size, dtype=bool)
    good[problem.marked] = True
    state = problem.preparer.run(StateVector.basis(problem.n))
    worst = 0.0
    for _ in range(iterations + 1):
        amps = state.amplitudes
        bad_dir = np.where(good, 0, 1) / math.sqrt(problem.size - n_marked) if n_marked < problem.size else None
        good_dir = np.where(good, 1, 0) / math.sqrt(n_marked)
        resid = amps - good_dir * np.vdot(good_dir, amps)
        if bad_dir is not None:
            resid = resid - bad_dir * np.vdot(bad_dir, amps)
        worst = max(worst, float(np.linalg.norm(resid)))
        state = grover_step(problem, state)
    return worst


def search_unknown_count(good: np.ndarray, n: int, rng, max_calls: float = math.inf,
                         counter: list | None = None) -> int | None:
    """Randomised-iteration search for an unknown number of marked items.

    Draws ``j`` uniformly below a growing cap ``m`` (factor 6/5, capped at
    ``sqrt(N)``), runs ``j`` Grover steps, measures, and checks the outcome
    classically. Returns a marked index, or ``None`` once ``max_calls`` is
    spent. ``counter[0]`` accumulates oracle calls (Grover steps plus checks).
    """
    size = 1 << n
    counter = counter if counter is not None else [0]
    cap = 1.0
    amps0 = np.full(size, 1 / math.sqrt(size))
    signs = np.where(good, -1.0, 1.0)
    while counter[0] < max_calls:
        j = int(rng.integers(0, max(1, math.ceil(cap))))
        j = int(min(j, max(0, max_calls - counter[0] - 1)))
        amps = amps0.copy()
        for _ in range(j):
            amps = amps * signs
            amps = 2 * amps.mean() - amps
        counter[0] += j
        probs = amps ** 2
        x = int(rng.choice(size, p=probs / probs.sum()))
        counter[0] += 1  # classical check of the measured candidate
        if good[x]:
            return x
        cap = min(cap * 6 / 5, math.sqrt(size))
    return None


def grover_search_unknown(problem: GroverProblem, *, rng_seed, max_calls: float | None = None) -> GroverResult:
    """Search when the number of marked items is unknown."""
    rng = make_rng(rng_seed)
    good = problem.oracle.table.astype(bool)
    budget = 9 * math.sqrt(problem.size) if max_calls is None else max_calls
    counter = [0]
    found = search_unknown_count(good, problem.n, rng, budget, counter)
    problem.oracle.count(counter[0])
    outcome = -1 if found is None else found
    return GroverResult(outcome, float(found is not None), counter[0], -1,
                        uniform_state(problem.n))


def classical_search(oracle: FunctionOracle, *, rng_seed) -> tuple[int, int]:
    """Query items in a random order until a marked one appears: (index, calls)."""
    rng = make_rng(rng_seed)
    order = rng.permutation(oracle.table.shape[0])
    for calls, x in enumerate(order, start=1):
        if oracle(int(x)):
            return int(x), calls
    raise ValueError("no marked item")


# -------------------------------------------------------------------- QAA


@dataclass
class QAAResult:
    state: StateVector
    good_probability: float
    oracle_calls: int


def qaa(preparer, good, iterations: int) -> QAAResult:
    """Apply ``Q^t`` to ``A|0>`` and report the good-subspace probability."""
    a = _as_matrix(preparer)
    mask = _good_mask(good, a.shape[0])
    start = a[:, 0]
    if np.sum(np.abs(start[mask]) ** 2) == 0:
        raise ValueError("good subspace has zero initial probability")
    q = amplification_operator(a, mask)
    vec = np.linalg.matrix_power(q, iterations) @ start
    state = StateVector(vec, check_norm=False)
    return QAAResult(state, float(np.sum(np.abs(vec[mask]) ** 2)), iterations)


def qaa_success_closed_form(p0: float, t: int) -> float:
    return math.sin((2 * t + 1) * math.asin(math.sqrt(p0))) ** 2


# -------------------------------------------------------------------- QAE


@dataclass
class AmplitudeEstimate:
    a_hat: float
    m: int
    y_hat: int
    candidates: tuple[int, int]
    probability: float          # mass on {y_hat, 2^m - y_hat}
    distribution: np.ndarray = field(repr=False)
    grover_steps: int = 0
    oracle_calls: int = 0       # calls to the state preparer A

    note: str = "a_hat = sin^2(pi y/2^m); y and 2^m - y give the same estimate"


def qae_error_bound(a: float, t: int) -> float:
    """Error bound as stated for the estimation criterion: 2 pi a(1-a)/t + pi^2/t^2."""
    return 2 * math.pi * a * (1 - a) / t + math.pi ** 2 / t ** 2


def qae_error_bound_sqrt(a: float, t: int) -> float:
    """Amplitude-estimation bound with the square root: 2 pi sqrt(a(1-a))/t + pi^2/t^2."""
    return 2 * math.pi * math.sqrt(a * (1 - a)) / t + math.pi ** 2 / t ** 2


def qae(preparer, good, m: int, mode: str = "exact", rng_seed=None) -> AmplitudeEstimate:
    """Estimate the good-subspace probability of ``A|0>`` with ``m`` phase bits."""
    a = _as_matrix(preparer)
    mask = _good_mask(good, a.shape[0])
    q = amplification_operator(a, mask)
    start = StateVector(a[:, 0], check_norm=False)
    res = qpe(q, start, m, mode=mode, rng_seed=rng_seed)
    size = 1 << m
    y = res.outcome
    mirror = (size - y) % size
    prob = float(res.distribution[y] + (res.distribution[mirror] if mirror != y else 0.0))
    steps = res.oracle_calls
    return AmplitudeEstimate(
        a_hat=math.sin(math.pi * y / size) ** 2, m=m, y_hat=y, candidates=(y, mirror),
        probability=prob, distribution=res.distribution, grover_steps=steps,
        oracle_calls=2 * steps + 1,
    )


def _matrix_of(builder: Callable[[StateVector], StateVector], n_qubits: int) -> np.ndarray:
    dim = 1 << n_qubits
    cols = [builder(StateVector(np.eye(dim, dtype=np.complex128)[i], check_norm=False)).amplitudes
            for i in range(dim)]
    return np.array(cols).T


def mean_preparer(oracle: FunctionOracle, denominator: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``A`` for bounded-mean estimation and the good-subspace mask.

    Registers: index (n qubits), value (m qubits), flag (1 qubit). ``A``
    prepares the uniform index superposition, writes ``F(i)`` into the value
    register, rotates the flag to ``sqrt(1-F)|0> + sqrt(F)|1>`` and then
    queries the oracle again to clear the value register.
    """
    n, m = oracle.domain_bits, oracle.codomain_bits
    den = float(1 << m) if denominator is None else float(denominator)
    if np.any(oracle.table / den > 1 + 1e-12):
        raise ValueError("F values exceed 1 under the chosen denominator")
    index = tuple(range(n))
    value = tuple(range(n, n + m))
    flag = n + m
    total = n + m + 1

    def angle(v: int) -> float:
        return math.asin(math.sqrt(min(1.0, v / den)))

    def build(s: StateVector) -> StateVector:
        from .gates import controlled_rotation_f, walsh_hadamard

        s = walsh_hadamard(s, index)
        s = StateVector(s.amplitudes[_inverse_perm(oracle.permutation(total, index, value))],
                        check_norm=False)
        s = controlled_rotation_f(s, value, flag, angle)
        return StateVector(s.amplitudes[_inverse_perm(oracle.permutation(total, index, value))],
                           check_norm=False)

    mat = _matrix_of(build, total)
    mask = ((np.arange(1 << total) >> flag) & 1).astype(bool)
    return mat, mask


def _inverse_perm(dest: np.ndarray) -> np.ndarray:
    inv = np.empty_like(dest)
    inv[dest] = np.arange(dest.shape[0])
    return inv


@dataclass
class MeanEstimate:
    estimate: float
    exact: float
    qae: AmplitudeEstimate
    oracle_calls: int           # calls to F: two per application of A


def estimate_mean_bounded(oracle: FunctionOracle, phase_bits: int, denominator: float | None = None,
                          mode: str = "exact", rng_seed=None) -> MeanEstimate:
    """Mean of ``F(i)/denominator`` over the domain (default denominator ``2^m``)."""
    mat, mask = mean_preparer(oracle, denominator)
    est = qae(mat, mask, phase_bits, mode=mode, rng_seed=rng_seed)
    den = float(1 << oracle.codomain_bits) if denominator is None else float(denominator)
    exact = float(np.mean(oracle.table / den))
    calls = 2 * est.oracle_calls
    oracle.count(calls)
    return MeanEstimate(est.a_hat, exact, est, calls)


@dataclass
class CountEstimate:
    count: int
    estimate: AmplitudeEstimate
    oracle_calls: int


def quantum_count(oracle: FunctionOracle, phase_bits: int, mode: str = "exact", rng_seed=None) -> CountEstimate:
    """Number of ``x`` with ``F(x) = 1``, via amplitude estimation on the uniform state."""
    if oracle.codomain_bits != 1:
        raise ValueError("counting needs a one-bit oracle")
    n = oracle.domain_bits
    size = 1 << n
    hadamard = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
    prep = np.ones((1, 1), dtype=np.complex128)
    for _ in range(n):
        prep = np.kron(hadamard, prep)
    est = qae(prep, oracle.table.astype(bool), phase_bits, mode=mode, rng_seed=rng_seed)
    oracle.count(est.grover_steps)
    return CountEstimate(int(round(size * est.a_hat)), est, est.grover_steps)


# -------------------------------------------------------- minimum and rank


@dataclass
class MinimumResult:
    index: int
    value: float
    oracle_calls: int
    budget: float
    degenerate: bool
    verified: bool = False


def minimum_budget(size: int) -> float:
    return 22.5 * math.sqrt(size) + 1.4 * math.log2(size) ** 2


def find_minimum(values, *, rng_seed, budget_multiplier: float = 1.0, verify: bool = False) -> MinimumResult:
    """Threshold-lowering minimum search over a table of values.

    Starts from a random threshold index, repeatedly searches for any index
    with a strictly smaller value and moves the threshold there, until the
    call budget ``22.5 sqrt(N) + 1.4 log2(N)^2`` (times the multiplier) runs
    out. With ``verify`` the loop continues past the budget until a final
    search of ``9 sqrt(N)`` calls finds nothing smaller.
    """
    table = np.asarray(values.table if isinstance(values, FunctionOracle) else values, dtype=np.float64)
    size = table.shape[0]
    if size < 2 or size & (size - 1):
        raise ValueError("minimum finding needs N >= 2 with N a power of two")
    n = size.bit_length() - 1
    rng = make_rng(rng_seed)
    budget = budget_multiplier * minimum_budget(size)
    counter = [1]  # evaluating F at the initial threshold
    y = int(rng.integers(size))
    while counter[0] < budget:
        good = table < table[y]
        x = search_unknown_count(good, n, rng, budget, counter)
        if x is not None:
            y = x
    verified = False
    if verify:
        while True:
            good = table < table[y]
            limit = counter[0] + 9 * math.sqrt(size)
            x = search_unknown_count(good, n, rng, limit, counter)
            if x is None:
                verified = True
                break
            y = x
    if isinstance(values, FunctionOracle):
        values.count(counter[0])
    degenerate = bool(np.all(table == table[0]))
    return MinimumResult(y, float(table[y]), counter[0], budget, degenerate, verified)


@dataclass
class KthResult:
    index: int
    rank: int
    iterations: int
    oracle_calls: int


def _rank_count_bits(size: int) -> int:
    """Phase bits so that the worst-case counting error stays below 1/2."""
    m = 1
    while True:
        t = 1 << m
        if 2 * math.pi * (size / 2) / t + math.pi ** 2 * size / t ** 2 < 0.5:
            return m
        m += 1


def kth_smallest(values, k: int, delta: float = 0.5, *, rng_seed) -> KthResult:
    """Index whose value has rank in ``(k - delta, k + delta)``.

    Ranks start at 1 and count strictly smaller values plus one. The loop
    keeps an open value window ``(F(i), F(j))``, samples a uniform index in it
    with the randomised search, and classifies the sample's rank with
    quantum counting of the indices whose value is smaller.
    """
    table = np.asarray(values.table if isinstance(values, FunctionOracle) else values, dtype=np.float64)
    size = table.shape[0]
    if not 1 <= k <= size:
        raise ValueError("k must lie in 1..N")
    if delta < 0.5:
        raise ValueError("delta must be at least 1/2")
    n = size.bit_length() - 1
    rng = make_rng(rng_seed)
    bits = _rank_count_bits(size)
    low, high = -math.inf, math.inf
    counter = [0]
    iterations = 0
    while True:
        iterations += 1
        window = (table > low) & (table < high)
        if not window.any():
            raise RuntimeError("empty value window; ranks are ambiguous for repeated values")
        sample = search_unknown_count(window, n, rng, math.inf, counter)
        below = FunctionOracle(n, 1, (table < table[sample]).astype(np.int64))
        counted = quantum_count(below, bits)
        counter[0] += counted.oracle_calls
        rank = counted.count + 1
        if k - delta < rank < k + delta:
            true_rank = int(np.sum(table < table[sample])) + 1
            return KthResult(int(sample), true_rank, iterations, counter[0])
        if rank <= k - delta:
            low = table[sample]
        else:
            high = table[sample]


# --------------------------------------------------------------- swap test


@dataclass
class SwapTestResult:
    p_zero: float
    overlap: float
    stderr: float | None
    clamped: bool
    shots: int | None


def swap_test_circuit(width: int) -> Circuit:
    """Flag qubit ``2*width``; registers ``a`` on 0..width-1 and ``b`` above it."""
    flag = 2 * width
    circ = Circuit(2 * width + 1)
    circ.add("H", flag)
    for i in range(width):
        circ.add("CSwap", (i, width + i), controls=flag)
    circ.add("H", flag)
    return circ


def swap_test_probability(a: StateVector, b: StateVector) -> float:
    """Probability that the swap-test flag reads 0, from the simulated circuit."""
    if a.dim != b.dim:
        raise ValueError("swap test needs states of equal dimension")
    width = a.n_qubits
    joint = a.extend(b).extend(StateVector.basis(1))
    out = swap_test_circuit(width).run(joint)
    return float(out.marginal((2 * width,))[0])


def swap_test(a: StateVector, b: StateVector, shots: int | None = None, rng_seed=None,
              tol: float = 1e-12) -> SwapTestResult:
    """Estimate ``|<a|b>| = sqrt(2p - 1)`` exactly or from ``shots`` flag readouts."""
    p = swap_test_probability(a, b)
    if shots is None:
        clamped = p < 0.5
        if p < 0.5 - tol:
            raise ValueError(f"swap-test probability {p} below 1/2")
        return SwapTestResult(p, math.sqrt(max(0.0, 2 * p - 1)), None, clamped, None)
    rng = make_rng(rng_seed)
    zeros = int(rng.binomial(shots, p))
    p_hat = zeros / shots
    se_p = math.sqrt(max(p_hat * (1 - p_hat), 1e-300) / shots)
    clamped = p_hat < 0.5
    overlap = math.sqrt(max(0.0, 2 * p_hat - 1))
    se = se_p / overlap if overlap > 0 else math.sqrt(2 * se_p)
    return SwapTestResult(p_hat, overlap, se, clamped, shots)


def signed_inner_product(a, b, shots: int | None = None, rng_seed=None) -> float:
    """Real inner product ``a.b`` of unit vectors via the augmented swap test.

    Each vector becomes ``(a_1, ..., a_N, 1)/sqrt(2)``, whose overlap is
    ``(a.b + 1)/2``, so ``a.b = 2 sqrt(2p - 1) - 1``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("vectors must have equal length")
    for v in (a, b):
        if abs(np.linalg.norm(v) - 1) > 1e-10:
            raise ValueError("signed swap test expects unit vectors")
    from .oracles import amplitude_encode

    aug_a = amplitude_encode(np.append(a, 1.0) / math.sqrt(2))
    aug_b = amplitude_encode(np.append(b, 1.0) / math.sqrt(2))
    res = swap_test(aug_a, aug_b, shots=shots, rng_seed=rng_seed)
    return 2 * res.overlap - 1


@dataclass
class SampleMeanResult:
    overlap: float          # |<u|x>| with u uniform
    sqrt_n_mean: float      # sqrt(N) * mean(x) = overlap * ||x||
    mean: float
    stderr: float | None


def sample_mean_via_swap(x, shots: int | None = None, rng_seed=None) -> SampleMeanResult:
    """Sample mean of a non-negative data vector from a swap test with the uniform state.

    The swap test gives ``|<u|x/||x||>| = |sum x| / (sqrt(N) ||x||)``;
    multiplying by the classically known ``||x||`` yields ``sqrt(N) * mean``.
    """
    from .oracles import amplitude_encode

    vec = np.asarray(x, dtype=np.float64)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ValueError("cannot take the mean of a zero vector this way")
    state = amplitude_encode(vec)
    uniform = amplitude_encode(np.ones(vec.size))
    res = swap_test(state, uniform, shots=shots, rng_seed=rng_seed)
    # Padding to a power of two adds zeros to both vectors, so the overlap
    # refers to the original N entries.
    sqrt_n_mean = res.overlap * norm
    mean = sqrt_n_mean / math.sqrt(vec.size)
    stderr = None if res.stderr is None else res.stderr * norm / math.sqrt(vec.size)
    return SampleMeanResult(res.overlap, sqrt_n_mean, mean, stderr)


# ------------------------------------------------------------- Monte Carlo


def monte_carlo_preparer(p, f) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``A = F (P x I)`` with the flag on the top qubit, plus the good mask."""
    probs = np.asarray(p, dtype=np.float64)
    vals = np.asarray(f, dtype=np.float64)
    if probs.shape != vals.shape:
        raise ValueError("p and f must have the same length")
    if np.any(vals < 0) or np.any(vals > 1):
        raise ValueError("f must take values in [0, 1]")
    sample = qsample_encode(probs)
    n = sample.n_qubits
    size = 1 << n
    prep = unitary_with_first_column(sample.amplitudes)
    padded = np.zeros(size)
    padded[: vals.size] = vals
    angles = np.arcsin(np.sqrt(padded))
    c, s = np.cos(angles), np.sin(angles)
    rot = np.zeros((2 * size, 2 * size), dtype=np.complex128)
    idx = np.arange(size)
    rot[idx, idx] = c
    rot[idx + size, idx] = s
    rot[idx, idx + size] = -s
    rot[idx + size, idx + size] = c
    full = rot @ np.kron(np.eye(2), prep)
    mask = np.arange(2 * size) >= size
    return full, mask


@dataclass
class MonteCarloEstimate:
    estimate: float
    exact: float
    oracle_calls: int
    qae: AmplitudeEstimate = field(repr=False)


def quantum_monte_carlo(p, f, phase_bits: int, mode: str = "exact", rng_seed=None) -> MonteCarloEstimate:
    """Estimate ``E_p[f]`` by amplitude estimation on ``sum sqrt(p) |x>(...|0> + sqrt(f)|1>)``."""
    full, mask = monte_carlo_preparer(p, f)
    est = qae(full, mask, phase_bits, mode=mode, rng_seed=rng_seed)
    exact = float(np.dot(np.asarray(p, float), np.asarray(f, float)))
    return MonteCarloEstimate(est.a_hat, exact, est.oracle_calls, est)


def classical_monte_carlo(p, f, samples: int, *, rng_seed) -> float:
    rng = make_rng(rng_seed)
    probs = np.asarray(p, dtype=np.float64)
    draws = rng.choice(probs.size, size=samples, p=probs / probs.sum())
    return float(np.mean(np.asarray(f, dtype=np.float64)[draws]))
