"""Adiabatic schedules, QAOA for diagonal cost functions, and a generic hybrid loop.

Bitstrings print with qubit ``n-1`` first, so ``"01"`` is basis index 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .rng import make_rng, spawn
from .state import Observable, StateVector, check_qubit_count, uniform_state


# ------------------------------------------------------------------- costs


@dataclass
class CostHamiltonian:
    """Diagonal ``C(z) = sum_k C_k(z)`` with each clause a 0/1 indicator over bitstrings."""

    n_qubits: int
    clauses: list[np.ndarray]

    def __post_init__(self):
        check_qubit_count(self.n_qubits)
        if self.n_qubits > 20:
            raise ValueError("cost functions are limited to 20 qubits")
        size = 1 << self.n_qubits
        cleaned = []
        for clause in self.clauses:
            arr = np.asarray(clause)
            if arr.shape != (size,) or not np.all((arr == 0) | (arr == 1)):
                raise ValueError("each clause must be a 0/1 vector over all bitstrings")
            cleaned.append(arr.astype(np.float64))
        self.clauses = cleaned
        self.values = np.sum(cleaned, axis=0) if cleaned else np.zeros(size)

    @classmethod
    def maxcut(cls, edges: Sequence[tuple[int, int]], n_qubits: int | None = None) -> "CostHamiltonian":
        edges = [(int(u), int(v)) for u, v in edges]
        if any(u == v for u, v in edges):
            raise ValueError("self-loops cannot be cut")
        n = n_qubits if n_qubits is not None else (max(max(e) for e in edges) + 1 if edges else 1)
        z = np.arange(1 << n)
        clauses = [(((z >> u) ^ (z >> v)) & 1) for u, v in edges]
        return cls(n, clauses)

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    @property
    def argmax(self) -> np.ndarray:
        return np.flatnonzero(self.values == self.values.max())

    def scaled(self, factor: float) -> "ScaledCost":
        return ScaledCost(self, factor)


@dataclass
class ScaledCost:
    """``c * C``; clause structure is kept for reporting."""

    base: CostHamiltonian
    factor: float

    @property
    def n_qubits(self) -> int:
        return self.base.n_qubits

    @property
    def values(self) -> np.ndarray:
        return self.factor * self.base.values


def bitstring(index: int, n_qubits: int) -> str:
    return format(int(index), f"0{n_qubits}b")


def load_edge_list(text: str) -> list[tuple[int, int]]:
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'u v'")
        edges.append((int(parts[0]), int(parts[1])))
    return edges


# -------------------------------------------------------------------- QAOA


@dataclass
class QaoaParams:
    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.gamma = np.mod(np.asarray(self.gamma, dtype=np.float64).reshape(-1), 2 * np.pi)
        self.beta = np.mod(np.asarray(self.beta, dtype=np.float64).reshape(-1), np.pi)
        if self.gamma.shape != self.beta.shape:
            raise ValueError("gamma and beta need one entry per layer")

    @property
    def p(self) -> int:
        return self.gamma.size

    @classmethod
    def from_vector(cls, vec) -> "QaoaParams":
        vec = np.asarray(vec, dtype=np.float64)
        half = vec.size // 2
        return cls(vec[:half], vec[half:])

    def vector(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.beta])


def cost_layer(values: np.ndarray, gamma: float, amps: np.ndarray) -> np.ndarray:
    """``U(C, gamma) = exp(-i gamma C)``, a per-amplitude phase."""
    return amps * np.exp(-1j * gamma * values)


def mixer_layer(n_qubits: int, beta: float, amps: np.ndarray) -> np.ndarray:
    """``U(B, beta) = prod_j exp(-i beta X_j)``, applied one qubit at a time."""
    c, s = math.cos(beta), -1j * math.sin(beta)
    out = amps.reshape((2,) * n_qubits)
    for axis in range(n_qubits):
        a0 = np.take(out, 0, axis=axis)
        a1 = np.take(out, 1, axis=axis)
        out = np.stack([c * a0 + s * a1, s * a0 + c * a1], axis=axis)
    return out.reshape(-1)


def qaoa_state(cost, params: QaoaParams) -> StateVector:
    n = cost.n_qubits
    amps = uniform_state(n).amplitudes
    for g, b in zip(params.gamma, params.beta):
        amps = mixer_layer(n, b, cost_layer(cost.values, g, amps))
    return StateVector(amps, check_norm=False)


def qaoa_expectation(cost, params: QaoaParams, shots: int | None = None, rng=None) -> float:
    probs = qaoa_state(cost, params).probabilities()
    if shots is None:
        return float(probs @ cost.values)
    draws = rng.choice(probs.size, size=shots, p=probs / probs.sum())
    return float(cost.values[draws].mean())


def qaoa_grid(cost, gammas, betas) -> np.ndarray:
    """``<C>`` over a p=1 grid, indexed ``[gamma, beta]``."""
    return np.array([[qaoa_expectation(cost, QaoaParams([g], [b])) for b in betas] for g in gammas])


@dataclass
class OptimizerConfig:
    method: str = "nelder-mead"        # or "gradient" (finite differences)
    restarts: int = 5
    max_evaluations: int = 2000
    patience: int = 20
    rel_tol: float = 1e-6
    shots: int | None = None
    simplex_step: float = 0.5           # initial simplex edge, in radians

    @classmethod
    def from_dict(cls, obj: dict) -> "OptimizerConfig":
        extra = set(obj) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"unknown optimizer keys {sorted(extra)}")
        return cls(**obj)


@dataclass
class OptimizeResult:
    x: np.ndarray
    value: float
    history: list[float]        # best-so-far after each evaluation
    evaluations: int
    stopped_by: str


class _Stop(Exception):
    pass


def _minimize(fun: Callable[[np.ndarray], float], starts: list[np.ndarray], config: OptimizerConfig,
              bounds=None) -> OptimizeResult:
    """Minimise with restarts; stops a run when the best value stalls for ``patience`` iterations."""
    best_x, best_val = None, math.inf
    history: list[float] = []
    total = 0
    reason = "converged"
    for x0 in starts:
        state = {"best": math.inf, "since": 0, "evals": 0, "x": x0}

        def wrapped(x):
            nonlocal best_x, best_val, total
            if state["evals"] >= config.max_evaluations:
                raise _Stop("evaluations")
            val = float(fun(x))
            state["evals"] += 1
            total += 1
            if val < best_val:
                best_val, best_x = val, np.array(x, dtype=np.float64)
            if val < state["best"]:
                state["best"], state["x"] = val, np.array(x, dtype=np.float64)
            history.append(best_val)
            return val

        iteration = {"last": math.inf, "stall": 0}

        def callback(*_args, **_kwargs):
            cur = state["best"]
            prev = iteration["last"]
            if math.isfinite(prev) and abs(prev - cur) <= config.rel_tol * max(abs(prev), 1e-12):
                iteration["stall"] += 1
            else:
                iteration["stall"] = 0
            iteration["last"] = cur
            if iteration["stall"] >= config.patience:
                raise StopIteration

        try:
            if config.method == "nelder-mead":
                simplex = np.vstack([x0, x0 + config.simplex_step * np.eye(x0.size)])
                minimize(wrapped, x0, method="Nelder-Mead", callback=callback, bounds=bounds,
                         options={"maxfev": config.max_evaluations, "xatol": 1e-10, "fatol": 1e-12,
                                  "initial_simplex": simplex})
            elif config.method == "gradient":
                minimize(wrapped, x0, method="L-BFGS-B", callback=callback, bounds=bounds,
                         options={"maxfun": config.max_evaluations})
            else:
                raise ValueError(f"unknown optimizer {config.method!r}")
        except _Stop:
            reason = "evaluation cap"
    return OptimizeResult(best_x, best_val, history, total, reason)


@dataclass
class QaoaResult:
    params: QaoaParams
    expectation: float
    history: list[float]
    best_bitstring: str
    best_cut: float
    brute_force: float
    samples: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"p": self.params.p, "gamma": self.params.gamma.tolist(),
                           "beta": self.params.beta.tolist(), "expC": self.expectation,
                           "best_bitstring": self.best_bitstring,
                           "maxcut_bruteforce": self.brute_force})


def qaoa_optimize(cost: CostHamiltonian, p: int, config: OptimizerConfig | None = None, *, rng_seed,
                  initial: QaoaParams | None = None, sample_shots: int = 256) -> QaoaResult:
    """Maximise ``<C>`` over ``(gamma, beta)`` with seeded restarts.

    ``initial`` (for example the best ``p-1`` angles padded with a zero layer)
    is tried first. The best bitstring is read from ``sample_shots`` seeded
    measurements of the optimised state.
    """
    if p < 1:
        raise ValueError("QAOA needs at least one layer")
    config = config or OptimizerConfig()
    gens = spawn(rng_seed, config.restarts + 2)
    starts = []
    if initial is not None:
        if initial.p != p:
            raise ValueError("initial parameters have the wrong depth")
        starts.append(initial.vector())
    for g in gens[: config.restarts]:
        starts.append(np.concatenate([g.uniform(0, 2 * np.pi, p), g.uniform(0, np.pi, p)]))
    shot_rng = gens[-2]

    def negative(vec):
        return -qaoa_expectation(cost, QaoaParams.from_vector(vec), config.shots, shot_rng)

    res = _minimize(negative, starts, config)
    params = QaoaParams.from_vector(res.x)
    exact = qaoa_expectation(cost, params)
    probs = qaoa_state(cost, params).probabilities()
    draws = gens[-1].choice(probs.size, size=sample_shots, p=probs / probs.sum())
    best = int(draws[np.argmax(cost.values[draws])])
    counts = {bitstring(k, cost.n_qubits): int(v) for k, v in zip(*np.unique(draws, return_counts=True))}
    return QaoaResult(params, exact, [-v for v in res.history], bitstring(best, cost.n_qubits),
                      float(cost.values[best]), cost.max_value, counts)


def qaoa_depth_sweep(cost: CostHamiltonian, depths: Sequence[int], config: OptimizerConfig | None = None,
                     *, rng_seed) -> list[QaoaResult]:
    """Optimise each depth, warm-starting from the previous optimum plus an idle layer."""
    out: list[QaoaResult] = []
    seeds = spawn(rng_seed, len(depths))
    prev = None
    for p, seed in zip(depths, seeds):
        initial = None
        if prev is not None and prev.params.p < p:
            pad = p - prev.params.p
            initial = QaoaParams(np.concatenate([prev.params.gamma, np.zeros(pad)]),
                                 np.concatenate([prev.params.beta, np.zeros(pad)]))
        prev = qaoa_optimize(cost, p, config, rng_seed=seed, initial=initial)
        out.append(prev)
    return out


# --------------------------------------------------------------- adiabatic


@dataclass
class AnnealSchedule:
    H_S: np.ndarray
    H_E: np.ndarray
    total_time: float
    ramp: Callable[[float], float] = field(default=lambda s: s)
    steps: int | None = None

    def __post_init__(self):
        self.H_S = np.asarray(self.H_S, dtype=np.complex128)
        self.H_E = np.asarray(self.H_E, dtype=np.complex128)
        for h in (self.H_S, self.H_E):
            if h.shape != self.H_S.shape or np.abs(h - h.conj().T).max() > 1e-10:
                raise ValueError("schedule Hamiltonians must be Hermitian and of equal size")
        grid = np.linspace(0, 1, 101)
        vals = np.array([self.ramp(s) for s in grid])
        if abs(vals[0]) > 1e-12 or abs(vals[-1] - 1) > 1e-12 or np.any(np.diff(vals) < -1e-12):
            raise ValueError("ramp must rise monotonically from 0 to 1")
        if self.total_time <= 0:
            raise ValueError("total time must be positive")

    def hamiltonian(self, s: float) -> np.ndarray:
        b = self.ramp(s)
        return (1 - b) * self.H_S + b * self.H_E

    def step_count(self, per_step_error: float = 1e-6) -> int:
        """Steps so that the split error ``dt^2 ||[H_S, H_E]|| / 8`` stays within budget."""
        if self.steps is not None:
            return self.steps
        comm = np.linalg.norm(self.H_S @ self.H_E - self.H_E @ self.H_S, 2)
        if comm < 1e-14:
            return max(1, math.ceil(self.total_time * 10))
        dt = math.sqrt(8 * per_step_error / comm)
        return max(1, math.ceil(self.total_time / dt))


@dataclass
class AdiabaticResult:
    state: StateVector
    fidelity: float                     # to the ground state of H_E
    trace_s: np.ndarray
    trace_fidelity: np.ndarray          # to the instantaneous ground state
    min_gap: float
    gap_collapsed: bool
    steps: int


def _ground(h: np.ndarray) -> tuple[np.ndarray, float]:
    vals, vecs = np.linalg.eigh(h)
    return vecs[:, 0], float(vals[1] - vals[0]) if vals.size > 1 else math.inf


def adiabatic_evolve(schedule: AnnealSchedule, s0: StateVector | None = None,
                     trace_points: int = 50) -> AdiabaticResult:
    """Split-step evolution under ``H(t) = (1 - beta) H_S + beta H_E`` with midpoint ``beta``."""
    g0, _ = _ground(schedule.H_S)
    if s0 is None:
        s0 = StateVector(g0)
    elif abs(abs(np.vdot(g0, s0.amplitudes)) - 1) > 1e-8:
        raise ValueError("start state is not the ground state of H_S")
    steps = schedule.step_count()
    dt = schedule.total_time / steps
    vs, vecs_s = np.linalg.eigh(schedule.H_S)
    ve, vecs_e = np.linalg.eigh(schedule.H_E)
    amps = s0.amplitudes.astype(np.complex128)
    record_at = set(np.linspace(0, steps, trace_points + 1).round().astype(int).tolist())
    trace_s, trace_f, min_gap = [], [], math.inf
    for k in range(steps + 1):
        if k in record_at:
            s = k / steps
            g, gap = _ground(schedule.hamiltonian(s))
            trace_s.append(s)
            trace_f.append(float(abs(np.vdot(g, amps)) ** 2))
            min_gap = min(min_gap, gap)
        if k == steps:
            break
        b = schedule.ramp((k + 0.5) / steps)
        amps = vecs_s @ (np.exp(-1j * (1 - b) * dt * vs) * (vecs_s.conj().T @ amps))
        amps = vecs_e @ (np.exp(-1j * b * dt * ve) * (vecs_e.conj().T @ amps))
    ge, _ = _ground(schedule.H_E)
    final = StateVector(amps, check_norm=False)
    return AdiabaticResult(final, float(abs(np.vdot(ge, amps)) ** 2), np.array(trace_s),
                           np.array(trace_f), min_gap, min_gap < 1e-6, steps)


# ------------------------------------------------------------- hybrid loop


def sampled_expectation(s: StateVector, observable: Observable, shots: int, rng) -> float:
    """Mean of ``shots`` eigenvalue readouts in the observable's eigenbasis (unbiased)."""
    if shots < 1:
        raise ValueError("need at least one shot")
    vals, vecs = observable.eigh
    probs = np.abs(vecs.conj().T @ s.amplitudes) ** 2
    draws = rng.choice(vals.size, size=shots, p=probs / probs.sum())
    return float(vals[draws].mean())


@dataclass
class HybridResult:
    theta: np.ndarray
    value: float
    trace: list[float]
    evaluations: int


def hybrid_loop(builder: Callable[[np.ndarray], StateVector], observable, theta0, *,
                mode: str = "exact", shots: int | None = None, rng_seed=None,
                config: OptimizerConfig | None = None, bounds=None) -> HybridResult:
    """Minimise ``<psi(theta)|L|psi(theta)>``; ``mode="shots"`` uses seeded measurements."""
    obs = observable if isinstance(observable, Observable) else Observable(np.asarray(observable))
    config = config or OptimizerConfig(restarts=1)
    if mode == "shots":
        if shots is None:
            raise ValueError("shots mode needs a shot count")
        rng = make_rng(rng_seed)

        def fun(theta):
            return sampled_expectation(builder(np.asarray(theta)), obs, shots, rng)
    elif mode == "exact":
        def fun(theta):
            psi = builder(np.asarray(theta)).amplitudes
            return float(np.vdot(psi, obs.matrix @ psi).real)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=np.float64))
    starts = [theta0]
    if config.restarts > 1:
        for g in spawn(0 if rng_seed is None else rng_seed, config.restarts - 1):
            starts.append(theta0 + g.normal(scale=0.5, size=theta0.shape))
    res = _minimize(fun, starts, config, bounds=bounds)
    return HybridResult(res.x, res.value, res.history, res.evaluations)
