"""Experiment harness: configured runs, oracle-call accounting, scaling fits, goldens.

Every algorithm in the package is reachable through :func:`run` under a short
id (``grover``, ``qae``, ``hhl`` ...). A run validates its parameters against
the experiment's defaults, fans repetitions out over worker threads with one
child random stream each, and writes one JSON line per repetition. Lines are
serialised with sorted keys so that equal configs and seeds give equal bytes
apart from ``wall_ms`` and ``version``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy import stats
from scipy.linalg import expm

from . import amplitude, fourier, hamsim, linalg, qsp, state, variational, walks
from .gates import Circuit, ry
from .oracles import FunctionOracle
from .rng import make_rng, spawn
from .state import StateVector

CONFIG_KEYS = ("algorithm", "params", "seed", "repetitions", "out", "csv")


class ConfigError(ValueError):
    """Schema violation in an experiment config."""


class AlgorithmError(RuntimeError):
    """An algorithm raised while running a validated config."""


# ------------------------------------------------------------------ config


@dataclass
class ExperimentConfig:
    algorithm: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    repetitions: int = 1
    out: str | None = None
    csv: bool = False

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(obj) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "algorithm" not in obj:
            raise ConfigError("missing config key: algorithm")
        cfg = cls(algorithm=obj["algorithm"], params=obj.get("params", {}) or {},
                  seed=obj.get("seed", 0), repetitions=obj.get("repetitions", 1),
                  out=obj.get("out"), csv=bool(obj.get("csv", False)))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.algorithm not in EXPERIMENTS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be a JSON object")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if isinstance(self.repetitions, bool) or not isinstance(self.repetitions, int) or self.repetitions < 1:
            raise ConfigError("repetitions must be a positive integer")
        EXPERIMENTS[self.algorithm].resolve(self.params)

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "params": self.params, "seed": self.seed,
                "repetitions": self.repetitions, "out": self.out, "csv": self.csv}


@dataclass
class Measurement:
    """What one repetition of an experiment reports back to the harness."""

    estimates: dict
    exact: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    oracle_calls: int = 0


@dataclass
class RunResult:
    config: dict
    records: list[dict]
    wall_ms: float
    version: str

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.records)

    @property
    def oracle_calls(self) -> int:
        return int(sum(r["oracle_calls"] for r in self.records))

    @property
    def estimates(self) -> dict:
        return self.records[0]["estimates"]

    @property
    def exact(self) -> dict:
        return self.records[0]["exact"]

    @property
    def errors(self) -> dict:
        return self.records[0]["errors"]

    def lines(self) -> list[str]:
        out = []
        for rec in self.records:
            row = {"config": self.config, "wall_ms": self.wall_ms, "version": self.version, **rec}
            out.append(json.dumps(_plain(row), sort_keys=True))
        return out


def _plain(obj: Any) -> Any:
    """JSON-ready copy: numpy scalars and arrays become Python values, complex becomes [re, im]."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    return obj


def _error(estimate: Any, exact: Any) -> float:
    est = np.asarray(estimate, dtype=np.complex128)
    ref = np.asarray(exact, dtype=np.complex128)
    if est.shape != ref.shape:
        raise AlgorithmError(f"estimate shape {est.shape} differs from reference {ref.shape}")
    return float(np.max(np.abs(est - ref))) if est.size else 0.0


def version_stamp() -> str:
    try:
        base = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        base = "0+unknown"
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5, check=True).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{base}+g{rev}" if rev else base


# -------------------------------------------------------------- experiments


@dataclass
class Experiment:
    name: str
    defaults: dict
    body: Callable[[dict, np.random.Generator], Measurement]

    def resolve(self, params: dict) -> dict:
        unknown = sorted(set(params) - set(self.defaults))
        if unknown:
            raise ConfigError(f"unknown {self.name} params: {', '.join(unknown)}")
        return {**self.defaults, **params}


EXPERIMENTS: dict[str, Experiment] = {}


def experiment(name: str, **defaults):
    def register(fn):
        EXPERIMENTS[name] = Experiment(name, defaults, fn)
        return fn
    return register


def _matrix(params: dict, key: str) -> np.ndarray:
    """Real matrix from ``params[key]`` plus an optional ``params[key + "_imag"]``."""
    try:
        mat = np.asarray(params[key], dtype=np.float64).astype(np.complex128)
        imag = params.get(key + "_imag")
        if imag is not None:
            mat = mat + 1j * np.asarray(imag, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    return mat


def _random_state(n_qubits: int, rng) -> StateVector:
    vec = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return StateVector.from_unnormalized(vec)


def _random_hermitian(dim: int, kappa: float, rng) -> np.ndarray:
    """Hermitian matrix with spectrum spread over ``[1/kappa, 1]`` in magnitude, random signs."""
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    mags = np.concatenate([[1.0, 1.0 / kappa], rng.uniform(1.0 / kappa, 1.0, dim - 2)])
    signs = rng.choice([-1.0, 1.0], size=dim)
    return (q * (signs * mags)) @ q.conj().T


def _random_with_singular_values(dim: int, kappa: float, rng) -> np.ndarray:
    u, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    v, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    sig = np.concatenate([[1.0, 1.0 / kappa], rng.uniform(1.0 / kappa, 1.0, dim - 2)])
    return (u * sig) @ v.conj().T


def _hamiltonian(params: dict, rng) -> hamsim.HamiltonianSum:
    spec = params.get("hamiltonian")
    if spec is None:
        labels = ["XI", "ZZ", "IY"]
        return hamsim.HamiltonianSum.from_paulis([(float(rng.uniform(0.2, 1.0)), p) for p in labels])
    try:
        return hamsim.load_hamiltonian_json(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"hamiltonian: {exc}") from exc


@experiment("grover", n_qubits=6, marked=[5], iterations=None)
def _grover(p: dict, rng) -> Measurement:
    problem = amplitude.GroverProblem.from_marked(p["n_qubits"], p["marked"])
    res = amplitude.grover_search(problem, p["iterations"], rng_seed=rng)
    size, n_marked = problem.size, len(set(p["marked"]))
    closed = amplitude.grover_success_closed_form(size, n_marked, res.iterations)
    checks = {"closed_form": abs(res.success_probability - closed) <= 1e-10}
    return Measurement({"success_probability": res.success_probability, "outcome": res.outcome,
                        "iterations": res.iterations},
                       {"success_probability": closed}, checks, res.oracle_calls)


@experiment("qaa", n_qubits=3, amplitudes=None, good=[0], iterations=1)
def _qaa(p: dict, rng) -> Measurement:
    amps = np.abs(rng.normal(size=1 << p["n_qubits"])) if p["amplitudes"] is None \
        else np.asarray(p["amplitudes"], dtype=np.float64)
    amps = amps / np.linalg.norm(amps)
    prep = amplitude.unitary_with_first_column(amps)
    good = np.zeros(amps.size, dtype=bool)
    good[list(p["good"])] = True
    res = amplitude.qaa(prep, good, p["iterations"])
    p0 = float(np.sum(amps[good] ** 2))
    closed = amplitude.qaa_success_closed_form(p0, p["iterations"])
    return Measurement({"good_probability": res.good_probability, "initial_probability": p0},
                       {"good_probability": closed},
                       {"closed_form": abs(res.good_probability - closed) <= 1e-10}, res.oracle_calls)


def _amplitude_preparer(a: float) -> np.ndarray:
    return ry(2 * math.asin(math.sqrt(a)))


@experiment("qae", amplitude=None, phase_bits=6, mode="exact")
def _qae(p: dict, rng) -> Measurement:
    a = float(rng.uniform(0, 1)) if p["amplitude"] is None else float(p["amplitude"])
    est = amplitude.qae(_amplitude_preparer(a), [1], p["phase_bits"], mode=p["mode"], rng_seed=rng)
    t = 1 << p["phase_bits"]
    err = abs(est.a_hat - a)
    bound = amplitude.qae_error_bound(a, t)
    bound_sqrt = amplitude.qae_error_bound_sqrt(a, t)
    return Measurement({"a_hat": est.a_hat, "probability": est.probability, "bound": bound,
                        "bound_sqrt": bound_sqrt, "within_bound_sqrt": err <= bound_sqrt},
                       {"a_hat": a}, {"within_bound": err <= bound}, est.oracle_calls)


@experiment("mean", values=[1, 3, 0, 2, 3, 1, 2, 0], value_bits=2, phase_bits=6, denominator=None)
def _mean(p: dict, rng) -> Measurement:
    values = list(p["values"])
    n = max(1, math.ceil(math.log2(len(values))))
    if len(values) != 1 << n:
        raise ConfigError("mean: the number of values must be a power of two")
    oracle = FunctionOracle(n, p["value_bits"], values)
    res = amplitude.estimate_mean_bounded(oracle, p["phase_bits"], p["denominator"])
    bound = amplitude.qae_error_bound_sqrt(res.exact, 1 << p["phase_bits"])
    return Measurement({"mean": res.estimate, "bound_sqrt": bound}, {"mean": res.exact},
                       {"within_bound_sqrt": abs(res.estimate - res.exact) <= bound}, res.oracle_calls)


@experiment("min", n_qubits=5, values=None, budget_multiplier=1.0)
def _min(p: dict, rng) -> Measurement:
    values = rng.permutation(1 << p["n_qubits"]).astype(float) if p["values"] is None \
        else np.asarray(p["values"], dtype=np.float64)
    res = amplitude.find_minimum(values, rng_seed=rng, budget_multiplier=p["budget_multiplier"])
    return Measurement({"value": res.value, "index": res.index, "budget": res.budget},
                       {"value": float(values.min())}, {"found_minimum": res.value == values.min()},
                       res.oracle_calls)


@experiment("kth", n_qubits=4, values=None, k=3, delta=0.5)
def _kth(p: dict, rng) -> Measurement:
    values = rng.permutation(1 << p["n_qubits"]).astype(float) if p["values"] is None \
        else np.asarray(p["values"], dtype=np.float64)
    res = amplitude.kth_smallest(values, p["k"], p["delta"], rng_seed=rng)
    return Measurement({"rank": res.rank, "index": res.index, "iterations": res.iterations},
                       {"rank": p["k"]}, {"rank_window": p["k"] - p["delta"] < res.rank < p["k"] + p["delta"]},
                       res.oracle_calls)


@experiment("count", n_qubits=5, marked=[1, 4, 9], phase_bits=7)
def _count(p: dict, rng) -> Measurement:
    n = p["n_qubits"]
    table = np.zeros(1 << n, dtype=np.int64)
    table[list(p["marked"])] = 1
    res = amplitude.quantum_count(FunctionOracle(n, 1, table), p["phase_bits"])
    exact = int(table.sum())
    tol = (1 << n) * amplitude.qae_error_bound_sqrt(exact / (1 << n), 1 << p["phase_bits"])
    return Measurement({"count": res.count, "tolerance": tol}, {"count": exact},
                       {"within_bound_sqrt": abs(res.count - exact) <= tol}, res.oracle_calls)


@experiment("qmc", p=None, f=None, n_states=8, phase_bits=7, mode="exact")
def _qmc(p: dict, rng) -> Measurement:
    probs = np.full(p["n_states"], 1 / p["n_states"]) if p["p"] is None else np.asarray(p["p"], float)
    f = rng.uniform(0, 1, probs.size) if p["f"] is None else np.asarray(p["f"], float)
    res = amplitude.quantum_monte_carlo(probs, f, p["phase_bits"], mode=p["mode"], rng_seed=rng)
    bound = amplitude.qae_error_bound_sqrt(res.exact, 1 << p["phase_bits"])
    return Measurement({"mean": res.estimate, "bound_sqrt": bound}, {"mean": res.exact},
                       {"within_bound_sqrt": abs(res.estimate - res.exact) <= bound}, res.oracle_calls)


@experiment("swap", n_qubits=2, shots=None)
def _swap(p: dict, rng) -> Measurement:
    a, b = _random_state(p["n_qubits"], rng), _random_state(p["n_qubits"], rng)
    overlap_sq = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    law = (1 + overlap_sq) / 2
    res = amplitude.swap_test(a, b, shots=p["shots"], rng_seed=rng)
    if p["shots"] is None:
        check = abs(res.p_zero - law) <= 1e-12
        calls = 1
    else:
        sigma = math.sqrt(law * (1 - law) / p["shots"])
        check = abs(res.p_zero - law) <= 4 * sigma
        calls = p["shots"]
    return Measurement({"p_zero": res.p_zero, "overlap": res.overlap}, {"p_zero": law},
                       {"probability_law": check}, calls)


@experiment("qft", n_qubits=4)
def _qft(p: dict, rng) -> Measurement:
    s = _random_state(p["n_qubits"], rng)
    out = fourier.qft(s).amplitudes
    ref = np.sqrt(s.dim) * np.fft.ifft(s.amplitudes)
    return Measurement({"max_abs_deviation": float(np.max(np.abs(out - ref)))},
                       {"max_abs_deviation": 0.0}, {"matches_inverse_fft": np.allclose(out, ref, atol=1e-12)})


@experiment("qpe", phase=None, phase_bits=6)
def _qpe(p: dict, rng) -> Measurement:
    theta = float(rng.uniform(0, 1)) if p["phase"] is None else float(p["phase"]) % 1.0
    m = p["phase_bits"]
    unitary = np.diag([1.0, np.exp(2j * math.pi * theta)])
    res = fourier.qpe(unitary, StateVector.basis(1, 1), m)
    size = 1 << m
    nearest = int(round(theta * size)) % size
    prob = float(res.distribution[nearest])
    on_grid = abs(theta * size - round(theta * size)) < 1e-12
    floor = 1 - 1e-10 if on_grid else 4 / math.pi ** 2
    return Measurement({"phase": res.phase, "nearest_probability": prob},
                       {"phase": nearest / size}, {"nearest_probability_floor": prob >= floor},
                       res.oracle_calls)


@experiment("hhl", A=None, A_imag=None, b=None, b_imag=None, dim=4, kappa=4.0, phase_bits=7,
            scale_rule="spectral")
def _hhl(p: dict, rng) -> Measurement:
    mat = _random_hermitian(p["dim"], p["kappa"], rng) if p["A"] is None else _matrix(p, "A")
    rhs = _random_state(max(1, math.ceil(math.log2(mat.shape[0]))), rng).amplitudes[: mat.shape[0]] \
        if p["b"] is None else _matrix(p, "b").reshape(-1)
    res = linalg.hhl_solve(mat, rhs, m=p["phase_bits"], scale_rule=p["scale_rule"])
    hermitian = mat.shape[0] == mat.shape[1] and np.allclose(mat, mat.conj().T)
    floor = 0.999 if hermitian else 0.99
    return Measurement({"fidelity": res.fidelity, "success_probability": res.success_probability,
                        "kappa": res.kappa}, {"fidelity": 1.0},
                       {"fidelity_floor": res.fidelity >= floor}, (1 << p["phase_bits"]) - 1)


@experiment("gradient", coefficients=[0.25, -0.125], x0=[0.0, 0.0], bits=6, spacing=0.01,
            resolution=1 / 64)
def _gradient(p: dict, rng) -> Measurement:
    coeffs = np.asarray(p["coefficients"], dtype=np.float64)
    grid_points = 1 << p["bits"]
    scale = 1.0 / (grid_points * p["spacing"] * p["resolution"])
    grid = linalg.GradientGrid(coeffs.size, p["bits"], p["spacing"], scale)
    res = linalg.jordan_gradient(lambda x: float(coeffs @ x), p["x0"], grid)
    return Measurement({"gradient": res.gradient, "probability": res.probability},
                       {"gradient": coeffs},
                       {"within_half_step": np.max(np.abs(res.gradient - coeffs)) <= grid.resolution / 2},
                       res.oracle_calls)


@experiment("qpca", rho=None, rho_imag=None, phase_bits=3, t=2 * math.pi, epsilon=0.01, copies=None)
def _qpca(p: dict, rng) -> Measurement:
    if p["rho"] is None:
        q, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        rho = (q * np.array([0.25, 0.75])) @ q.conj().T
    else:
        rho = _matrix(p, "rho")
    t = float(p["t"])
    copies = p["copies"] or math.ceil(t * t / p["epsilon"])
    probe = StateVector.from_unnormalized(np.ones(rho.shape[0]))
    res = linalg.qpca(rho, copies, p["phase_bits"], probe, t=t, epsilon=p["epsilon"])
    truth = np.sort(np.linalg.eigvalsh(rho))
    top = np.sort([v for v, _ in res.estimates[: truth.size]])
    step = 2 * math.pi / (t * (1 << p["phase_bits"]))
    gaps = [min(abs(v - truth)) for v in top]
    return Measurement({"eigenvalues": top, "copies_used": res.copies_used}, {"eigenvalues": truth},
                       {"within_one_grid_step": max(gaps) <= step + 1e-9}, res.copies_used)


@experiment("coinwalk", n_vertices=4, steps=16)
def _coinwalk(p: dict, rng) -> Measurement:
    nb = walks.cycle_graph(p["n_vertices"])
    start = walks.walk_start(p["n_vertices"], 2)
    raw = walks.coin_walk_distributions(nb, walks.HADAMARD_COIN, start, p["steps"])
    cesaro = walks.coin_walk_cesaro(nb, walks.HADAMARD_COIN, start, p["steps"])
    u = walks.walk_unitary(nb, walks.HADAMARD_COIN)
    vec, acc = start.amplitudes.copy(), np.zeros(p["n_vertices"])
    dim = u.shape[0] // 2
    for _ in range(p["steps"]):
        vec = u @ vec
        acc += (np.abs(vec.reshape(2, dim)) ** 2).sum(axis=0)[: p["n_vertices"]]
    swing = float(np.max(np.ptp(raw[len(raw) // 2:], axis=0)))
    return Measurement({"cesaro": cesaro, "raw_swing": swing}, {"cesaro": acc / p["steps"]},
                       {"cesaro_matches_dense": np.allclose(cesaro, acc / p["steps"], atol=1e-12)},
                       p["steps"])


def _chain(p: dict, rng) -> walks.MarkovChainSpec:
    if p["P"] is not None:
        return walks.MarkovChainSpec(np.asarray(p["P"], dtype=np.float64), reversible=True)
    pi = rng.uniform(0.2, 1.0, p["n_states"])
    return walks.MarkovChainSpec(walks.metropolis_chain(pi / pi.sum(), laziness=0.25), reversible=True)


@experiment("szegedy", P=None, n_states=4)
def _szegedy(p: dict, rng) -> Measurement:
    op = walks.build_szegedy(_chain(p, rng))
    lifted = op.lifted_stationary
    residual = float(np.linalg.norm(op.W @ lifted - lifted))
    return Measurement({"stationarity_residual": residual, "phase_gap": walks.walk_eigenphase_gap(op)},
                       {"stationarity_residual": 0.0}, {"stationary": residual <= 1e-10}, 1)


@experiment("qmcmc", energies=None, n_states=8, temperatures=[8.0, 4.0, 2.0, 1.0], epsilon=0.01,
            overlap_floor=0.5, laziness=0.5)
def _qmcmc(p: dict, rng) -> Measurement:
    energies = rng.uniform(0, 3, p["n_states"]) if p["energies"] is None else p["energies"]
    chains = walks.tempered_chains(energies, p["temperatures"], laziness=p["laziness"])
    res = walks.qmcmc_prepare(chains, p["overlap_floor"], p["epsilon"])
    return Measurement({"fidelity": res.fidelity, "stage_fidelities": res.stage_fidelities},
                       {"fidelity": 1.0}, {"fidelity_floor": res.fidelity >= 1 - p["epsilon"]},
                       res.walk_steps)


def _trotter_bound(h: hamsim.HamiltonianSum, t: float, r: int) -> float:
    total = 0.0
    for i, (a, x) in enumerate(h.terms):
        for b, y in h.terms[i + 1:]:
            total += abs(a * b) * np.linalg.norm(x @ y - y @ x, 2)
    return t * t / (2 * r) * total


@experiment("trotter", hamiltonian=None, t=1.0, steps=16)
def _trotter(p: dict, rng) -> Measurement:
    h = _hamiltonian(p, rng)
    approx = hamsim.trotter_unitary(h, p["t"], p["steps"])
    err = float(np.linalg.norm(approx - expm(-1j * h.matrix() * p["t"]), 2))
    bound = _trotter_bound(h, p["t"], p["steps"])
    return Measurement({"operator_error": err, "bound": bound}, {}, {"within_first_order_bound": err <= bound},
                       p["steps"] * len(h.terms))


def _evolution_check(h: hamsim.HamiltonianSum, t: float, out: StateVector, start: StateVector) -> float:
    exact = expm(-1j * h.matrix() * t) @ start.amplitudes
    return float(abs(np.vdot(exact, out.amplitudes)) ** 2)


@experiment("lcu", hamiltonian=None, t=1.0, truncation=None, segments=None)
def _lcu(p: dict, rng) -> Measurement:
    h = _hamiltonian(p, rng)
    start = _random_state(int(math.log2(h.matrix().shape[0])), rng)
    res = hamsim.lcu_evolve(h, p["t"], p["truncation"], start, segments=p["segments"])
    fid = _evolution_check(h, p["t"], res.state, start)
    return Measurement({"fidelity": fid, "segments": res.segments, "truncation": res.truncation,
                        "success_probability": res.success_probability}, {"fidelity": 1.0},
                       {"fidelity_floor": fid >= 1 - 1e-8}, res.segments * res.truncation)


@experiment("qubitize", H=None, H_imag=None, dim=4, t=None, k_max=None)
def _qubitize(p: dict, rng) -> Measurement:
    if p["H"] is None:
        x = rng.normal(size=(p["dim"], p["dim"])) + 1j * rng.normal(size=(p["dim"], p["dim"]))
        mat = (x + x.conj().T) / 2
    else:
        mat = _matrix(p, "H")
    walk = hamsim.build_qubitization(mat)
    err = walk.eigenphase_report()
    est = {"eigenphase_error": err, "norm_one": walk.norm_one}
    checks = {"eigenphase_relation": err <= 1e-9}
    calls = 1
    if p["t"] is not None:
        start = _random_state(int(math.log2(walk.system_dim)), rng)
        k = p["k_max"] or hamsim.qw_truncation(p["t"] * walk.norm_one, 1e-10)
        evo = hamsim.qw_lcu_evolve(walk, p["t"], k, start)
        exact = expm(-1j * mat * p["t"]) @ start.amplitudes
        est["fidelity"] = float(abs(np.vdot(exact, evo.state.amplitudes)) ** 2)
        checks["fidelity_floor"] = est["fidelity"] >= 1 - 1e-8
        calls = 2 * k
    return Measurement(est, {"eigenphase_error": 0.0}, checks, calls)


@experiment("qsp", phases=None, target=[0.0, 0.0, 1.0], basis="chebyshev", tol=1e-6, grid_points=1001)
def _qsp(p: dict, rng) -> Measurement:
    from numpy.polynomial import chebyshev as C

    if p["phases"] is None:
        seq = qsp.solve_phases(np.asarray(p["target"], float), basis=p["basis"], tol=p["tol"])
        phases = seq.phases
    else:
        phases = np.asarray(p["phases"], dtype=np.float64)
    xs = np.linspace(-1, 1, p["grid_points"])
    values, _ = qsp.qsp_values(phases, xs)
    coeffs = np.asarray(p["target"], float)
    target = C.chebval(xs, coeffs) if p["basis"] == "chebyshev" else np.polyval(coeffs[::-1], xs)
    err = float(np.max(np.abs(values.real - target)))
    return Measurement({"sup_error": err, "phases": phases, "degree": phases.size - 1},
                       {"sup_error": 0.0}, {"within_tol": err <= p["tol"]}, phases.size - 1)


@experiment("qsvt", A=None, A_imag=None, dim=4, phases=None, target=[0.0, 0.0, 0.0, 0.5])
def _qsvt(p: dict, rng) -> Measurement:
    from numpy.polynomial import chebyshev as C

    mat = 0.9 * _random_with_singular_values(p["dim"], 4.0, rng) if p["A"] is None else _matrix(p, "A")
    coeffs = np.asarray(p["target"], dtype=np.float64)
    if p["phases"] is None:
        phases = qsp.solve_phases(coeffs, tol=1e-10).phases
    else:
        phases = np.asarray(p["phases"], dtype=np.float64)
    start = _random_state(int(math.log2(mat.shape[0])), rng)
    res = qsp.qsvt_apply(mat, phases, start, real_part=True)
    side = "wv" if (phases.size - 1) % 2 else "vv"
    ref = qsp.svt_oracle(mat, lambda x: C.chebval(x, coeffs), side) @ start.amplitudes
    err = float(np.max(np.abs(res.unnormalized - ref)))
    return Measurement({"max_abs_deviation": err, "success_probability": res.success_probability},
                       {"max_abs_deviation": 0.0}, {"matches_svd": err <= 1e-8}, phases.size - 1)


@experiment("invert", A=None, A_imag=None, dim=4, kappa=4.0, epsilon=1e-3, b=None, b_imag=None)
def _invert(p: dict, rng) -> Measurement:
    mat = _random_with_singular_values(p["dim"], p["kappa"], rng) if p["A"] is None else _matrix(p, "A")
    n = int(math.log2(mat.shape[0]))
    b = _random_state(n, rng) if p["b"] is None else StateVector.from_unnormalized(_matrix(p, "b").reshape(-1))
    res = qsp.qsvt_invert(mat, p["kappa"], p["epsilon"], b)
    return Measurement({"fidelity": res.fidelity, "degree": res.degree, "success_probability":
                        res.success_probability}, {"fidelity": 1.0},
                       {"fidelity_floor": res.fidelity >= 1 - p["epsilon"]}, res.degree)


@experiment("fixedpoint", n_qubits=6, marked=[3], delta=0.1, budget=None)
def _fixedpoint(p: dict, rng) -> Measurement:
    size = 1 << p["n_qubits"]
    c = math.sqrt(len(set(p["marked"])) / size)
    budget = p["budget"] or qsp.fixed_point_min_queries(c, p["delta"])
    start = state.uniform_state(p["n_qubits"])
    res = qsp.fixed_point_search(start, list(p["marked"]), p["delta"], budget, c)
    err = 1 - res.success_probability
    return Measurement({"error": err, "queries": res.queries, "bound": res.bound}, {},
                       {"error_at_most_delta_squared": err <= p["delta"] ** 2 + 1e-12}, res.queries)


@experiment("qaoa", edges=[[0, 1], [1, 2], [0, 2]], n_qubits=None, p=1, optimizer={})
def _qaoa(p: dict, rng) -> Measurement:
    cost = variational.CostHamiltonian.maxcut(p["edges"], p["n_qubits"])
    try:
        config = variational.OptimizerConfig.from_dict(p["optimizer"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res = variational.qaoa_optimize(cost, p["p"], config, rng_seed=rng)
    return Measurement({"expC": res.expectation, "gamma": res.params.gamma, "beta": res.params.beta,
                        "best_bitstring": res.best_bitstring, "best_cut": res.best_cut},
                       {"best_cut": res.brute_force},
                       {"expectation_below_optimum": res.expectation <= res.brute_force + 1e-9,
                        "best_sample_optimal": res.best_cut == res.brute_force},
                       len(res.history))


@experiment("adiabatic", n_qubits=2, H_E=None, H_E_imag=None, total_time=50.0, min_fidelity=0.99)
def _adiabatic(p: dict, rng) -> Measurement:
    n = p["n_qubits"]
    dim = 1 << n
    driver = np.zeros((dim, dim), dtype=np.complex128)
    for q in range(n):
        driver -= hamsim.pauli_matrix("I" * (n - 1 - q) + "X" + "I" * q)
    if p["H_E"] is None:
        target = np.diag(rng.permutation(dim).astype(float)).astype(np.complex128)
    else:
        target = _matrix(p, "H_E")
    res = variational.adiabatic_evolve(variational.AnnealSchedule(driver, target, p["total_time"]))
    return Measurement({"fidelity": res.fidelity, "min_gap": res.min_gap, "steps": res.steps},
                       {"fidelity": 1.0}, {"fidelity_floor": res.fidelity >= p["min_fidelity"]}, res.steps)


@experiment("scaling", study="grover", grid=None, trials=400)
def _scaling(p: dict, rng) -> Measurement:
    res = scaling_study(p["study"], p["grid"], rng, trials=p["trials"])
    low, high = EXPONENT_WINDOWS[p["study"]]
    return Measurement({"exponent": res.exponent, "ci_low": res.ci_low, "ci_high": res.ci_high,
                        "table": res.rows}, {},
                       {"exponent_in_window": low <= res.exponent <= high},
                       int(sum(r["calls"] for r in res.rows)))


@experiment("golden", suite="bell", golden_dir=None, capture=False, suite_seed=None)
def _golden(p: dict, rng) -> Measurement:
    seed = p["suite_seed"]
    if p["capture"]:
        paths = capture_golden(p["suite"], seed=seed or 0, golden_dir=p["golden_dir"])
        return Measurement({"captured": [str(x) for x in paths]}, {}, {"captured": True})
    report = golden_check(p["suite"], seed=seed, golden_dir=p["golden_dir"])
    return Measurement({"diff": report.diff, "warnings": report.warnings}, {},
                       {"bitwise_match": report.passed})


# --------------------------------------------------------------------- run


def _one(exp: Experiment, params: dict, rng, index: int) -> dict:
    try:
        meas = exp.body(params, rng)
    except (ConfigError, FileNotFoundError):
        raise
    except Exception as exc:
        raise AlgorithmError(f"{exp.name} repetition {index}: {type(exc).__name__}: {exc}") from exc
    errors = {k: _error(meas.estimates[k], v) for k, v in meas.exact.items() if k in meas.estimates}
    return {"repetition": index, "estimates": meas.estimates, "exact": meas.exact, "errors": errors,
            "checks": {k: bool(v) for k, v in meas.checks.items()},
            "passed": all(bool(v) for v in meas.checks.values()), "oracle_calls": int(meas.oracle_calls)}


def run(config: ExperimentConfig | dict, workers: int | None = None) -> RunResult:
    """Run every repetition, write ``<out>/<algorithm>.jsonl`` (and ``.csv`` if asked)."""
    cfg = ExperimentConfig.from_dict(config) if isinstance(config, dict) else config
    cfg.validate()
    exp = EXPERIMENTS[cfg.algorithm]
    params = exp.resolve(cfg.params)
    streams = spawn(cfg.seed, cfg.repetitions)
    started = time.perf_counter()
    workers = workers or min(cfg.repetitions, os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_one, exp, params, rng, i) for i, rng in enumerate(streams)]
            records = [f.result() for f in futures]
    else:
        records = [_one(exp, params, rng, i) for i, rng in enumerate(streams)]
    wall_ms = (time.perf_counter() - started) * 1e3
    result = RunResult(_plain(cfg.to_dict()), _plain(records), round(wall_ms, 3), version_stamp())
    if cfg.out:
        write_outputs(result, Path(cfg.out), cfg.algorithm, cfg.csv)
    return result


def write_outputs(result: RunResult, out: Path, name: str, with_csv: bool = False) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.jsonl").write_text("".join(line + "\n" for line in result.lines()))
    if not with_csv:
        return
    columns = sorted({k for r in result.records for k, v in r["estimates"].items() if _is_scalar(v)})
    with open(out / f"{name}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repetition", "passed", "oracle_calls", *columns])
        for r in result.records:
            writer.writerow([r["repetition"], r["passed"], r["oracle_calls"],
                             *[r["estimates"].get(c, "") for c in columns]])


def _is_scalar(v) -> bool:
    return isinstance(v, (int, float, str, bool))


# ------------------------------------------------------------ scaling fits


EXPONENT_WINDOWS = {
    "grover": (0.45, 0.55),
    "classical": (0.95, 1.05),
    "qmc_quantum": (-1.25, -0.75),
    "qmc_classical": (-2.25, -1.75),
}

DEFAULT_GRIDS = {
    "grover": [1 << k for k in range(4, 11)],
    "classical": [1 << k for k in range(4, 11)],
    "qmc_quantum": list(range(3, 11)),
    "qmc_classical": [1 << k for k in range(4, 13)],
}

CONFIDENCE_LEVEL = 8 / math.pi ** 2   # error quantile used by both QMC sweeps


@dataclass
class ScalingStudy:
    study: str
    exponent: float
    stderr: float
    ci_low: float
    ci_high: float
    rows: list[dict]
    x_key: str


def fit_power_law(x, y, confidence: float = 0.95) -> tuple[float, float, float, float]:
    """Slope of ``log y`` against ``log x`` with its standard error and t-interval."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if lx.size < 4:
        raise ValueError("a scaling fit needs at least 4 grid points")
    if np.ptp(lx) == 0:
        raise ValueError("degenerate grid: all x values are equal")
    fit = stats.linregress(lx, ly)
    half = stats.t.ppf(0.5 + confidence / 2, lx.size - 2) * fit.stderr
    return float(fit.slope), float(fit.stderr), float(fit.slope - half), float(fit.slope + half)


def qmc_instance(n_states: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Fixed (p, f) pair shared by the paired quantum and classical sweeps."""
    rng = make_rng(20240601)
    p = rng.uniform(0.5, 1.5, n_states)
    return p / p.sum(), rng.uniform(0.1, 0.9, n_states)


def dithered_qae_errors(p, f, m: int, dithers: int = 16) -> tuple[np.ndarray, np.ndarray, int]:
    """Error of every QAE outcome, with weights, under a uniform phase dither.

    Phase estimation runs on ``e^{2 pi i u / M} Q`` and the estimate is
    decoded as ``sin^2(pi (y - u) / M)``. Both eigenphases of ``Q`` shift by
    the same ``u``, so the decoding is exact for either branch. Averaging
    ``u`` over one grid cell (midpoint rule with ``dithers`` nodes) removes the
    dependence of the error on where the true amplitude falls between grid
    points, which otherwise makes the error jump from one ``m`` to the next.
    The call count is that of a single QAE run.
    """
    full, mask = amplitude.monte_carlo_preparer(p, f)
    q = amplitude.amplification_operator(full, mask)
    start = StateVector(full[:, 0], check_norm=False)
    mu = float(np.dot(p, f))
    size = 1 << m
    y = np.arange(size)
    errs, weights = [], []
    for k in range(dithers):
        u = (k + 0.5) / dithers
        res = fourier.qpe(np.exp(2j * math.pi * u / size) * q, start, m)
        errs.append(np.abs(np.sin(np.pi * (y - u) / size) ** 2 - mu))
        weights.append(res.distribution / dithers)
    return np.concatenate(errs), np.concatenate(weights), 2 * (size - 1) + 1


def _quantile_error(errors: np.ndarray, weights: np.ndarray, level: float) -> float:
    order = np.argsort(errors)
    cum = np.cumsum(weights[order])
    return float(errors[order][np.searchsorted(cum, level * cum[-1] - 1e-15)])


def scaling_study(study: str, grid=None, seed=0, trials: int = 400, out: str | Path | None = None) -> ScalingStudy:
    """Oracle calls against problem size (search) or target error (Monte Carlo), fitted in log-log.

    ``grover`` and ``classical`` use ``grid`` as list sizes ``N`` with one
    marked item; the quantum count is the iteration count actually run and
    the classical count is the mean over ``trials`` seeded random-order
    scans. ``qmc_quantum`` uses ``grid`` as phase-bit counts and reads the
    error at the ``8/pi^2`` quantile off the exact outcome distribution.
    ``qmc_classical`` uses ``grid`` as sample counts and takes the same
    quantile over ``trials`` seeded estimates. The Monte Carlo fits regress
    calls on error, so the expected exponents are -1 and -2.
    """
    if study not in EXPONENT_WINDOWS:
        raise ConfigError(f"unknown scaling study {study!r}; choose from {sorted(EXPONENT_WINDOWS)}")
    grid = list(DEFAULT_GRIDS[study] if grid is None else grid)
    if len(grid) < 4:
        raise ValueError("a scaling study needs at least 4 grid points")
    if len(set(grid)) < len(grid):
        raise ValueError("degenerate grid: repeated points")
    rng = make_rng(seed)
    rows: list[dict] = []
    if study in ("grover", "classical"):
        for size in grid:
            n = int(round(math.log2(size)))
            if 1 << n != size:
                raise ValueError("search sizes must be powers of two")
            target = int(rng.integers(size))
            if study == "grover":
                res = amplitude.grover_search(amplitude.GroverProblem.from_marked(n, [target]), rng_seed=rng)
                rows.append({"N": size, "calls": res.oracle_calls, "success": res.success_probability})
            else:
                table = np.zeros(size, dtype=np.int64)
                table[target] = 1
                oracle = FunctionOracle(n, 1, table)
                calls = [amplitude.classical_search(oracle, rng_seed=child)[1] for child in spawn(rng, trials)]
                rows.append({"N": size, "calls": float(np.mean(calls))})
        slope, se, low, high = fit_power_law([r["N"] for r in rows], [r["calls"] for r in rows])
        x_key = "N"
    else:
        p, f = qmc_instance()
        mu = float(p @ f)
        for point in grid:
            if study == "qmc_quantum":
                errs, weights, calls = dithered_qae_errors(p, f, int(point))
                eps = _quantile_error(errs, weights, CONFIDENCE_LEVEL)
                rows.append({"phase_bits": int(point), "epsilon": eps, "calls": calls})
            else:
                draws = [amplitude.classical_monte_carlo(p, f, int(point), rng_seed=child)
                         for child in spawn(rng, trials)]
                errs = np.abs(np.asarray(draws) - mu)
                eps = _quantile_error(errs, np.ones(errs.size), CONFIDENCE_LEVEL)
                rows.append({"samples": int(point), "epsilon": eps, "calls": int(point)})
        slope, se, low, high = fit_power_law([r["epsilon"] for r in rows], [r["calls"] for r in rows])
        x_key = "epsilon"
    result = ScalingStudy(study, slope, se, low, high, rows, x_key)
    if out is not None:
        write_scaling_csv(result, Path(out))
    return result


def write_scaling_csv(result: ScalingStudy, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"scaling_{result.study}.csv"
    keys = list(result.rows[0])
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(result.rows)
    return path


# ----------------------------------------------------------------- goldens


GOLDEN_DIR = Path(__file__).parent / "goldens"


def _bell(seed) -> StateVector:
    circ = Circuit(2)
    circ.add("H", 0)
    circ.add("CNOT", 1, controls=0)
    return circ.run(StateVector.basis(2))


def _qft3(seed) -> StateVector:
    return fourier.qft(StateVector.basis(3, 5))


def _random4(seed) -> StateVector:
    rng = make_rng(seed)
    circ = Circuit(4)
    for layer in range(3):
        for q in range(4):
            circ.add("Ry", q, params=float(rng.uniform(0, 2 * math.pi)))
            circ.add("Rz", q, params=float(rng.uniform(0, 2 * math.pi)))
        for q in range(layer % 2, 3, 2):
            circ.add("CNOT", q + 1, controls=q)
    return circ.run(StateVector.basis(4))


GOLDEN_SUITES: dict[str, Callable[[int], StateVector]] = {
    "bell": _bell,
    "qft3": _qft3,
    "random4": _random4,
}


@dataclass
class GoldenReport:
    suite: str
    passed: bool
    diff: list[str]
    warnings: list[str]


def _golden_paths(suite: str, golden_dir) -> tuple[Path, Path]:
    base = Path(golden_dir) if golden_dir else GOLDEN_DIR
    return base / f"{suite}.qsv", base / f"{suite}.json"


def _suite(suite: str) -> Callable[[int], StateVector]:
    if suite not in GOLDEN_SUITES:
        raise ConfigError(f"unknown golden suite {suite!r}; choose from {sorted(GOLDEN_SUITES)}")
    return GOLDEN_SUITES[suite]


def capture_golden(suite: str, seed: int = 0, golden_dir=None) -> tuple[Path, Path]:
    blob = state.dump_state(_suite(suite)(seed))
    dump, meta = _golden_paths(suite, golden_dir)
    dump.parent.mkdir(parents=True, exist_ok=True)
    dump.write_bytes(blob)
    meta.write_text(json.dumps({"suite": suite, "seed": seed, "version": version_stamp().split("+")[0],
                                "sha256": hashlib.sha256(blob).hexdigest()}, indent=2, sort_keys=True) + "\n")
    return dump, meta


def golden_check(suite: str, seed: int | None = None, golden_dir=None) -> GoldenReport:
    """Rebuild a suite's state and compare its dump byte for byte with the stored golden.

    ``seed`` defaults to the seed recorded at capture time; passing another
    one rebuilds the suite under that seed. A version difference between the
    capture and this build is reported as a warning only.
    """
    build = _suite(suite)
    dump, meta_path = _golden_paths(suite, golden_dir)
    if not dump.exists() or not meta_path.exists():
        raise FileNotFoundError(f"missing golden files for suite {suite!r} under {dump.parent}")
    meta = json.loads(meta_path.read_text())
    expected = dump.read_bytes()
    use_seed = meta.get("seed", 0) if seed is None else seed
    got = state.dump_state(build(use_seed))
    warnings = []
    here = version_stamp().split("+")[0]
    if meta.get("version") != here:
        warnings.append(f"golden captured with version {meta.get('version')}, running {here}")
    if got == expected:
        return GoldenReport(suite, True, [], warnings)
    return GoldenReport(suite, False, _dump_diff(expected, got, use_seed, meta.get("seed")), warnings)


def _dump_diff(expected: bytes, got: bytes, seed, golden_seed, limit: int = 8) -> list[str]:
    lines = []
    if seed != golden_seed:
        lines.append(f"seed {seed} differs from the capture seed {golden_seed}")
    if expected[:16] != got[:16]:
        lines.append("header differs (qubit count or format)")
        return lines
    old = state.load_state(expected).amplitudes
    new = state.load_state(got).amplitudes
    # Compare bit patterns so that -0.0 against 0.0 and NaN payloads count as differences.
    old_bits = np.ascontiguousarray(old).view(np.uint64).reshape(-1, 2)
    new_bits = np.ascontiguousarray(new).view(np.uint64).reshape(-1, 2)
    bad = np.nonzero(np.any(old_bits != new_bits, axis=1))[0]
    width = max(1, int(math.log2(old.size)))
    lines.append(f"{bad.size} of {old.size} amplitudes differ")
    for i in bad[:limit]:
        lines.append(f"  |{i:0{width}b}>: golden {old[i]:.17g}  got {new[i]:.17g}  (delta {abs(old[i] - new[i]):.3g})")
    if bad.size > limit:
        lines.append(f"  ... {bad.size - limit} more")
    return lines
