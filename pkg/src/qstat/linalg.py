"""Phase-estimation based linear algebra.

Register layout used by the eigenvalue-rotation routines (little-endian):
system qubits ``0..n-1``, the rotation flag at qubit ``n``, and the phase
register on ``n+1..n+m``. An eigenvalue ``lam`` of ``H`` is written as the
phase ``lam / (2 * scale)`` (mod 1), where ``scale`` bounds ``|lam|``; the
phase register is decoded as a signed value so both signs are resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .fourier import iqft, power_provider, qft, signed_phase
from .gates import apply_unitary, controlled_rotation_f, embed, walsh_hadamard
from .oracles import PhaseOracle
from .rng import make_rng
from .state import DensityMatrix, StateVector, project

PHASE_SCALES = ("spectral", "one_norm")
PHASE_MARGIN = 0.125


def _hermitian(matrix) -> np.ndarray:
    h = np.asarray(matrix, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("operator must be square")
    if not np.allclose(h, h.conj().T, atol=1e-10, rtol=0):
        raise ValueError("operator is not Hermitian")
    return h


def phase_scale(h: np.ndarray, rule: str = "spectral", margin: float = PHASE_MARGIN) -> float:
    """Bound on ``|lambda|`` used to map eigenvalues into the phase window.

    ``spectral`` uses the largest singular value; ``one_norm`` uses the
    induced 1-norm (max column sum), which is cheap to bound from sparse
    access but can be twice as loose. Either bound is widened by ``margin``
    so that the extreme eigenvalues sit strictly inside ``(-1/2, 1/2)`` and
    their phase-estimation tails do not wrap onto the opposite sign.
    """
    if rule == "one_norm":
        value = float(np.abs(h).sum(axis=0).max())
    elif rule == "spectral":
        value = float(np.linalg.norm(h, 2))
    else:
        raise ValueError(f"unknown phase scale rule {rule!r}; use one of {PHASE_SCALES}")
    if value == 0:
        raise ValueError("operator is zero")
    return value * (1 + margin)


def _pad_to_qubits(h: np.ndarray) -> np.ndarray:
    dim = h.shape[0]
    target = 1 << max(0, math.ceil(math.log2(dim)))
    if target == dim:
        return h
    out = np.zeros((target, target), dtype=np.complex128)
    out[:dim, :dim] = h
    return out


@dataclass
class EigenRotationRun:
    state: StateVector            # system state after postselection
    success_probability: float    # flag = 1 and phase register back at 0
    flag_probability: float       # flag = 1 regardless of the phase register
    discarded_mass: float         # phase-register mass below the eigenvalue floor
    scale: float
    constant: float
    full_state: StateVector = field(repr=False)


def _eigen_rotation(h: np.ndarray, s: StateVector, m: int, scale: float,
                    angle_of: Callable[[float], float], floor: float) -> EigenRotationRun:
    """QPE, eigenvalue-dependent flag rotation, inverse QPE, postselection."""
    n = s.n_qubits
    if h.shape[0] != s.dim:
        raise ValueError("operator and state dimensions differ")
    system = tuple(range(n))
    flag = n
    phase = tuple(range(n + 1, n + 1 + m))
    evolution = expm(1j * math.pi * h / scale)      # eigenphase lam / (2 scale)
    power = power_provider(evolution)
    state = s.extend(StateVector.basis(m + 1, 0))
    state = walsh_hadamard(state, phase)
    for j, q in enumerate(phase):
        state = apply_unitary(state, power(1 << j), system, controls=(q,))
    state = iqft(state, phase)

    size = 1 << m
    estimates = 2 * scale * signed_phase(np.arange(size), m)   # lambda tilde per outcome
    below = np.abs(estimates) < floor * scale
    discarded = float(state.marginal(phase)[below].sum())
    table = [0.0 if below[y] else angle_of(estimates[y]) for y in range(size)]
    state = controlled_rotation_f(state, phase, flag, lambda y: table[y])

    state = qft(state, phase)
    for j in range(m - 1, -1, -1):
        state = apply_unitary(state, power(1 << j).conj().T, system, controls=(phase[j],))
    state = walsh_hadamard(state, phase)

    flag_prob = float(state.marginal((flag,))[1])
    projected, prob = project(state, (flag,) + phase, 1)
    if prob <= 1e-14:
        raise ValueError("no amplitude survives postselection")
    sys_amps = projected.reshape(-1)[np.arange(s.dim) + (1 << flag)]
    out = StateVector(sys_amps / math.sqrt(prob))
    return EigenRotationRun(out, prob, flag_prob, discarded, scale, 0.0, state)


def apply_hermitian(h, s: StateVector, m: int, constant: float | None = None,
                    scale_rule: str = "spectral", scale: float | None = None) -> EigenRotationRun:
    """Prepare a state proportional to ``H|psi>``.

    The flag is rotated by ``arcsin(lam_tilde / C)``; ``C`` defaults to the
    largest representable ``|lam_tilde|`` (the phase scale). Passing ``scale``
    fixes the eigenvalue-to-phase map explicitly (phase = lam / (2 scale)).
    """
    mat = _hermitian(h)
    if scale is None:
        scale = phase_scale(mat, scale_rule)
    c = scale if constant is None else float(constant)
    if c < scale:
        # Outcomes can decode up to |lam_tilde| = scale; keep arcsin defined.
        raise ValueError(f"C={c} is below the largest decodable eigenvalue {scale}")
    run = _eigen_rotation(mat, s, m, scale, lambda lam: math.asin(lam / c), floor=0.0)
    run.constant = c
    return run


@dataclass
class HHLResult:
    solution: np.ndarray          # normalised solution in the caller's space
    state: StateVector            # padded system state
    success_probability: float
    discarded_mass: float
    fidelity: float | None
    kappa: float
    scale: float
    constant: float


def dilate(a: np.ndarray) -> np.ndarray:
    """Hermitian dilation ``[[0, A], [A^dagger, 0]]`` of a rectangular matrix."""
    rows, cols = a.shape
    out = np.zeros((rows + cols, rows + cols), dtype=np.complex128)
    out[:rows, rows:] = a
    out[rows:, :rows] = a.conj().T
    return out


def hhl_solve(a, b, m: int = 7, kappa_target: float = 32.0, constant: float | None = None,
              scale_rule: str = "spectral", scale: float | None = None) -> HHLResult:
    """Solve ``A x = b`` (Hermitian, or general via the dilation) as a quantum state.

    Eigenvalues with ``|lam_tilde| / scale < 1/(2 kappa_target)`` are dropped.
    The flag rotation is ``arcsin(C / lam_tilde)`` with ``C`` equal to that
    floor, so the argument never exceeds one.
    """
    mat = np.asarray(a, dtype=np.complex128)
    rhs = np.asarray(b, dtype=np.complex128).reshape(-1)
    if np.linalg.norm(rhs) == 0:
        raise ValueError("right-hand side is zero")
    hermitian = mat.shape[0] == mat.shape[1] and np.allclose(mat, mat.conj().T, atol=1e-10, rtol=0)
    if hermitian:
        h = mat
        padded_rhs = rhs
        readout = slice(0, mat.shape[0])
    else:
        if mat.shape[0] != rhs.shape[0]:
            raise ValueError("A and b have incompatible shapes")
        h = dilate(mat)
        padded_rhs = np.concatenate([rhs, np.zeros(mat.shape[1], dtype=np.complex128)])
        readout = slice(mat.shape[0], mat.shape[0] + mat.shape[1])
    h = _pad_to_qubits(h)
    vec = np.zeros(h.shape[0], dtype=np.complex128)
    vec[: padded_rhs.shape[0]] = padded_rhs
    start = StateVector.from_unnormalized(vec)
    if scale is None:
        scale = phase_scale(h, scale_rule)
    floor = 1.0 / (2 * kappa_target)
    c = floor * scale if constant is None else float(constant)
    if c > floor * scale + 1e-15:
        raise ValueError("C must not exceed the eigenvalue floor")
    run = _eigen_rotation(h, start, m, scale, lambda lam: math.asin(c / lam), floor=floor)
    if run.discarded_mass > 1 - 1e-12:
        raise ValueError("all eigenvalue mass lies below the regularisation floor")
    sol = run.state.amplitudes[readout]
    norm = np.linalg.norm(sol)
    sol = sol / norm if norm > 0 else sol
    exact = np.linalg.lstsq(mat, rhs, rcond=None)[0]
    fid = float(abs(np.vdot(exact / np.linalg.norm(exact), sol)) ** 2)
    svals = np.linalg.svd(mat, compute_uv=False)
    kappa = float(svals.max() / svals[svals > 1e-12].min())
    return HHLResult(sol, run.state, run.success_probability, run.discarded_mass, fid, kappa, scale, c)


# -------------------------------------------------------------- gradient


@dataclass
class GradientGrid:
    """``dimension`` coordinates, ``bits`` qubits each, offsets ``spacing * (k - 2^bits/2)``."""

    dimension: int
    bits: int
    spacing: float
    scale: float

    @property
    def points(self) -> int:
        return 1 << self.bits

    @property
    def resolution(self) -> float:
        """Gradient units per phase-register step."""
        return 1.0 / (self.points * self.scale * self.spacing)

    def offsets(self) -> np.ndarray:
        return self.spacing * (np.arange(self.points) - self.points / 2)


@dataclass
class GradientResult:
    gradient: np.ndarray
    outcome: tuple[int, ...]
    probability: float
    oracle_calls: int


def jordan_gradient(f: Callable[[np.ndarray], float], x0, grid: GradientGrid,
                    mode: str = "exact", rng_seed=None) -> GradientResult:
    """Gradient from one phase-oracle query followed by an inverse QFT per coordinate."""
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (grid.dimension,):
        raise ValueError("x0 does not match the grid dimension")
    m, dim = grid.bits, grid.dimension
    total = m * dim
    offsets = grid.offsets()
    idx = np.arange(1 << total)
    coords = [(idx >> (m * i)) & ((1 << m) - 1) for i in range(dim)]
    points = np.stack([offsets[c] for c in coords], axis=1) + x0
    values = np.array([f(p) for p in points])
    centre = f(x0)
    del centre
    # The phase gained per grid step along each axis must stay under half a
    # turn, otherwise the inverse QFT aliases the gradient component.
    table = values.reshape((1 << m,) * dim)
    for axis in range(dim):
        step = np.abs(np.diff(table, axis=dim - 1 - axis))
        if step.size and grid.scale * step.max() >= 0.5:
            raise ValueError("scale D lets the per-step phase wrap around; reduce D or the spacing")
    oracle = PhaseOracle(2 * math.pi * grid.scale * values, total)
    state = walsh_hadamard(StateVector.basis(total), range(total))
    state = oracle.apply(state, range(total))
    for i in range(dim):
        state = iqft(state, range(m * i, m * (i + 1)))
    probs = state.probabilities()
    if mode == "exact":
        best = int(np.argmax(probs))
    else:
        best = int(make_rng(rng_seed).choice(probs.shape[0], p=probs / probs.sum()))
    outcome = tuple(int((best >> (m * i)) & ((1 << m) - 1)) for i in range(dim))
    grad = np.array([signed_phase(y, m) for y in outcome]) / (grid.scale * grid.spacing)
    return GradientResult(grad, outcome, float(probs[best]), oracle.calls)


# ------------------------------------------------------------------ QPCA


def swap_trick_step(rho: np.ndarray, sigma: np.ndarray, dt: float) -> np.ndarray:
    """``tr_1[e^{-i S dt} (rho x sigma) e^{i S dt}]`` with ``rho`` in the traced slot."""
    d = sigma.shape[0]
    swap = _swap_matrix(d)
    g = expm(-1j * dt * swap)
    joint = g @ np.kron(rho, sigma) @ g.conj().T
    return np.einsum("ijik->jk", joint.reshape(d, d, d, d))


def _swap_matrix(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            s[i * d + j, j * d + i] = 1
    return s


def simulate_density_exponential(rho, sigma, t: float, steps: int) -> np.ndarray:
    """Approximate ``e^{-i rho t} sigma e^{i rho t}`` with ``steps`` swap-trick steps."""
    r = np.asarray(rho, dtype=np.complex128)
    out = np.asarray(sigma, dtype=np.complex128)
    for _ in range(steps):
        out = swap_trick_step(r, out, t / steps)
    return out


@dataclass
class QPCAResult:
    distribution: np.ndarray               # phase-register outcome probabilities
    estimates: list[tuple[float, float]]   # (eigenvalue estimate, probability), by probability
    eigen_report: list[tuple[float, float]]  # (true eigenvalue, probe weight) for reference
    copies_used: int
    channel_error: float                   # swap-trick vs exact, per unit step, trace norm


def qpca_decode(y: int, m: int, t: float) -> float:
    """Eigenvalue for outcome ``y`` when ``U = exp(-i rho t)``."""
    return ((-y / (1 << m)) % 1.0) * 2 * math.pi / t


def qpca(rho, copies: int, m: int, probe: StateVector, t: float = math.pi,
         epsilon: float = 1e-2) -> QPCAResult:
    """Phase estimation of ``exp(-i rho t)`` realised by consuming copies of ``rho``.

    Each controlled ``U`` uses ``copies`` swap-trick steps of length
    ``t / copies``; the requirement ``copies >= t^2 / epsilon`` is enforced.
    The system starts in ``probe`` and the whole register is simulated as a
    density matrix.
    """
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)
    DensityMatrix(r)  # validates
    if copies < t * t / epsilon:
        raise ValueError(f"{copies} copies cannot reach error {epsilon} at t={t}; need {t * t / epsilon:.0f}")
    d = r.shape[0]
    if probe.dim != d:
        raise ValueError("probe dimension differs from rho")
    n = probe.n_qubits
    dt = t / copies
    total = n + m
    # Joint density over (system, phase register) with system on the low qubits.
    phase_init = np.zeros((1 << m, 1 << m), dtype=np.complex128)
    phase_init[0, 0] = 1
    sigma = np.kron(phase_init, np.outer(probe.amplitudes, probe.amplitudes.conj()))
    for q in range(n, total):
        had = embed(np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2), total, (q,))
        sigma = had @ sigma @ had.conj().T
    swap_gen = _swap_matrix(d)
    dim = 1 << total
    used = 0
    for j in range(m):
        control = n + j
        # Controlled exp(-i dt SWAP) between the system and a fresh copy of rho.
        ctrl_mask = ((np.arange(dim) >> control) & 1).astype(bool)
        step_on = expm(-1j * dt * swap_gen)
        g = _controlled_swap_step(dim, d, n, ctrl_mask, step_on)
        for _ in range(copies * (1 << j)):
            joint = g @ np.kron(r, sigma) @ g.conj().T
            sigma = np.einsum("ajak->jk", joint.reshape(d, dim, d, dim))
            used += 1
    inv_qft = qft_matrix_on(total, tuple(range(n, total))).conj().T
    sigma = inv_qft @ sigma @ inv_qft.conj().T
    diag = np.real(np.diag(sigma))
    dist = np.bincount(np.arange(dim) >> n, weights=diag, minlength=1 << m)
    order = np.argsort(-dist)
    estimates = [(qpca_decode(int(y), m, t), float(dist[y])) for y in order if dist[y] > 1e-9]
    vals, vecs = np.linalg.eigh(r)
    weights = np.abs(vecs.conj().T @ probe.amplitudes) ** 2
    exact = expm(-1j * r * dt)
    probe_rho = np.outer(probe.amplitudes, probe.amplitudes.conj())
    err = np.abs(np.linalg.eigvalsh(swap_trick_step(r, probe_rho, dt) - exact @ probe_rho @ exact.conj().T)).sum()
    return QPCAResult(dist, estimates, list(zip(vals.tolist(), weights.tolist())), used, float(err))


def _controlled_swap_step(dim: int, d: int, n: int, ctrl_mask: np.ndarray, step: np.ndarray) -> np.ndarray:
    """Matrix on (copy x joint) applying ``step`` to (copy, system) when the control is set.

    The copy occupies the most significant index block, matching ``np.kron(rho, sigma)``.
    """
    big = np.zeros((d * dim, d * dim), dtype=np.complex128)
    sys_dim = 1 << n
    rest = dim // sys_dim
    for r_idx in range(rest):
        base = r_idx * sys_dim
        on = ctrl_mask[base]
        for c_in in range(d):
            for s_in in range(sys_dim):
                col = c_in * dim + base + s_in
                if not on:
                    big[col, col] = 1
                    continue
                for c_out in range(d):
                    for s_out in range(sys_dim):
                        row = c_out * dim + base + s_out
                        big[row, col] = step[c_out * d + s_out, c_in * d + s_in]
    return big


def qft_matrix_on(total: int, register) -> np.ndarray:
    from .fourier import qft_circuit

    return qft_circuit(total, register).unitary()
