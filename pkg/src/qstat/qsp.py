"""Quantum signal processing, eigenvalue and singular value transformation.

Single-qubit convention: ``W(x) = exp(i X arccos x)`` and ``S(phi) = exp(i phi Z)``,
with ``U(x) = S(phi_0) W(x) S(phi_1) ... W(x) S(phi_d)`` and ``P(x) = <0|U|0>``.
All phases zero gives the Chebyshev polynomial ``T_d``.

Block encodings keep the auxiliary qubit above the system register, so the
encoded operator is the top-left block of the dense unitary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import least_squares
from scipy.special import jv
from scipy.stats import binom

from .state import StateVector

# ------------------------------------------------------------ scalar QSP


@dataclass
class PhaseSequence:
    phases: np.ndarray
    target: str = ""
    method: str = "given"
    residual: float = 0.0

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=np.float64).reshape(-1)
        if self.phases.size == 0:
            raise ValueError("a phase sequence needs at least one phase")

    @property
    def degree(self) -> int:
        return self.phases.size - 1

    @property
    def parity(self) -> int:
        return self.degree % 2

    def to_json(self) -> str:
        return json.dumps({"phases": [float(p) for p in self.phases], "degree": self.degree,
                           "parity": self.parity, "target": self.target})

    @classmethod
    def from_json(cls, text: str) -> "PhaseSequence":
        obj = json.loads(text)
        if isinstance(obj, list):
            return cls(np.array(obj, dtype=np.float64))
        extra = set(obj) - {"phases", "degree", "parity", "target"}
        if extra:
            raise ValueError(f"unknown phase-sequence keys {sorted(extra)}")
        seq = cls(np.array(obj["phases"], dtype=np.float64), str(obj.get("target", "")))
        if "degree" in obj and obj["degree"] != seq.degree:
            raise ValueError("degree does not match the number of phases")
        return seq


def _phases_of(phases) -> np.ndarray:
    return phases.phases if isinstance(phases, PhaseSequence) else np.asarray(phases, dtype=np.float64)


def signal_unitary(x: float) -> np.ndarray:
    r = math.sqrt(max(0.0, 1 - x * x))
    return np.array([[x, 1j * r], [1j * r, x]])


def _rotation(phi: float) -> np.ndarray:
    return np.diag([np.exp(1j * phi), np.exp(-1j * phi)])


def qsp_evaluate(phases, x: float, signal_basis: str = "0") -> tuple[np.ndarray, complex]:
    """``U_phi(x)`` and its readout: ``<0|U|0>`` or, with ``signal_basis="+"``, ``<+|U|+>``."""
    if abs(x) > 1 + 1e-12:
        raise ValueError("signal must lie in [-1, 1]")
    phi = _phases_of(phases)
    w = signal_unitary(float(np.clip(x, -1, 1)))
    u = _rotation(phi[0])
    for p in phi[1:]:
        u = u @ w @ _rotation(p)
    if signal_basis == "0":
        return u, complex(u[0, 0])
    if signal_basis == "+":
        plus = np.array([1, 1]) / math.sqrt(2)
        return u, complex(plus @ u @ plus)
    raise ValueError("signal basis must be '0' or '+'")


def qsp_values(phases, xs) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``P(x)`` and ``Q(x)`` over a grid (``Q`` is undefined at ``|x| = 1``)."""
    phi = _phases_of(phases)
    xs = np.asarray(xs, dtype=np.float64)
    r = np.sqrt(np.clip(1 - xs ** 2, 0, None))
    w = np.empty(xs.shape + (2, 2), dtype=np.complex128)
    w[..., 0, 0] = w[..., 1, 1] = xs
    w[..., 0, 1] = w[..., 1, 0] = 1j * r
    u = np.broadcast_to(_rotation(phi[0]), xs.shape + (2, 2)).copy()
    for p in phi[1:]:
        u = u @ w * np.array([np.exp(1j * p), np.exp(-1j * p)])[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(r > 1e-12, u[..., 0, 1] / (1j * np.where(r > 0, r, 1)), np.nan)
    return u[..., 0, 0], q


def qsp_identity_error(phases, grid_step: float = 1e-3) -> float:
    """Max deviation of ``|P|^2 + (1-x^2)|Q|^2`` from 1 on a grid of ``[-1, 1]``."""
    xs = np.linspace(-1, 1, int(round(2 / grid_step)) + 1)
    p, q = qsp_values(phases, xs)
    q = np.nan_to_num(q)
    return float(np.max(np.abs(np.abs(p) ** 2 + (1 - xs ** 2) * np.abs(q) ** 2 - 1)))


# -------------------------------------------------------------- phase solver


class PhaseSolveError(RuntimeError):
    pass


def _target_chebyshev(target, basis: str) -> np.ndarray:
    if isinstance(target, C.Chebyshev):
        coeffs = target.coef
    elif isinstance(target, np.polynomial.Polynomial):
        coeffs = C.poly2cheb(target.coef)
    else:
        coeffs = np.asarray(target, dtype=np.float64)
        if basis == "monomial":
            coeffs = C.poly2cheb(coeffs)
        elif basis != "chebyshev":
            raise ValueError("basis must be 'chebyshev' or 'monomial'")
    coeffs = np.real_if_close(np.asarray(coeffs)).astype(np.float64)
    return C.chebtrim(coeffs, 1e-15) if coeffs.size > 1 else coeffs


def _complete(f: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Real ``g`` (parity ``d``) and ``h`` (parity ``d-1``) with ``f^2 + g^2 + (1-x^2) h^2 = 1``.

    With ``x = cos(theta)``, ``1 - f^2`` is a non-negative cosine polynomial in
    ``2 theta``; its spectral factor ``G(z) = sum c_k z^k`` (roots of the
    ``w = z^2`` polynomial chosen inside the unit disk) gives
    ``g = sum c_k T_|k|`` and ``h = sum sign(k) c_k U_{|k|-1}``.
    """
    d = degree
    if d == 0:
        rest = 1 - f[0] ** 2
        return np.array([math.sqrt(max(rest, 0.0))]), np.zeros(1)
    # Fourier coefficients in theta of 1 - f(cos theta)^2 on frequencies -2d..2d.
    n_samples = 8 * d + 8
    theta = 2 * np.pi * np.arange(n_samples) / n_samples
    vals = 1 - C.chebval(np.cos(theta), f) ** 2
    spectrum = np.fft.fft(vals).real / n_samples
    half = np.array([spectrum[(2 * j) % n_samples] for j in range(-d, d + 1)])
    # w^d H(w), coefficients of w^0..w^{2d}; numpy.roots wants highest first.
    roots = np.roots(half[::-1])
    inside = roots[np.argsort(np.abs(roots))][:d]
    k_poly = np.real_if_close(np.poly(inside)).astype(np.complex128)   # highest first
    probe = np.exp(1j * 0.377)
    scale = math.sqrt(max(1 - C.chebval(np.cos(0.377), f) ** 2, 0.0)) / max(
        abs(np.polyval(k_poly, probe ** 2)), 1e-300)
    k_low = (k_poly[::-1] * scale).real                                   # w^0..w^d
    c = {2 * j - d: k_low[j] for j in range(d + 1)}                       # z-exponents
    g = np.zeros(d + 1)
    h = np.zeros(max(d, 1))
    for k, ck in c.items():
        g[abs(k)] += ck
        if k != 0:
            u_cheb = _chebyshev_u(abs(k) - 1)
            h[: u_cheb.size] += np.sign(k) * ck * u_cheb
    return g, h


def _chebyshev_u(n: int) -> np.ndarray:
    """Chebyshev-T coefficients of ``U_n``."""
    if n < 0:
        return np.zeros(1)
    out = np.zeros(n + 1)
    for k in range(n % 2, n + 1, 2):
        out[k] = 2.0
    if n % 2 == 0:
        out[0] = 1.0
    return out


def _strip_layers(p: np.ndarray, q: np.ndarray, degree: int) -> np.ndarray:
    """Peel ``W(x) S(phi_d)`` off ``U`` one layer at a time (Chebyshev coefficients)."""
    p = np.asarray(p, dtype=np.complex128)
    q = np.asarray(q, dtype=np.complex128)
    one_minus_x2 = np.array([0.5, 0, -0.5])
    phases = []
    for d in range(degree, 0, -1):
        xp = np.pad(C.chebmulx(p), (0, d + 2))
        wq = np.pad(C.chebmul(one_minus_x2, q), (0, d + 2))
        alpha, beta = xp[d + 1], wq[d + 1]
        if abs(beta) < 1e-14:
            phi = 0.0
        else:
            phi = 0.5 * float(np.angle(-alpha / beta))
        new_p = C.chebadd(np.exp(-1j * phi) * xp, np.exp(1j * phi) * wq)
        new_q = C.chebsub(np.exp(1j * phi) * C.chebmulx(q), np.exp(-1j * phi) * p)
        p = np.pad(new_p, (0, d))[:d]
        q = np.pad(new_q, (0, d))[: max(d - 1, 1)]
        phases.append(phi)
    phases.append(float(np.angle(p[0])))
    return np.array(phases[::-1])


def _sup_error(phases: np.ndarray, f: np.ndarray, grid_step: float = 1e-3) -> float:
    xs = np.linspace(-1, 1, int(round(2 / grid_step)) + 1)
    p, _ = qsp_values(phases, xs)
    return float(np.max(np.abs(p.real - C.chebval(xs, f))))


def _least_squares_phases(f: np.ndarray, degree: int, max_iter: int) -> np.ndarray:
    """Fit ``Re P = f`` on Chebyshev nodes of ``(0, 1]`` with symmetric phases."""
    d = degree
    n_free = d // 2 + 1
    nodes = np.cos((2 * np.arange(1, 2 * n_free + 2) - 1) * np.pi / (4 * n_free + 4))
    target = C.chebval(nodes, f)

    def full(half_phases):
        tail = half_phases[: (d + 1) - n_free][::-1]
        return np.concatenate([half_phases, tail])

    def residual(half_phases):
        p, _ = qsp_values(full(half_phases), nodes)
        return p.real - target

    start = np.zeros(n_free)
    start[0] = np.pi / 4
    sol = least_squares(residual, start, method="lm" if nodes.size >= n_free else "trf",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_iter * (n_free + 1))
    return full(sol.x)


def solve_phases(target, parity: int | None = None, *, basis: str = "chebyshev",
                 tol: float = 1e-6, max_degree: int = 40, max_iter: int = 400,
                 label: str = "") -> PhaseSequence:
    """Phases whose ``Re <0|U_phi(x)|0>`` matches a real parity-definite polynomial.

    Route 1 completes ``P = f + i g`` and ``Q = h`` and strips layers; route 2
    is a least-squares fit used when route 1 misses ``tol`` on the grid.
    """
    f = _target_chebyshev(target, basis)
    degree = f.size - 1
    if parity is None:
        parity = degree % 2
    if degree % 2 != parity:
        degree += 1
        f = np.pad(f, (0, 1))
    wrong = f[(np.arange(f.size) % 2) != parity]
    if np.any(np.abs(wrong) > 1e-12):
        raise ValueError("target is not parity-definite")
    if degree > max_degree:
        raise ValueError(f"degree {degree} exceeds the cap {max_degree}")
    grid = np.linspace(-1, 1, 4001)
    if np.max(np.abs(C.chebval(grid, f))) > 1 + 1e-9:
        raise ValueError("target exceeds 1 in magnitude on [-1, 1]")
    f = np.where((np.arange(f.size) % 2) == parity, f, 0.0)
    best, best_err, method = None, math.inf, ""
    try:
        g, h = _complete(f, degree)
        phases = _strip_layers(f + 1j * np.pad(g, (0, f.size - g.size)), h, degree)
        err = _sup_error(phases, f)
        best, best_err, method = phases, err, "completion"
    except (np.linalg.LinAlgError, ValueError, FloatingPointError):
        pass
    if best_err > tol:
        phases = _least_squares_phases(f, degree, max_iter)
        err = _sup_error(phases, f)
        if err < best_err:
            best, best_err, method = phases, err, "least_squares"
    if best is None or best_err > tol:
        raise PhaseSolveError(f"phase solver did not converge: sup error {best_err:.3e}")
    return PhaseSequence(best, label, method, best_err)


def chebyshev_phases(degree: int) -> PhaseSequence:
    return PhaseSequence(np.zeros(degree + 1), f"T_{degree}", "closed_form")


def sign_polynomial(degree: int, steepness: float = 8.0, height: float = 0.9) -> np.ndarray:
    """Odd Chebyshev approximation of ``height * erf(steepness * x)``."""
    from scipy.special import erf

    if degree % 2 == 0:
        raise ValueError("sign approximation needs an odd degree")
    coeffs = C.chebinterpolate(lambda x: height * erf(steepness * x), degree)
    coeffs[::2] = 0
    return coeffs


# --------------------------------------------------------- block encodings


@dataclass
class BlockEncoding:
    """``U = [[A, i sqrt(I - A A^dagger)], [i sqrt(I - A^dagger A), A^dagger]]``."""

    U: np.ndarray
    A: np.ndarray
    hermitian: bool
    scale: float = 1.0      # encoded operator is A_original / scale

    @property
    def system_dim(self) -> int:
        return self.A.shape[0]

    def probe_error(self) -> float:
        n = self.system_dim
        return float(np.max(np.abs(self.U[:n, :n] - self.A)))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    return (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.conj().T


def block_encode(a, scale: float | None = None) -> BlockEncoding:
    """Embed ``A / scale`` (``scale`` defaults to 1 and must give norm <= 1)."""
    mat = np.asarray(a, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("block encoding needs a square matrix; pad rectangular inputs first")
    scale = 1.0 if scale is None else float(scale)
    mat = mat / scale
    if np.linalg.norm(mat, 2) > 1 + 1e-10:
        raise ValueError("encoded operator must have norm at most 1")
    n = mat.shape[0]
    eye = np.eye(n)
    left = _psd_sqrt(eye - mat @ mat.conj().T)
    right = _psd_sqrt(eye - mat.conj().T @ mat)
    u = np.block([[mat, 1j * left], [1j * right, mat.conj().T]])
    herm = bool(np.allclose(mat, mat.conj().T, atol=1e-12))
    return BlockEncoding(u, mat, herm, scale)


def _z_phase(phi: float, n: int) -> np.ndarray:
    return np.concatenate([np.full(n, np.exp(1j * phi)), np.full(n, np.exp(-1j * phi))])


def _sequence_state(enc: BlockEncoding, phases: np.ndarray, vec: np.ndarray, alternate: bool) -> np.ndarray:
    """Apply ``S(phi_0) U S(phi_1) ... U S(phi_d)`` (rightmost first) to ``|0>|vec>``.

    With ``alternate`` the hardware uses ``U`` and ``U^dagger`` in turn; the
    identity ``W^dagger = S(pi/2) W S(-pi/2)`` shifts the phases so the
    realised polynomial is unchanged.
    """
    n = enc.system_dim
    d = phases.size - 1
    hw = phases.astype(np.float64).copy()
    daggers = []
    if alternate:
        for j in range(1, d + 1):
            if (d - j) % 2 == 1:
                daggers.append(j)
                hw[j - 1] -= np.pi / 2
                hw[j] += np.pi / 2
    state = np.concatenate([vec, np.zeros(n)]).astype(np.complex128)
    state = _z_phase(hw[d], n) * state
    u_dag = enc.U.conj().T
    for j in range(d, 0, -1):
        state = (u_dag if j in daggers else enc.U) @ state
        state = _z_phase(hw[j - 1], n) * state
    return state


@dataclass
class TransformResult:
    state: StateVector
    success_probability: float
    unnormalized: np.ndarray = field(repr=False, default=None)


def _finish(vec: np.ndarray) -> TransformResult:
    p = float(np.vdot(vec, vec).real)
    if p <= 1e-300:
        raise ValueError("postselection probability is zero")
    return TransformResult(StateVector(vec / math.sqrt(p), check_norm=False), p, vec)


def qet_apply(h, phases, s: StateVector, real_part: bool = False) -> TransformResult:
    """Eigenvalue transformation ``Poly(H)|psi>`` postselected on auxiliary ``|0>``.

    ``real_part`` averages the sequences for ``phi`` and ``-phi`` through one
    extra Hadamard-controlled qubit, giving ``Re Poly(H)``.
    """
    enc = h if isinstance(h, BlockEncoding) else block_encode(h)
    if not enc.hermitian:
        raise ValueError("eigenvalue transformation needs a Hermitian operator")
    phi = _phases_of(phases)
    n = enc.system_dim
    if s.dim != n:
        raise ValueError("state does not match the operator")
    out = _sequence_state(enc, phi, s.amplitudes, alternate=False)
    if real_part:
        out = 0.5 * (out + _sequence_state(enc, -phi, s.amplitudes, alternate=False))
    return _finish(out[:n])


def qsvt_apply(a, phases, s: StateVector, side: str | None = None,
               real_part: bool = False) -> TransformResult:
    """Singular value transformation with alternating ``U`` and ``U^dagger``.

    Odd degree realises ``sum_k P(sigma_k)|w_k><v_k|`` (``side="wv"``); even
    degree realises ``sum_k P(sigma_k)|v_k><v_k|`` (``side="vv"``).
    """
    enc = a if isinstance(a, BlockEncoding) else block_encode(a)
    phi = _phases_of(phases)
    natural = "wv" if (phi.size - 1) % 2 == 1 else "vv"
    if side is not None and side != natural:
        raise ValueError(f"degree {phi.size - 1} realises the {natural!r} form, not {side!r}")
    n = enc.system_dim
    if s.dim != n:
        raise ValueError("state does not match the operator")
    out = _sequence_state(enc, phi, s.amplitudes, alternate=True)
    if real_part:
        out = 0.5 * (out + _sequence_state(enc, -phi, s.amplitudes, alternate=True))
    return _finish(out[:n])


def svt_oracle(a, poly, side: str) -> np.ndarray:
    """Dense reference ``sum P(sigma)|w><v|`` or ``sum P(sigma)|v><v|`` via SVD."""
    w, sig, vh = np.linalg.svd(np.asarray(a, dtype=np.complex128))
    vals = np.array([poly(x) for x in sig])
    if side == "wv":
        return (w * vals) @ vh
    return (vh.conj().T * vals) @ vh


# ------------------------------------------------------------ fixed point


def chebyshev_t(order: float, x: float) -> float:
    """``T_L(x)`` for real ``L``, continued outside ``[-1, 1]``."""
    if abs(x) <= 1:
        return math.cos(order * math.acos(x))
    if x > 1:
        return math.cosh(order * math.acosh(x))
    return (-1) ** int(order) * math.cosh(order * math.acosh(-x))


def fixed_point_min_queries(c: float, delta: float) -> int:
    """Smallest odd ``L`` with ``T_L(1/sqrt(1-c^2)) >= 1/delta``."""
    if not 0 < c <= 1:
        raise ValueError("overlap lower bound must be in (0, 1]")
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    if c >= 1:
        return 1
    need = math.acosh(1 / delta) / math.acosh(1 / math.sqrt(1 - c * c))
    L = max(1, math.ceil(need - 1e-12))
    return L if L % 2 else L + 1


def fixed_point_phases(L: int, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotation angles ``alpha_j`` and ``beta_j`` for an odd query count ``L``."""
    if L < 1 or L % 2 == 0:
        raise ValueError("query count must be odd")
    l = (L - 1) // 2
    gamma_inv = chebyshev_t(1 / L, 1 / delta)
    root = math.sqrt(max(0.0, 1 - 1 / gamma_inv ** 2))
    alpha = np.array([2 * math.atan2(1, math.tan(2 * math.pi * j / L) * root) for j in range(1, l + 1)])
    beta = -alpha[::-1]
    return alpha, beta


@dataclass
class FixedPointResult:
    state: StateVector
    success_probability: float
    queries: int
    effective_delta: float
    bound: float            # guaranteed error 1 - success <= bound


def fixed_point_search(preparer, good, delta: float, budget: int, c_lower: float) -> FixedPointResult:
    """Fixed-point amplitude amplification with at most ``budget`` queries.

    Uses the largest odd ``L <= budget``. For ``L`` above the minimum, the
    sequence is tuned to ``delta_eff = 1 / T_L(1/sqrt(1-c^2)) <= delta``, so
    the guaranteed error ``delta_eff^2`` only shrinks as the budget grows.
    ``preparer`` is the start state ``A|0>`` or a dense unitary ``A``.
    """
    start = preparer.amplitudes if isinstance(preparer, StateVector) else \
        np.asarray(preparer, dtype=np.complex128)[:, 0]
    mask = np.asarray(good, dtype=bool) if np.asarray(good).dtype == bool else \
        np.isin(np.arange(start.size), np.asarray(good))
    L_min = fixed_point_min_queries(c_lower, delta)
    if budget < L_min:
        raise ValueError(f"budget {budget} is below the minimum {L_min} for c={c_lower}, delta={delta}")
    L = budget if budget % 2 else budget - 1
    if c_lower >= 1:
        d_eff = 0.0
    else:
        d_eff = min(delta, 1 / chebyshev_t(L, 1 / math.sqrt(1 - c_lower ** 2)))
    state = start.copy()
    if L > 1 and d_eff > 0:
        alpha, beta = fixed_point_phases(L, d_eff)
        for a_j, b_j in zip(alpha, beta):
            # S_t(beta) on the good subspace, then S_s(alpha) about the start state.
            state = np.where(mask, np.exp(1j * b_j) * state, state)
            state = state - (1 - np.exp(-1j * a_j)) * start * np.vdot(start, state)
            state = -state
    success = float(np.sum(np.abs(state[mask]) ** 2))
    return FixedPointResult(StateVector(state, check_norm=False), success, L, d_eff, d_eff ** 2)


# -------------------------------------------------------------- inversion


@dataclass
class InversionResult:
    state: StateVector
    success_probability: float
    fidelity: float
    degree: int
    b_exponent: int
    scale: float
    sup_error: float         # |scale * P(x) - 1/x| max on [1/kappa, 1]
    phases: PhaseSequence


def inverse_polynomial(kappa: float, epsilon: float) -> tuple[np.ndarray, int]:
    """Odd Chebyshev coefficients of ``(1 - (1 - x^2)^b) / x``, truncated.

    ``b = ceil(kappa^2 log(kappa/epsilon))``. Coefficient ``j`` of ``T_{2j+1}``
    is ``4 (-1)^j Pr[Bin(2b, 1/2) > b + j]``; the series stops once the
    remaining tail is below ``epsilon / kappa``.
    """
    b = max(1, math.ceil(kappa ** 2 * math.log(kappa / epsilon)))
    j = np.arange(0, b + 1)
    weights = 4 * binom.sf(b + j, 2 * b, 0.5)
    tail = np.cumsum(weights[::-1])[::-1]
    keep = int(np.argmax(tail < epsilon / kappa)) if np.any(tail < epsilon / kappa) else b + 1
    keep = max(keep, 1)
    coeffs = np.zeros(2 * keep)
    coeffs[1::2] = weights[:keep] * (-1.0) ** j[:keep]
    return coeffs, b


def qsvt_invert(a, kappa: float, epsilon: float, b: StateVector, max_degree: int = 400) -> InversionResult:
    """``A^{-1}|b>`` via the singular value transform of ``A^dagger`` with ``Re P(x) ~ 1/(scale x)``."""
    mat = np.asarray(a, dtype=np.complex128)
    sig = np.linalg.svd(mat, compute_uv=False)
    if sig.min() < 1 / kappa - 1e-12 or sig.max() > 1 + 1e-12:
        raise ValueError("singular values must lie in [1/kappa, 1]")
    if kappa <= 1 + 1e-12 and np.allclose(mat, np.eye(mat.shape[0])):
        phases = PhaseSequence(np.zeros(2), "x", "closed_form")
        coeffs, b_exp, scale = np.array([0.0, 1.0]), 1, 1.0
    else:
        coeffs, b_exp = inverse_polynomial(kappa, epsilon)
        grid = np.linspace(-1, 1, 20001)
        scale = 2 * float(np.max(np.abs(C.chebval(grid, coeffs))))
        phases = solve_phases(coeffs / scale, parity=1, tol=1e-9, max_degree=max_degree,
                              label=f"inverse kappa={kappa} eps={epsilon}")
    enc = block_encode(mat.conj().T)
    res = qsvt_apply(enc, phases, b, real_part=True)
    exact = np.linalg.solve(mat, b.amplitudes)
    exact = exact / np.linalg.norm(exact)
    fid = float(abs(np.vdot(exact, res.state.amplitudes)) ** 2)
    xs = np.linspace(1 / kappa, 1, 2001)
    p_vals, _ = qsp_values(phases, xs)
    sup = float(np.max(np.abs(scale * p_vals.real - 1 / xs)))
    return InversionResult(res.state, res.success_probability, fid, phases.degree, b_exp, scale, sup, phases)


# ------------------------------------------------------ Hamiltonian evolution


@dataclass
class QSPEvolution:
    state: StateVector
    success_probability: float
    degree: int
    tail_bound: float
    fidelity_to_exact: float


def jacobi_anger(tau: float, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev coefficients of ``cos(tau x)`` and ``sin(tau x)`` up to ``degree``."""
    k = np.arange(degree + 1)
    cos_c = np.where(k % 2 == 0, 2 * (-1.0) ** (k // 2) * jv(k, tau), 0.0)
    cos_c[0] = jv(0, tau)
    sin_c = np.where(k % 2 == 1, 2 * (-1.0) ** ((k - 1) // 2) * jv(k, tau), 0.0)
    return cos_c, sin_c


def jacobi_anger_degree(tau: float, epsilon: float, cap: int = 120) -> int:
    for d in range(1, cap + 1):
        if 2 * np.sum(np.abs(jv(np.arange(d + 1, d + 60), tau))) <= epsilon:
            return d
    raise ValueError(f"no truncation within degree {cap} meets epsilon={epsilon}")


def qsp_hamiltonian_sim(h, t: float, epsilon: float, s: StateVector, cap: int = 120) -> QSPEvolution:
    """``exp(-iHt)|psi>`` as an LCU of two eigenvalue transformations.

    ``H`` is normalised by its spectral norm ``alpha``; with ``tau = alpha t``
    the even part approximates ``cos(tau x) / 2`` and the odd part
    ``sin(tau x) / 2``. A final Hadamard-controlled combination gives
    ``(cos - i sin)(tau H/alpha) / 2`` on the all-zero auxiliary branch.
    """
    mat = np.asarray(h, dtype=np.complex128)
    alpha = float(np.linalg.norm(mat, 2))
    if alpha == 0 or t == 0:
        return QSPEvolution(s.copy(), 1.0, 0, 0.0, 1.0)
    tau = alpha * t
    eps_inner = epsilon / 8
    degree = jacobi_anger_degree(tau, eps_inner, cap)
    cos_c, sin_c = jacobi_anger(tau, degree + 1)
    cos_c = cos_c[: degree + 1 + (degree % 2 == 1)]
    sin_c = sin_c[: degree + 1 + (degree % 2 == 0)]
    enc = block_encode(mat / alpha)
    even = solve_phases(cos_c / 2, parity=0, tol=1e-11, max_degree=cap + 2, label=f"cos({tau:g}x)/2")
    odd = solve_phases(sin_c / 2, parity=1, tol=1e-11, max_degree=cap + 2, label=f"sin({tau:g}x)/2")
    c_part = qet_apply(enc, even, s, real_part=True).unnormalized
    s_part = qet_apply(enc, odd, s, real_part=True).unnormalized
    combined = 0.5 * (c_part - 1j * s_part)
    res = _finish(combined)
    vals, vecs = np.linalg.eigh(mat)
    exact = (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T @ s.amplitudes
    fid = float(abs(np.vdot(exact, res.state.amplitudes)) ** 2)
    tail = 2 * float(np.sum(np.abs(jv(np.arange(degree + 1, degree + 60), tau))))
    return QSPEvolution(res.state, res.success_probability, degree, tail, fid)
