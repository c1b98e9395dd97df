"""qstat: a state-vector laboratory for quantum algorithms in statistics and linear algebra.

Submodules:

- ``state``, ``gates``: amplitudes, circuits, measurement, density matrices
- ``oracles``: data encodings and oracle models with call counters
- ``amplitude``: Grover search, amplification, estimation and their statistics uses
- ``fourier``: QFT and phase estimation
- ``linalg``: HHL, Jordan's gradient, quantum PCA
- ``walks``: coined and Szegedy walks, quantum MCMC
- ``hamsim``: product formulas, Taylor LCU, qubitization
- ``qsp``: signal processing, singular value transforms, fixed-point search
- ``variational``: QAOA, adiabatic evolution, hybrid loops
- ``bench``, ``cli``: the experiment harness behind the ``qstat`` command
"""

from importlib import metadata as _metadata

from .rng import make_rng, spawn
from .state import (DensityMatrix, Observable, StateVector, dump_state, load_state, max_qubits,
                    measure_computational, sample_counts)
from .gates import Circuit, CircuitOp, apply_unitary, embed
from .oracles import FunctionOracle, PhaseOracle, SparseHamiltonianAccess, amplitude_encode, qsample_encode
from .fourier import iqft, qft, qpe
from .amplitude import GroverProblem, grover_search, qaa, qae, quantum_monte_carlo, swap_test
from .linalg import hhl_solve, jordan_gradient, qpca
from .walks import MarkovChainSpec, build_szegedy, qmcmc_prepare
from .hamsim import HamiltonianSum, build_qubitization, lcu_evolve, trotter_evolve
from .qsp import PhaseSequence, qet_apply, qsvt_apply, qsvt_invert, solve_phases
from .variational import CostHamiltonian, adiabatic_evolve, qaoa_optimize

try:
    __version__ = _metadata.version("artifact")
except _metadata.PackageNotFoundError:  # running from a source tree without an install
    __version__ = "0+unknown"

__all__ = [
    "make_rng", "spawn", "DensityMatrix", "Observable", "StateVector", "dump_state", "load_state",
    "max_qubits", "measure_computational", "sample_counts", "Circuit", "CircuitOp", "apply_unitary",
    "embed", "FunctionOracle", "PhaseOracle", "SparseHamiltonianAccess", "amplitude_encode",
    "qsample_encode", "iqft", "qft", "qpe", "GroverProblem", "grover_search", "qaa", "qae",
    "quantum_monte_carlo", "swap_test", "hhl_solve", "jordan_gradient", "qpca", "MarkovChainSpec",
    "build_szegedy", "qmcmc_prepare", "HamiltonianSum", "build_qubitization", "lcu_evolve",
    "trotter_evolve", "PhaseSequence", "qet_apply", "qsvt_apply", "qsvt_invert", "solve_phases",
    "CostHamiltonian", "adiabatic_evolve", "qaoa_optimize", "__version__",
]
