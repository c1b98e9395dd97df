import numpy as np

from qstat import qsp
from qstat.state import StateVector

rng = np.random.default_rng(0)
b = StateVector.from_unnormalized(rng.normal(size=4) + 1j * rng.normal(size=4))
for kappa in (2, 4, 8):
    q1, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    q2, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    a = q1 @ np.diag(np.geomspace(1, 1 / kappa, 4)) @ q2
    res = qsp.qsvt_invert(a, kappa, 1e-3, b)
    print(f"kappa {kappa}: degree {res.degree:3d}  fidelity {res.fidelity:.8f}  "
          f"success {res.success_probability:.3e}  sup error {res.sup_error:.2e}")
