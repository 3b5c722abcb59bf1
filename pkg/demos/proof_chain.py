"""Replay the chain index = spectral flow = half-signature for a shift.

Each link prints its witnesses: spectral flows, path gaps and the Lipschitz
certificates.  The smaller kappa needs a finer grid: the gap of the first
path shrinks with kappa while its Lipschitz constant does not.
"""

from oddpairing import shift_model
from oddpairing.specflow import proof_chain_check

for kappa, rho, points in ((1 / 12, 25.0, 64), (1 / 24, 50.0, 128)):
    rep = proof_chain_check(shift_model(1), kappa, rho, points=points, raise_on_failure=False)
    print(f"kappa={kappa:.4f} rho={rho} points={points}  index={rep.index}")
    print(rep.text())
