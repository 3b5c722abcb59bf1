"""Half-signature of the localizer for shift powers across a (kappa, rho) grid.

Prints the regime label, the half-signature and the measured gap, next to
the kernel-count index of the half-line Toeplitz operator.
"""

from oddpairing import kappa0, localize, shift_model
from oddpairing.toeplitz import consensus

for m in (-2, -1, 1, 2):
    model = shift_model(m)
    k0 = kappa0(model.declared)
    oracle = consensus(model).value
    print(f"shift m={m:+d}  kappa0={k0:.4f}  index={oracle}")
    for kappa in (1 / 12, k0, k0 / 2):
        for rho in (25.0, 2.5 / kappa):
            res = localize(model, kappa, rho)
            print(f"  kappa={kappa:.4f} rho={rho:7.2f}  {res.regime.label:10s} "
                  f"half-signature={res.half_signature:+d} gap={res.regime.gap_measured:.4f}")
