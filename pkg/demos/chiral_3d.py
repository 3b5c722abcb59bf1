"""Three-dimensional chiral model: localizer against the Brillouin-zone degree.

The trivial phase (mu = 4) and a topological phase (mu = 2) are compared at
growing radii; the half-signature stabilizes at the degree of the symbol.
"""

import time

from oddpairing import chiral_3d_model, localize
from oddpairing.models import winding_oracle_3d

for mu, rhos in ((4.0, (6.0, 8.0)), (2.0, (6.0, 8.0, 10.0))):
    model = chiral_3d_model(mu)
    print(f"chiral_3d mu={mu}  degree={winding_oracle_3d(model)}")
    for rho in rhos:
        t0 = time.perf_counter()
        res = localize(model, 0.25, rho)
        print(f"  rho={rho:5.1f} dim={res.dimension:6d} half-signature={res.half_signature:+d} "
              f"gap={res.regime.gap_measured:.4f} ({time.perf_counter() - t0:.1f} s)")
