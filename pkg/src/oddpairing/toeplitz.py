"""Independent index computations used as ground truth for the localizer.

The index of T = Pi A Pi + (1 - Pi) is computed by several unrelated routes:
kernel counting on one-sided truncations (d = 1), the winding number or
degree of the symbol (translation-invariant models), and the spectral flow
between the Dirac operator and its conjugate by the polar part of A.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import BallExceedsBox, BoxMismatch, NotStabilized, OracleDisagreement, WrongDimension
from .lattice import BallProjection, LatticeOperator, build_dirac, hardy_projection
from .models import ModelSpec, index_from_winding, winding_oracle_1d, winding_oracle_3d
from .specflow import index_via_sf, model_unitary, operator_polar

METHODS = ("kernel_count", "winding_1d", "degree_3d", "spectral_flow")
RANK_GAP = 100.0


@dataclass
class IndexReport:
    method: str
    value: int
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"method": self.method, "value": int(self.value), "diagnostics": dict(self.diagnostics)}


def toeplitz_matrix(A: LatticeOperator, Pi: LatticeOperator, proj: BallProjection) -> np.ndarray:
    """Restriction of Pi A Pi + (1 - Pi) to the ball of ``proj``."""
    if A.box != Pi.box or A.box != proj.box:
        raise BoxMismatch("A, Pi and the projection must live on the same box")
    Pm = Pi.matrix
    T = Pm @ A.matrix @ Pm + sp.identity(A.box.dim, format="csr") - Pm
    return T.tocsr()[proj.rows][:, proj.rows].toarray()


def _pi_rows(Pi: LatticeOperator) -> np.ndarray:
    M = Pi.matrix.tocsr()
    offdiag = M - sp.diags(M.diagonal())
    if offdiag.nnz and abs(offdiag).max() > 1e-12:
        raise ValueError("kernel counting needs Pi diagonal in the lattice basis")
    return np.flatnonzero(M.diagonal().real > 0.5)


def _kernel_dim(M: np.ndarray, tol: float) -> tuple[int, float, float]:
    """Dimension of ker M by singular values, the zero/nonzero separation and the smallest nonzero one."""
    s = np.linalg.svd(M, compute_uv=False) if M.size else np.zeros(0)
    # a tall matrix has n singular values; the kernel lives among them
    norm = s.max() if len(s) else 0.0
    thr = tol * max(norm, 1.0)
    zero, nonzero = s[s < thr], s[s >= thr]
    hi = max(zero.max(), np.finfo(float).tiny) if len(zero) else thr
    ratio = nonzero.min() / hi if len(nonzero) else np.inf
    return len(zero), float(ratio), float(nonzero.min()) if len(nonzero) else np.inf


def _truncated_kernels(A, rows_pi, dist, r, b, tol):
    cols = rows_pi[dist[rows_pi] <= r]
    rows = rows_pi[dist[rows_pi] <= r + b]
    T = A.matrix[rows][:, cols].toarray()
    Ts = A.matrix.conj().T.tocsr()[rows][:, cols].toarray()
    k, rk, sk = _kernel_dim(T, tol)
    c, rc, sc = _kernel_dim(Ts, tol)
    return k, c, min(rk, rc), min(sk, sc)


def kernel_count_index(A: LatticeOperator, Pi: LatticeOperator | None = None, proj: BallProjection | None = None,
                       tolerance: float = 1e-8, r: int | None = None) -> IndexReport:
    """dim ker T_r - dim ker T_r^* on one-sided truncations at radii r and 2r.

    T_r maps the Pi-rows within distance r to those within r + b, where b is
    the hopping range, so no matrix element of T is lost.  Both radii must
    give the same count, the smallest nonzero singular value must not decay
    between them, and each rank decision needs a separation of two orders of
    magnitude between zero and nonzero singular values.
    """
    box = A.box
    if box.d != 1:
        raise WrongDimension("kernel counting is only available in d = 1")
    if Pi is None:
        D = build_dirac(box, A.model.rep) if A.model is not None else build_dirac(box, _rep1())
        Pi = hardy_projection(D)
    if Pi.box != box:
        raise BoxMismatch("Pi lives on a different box")
    b = max(A.hopping_range(), 1)
    if proj is not None:
        if proj.box != box:
            raise BoxMismatch("projection lives on a different box")
        r = int(np.floor(proj.rho))
    if r is None:
        r = (box.R - b) // 2
    if r < 1 or 2 * r + b > box.R:
        raise BallExceedsBox(f"truncations r={r}, 2r={2 * r} with range {b} do not fit a box of radius {box.R}")
    rows_pi = _pi_rows(Pi)
    dist = np.abs(box.sites[box.site_of_rows()]).max(axis=1)
    k1, c1, q1, s1 = _truncated_kernels(A, rows_pi, dist, r, b, tolerance)
    k2, c2, q2, s2 = _truncated_kernels(A, rows_pi, dist, 2 * r, b, tolerance)
    diag = {"r": r, "r2": 2 * r, "ker": k2, "coker": c2, "separation": min(q1, q2), "tolerance": tolerance,
            "smallest_nonzero": s2}
    if min(q1, q2) < RANK_GAP:
        raise NotStabilized(f"singular values separate by only {min(q1, q2):.1f}x (need {RANK_GAP:.0f}x)")
    if s2 < 0.5 * s1:
        # a decaying singular value is an approximate kernel vector not yet resolved
        raise NotStabilized(f"smallest nonzero singular value fell from {s1:.3e} (r={r}) to {s2:.3e} (r={2 * r})")
    if (k1, c1) != (k2, c2):
        raise NotStabilized(f"kernel dimensions ({k1}, {c1}) at r={r} differ from ({k2}, {c2}) at r={2 * r}")
    return IndexReport("kernel_count", k2 - c2, diag)


def _rep1():
    from .clifford import build_clifford
    return build_clifford(1)


def _spectral_flow_report(target, kappa=1.0) -> IndexReport:
    if isinstance(target, ModelSpec):
        U, D, r_inner = model_unitary(target)
        diag = {"r_inner": r_inner, "polar_tail": U.norms["tail"], "polar_reach": U.norms["reach"]}
    else:
        if target.d != 1:
            raise WrongDimension("spectral flow of a bare box operator is only supported in d = 1")
        b = max(target.hopping_range(), 1)
        cutoff = 4 * b + 4
        r_inner = 2 * 2.0 + 2 * b
        if target.box.R < r_inner + 2 * cutoff:
            raise BallExceedsBox(f"box radius {target.box.R} too small for the polar cutoff {cutoff}")
        U = operator_polar(target, cutoff=cutoff)
        D = build_dirac(target.box, target.model.rep if target.model is not None else _rep1())
        diag = {"r_inner": r_inner, "polar_cutoff": cutoff}
    return IndexReport("spectral_flow", index_via_sf(U, D, kappa, r_inner=r_inner), diag)


def _run(method, target) -> IndexReport:
    if callable(method):
        rep = method(target)
        return rep if isinstance(rep, IndexReport) else IndexReport(getattr(method, "__name__", "custom"), int(rep))
    model = target if isinstance(target, ModelSpec) else target.model
    if method == "kernel_count":
        if isinstance(target, ModelSpec):
            R = 8 * target.b + 8
            target = target.build(target.box(R))
        return kernel_count_index(target)
    if method == "winding_1d":
        w = winding_oracle_1d(model)
        return IndexReport("winding_1d", index_from_winding(1, w), {"winding": w})
    if method == "degree_3d":
        return IndexReport("degree_3d", winding_oracle_3d(model), {"grid": 24})
    if method == "spectral_flow":
        return _spectral_flow_report(target)
    raise ValueError(f"unknown method {method!r}")


def default_methods(target) -> list[str]:
    if isinstance(target, ModelSpec):
        return ["kernel_count", "winding_1d", "spectral_flow"] if target.d == 1 else ["degree_3d", "spectral_flow"]
    if target.d == 1:
        return ["kernel_count", "spectral_flow"]
    raise ValueError("a d = 3 box operator has no two independent index methods; pass a model")


def consensus(target, methods=None, workers: int | None = None) -> IndexReport:
    """Run several index methods and return their common value.

    ``target`` is a gallery model or a d = 1 box operator (for example a
    perturbed model).  ``methods`` mixes names from :data:`METHODS` and
    callables returning an integer or an :class:`IndexReport`.
    """
    methods = default_methods(target) if methods is None else list(methods)
    if len(methods) < 2:
        raise ValueError("consensus needs at least two methods")
    with ThreadPoolExecutor(max_workers=workers or len(methods)) as pool:
        reports = list(pool.map(lambda m: _run(m, target), methods))
    values = {r.value for r in reports}
    if len(values) != 1:
        detail = ", ".join(f"{r.method}={r.value}" for r in reports)
        raise OracleDisagreement(f"index methods disagree: {detail}", reports)
    return IndexReport("consensus", reports[0].value, {"methods": [r.as_dict() for r in reports]})
