"""Spectral flow of Hermitian matrix paths and the index = spectral flow pipeline.

Spectral flow is counted with Phillips-style windows: on a subinterval
[t1, t2] pick a > 0 such that no eigenvalue comes within the drift bound of
+-a, then the change in the number of eigenvalues in [0, a) is the flow
across that subinterval.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .clifford import build_clifford
from .errors import (
    EndpointSingular,
    LinkFailed,
    NotInvertible,
    OddDifference,
    PairingError,
    PreconditionViolated,
    RefinementBudgetExceeded,
    Singular,
    SingularAtTolerance,
)
from .inertia import half_signature, inertia
from .lattice import (
    LatticeOperator,
    ball_projection,
    block_diagonal,
    build_dirac,
    from_hoppings,
    hardy_projection,
    restrict,
    site_function,
)
from .localizer import OffDiagonalHomotopy, TaperHomotopy, assemble, certify_path, check_regime, gap_check
from .models import ModelSpec, NormData, momentum_grid, resolve_norms

ENDPOINT_TOL = 1e-10


@dataclass
class HermitianPath:
    """A continuous family t -> F(t) on [0, 1].

    ``lipschitz`` bounds ||F(t) - F(s)|| / |t - s|; it is exact for straight
    lines and must be supplied (or is estimated with a safety factor) for
    custom paths.
    """

    evaluate: object
    kind: str = "custom"
    lipschitz: float | None = None
    grid: int = 16
    budget: int = 4096
    endpoints: tuple = field(default=(), repr=False)

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluate(t)

    @classmethod
    def straight_line(cls, F0, F1, **kw) -> "HermitianPath":
        F0 = np.asarray(F0, dtype=complex)
        F1 = np.asarray(F1, dtype=complex)
        if F0.shape != F1.shape:
            raise ValueError("endpoints differ in shape")
        lip = float(np.linalg.norm(F1 - F0, 2)) if F0.size else 0.0
        return cls(lambda t: (1 - t) * F0 + t * F1, "straight_line", lip, endpoints=(F0, F1), **kw)

    @classmethod
    def custom(cls, evaluate, lipschitz=None, **kw) -> "HermitianPath":
        if lipschitz is None:
            ts = np.linspace(0, 1, 65)
            mats = [evaluate(t) for t in ts]
            diffs = [np.linalg.norm(b - a, 2) / (ts[1] - ts[0]) for a, b in zip(mats, mats[1:])]
            lipschitz = 2 * max(diffs)
        return cls(evaluate, "custom", float(lipschitz), **kw)

    def concat(self, other: "HermitianPath") -> "HermitianPath":
        """Run self on [0, 1/2] and other on [1/2, 1]."""
        f = lambda t: self(2 * t) if t <= 0.5 else other(2 * t - 1)
        return HermitianPath(f, "custom", 2 * max(self.lipschitz, other.lipschitz), self.grid, self.budget)

    def conjugate(self, U) -> "HermitianPath":
        U = np.asarray(U)
        return HermitianPath(lambda t: U.conj().T @ self(t) @ U, self.kind, self.lipschitz, self.grid, self.budget)

    def direct_sum(self, other: "HermitianPath") -> "HermitianPath":
        f = lambda t: scipy.linalg.block_diag(self(t), other(t))
        return HermitianPath(f, "custom", max(self.lipschitz, other.lipschitz), self.grid, self.budget)


@dataclass
class FlowResult:
    sf: int
    crossings: list
    min_gap_interior: float
    evaluations: int = 0


def _window(w, drift):
    """Smallest usable window edge a, or None if the drift is too large."""
    s = np.sort(np.abs(w))
    edges = np.concatenate([[0.0], s])
    widths = np.diff(edges)
    ok = np.nonzero(widths > 2 * drift)[0]
    if len(ok) == 0:
        return float(s[-1] + 2 * drift + 1.0) if len(s) else 1.0
    i = ok[0]
    return float((edges[i] + edges[i + 1]) / 2)


def spectral_flow(path: HermitianPath, resolution: float = 2.0**-12) -> FlowResult:
    """Net number of eigenvalues crossing 0 upwards along the path."""
    cache = {}

    def eig(t):
        if t not in cache:
            if len(cache) >= path.budget:
                raise RefinementBudgetExceeded(f"more than {path.budget} path evaluations needed")
            cache[t] = scipy.linalg.eigvalsh(path(t))
        return cache[t]

    for t in (0.0, 1.0):
        if np.abs(eig(t)).min() <= ENDPOINT_TOL:
            raise EndpointSingular(f"path is not invertible at t={t}")
    lip = path.lipschitz if path.lipschitz is not None else np.inf
    stack = [(a, b) for a, b in zip(np.linspace(0, 1, path.grid + 1)[:-1], np.linspace(0, 1, path.grid + 1)[1:])]
    stack.reverse()
    crossings = []
    total = 0
    while stack:
        t1, t2 = stack.pop()
        w1 = eig(t1)
        drift = lip * (t2 - t1)
        a = _window(w1, drift)
        w2 = eig(t2)
        valid = np.abs(np.abs(w1) - a).min() > drift and np.abs(np.abs(w2) - a).min() > drift
        count = lambda w: int(((w >= 0) & (w < a)).sum())
        change = count(w2) - count(w1)
        if not valid or (change and t2 - t1 > resolution):
            mid = (t1 + t2) / 2
            stack.extend([(mid, t2), (t1, mid)])
            continue
        if change:
            crossings.append(((t1, t2), int(np.sign(change)), abs(change)))
            total += change
    interior = [np.abs(w).min() for t, w in cache.items() if 0 < t < 1]
    return FlowResult(total, crossings, float(min(interior)) if interior else np.inf, len(cache))


def sf_by_signature(F0, F1) -> int:
    """(Sig F1 - Sig F0) / 2 for invertible Hermitian matrices of equal size."""
    try:
        s0 = inertia(F0).signature
        s1 = inertia(F1).signature
    except SingularAtTolerance as exc:
        raise NotInvertible(str(exc)) from exc
    if (s1 - s0) % 2:
        raise OddDifference(f"signature difference {s1 - s0} is odd")
    return (s1 - s0) // 2


@dataclass
class PolarData:
    U: np.ndarray
    absA: np.ndarray


def polar(A, strict: bool = True) -> PolarData:
    """A = U |A| by singular value decomposition.

    With ``strict=False`` a singular A still yields a unitary U; it is then
    not unique on the kernel.
    """
    A = np.asarray(A, dtype=complex)
    W, s, Vh = np.linalg.svd(A)
    if strict and s.min() <= 1e-10:
        raise Singular(f"smallest singular value {s.min():.2e}")
    return PolarData(W @ Vh, (Vh.conj().T * s) @ Vh)


def bounded_fn(x, rho: float):
    """Increasing C^1 map: x on [-rho, rho], +-2 rho beyond 2 rho, cubic Hermite in between."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    s = np.clip(ax / rho - 1, 0.0, 1.0)
    # h(0) = 0, h'(0) = 1, h(1) = 1, h'(1) = 0; h' = (1 - s)(1 + 3s) >= 0
    y = np.where(ax <= rho, ax, rho * (1 + s + s**2 - s**3))
    return np.sign(x) * y


def bounded_transform(D, rho: float):
    """F_rho(D), blockwise for a site-diagonal lattice operator, else by eigendecomposition."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if isinstance(D, LatticeOperator):
        return site_function(D, lambda x: bounded_fn(x, rho))
    w, v = np.linalg.eigh(np.asarray(D))
    return (v * bounded_fn(w, rho)) @ v.conj().T


# --- unitaries on the lattice -------------------------------------------------------

def lattice_polar(model: ModelSpec, box, grid: int = 32, reach: int = 3, tol: float = 1e-12) -> LatticeOperator:
    """Polar U = A|A|^-1 of a translation-invariant model from its symbol.

    U(k) is the unitary polar factor of A(k); its Fourier coefficients beyond
    ``reach`` (inf-norm) are dropped.  The largest dropped coefficient is kept
    in ``U.norms`` as a dict entry 'tail'.
    """
    k = momentum_grid(model.d, grid)
    W, s, Vh = np.linalg.svd(model.symbol(k))
    if s.min() <= 1e-10:
        raise Singular("symbol is not invertible on the grid")
    Uk = W @ Vh
    coef = np.fft.fftn(Uk, axes=tuple(range(model.d))) / grid**model.d
    hops, tail = {}, 0.0
    for idx in np.ndindex(*(grid,) * model.d):
        h = tuple(int(i) if i <= grid // 2 else int(i) - grid for i in idx)
        blk = coef[idx]
        mag = np.abs(blk).max()
        if max(abs(x) for x in h) <= reach:
            if mag > tol:
                hops[h] = np.kron(blk, np.eye(model.rep.N))
        else:
            tail = max(tail, mag)
    U = from_hoppings(box, hops)
    object.__setattr__(U, "norms", {"tail": float(tail), "reach": reach})
    return U


def operator_polar(A: LatticeOperator, cutoff: int | None = None) -> LatticeOperator:
    """Polar factor of the box operator by dense SVD, entries beyond ``cutoff`` sites dropped.

    Dirichlet truncation may make the box operator singular; the kernel sits
    at the box boundary, so the unitary is only ambiguous there.
    """
    P = polar(A.toarray(), strict=False).U
    if cutoff is not None:
        srow = A.box.site_of_rows()
        pts = A.box.sites[srow]
        dist = np.abs(pts[:, None, :] - pts[None, :, :]).max(axis=2)
        P[dist > cutoff] = 0
    M = sp.csr_matrix(P)
    M.data[np.abs(M.data) < 1e-14] = 0
    M.eliminate_zeros()
    return LatticeOperator(A.box, M)


def _inner_rows(D: LatticeOperator, radius: float):
    return ball_projection(D, radius).rows


def index_via_sf(U: LatticeOperator, D: LatticeOperator, kappa: float, rho: float = 2.0,
                 r_inner: float | None = None, method: str = "signature") -> int:
    """SF(kappa U* F_rho(D) U, kappa F_rho(D)) on a ball of radius r_inner.

    U* F U is compressed exactly by using U as a rectangular matrix (all box
    rows, inner columns); this needs the box to reach r_inner + range(U).
    ``method`` is 'signature' (finite-dimensional identity) or 'crossing'
    (adaptive crossing count along the straight line).
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    b = max(U.hopping_range(), 1)
    if r_inner is None:
        r_inner = 2 * rho + 2 * b
    if U.box.R < r_inner + b or (U.box.radius is not None and U.box.radius < r_inner + b * np.sqrt(U.d)):
        raise PreconditionViolated(f"box too small: need reach {r_inner + b} for inner radius {r_inner}")
    Fd = bounded_transform(D, rho)
    rows = _inner_rows(D, r_inner)
    Ur = U.matrix[:, rows]
    M0 = kappa * (Ur.conj().T @ Fd.matrix @ Ur).toarray()
    M1 = kappa * Fd.matrix[rows][:, rows].toarray()
    if method == "signature":
        return sf_by_signature(M0, M1)
    if method == "crossing":
        return spectral_flow(HermitianPath.straight_line(M0, M1)).sf
    raise ValueError(f"unknown method {method!r}")


def model_unitary(model: ModelSpec, rho: float = 2.0, reach: int | None = None):
    """Box, Dirac operator and polar unitary sized for :func:`index_via_sf`."""
    if model.d == 1:
        reach = model.b if reach is None else reach
        grid = max(64, 4 * reach)
    else:
        reach = 3 if reach is None else reach
        grid = 32
    r_inner = 2 * rho + 2 * model.b
    R = int(np.ceil(r_inner)) + reach + 1
    radius = None if model.d == 1 else r_inner + reach * np.sqrt(model.d) + 0.5
    box = model.box(R, radius)
    U = lattice_polar(model, box, grid=grid, reach=reach)
    return U, build_dirac(box, model.rep), r_inner


# --- proof chain ------------------------------------------------------------------------

@dataclass
class LinkResult:
    link: str
    passed: bool
    witness: dict

    def line(self) -> str:
        wit = " ".join(f"{k}={_fmt(v)}" for k, v in self.witness.items())
        return f"({self.link}) {'pass' if self.passed else 'FAIL'} {wit}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


@dataclass
class ChainReport:
    links: list
    index: int | None
    kappa: float
    rho: float

    @property
    def passed(self) -> bool:
        return all(l.passed for l in self.links)

    def text(self) -> str:
        return "\n".join(l.line() for l in self.links)


def _sf_or_none(F0, F1):
    """Signature flow, or None when an endpoint is singular (the link then fails)."""
    try:
        return sf_by_signature(F0, F1)
    except (NotInvertible, OddDifference):
        return None


def _sig_or_none(M):
    try:
        return inertia(M).signature
    except SingularAtTolerance:
        return None


def _gap(M):
    return float(np.abs(scipy.linalg.eigvalsh(M)).min())


def proof_chain_check(model, kappa: float, rho: float, r_inner: float | None = None, points: int = 64,
                      max_halvings: int = 8, kappa_scan: bool = True, raise_on_failure: bool = True) -> ChainReport:
    """Numerical replay of index = SF = half-signature for a d = 1 model.

    Links: (a) 2 Pi - 1 deforms into kappa F_rho(D) without flow, (b) mass
    insertion, (c) replacing U F U* by F in the upper-left entry, (d) polar
    deformation U -> A, (e) off-diagonal decoupling of the ball from its
    complement, (f) SF from diag(kD, -kD) equals the half-signature, together
    with the taper lambda-path.
    """
    if isinstance(model, ModelSpec):
        if model.d != 1:
            raise PreconditionViolated("proof chain replay is implemented for d = 1")
        spec = model
    else:
        raise TypeError("proof_chain_check expects a ModelSpec")
    norms = spec.declared
    b = max(spec.b, 1)
    if r_inner is None:
        r_inner = 2 * rho + 2 * b + 4
    R = int(np.ceil(r_inner)) + 2 * b + 2
    box = spec.box(R)
    A = spec.build(box)
    D = spec.dirac(box)
    U = lattice_polar(spec, box, grid=max(64, 8 * b), reach=b)
    links = []

    def fail(link, msg, witness):
        links.append(LinkResult(link, False, witness))
        if raise_on_failure:
            raise LinkFailed(link, msg)

    inner = _inner_rows(D, r_inner)
    Pi = hardy_projection(D).matrix
    Fd = bounded_transform(D, rho).matrix
    eye = sp.identity(box.dim, format="csr")
    X0 = 2 * Pi - eye
    Ur = U.matrix[:, inner]
    comp = lambda M: M[inner][:, inner].toarray()
    conj = lambda M: (Ur.conj().T @ M @ Ur).toarray()

    # (a)
    sf_hardy = _sf_or_none(conj(X0), comp(X0))
    sf_dirac = _sf_or_none(kappa * conj(Fd), kappa * comp(Fd))
    Xs = lambda s: (1 - s) * X0 + s * kappa * Fd
    lip_a = float(abs(X0 - kappa * Fd).sum(axis=1).max())
    c_plain = certify_path(lambda s: comp(Xs(s)), lip_a, points)
    c_conj = certify_path(lambda s: conj(Xs(s)), lip_a, points)
    wit = {"sf_hardy": sf_hardy, "sf_dirac": sf_dirac, "gap": min(c_plain.min_gap, c_conj.min_gap),
           "certified": c_plain.certified and c_conj.certified}
    if sf_hardy != sf_dirac or not wit["certified"]:
        fail("a", "deforming 2Pi-1 into kappa F(D) changed the flow", wit)
    else:
        links.append(LinkResult("a", True, wit))
    index = sf_dirac

    # (b) mass term: [[k U F U*, sU], [sU*, -k F]]
    rowsU = U.matrix[inner]
    UFU = kappa * (rowsU @ Fd @ rowsU.conj().T).toarray()
    Uin = comp(U.matrix)
    Fin = kappa * comp(Fd)
    massed = lambda s: np.block([[UFU, s * Uin], [s * Uin.conj().T, -Fin]])
    zero = np.zeros_like(Fin)
    start = np.block([[Fin, zero], [zero, -Fin]])
    sf_b = _sf_or_none(start, massed(1.0))
    c_b = certify_path(massed, float(np.linalg.norm(Uin, 2)), points)
    sf_unmassed = _sf_or_none(start, massed(0.0))
    wit = {"sf_massed": sf_b, "sf_unmassed": sf_unmassed, "gap": c_b.min_gap, "certified": c_b.certified}
    if sf_b != index or sf_unmassed != index or not c_b.certified:
        fail("b", "mass insertion changed the flow", wit)
    else:
        links.append(LinkResult("b", True, wit))

    # (c) upper-left U F U* -> F; scan kappa down if the gap is too small
    def link_c(k):
        top0 = (k / kappa) * UFU
        top1 = k * comp(Fd)
        path = lambda s: np.block([[(1 - s) * top0 + s * top1, Uin], [Uin.conj().T, -top1]])
        cert = certify_path(path, float(np.linalg.norm(top1 - top0, 2)), points)
        return cert, _sf_or_none(path(0.0), path(1.0))

    k_c, tried = kappa, []
    for _ in range(max_halvings + 1):
        cert_c, sf_c = link_c(k_c)
        tried.append(k_c)
        if cert_c.certified and cert_c.min_gap >= norms.g / 4 and sf_c == 0:
            break
        if not kappa_scan:
            break
        k_c /= 2
    wit = {"kappa_witness": k_c, "halvings": len(tried) - 1, "gap": cert_c.min_gap, "sf": sf_c,
           "certified": cert_c.certified}
    if not (cert_c.certified and cert_c.min_gap >= norms.g / 4 and sf_c == 0):
        fail("c", "upper-left replacement path closes the gap", wit)
    else:
        links.append(LinkResult("c", True, wit))

    # (d) polar deformation A_s = U((1-s) + s|A|)
    Ab = A.matrix.toarray()
    Ub = U.matrix.toarray()
    absAb = Ub.conj().T @ Ab
    Ad = lambda s: (Ub @ ((1 - s) * np.eye(box.dim) + s * absAb))[np.ix_(inner, inner)]
    path_d = lambda s: np.block([[Fin, Ad(s)], [Ad(s).conj().T, -Fin]])
    lip_d = float(np.linalg.norm(Ub @ (absAb - np.eye(box.dim)), 2))
    c_d = certify_path(path_d, lip_d, points) if lip_d > 1e-12 else certify_path(path_d, 0.0, 2)
    sf_d = _sf_or_none(start, path_d(1.0))
    wit = {"gap": c_d.min_gap, "lipschitz": lip_d, "sf": sf_d, "certified": c_d.certified}
    if sf_d != index or not c_d.certified:
        fail("d", "polar deformation closes the gap", wit)
    else:
        links.append(LinkResult("d", True, wit))

    # (e) off-diagonal decoupling on the inner ball, with F_rho(D) in place of D
    Fop = block_diagonal(box, np.asarray(bounded_transform(D, rho).site_blocks))
    amb = ball_projection(D, r_inner)
    if kappa * rho**2 < 2 * norms.commNorm:
        fail("e", "kappa rho^2 below 2||[D,A]||", {"kappa_rho2": kappa * rho**2})
    off = OffDiagonalHomotopy(A, Fop, kappa, rho, ambient=amb)
    c_e = certify_path(off, off.lipschitz(), points)
    Lc = off.complement_block
    sq_min = float(np.linalg.eigvalsh(Lc @ Lc).min())
    lower = kappa**2 * rho**2 - kappa * norms.commNorm
    sig_c, sig_amb, sig_ball = (_sig_or_none(M) for M in (Lc, off(1.0), off.inner_block))
    wit = {"gap": c_e.min_gap, "certified": c_e.certified, "complement_sq_min": sq_min, "bound": lower,
           "sig_complement": sig_c, "sig_ball": sig_ball, "sig_ambient": sig_amb}
    if not (c_e.certified and sq_min >= lower - 1e-9 and sig_c == 0 and sig_amb == sig_ball == 2 * index):
        fail("e", "off-diagonal homotopy not certified", wit)
    else:
        links.append(LinkResult("e", True, wit))

    # (f) finite-dimensional identity on H_rho, plus the taper lambda-path
    proj = ball_projection(D, rho)
    Arho, Drho = restrict(A, proj), restrict(D, proj)
    prob = assemble(Arho, Drho, kappa, norms, rho)
    diag0 = scipy.linalg.block_diag(kappa * Drho, -kappa * Drho)
    sig_diag = inertia(diag0).signature
    sf_f = _sf_or_none(diag0, prob.matrix)
    try:
        rep = gap_check(prob)
        hs, gap, label = half_signature(rep.inertia), rep.gap_measured, rep.label
    except PairingError:
        hs, gap, label = None, 0.0, "singular"
    wit = {"sf": sf_f, "half_signature": hs, "sig_diag": sig_diag, "gap": gap, "regime": label}
    # the Lipschitz certificate is a numerical statement and does not need the regime
    tp = TaperHomotopy(A, D, kappa, rho, min(rho + 5, R - 1))
    c_t = certify_path(tp, tp.lipschitz(norms.normA), points)
    wit.update(taper_gap=c_t.min_gap, taper_certified=c_t.certified, points=points)
    taper_ok = c_t.certified
    if not (hs is not None and sf_f == hs == index and sig_diag == 0 and taper_ok):
        fail("f", "half-signature differs from the spectral flow", wit)
    else:
        links.append(LinkResult("f", True, wit))
    return ChainReport(links, index if all(l.passed for l in links) else None, kappa, rho)
