"""Finite-volume spectral localizer L = [[kD, A], [A*, -kD]] and its certificates.

Besides assembly and the admissibility check, this module carries the taper
function G_rho used to compare balls of different radii, and the two
homotopies (taper in lambda, off-diagonal decoupling in t) that are verified
by sampling plus a Lipschitz bound.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .clifford import build_clifford
from .errors import (
    DimensionMismatch,
    FourierBoundViolated,
    GapBoundViolated,
    GapClosed,
    NotHermitian,
    PreconditionViolated,
    SingularAtTolerance,
    ZeroCommutator,
)
from .inertia import InertiaResult, half_signature, inertia
from .lattice import (
    BallProjection,
    LatticeOperator,
    ball_projection,
    build_dirac,
    double,
    restrict,
    restrict_blocks,
)
from .models import ModelSpec, NormData, resolve_norms

UNIT_ROUNDOFF = np.finfo(float).eps / 2


# --- regime ----------------------------------------------------------------------

def kappa0(norms: NormData) -> float:
    """g^3 / (12 ||A|| ||[D, A]||)."""
    if norms.commNorm <= 0:
        raise ZeroCommutator("[D, A] = 0: every kappa is admissible")
    return norms.g**3 / (12 * norms.normA * norms.commNorm)


@dataclass
class RegimeReport:
    kappa: float
    rho: float
    g: float
    kappa0: float
    certified: bool
    heuristic: bool = False
    gap_measured: float | None = None
    inertia: InertiaResult | None = field(default=None, repr=False)

    @property
    def label(self) -> str:
        if self.certified:
            return "certified"
        return "heuristic" if self.heuristic else "unverified"


def check_regime(kappa: float, rho: float, norms: NormData) -> RegimeReport:
    """Certified iff kappa <= kappa0 and 2 g / kappa < rho."""
    if kappa < 0 or rho <= 0:
        raise ValueError("kappa must be nonnegative and rho positive")
    try:
        k0 = kappa0(norms)
    except ZeroCommutator:
        k0 = np.inf
    certified = bool(kappa > 0 and kappa <= k0 and 2 * norms.g / kappa < rho)
    return RegimeReport(kappa, rho, norms.g, k0, certified)


# --- assembly ----------------------------------------------------------------------

@dataclass
class LocalizerProblem:
    kappa: float
    rho: float | None
    Arho: object
    Drho: object
    norms: NormData | None
    matrix: object
    dirac_blocks: np.ndarray | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def sparse(self) -> bool:
        return sp.issparse(self.matrix)


def assemble(Arho, Drho, kappa: float, norms: NormData | None = None, rho: float | None = None,
             dirac_blocks=None) -> LocalizerProblem:
    if Arho.shape != Drho.shape or Arho.shape[0] != Arho.shape[1]:
        raise DimensionMismatch(f"A_rho {Arho.shape} and D_rho {Drho.shape} must be square of equal size")
    dev = abs(Drho - Drho.conj().T)
    dev = dev.max() if (not sp.issparse(dev) or dev.nnz) else 0.0
    if dev > 1e-13 * max(1.0, abs(Drho).max()):
        raise NotHermitian(f"D_rho is not Hermitian (deviation {dev:.2e})")
    if sp.issparse(Arho) or sp.issparse(Drho):
        A, D = sp.csr_matrix(Arho), sp.csr_matrix(Drho)
        M = sp.bmat([[kappa * D, A], [A.conj().T, -kappa * D]], format="csr")
    else:
        A, D = np.asarray(Arho, dtype=complex), np.asarray(Drho, dtype=complex)
        M = np.block([[kappa * D, A], [A.conj().T, -kappa * D]])
    return LocalizerProblem(kappa, rho, Arho, Drho, norms, M, dirac_blocks)


def _rotated_localizer(prob: LocalizerProblem):
    """Congruent form with each site block of D diagonalized (nonzero diagonal)."""
    w, v = np.linalg.eigh(prob.dirac_blocks)
    V = sp.block_diag(list(v), format="csr")
    lam = w.ravel()
    Ap = (V.conj().T @ sp.csr_matrix(prob.Arho) @ V).tocsr()
    Ap.data[np.abs(Ap.data) < 1e-15 * max(1.0, np.abs(Ap.data).max())] = 0
    Ap.eliminate_zeros()
    k = prob.kappa
    return sp.bmat([[sp.diags(k * lam), Ap], [Ap.conj().T, sp.diags(-k * lam)]], format="csc")


def gap_check(prob: LocalizerProblem, dtype=None) -> RegimeReport:
    """Inertia and smallest |eigenvalue| of the localizer, checked against g/2.

    Raises GapClosed when the matrix is singular at working tolerance and
    GapBoundViolated when a certified pair yields a gap below g/2.
    """
    norms = prob.norms
    rho = prob.rho if prob.rho is not None else np.inf
    rep = check_regime(prob.kappa, rho, norms) if norms is not None else RegimeReport(
        prob.kappa, rho, np.nan, np.nan, False)
    M = prob.matrix
    if prob.sparse and prob.dirac_blocks is not None:
        M = _rotated_localizer(prob)
    if prob.sparse and dtype is None and M.shape[0] > 40000:
        dtype = np.complex64
    normL = float(abs(M).sum(axis=0).max())
    thr = norms.g / 4 if rep.certified else 1e-10 * normL
    try:
        res = inertia(M, zero_threshold=thr, dtype=dtype)
    except SingularAtTolerance as exc:
        if rep.certified:
            raise GapBoundViolated(f"certified localizer has gap below g/4: {exc}") from exc
        raise GapClosed(f"localizer singular at tolerance: {exc}") from exc
    rep.inertia = res
    rep.gap_measured = res.gap
    if rep.certified and res.gap < norms.g / 2 - 1e-10:
        raise GapBoundViolated(f"gap {res.gap:.6g} below g/2 = {norms.g / 2:.6g} in the certified regime")
    if not rep.certified and norms is not None:
        rep.heuristic = bool(prob.kappa > 0 and res.gap >= max(norms.g / 2, 10 * UNIT_ROUNDOFF * M.shape[0]))
    return rep


@dataclass
class LocalizerResult:
    model: str
    params: dict
    kappa: float
    rho: float
    mode: str
    dimension: int
    regime: RegimeReport
    half_signature: int
    seconds: float
    oracle_index: int | None = None

    @property
    def inertia(self) -> InertiaResult:
        return self.regime.inertia

    @property
    def match(self) -> bool | None:
        return None if self.oracle_index is None else self.half_signature == self.oracle_index

    def row(self) -> dict:
        inr = self.inertia
        return {
            "model": self.model,
            "params": ";".join(f"{k}={v}" for k, v in sorted(self.params.items())),
            "kappa": repr(float(self.kappa)),
            "rho": repr(float(self.rho)),
            "certified": int(self.regime.certified),
            "heuristic": int(self.regime.heuristic),
            "gap": f"{self.regime.gap_measured:.12g}",
            "n_plus": inr.n_plus,
            "n_minus": inr.n_minus,
            "signature": inr.signature,
            "half_signature": self.half_signature,
            "oracle_index": "" if self.oracle_index is None else self.oracle_index,
            "match": "" if self.match is None else int(self.match),
            "mode": self.mode,
        }


CSV_COLUMNS = ("model", "params", "kappa", "rho", "certified", "heuristic", "gap", "n_plus", "n_minus",
               "signature", "half_signature", "oracle_index", "match", "mode")


def ambient_box(model: ModelSpec, rho: float, mode: str = "ball", pad: int | None = None):
    """Smallest box holding the ball (or cube) of radius rho plus ``pad`` sites."""
    pad = model.b + 1 if pad is None else pad
    reach = rho * np.sqrt(model.d) if mode == "cube" else rho
    R = int(np.ceil(reach)) + pad
    radius = None if model.d == 1 else reach + pad - 0.5
    return model.box(R, radius)


def localize(A, kappa: float, rho: float, mode: str = "ball", norms: NormData | None = None,
             dtype=None, oracle_index: int | None = None, dense_limit: int = 4000) -> LocalizerResult:
    """Half-signature of L_{kappa, rho} for a model or a lattice operator."""
    t0 = time.perf_counter()
    if isinstance(A, ModelSpec):
        model = A
        A = model.build(ambient_box(model, rho, mode))
    box = A.box
    D = build_dirac(box, build_clifford(box.d))
    proj = ball_projection(D, rho, mode)
    if norms is None:
        norms = resolve_norms(A, D, proj)
    dense = 2 * proj.dimension <= dense_limit
    prob = assemble(restrict(A, proj, dense), restrict(D, proj, dense), kappa, norms, rho,
                    dirac_blocks=restrict_blocks(D, proj))
    rep = gap_check(prob, dtype)
    hs = half_signature(rep.inertia)
    name = A.model.name if A.model is not None else "operator"
    params = dict(A.model.params) if A.model is not None else {}
    return LocalizerResult(name, params, kappa, rho, mode, prob.dimension, rep, hs,
                           time.perf_counter() - t0, oracle_index)


def sweep(model: ModelSpec, kappas, rhos, modes=("ball",), oracle_index: int | None = None,
          workers: int = 1, **kw) -> list[LocalizerResult]:
    """Localizer over a (mode, kappa, rho) grid; rows come back in grid order."""
    grid = [(m, k, r) for m in modes for k in kappas for r in rhos]
    if not grid:
        raise ValueError("empty parameter grid")
    run = lambda p: localize(model, p[1], p[2], mode=p[0], oracle_index=oracle_index, **kw)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run, grid))
    return [run(p) for p in grid]


def constancy_violations(results) -> list[LocalizerResult]:
    """Certified rows whose half-signature differs from the first certified row."""
    cert = [r for r in results if r.regime.certified]
    if not cert:
        return []
    ref = cert[0].half_signature
    return [r for r in cert if r.half_signature != ref]


def write_csv(results, fh=None) -> str:
    buf = fh if fh is not None else io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row())
    return buf.getvalue() if fh is None else ""


# --- taper function ------------------------------------------------------------------

def _mollifier_cdf(y, a):
    y = np.clip(y, -a, a)
    return (y + a) / (2 * a) + np.sin(np.pi * y / a) / (2 * np.pi)


def _mollifier(y, a):
    return np.where(np.abs(y) < a, np.cos(np.pi * y / (2 * a)) ** 2 / a, 0.0)


def _mollifier_fourier(v):
    """int phi(y) e^{-i xi y} dy as a function of v = a xi (even, entire)."""
    v = np.abs(np.asarray(v, dtype=float))
    small = v < 1
    out = np.empty_like(v)
    vs = v[small]
    out[small] = np.sinc(vs / np.pi) * np.pi**2 / (np.pi**2 - vs**2)
    vl = v[~small]
    # sin(v)/(pi - v) written as a sinc so that v = pi is regular
    out[~small] = np.sinc((np.pi - vl) / np.pi) * np.pi**2 / (vl * (np.pi + vl))
    return out


def taper_fourier_l1(rho: float, panels: int = 6000, order: int = 16) -> dict:
    """||FT(G_rho')||_1 by Gauss-Legendre panels between the kinks, with mesh doubling.

    With FT f(xi) = (1/2 pi) int f(x) e^{-i xi x} dx, the integrand in u = rho xi
    is |sin(3u/4) Phi(u/4)| / pi, kinked at u = 4 pi k / 3.  The two levels use
    (panels, order) and (2 panels, 2 order); the neglected tail beyond U is
    bounded in closed form and added to the reported upper bound.
    """
    a = 0.25

    def level(P, q):
        x, w = np.polynomial.legendre.leggauss(q)
        h = 4 * np.pi / 3
        left = h * np.arange(P)[:, None]
        u = left + h * (x[None, :] + 1) / 2
        f = np.abs(np.sin(0.75 * u) * _mollifier_fourier(a * u)) / np.pi
        U = h * P
        tail = -np.log1p(-(np.pi / (a * U)) ** 2) / (2 * np.pi * a)
        return 2 * (f @ w).sum() * h / 2, 2 * tail

    v1, t1 = level(panels, order)
    v2, t2 = level(2 * panels, 2 * order)
    return {"value": v2 / rho, "coarse": v1 / rho, "difference": abs(v2 - v1) / rho,
            "tail_bound": t2 / rho, "upper_bound": (v2 + t2) / rho}


@dataclass
class TaperFunction:
    """Even C^1 cutoff: 1 on [-rho/2, rho/2], 0 outside (-rho, rho).

    Indicator of [-3 rho/4, 3 rho/4] convolved with (1/a) cos^2(pi y / 2a),
    a = rho/4.
    """

    rho: float
    fourier_l1_bound: float
    quadrature: dict = field(repr=False, default_factory=dict)

    @property
    def half_width(self) -> float:
        return self.rho / 4

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        c, a = 0.75 * self.rho, self.half_width
        return _mollifier_cdf(x + c, a) - _mollifier_cdf(x - c, a)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        c, a = 0.75 * self.rho, self.half_width
        return _mollifier(x + c, a) - _mollifier(x - c, a)

    __call__ = eval


def build_taper(rho: float) -> TaperFunction:
    if rho <= 0:
        raise ValueError("rho must be positive")
    q = taper_fourier_l1(rho)
    if q["upper_bound"] > 8 / rho + 1e-6:
        raise FourierBoundViolated(f"||FT(G')||_1 = {q['upper_bound']:.6g} exceeds 8/rho = {8 / rho:.6g}")
    return TaperFunction(float(rho), q["upper_bound"], q)


def taper_bound(rho: float, commNorm: float) -> float:
    return 8 * commNorm / rho


def _scalar_site_values(Dp: LatticeOperator, f) -> np.ndarray | None:
    """Per-row values f(|lambda|) when every site block of Dp has a single |eigenvalue|."""
    w = np.abs(np.linalg.eigvalsh(Dp.site_blocks))
    if np.ptp(w, axis=1).max() > 1e-12 * max(1.0, w.max()):
        return None
    return np.repeat(f(w[:, 0]), Dp.box.N)


def _function_of(Dp: LatticeOperator, f):
    vals = _scalar_site_values(Dp, f)
    if vals is not None:
        return sp.diags(vals, format="csr"), vals
    from .lattice import site_function

    return site_function(Dp, f).matrix, None


def taper_commutator_check(G: TaperFunction, Dprime: LatticeOperator, H: LatticeOperator) -> float:
    """||[G_rho(D'), H]|| as an operator 2-norm.

    The commutator is anti-Hermitian, so its norm is the largest |eigenvalue|
    of i[G, H], found by Lanczos on the rows where it does not vanish.
    """
    if Dprime.box != H.box:
        raise DimensionMismatch("D' and H live on different boxes")
    Gm, vals = _function_of(Dprime, G.eval)
    if vals is not None:
        coo = H.matrix.tocoo()
        data = (vals[coo.row] - vals[coo.col]) * coo.data
        C = sp.csr_matrix((data, (coo.row, coo.col)), shape=H.shape)
    else:
        C = (Gm @ H.matrix - H.matrix @ Gm).tocsr()
    C.data[np.abs(C.data) < 1e-15] = 0
    C.eliminate_zeros()
    if C.nnz == 0:
        return 0.0
    keep = np.union1d(np.unique(C.nonzero()[0]), np.unique(C.nonzero()[1]))
    C = (1j * C[keep][:, keep]).tocsr()
    if C.shape[0] <= 3000:
        return float(np.abs(scipy.linalg.eigvalsh(C.toarray())).max())
    w = spla.eigsh(C, k=1, which="LM", tol=1e-10, return_eigenvectors=False,
                   v0=np.ones(C.shape[0], dtype=complex))
    return float(np.abs(w).max())


# --- homotopies ------------------------------------------------------------------------

@dataclass
class PathCertificate:
    """Sampled gaps of an affine-or-Lipschitz matrix path.

    Certified when the smallest sampled gap exceeds step * lipschitz, which
    bounds how far any eigenvalue can move between neighbouring samples.
    """

    points: int
    lipschitz: float
    min_gap: float
    gaps: np.ndarray = field(repr=False)
    norm: float = 1.0

    @property
    def step(self) -> float:
        return 1.0 / (self.points - 1)

    @property
    def certified(self) -> bool:
        return bool(self.min_gap > self.step * self.lipschitz and self.min_gap > 1e-6 * self.norm)

    def as_dict(self) -> dict:
        return {"points": self.points, "min_gap": self.min_gap, "lipschitz": self.lipschitz,
                "step": self.step, "certified": self.certified}


def certify_path(evaluate, lipschitz: float, points: int = 64) -> PathCertificate:
    ts = np.linspace(0.0, 1.0, points)
    gaps = np.empty(points)
    norm = 0.0
    for i, t in enumerate(ts):
        M = evaluate(t)
        w = scipy.linalg.eigvalsh(M)
        gaps[i] = np.abs(w).min()
        norm = max(norm, np.abs(w).max())
    return PathCertificate(points, float(lipschitz), float(gaps.min()), gaps, norm)


def _site_rows_within(box, Dp_blocks, rows, radius):
    """Subset of ``rows`` whose site block of D'^2 is <= radius^2."""
    w = np.abs(np.linalg.eigvalsh(Dp_blocks)).max(axis=1)
    site = rows // box.N
    return rows[w[site] <= radius * (1 + 1e-12)]


class TaperHomotopy:
    """lambda -> kappa D'_{rho'} + pi_{rho'} G_lam H G_lam pi_{rho'}^*, G_lam = (1-lam) + lam G_rho(D')."""

    def __init__(self, A: LatticeOperator, D: LatticeOperator, kappa: float, rho: float, rhoPrime: float,
                 taper: TaperFunction | None = None):
        if not rho <= rhoPrime:
            raise PreconditionViolated(f"need rho <= rho', got {rho} > {rhoPrime}")
        self.kappa, self.rho, self.rhoPrime = kappa, rho, rhoPrime
        self.taper = taper or build_taper(rho)
        H, Dp = double(A, D)
        proj = ball_projection(Dp, rhoPrime)
        self.rows = proj.rows
        self.Dp = restrict(Dp, proj)
        self.H = restrict(H, proj)
        blocks = restrict_blocks(Dp, proj)
        w = np.abs(np.linalg.eigvalsh(blocks))
        self.g = np.repeat(self.taper.eval(w.max(axis=1)), Dp.box.N)
        if np.ptp(w, axis=1).max() > 1e-12:
            raise PreconditionViolated("taper homotopy needs site blocks of D with a single |eigenvalue|")

    def __call__(self, lam: float) -> np.ndarray:
        if not 0 <= lam <= 1:
            raise PreconditionViolated(f"lambda={lam} outside [0, 1]")
        gl = (1 - lam) + lam * self.g
        return self.kappa * self.Dp + gl[:, None] * self.H * gl[None, :]

    def annulus(self) -> np.ndarray:
        """Indices (within the rho' ball) where G_rho vanishes."""
        return np.nonzero(self.g == 0)[0]

    def lipschitz(self, normA: float) -> float:
        # d/dlam of G H G is (G-1) H G_lam + G_lam H (G-1), with 0 <= G <= 1
        return 2 * normA


def taper_homotopy(kappa: float, rho: float, rhoPrime: float, lam: float, A: LatticeOperator,
                   D: LatticeOperator, taper: TaperFunction | None = None) -> np.ndarray:
    return TaperHomotopy(A, D, kappa, rho, rhoPrime, taper)(lam)


def taper_homotopy_certificate(A: LatticeOperator, D: LatticeOperator, kappa: float, rho: float,
                               rhoPrime: float, norms: NormData, points: int = 64) -> dict:
    """Invertibility of the lambda-path, plus the signatures it connects."""
    rep = check_regime(kappa, rho, norms)
    if not rep.certified:
        raise PreconditionViolated(f"(kappa={kappa}, rho={rho}) is not in the certified regime")
    path = TaperHomotopy(A, D, kappa, rho, rhoPrime)
    cert = certify_path(path, path.lipschitz(norms.normA), points)
    M1 = path(1.0)
    ann = path.annulus()
    inner = np.setdiff1d(np.arange(M1.shape[0]), ann)
    sig = lambda M: inertia(M).signature
    return {
        "path": cert,
        "signature_start": sig(path(0.0)),
        "signature_end": sig(M1),
        "annulus_signature": sig(M1[np.ix_(ann, ann)]) if len(ann) else 0,
        "decoupled": bool(np.abs(M1[np.ix_(ann, inner)]).max() == 0) if len(ann) and len(inner) else True,
    }


class OffDiagonalHomotopy:
    """t -> L_rho (+) L_rho^c + t * (coupling between ball and complement).

    The ambient space is the whole box, or a larger ball given by ``ambient``.
    At t = 1 this is the ambient localizer with rows ordered ball first.
    """

    def __init__(self, A: LatticeOperator, D: LatticeOperator, kappa: float, rho: float,
                 ambient: BallProjection | None = None):
        H, Dp = double(A, D)
        if ambient is None:
            rows = np.arange(Dp.box.dim)
        else:
            if ambient.box != A.box:
                raise PreconditionViolated("ambient projection is on a different box")
            rows = np.concatenate([ambient.rows, ambient.rows + A.box.base_dim])
        inner = _site_rows_within(Dp.box, Dp.site_blocks, rows, rho)
        outer = np.setdiff1d(rows, inner)
        order = np.concatenate([inner, outer])
        L = (kappa * Dp.matrix + H.matrix)[order][:, order].toarray()
        n1 = len(inner)
        self.kappa, self.rho, self.n_inner = kappa, rho, n1
        self.diag = L.copy()
        self.diag[:n1, n1:] = 0
        self.diag[n1:, :n1] = 0
        self.coupling = L - self.diag

    def __call__(self, t: float) -> np.ndarray:
        if not 0 <= t <= 1:
            raise PreconditionViolated(f"t={t} outside [0, 1]")
        return self.diag + t * self.coupling

    @property
    def inner_block(self):
        return self.diag[: self.n_inner, : self.n_inner]

    @property
    def complement_block(self):
        return self.diag[self.n_inner:, self.n_inner:]

    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.coupling, 2)) if self.coupling.any() else 0.0


def offdiagonal_homotopy(kappa: float, rho: float, t: float, A: LatticeOperator, D: LatticeOperator,
                         ambient: BallProjection | None = None) -> np.ndarray:
    return OffDiagonalHomotopy(A, D, kappa, rho, ambient)(t)


def offdiagonal_certificate(A: LatticeOperator, D: LatticeOperator, kappa: float, rho: float,
                            norms: NormData, ambient: BallProjection | None = None, points: int = 64) -> dict:
    """Invertibility of the t-path and the complement gap bound.

    Requires kappa rho^2 >= 2 ||[D, A]||, so that the complement block squared
    is at least kappa^2 rho^2 / 2.
    """
    if kappa * rho**2 < 2 * norms.commNorm:
        raise PreconditionViolated(f"kappa rho^2 = {kappa * rho**2:.4g} below 2||[D,A]|| = {2 * norms.commNorm:.4g}")
    path = OffDiagonalHomotopy(A, D, kappa, rho, ambient)
    cert = certify_path(path, path.lipschitz(), points)
    Lc = path.complement_block
    lower = kappa**2 * rho**2 - kappa * norms.commNorm
    sq_min = float(np.linalg.eigvalsh(Lc @ Lc).min()) if Lc.size else np.inf
    sig = lambda M: inertia(M).signature if M.size else 0
    return {
        "path": cert,
        "complement_square_min": sq_min,
        "complement_lower_bound": lower,
        "complement_bound_holds": bool(sq_min >= lower - 1e-9),
        "complement_signature": sig(Lc),
        "ball_signature": sig(path.inner_block),
        "ambient_signature": sig(path(1.0)),
    }
