"""Gallery of invertible lattice operators with computable index pairings.

A model is translation invariant, A|n> = sum_h |n+h> A_h, with symbol
A(k) = sum_h A_h exp(i k.h).  Hopping blocks act on an orbital space; on a
lattice the fiber is orbital (x) Clifford and A acts trivially on the Clifford
factor.

Index convention: Ind(Pi A Pi + 1 - Pi) = (-1)**((d+1)/2) * W_d(A), with
W_1 the winding number of det A(k) and W_3 = (1/24 pi^2) int tr (A^-1 dA)^3.
For the shift S|n> = |n+1> this gives Ind = -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse as sp

from .clifford import build_clifford
from .errors import (
    GapClosing,
    NotConverged,
    NotPeriodic,
    PerturbationTooLarge,
    PhaseAmbiguous,
    WrongDimension,
)
from .lattice import LatticeOperator, SiteBox, build_dirac, from_hoppings

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class NormData:
    """||A||, g = ||A^-1||^-1 and ||[D, A]||.

    ``source`` is 'declared' for infinite-volume values and 'estimated' for
    finite-box singular values; ``padded`` is False when the box was too small
    for the estimate to be trusted.
    """

    normA: float
    g: float
    commNorm: float
    source: str = "declared"
    padded: bool = True

    def __post_init__(self):
        if not (0 < self.g <= self.normA * (1 + 1e-9)):
            raise ValueError(f"need 0 < g <= ||A||, got g={self.g}, ||A||={self.normA}")

    @property
    def normA_ge_1(self) -> bool:
        return self.normA >= 1 - 1e-12

    @property
    def g_le_1(self) -> bool:
        return self.g <= 1 + 1e-12

    def as_dict(self) -> dict:
        return {"normA": self.normA, "g": self.g, "commNorm": self.commNorm, "source": self.source,
                "padded": self.padded, "normA_ge_1": self.normA_ge_1, "g_le_1": self.g_le_1}


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    d: int
    b: int
    params: dict
    hoppings: dict
    orbitals: int = 1
    periodic: bool = True
    declared: NormData | None = field(default=None, repr=False)

    @property
    def rep(self):
        return build_clifford(self.d)

    @property
    def fiber(self) -> int:
        return self.orbitals * self.rep.N

    def box(self, R: int, radius: float | None = None) -> SiteBox:
        return SiteBox(self.d, R, self.fiber, radius=radius)

    def lattice_hoppings(self) -> dict:
        eye = np.eye(self.rep.N)
        return {h: np.kron(np.asarray(blk, dtype=complex), eye) for h, blk in self.hoppings.items()}

    def build(self, box: SiteBox, periodic: bool = False) -> LatticeOperator:
        if box.d != self.d:
            raise WrongDimension(f"model {self.name} is {self.d}-dimensional, box is {box.d}-dimensional")
        if box.N != self.fiber:
            raise WrongDimension(f"model {self.name} needs fiber {self.fiber}, box has {box.N}")
        return from_hoppings(box, self.lattice_hoppings(), periodic=periodic, model=self, norms=self.declared)

    def dirac(self, box: SiteBox) -> LatticeOperator:
        return build_dirac(box, self.rep)

    def symbol(self, k) -> np.ndarray:
        """A(k) for momenta of shape (..., d); returns (..., orb, orb)."""
        k = np.asarray(k, dtype=float)
        out = np.zeros(k.shape[:-1] + (self.orbitals, self.orbitals), dtype=complex)
        for h, blk in self.hoppings.items():
            out += np.exp(1j * (k @ np.asarray(h, dtype=float)))[..., None, None] * np.asarray(blk)
        return out

    def symbol_derivative(self, k) -> np.ndarray:
        """Partial derivatives d_j A(k), shape (d, ..., orb, orb)."""
        k = np.asarray(k, dtype=float)
        out = np.zeros((self.d,) + k.shape[:-1] + (self.orbitals, self.orbitals), dtype=complex)
        for h, blk in self.hoppings.items():
            h = np.asarray(h, dtype=float)
            ph = np.exp(1j * (k @ h))[..., None, None] * np.asarray(blk)
            for j in range(self.d):
                out[j] += 1j * h[j] * ph
        return out

    def describe(self) -> str:
        pars = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}({pars}) d={self.d} range={self.b} fiber={self.fiber}"


def momentum_grid(d: int, n: int) -> np.ndarray:
    k = 2 * np.pi * np.arange(n) / n
    return np.stack(np.meshgrid(*([k] * d), indexing="ij"), axis=-1)


def _polish(fun, starts, d):
    best = min(fun(x) for x in starts)
    for x0 in starts:
        res = scipy.optimize.minimize(fun, x0, method="Nelder-Mead",
                                      options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        best = min(best, res.fun)
    return best


def symbol_norms(model: ModelSpec, grid: int = 32) -> NormData:
    """Infinite-volume norm data from the symbol.

    ||A|| and g are the extremal singular values of A(k), and ||[D, A]|| is
    bounded by max_k ||sum_j d_j A(k) (x) gamma_j|| + ||[|0><0| gamma_1, A]||.
    Grid extrema are polished by a local search from the best grid points.
    """
    k = momentum_grid(model.d, grid).reshape(-1, model.d)
    sv = np.linalg.svd(model.symbol(k), compute_uv=False)
    g_vec, a_vec = sv[:, -1], sv[:, 0]

    gam = model.rep.gammas

    def dnorm(kk):
        dA = model.symbol_derivative(kk)
        M = sum(np.kron(dA[j], gam[j]) for j in range(model.d))
        return np.linalg.norm(M, 2, axis=(-2, -1)) if M.ndim > 2 else np.linalg.norm(M, 2)

    d_vec = dnorm(k)
    top = lambda v, n=4: k[np.argsort(v)[:n]]
    g = _polish(lambda x: np.linalg.svd(model.symbol(x), compute_uv=False)[-1], top(g_vec), model.d)
    normA = -_polish(lambda x: -np.linalg.svd(model.symbol(x), compute_uv=False)[0], top(-a_vec), model.d)
    dmax = -_polish(lambda x: -dnorm(x), top(-d_vec), model.d)

    # finite-rank correction from the mass term at the origin
    box = model.box(model.b + 1)
    A = model.build(box).matrix
    P0 = sp.lil_matrix((box.dim, box.dim), dtype=complex)
    o = int(box.site_index(np.zeros(model.d, dtype=int))) * box.N
    P0[o:o + box.N, o:o + box.N] = np.kron(np.eye(model.orbitals), gam[0])
    P0 = P0.tocsr()
    C = (P0 @ A - A @ P0).toarray()
    corr = np.linalg.norm(C, 2) if C.any() else 0.0
    return NormData(float(normA), float(g), float(dmax + corr), source="declared")


# --- gallery -----------------------------------------------------------------

CHIRAL_CRITICAL = (-3.0, -1.0, 1.0, 3.0)


def identity_model(d: int = 1) -> ModelSpec:
    return ModelSpec("identity", d, 0, {}, {(0,) * d: np.eye(1)}, declared=NormData(1.0, 1.0, 0.0))


def shift_model(m: int) -> ModelSpec:
    """A = S^m on l^2(Z); ||[D, S^m]|| = |m| + 1 because of the origin term of D."""
    m = int(m)
    if m == 0:
        raise ValueError("shift power must be nonzero")
    if abs(m) > 5:
        raise ValueError(f"|m| <= 5 required, got {m}")
    return ModelSpec("shift", 1, abs(m), {"m": m}, {(m,): np.eye(1)},
                     declared=NormData(1.0, 1.0, float(abs(m) + 1)))


def chiral_hoppings(mu: float) -> dict:
    hops = {(0, 0, 0): 1j * mu * np.eye(2)}
    for j in range(3):
        e = [0, 0, 0]
        e[j] = 1
        hops[tuple(e)] = SIGMA[j] / 2j + 0.5j * np.eye(2)
        e[j] = -1
        hops[tuple(e)] = -SIGMA[j] / 2j + 0.5j * np.eye(2)
    return hops


def chiral_3d_model(mu: float) -> ModelSpec:
    """Symbol sum_j sin(k_j) sigma_j + i(mu + sum_j cos k_j); gap closes at mu in {+-1, +-3}."""
    mu = float(mu)
    near = [c for c in CHIRAL_CRITICAL if abs(mu - c) < 1e-6]
    if near:
        raise GapClosing(f"mu={mu} is at the gap-closing value {near[0]}")
    spec = ModelSpec("chiral_3d", 3, 1, {"mu": mu}, chiral_hoppings(mu), orbitals=2)
    object.__setattr__(spec, "declared", symbol_norms(spec))
    return spec


GALLERY = {
    "identity": (identity_model, "A = 1 on l^2(Z); index 0"),
    "shift": (shift_model, "A = S^m on l^2(Z), parameter m; index -m"),
    "chiral_3d": (chiral_3d_model, "two-band chiral model on Z^3, parameter mu; index from the degree oracle"),
}


def get_model(name: str, **params) -> ModelSpec:
    try:
        factory = GALLERY[name][0]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; available: {', '.join(GALLERY)}") from None
    return factory(**params)


def build_shift_power(m: int, box: SiteBox) -> LatticeOperator:
    if box.d != 1:
        raise WrongDimension(f"shift model needs d=1, got d={box.d}")
    if box.R < 4 * abs(m):
        raise ValueError(f"box radius {box.R} below 4|m| = {4 * abs(m)}")
    return shift_model(m).build(box)


def build_chiral_3d(mu: float, box: SiteBox) -> LatticeOperator:
    if box.d != 3:
        raise WrongDimension(f"chiral model needs d=3, got d={box.d}")
    return chiral_3d_model(mu).build(box)


# --- perturbations and norm estimates ----------------------------------------

def _dirac_for(box: SiteBox) -> LatticeOperator:
    return build_dirac(box, build_clifford(box.d))


def perturb(A: LatticeOperator, epsilon: float, seed: int, g: float | None = None) -> LatticeOperator:
    """Add a seeded nearest-neighbour Hermitian perturbation V with ||V|| <= epsilon.

    The norm is controlled by the Gershgorin row-sum bound.  The returned
    operator carries norm data shifted by Weyl's inequality.
    """
    base = A.norms
    if g is None:
        if base is None:
            raise ValueError("no norm data attached to A; pass g explicitly")
        g = base.g
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if epsilon >= g / 4:
        raise PerturbationTooLarge(f"epsilon={epsilon} is not below g/4={g / 4}")
    if epsilon == 0:
        return A
    box = A.box
    rng = np.random.default_rng(seed)
    N = box.N
    blocks = {}
    X = rng.standard_normal((box.nsites, N, N)) + 1j * rng.standard_normal((box.nsites, N, N))
    blocks[(0,) * box.d] = (X + np.conj(np.swapaxes(X, 1, 2))) / 2
    for j in range(box.d):
        e = np.zeros(box.d, dtype=int)
        e[j] = 1
        blocks[tuple(e)] = rng.standard_normal((box.nsites, N, N)) + 1j * rng.standard_normal((box.nsites, N, N))
    rows, cols, vals = [], [], []
    src = np.arange(box.nsites)
    fa, fb = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    for h, blk in blocks.items():
        tgt = box.site_index(box.sites + np.asarray(h))
        ok = tgt >= 0
        s, t = src[ok], tgt[ok]
        rows.append((t[:, None, None] * N + fa).ravel())
        cols.append((s[:, None, None] * N + fb).ravel())
        vals.append(blk[ok].ravel())
        if any(h):
            rows.append((s[:, None, None] * N + fb).ravel())
            cols.append((t[:, None, None] * N + fa).ravel())
            vals.append(np.conj(blk[ok]).ravel())
    V = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(box.dim, box.dim))
    V = V * (epsilon / abs(V).sum(axis=1).max())
    D = _dirac_for(box).matrix
    C = D @ V - V @ D
    cbound = float(abs(C).sum(axis=1).max())
    norms = None
    if base is not None:
        norms = NormData(base.normA + epsilon, base.g - epsilon, base.commNorm + cbound,
                         source=base.source, padded=base.padded)
    return LatticeOperator(box, A.matrix + V, periodic=False, norms=norms)


def _extreme_singular_values(M) -> tuple[float, float]:
    M = sp.csr_matrix(M)
    M.eliminate_zeros()
    M = M[M.getnnz(axis=1) > 0]
    if M.nnz == 0:
        return 0.0, 0.0
    if min(M.shape) <= 4000:
        s = np.linalg.svd(M.toarray(), compute_uv=False)
        return float(s[0]), float(s[-1]) if M.shape[0] >= M.shape[1] else 0.0
    from scipy.sparse.linalg import svds

    hi = svds(M, k=1, which="LM", return_singular_vectors=False)[0]
    lo = svds(M, k=1, which="SM", return_singular_vectors=False)[0]
    return float(hi), float(lo)


def estimate_norms(A: LatticeOperator, D: LatticeOperator, proj) -> NormData:
    """Extremal singular values of A and [D, A] on the columns of the ball.

    The rectangular window (all box rows, ball columns) avoids the Dirichlet
    edge of the box.  Finite windows underestimate ||A|| and ||[D, A]|| and
    overestimate g; declared values should be preferred (see
    :func:`resolve_norms`).
    """
    b = A.hopping_range()
    padded = A.box.R >= np.ceil(proj.rho) + 4 * max(b, 1)
    if A.box.radius is not None:
        padded = padded and A.box.radius >= proj.rho + 4 * max(b, 1)
    cols = proj.rows
    Am = A.matrix
    normA, g = _extreme_singular_values(Am[:, cols])
    C = (D.matrix @ Am - Am @ D.matrix)[:, cols]
    commNorm = _extreme_singular_values(C)[0] if C.nnz else 0.0
    g = max(g, 1e-300)
    return NormData(normA, min(g, normA) if normA > 0 else g, commNorm, source="estimated", padded=bool(padded))


def resolve_norms(A: LatticeOperator, D: LatticeOperator | None = None, proj=None) -> NormData:
    """Declared norm data when attached to A, otherwise a finite-box estimate."""
    if A.norms is not None:
        return A.norms
    if A.model is not None and A.model.declared is not None:
        return A.model.declared
    if D is None or proj is None:
        raise ValueError("A carries no declared norms; pass D and a projection to estimate them")
    return estimate_norms(A, D, proj)


# --- winding oracles -----------------------------------------------------------

def index_from_winding(d: int, w: int) -> int:
    return int((-1) ** ((d + 1) // 2) * w)


def _require_periodic(model, d):
    if not isinstance(model, ModelSpec) or not model.periodic:
        raise NotPeriodic("winding oracles need a translation-invariant model")
    if model.d != d:
        raise NotPeriodic(f"oracle is for d={d}, model has d={model.d}")


def winding_oracle_1d(model: ModelSpec, samples: int = 1024) -> int:
    """Winding number of k -> det A(k) by phase accumulation.

    Cross-checked against the Riemann sum of (1/2 pi i) tr A^-1 A'.
    """
    _require_periodic(model, 1)
    if samples < 256:
        raise ValueError("at least 256 samples required")
    k = 2 * np.pi * np.arange(samples + 1)[:, None] / samples
    A = model.symbol(k)
    det = np.linalg.det(A)
    if np.abs(det).min() < 1e-12 * np.abs(det).max():
        raise PhaseAmbiguous("det A(k) vanishes on the sample circle")
    steps = np.angle(det[1:] / det[:-1])
    if np.abs(steps).max() > np.pi / 2:
        raise PhaseAmbiguous("phase increments too large; increase samples")
    w = steps.sum() / (2 * np.pi)
    wi = int(np.rint(w))
    if abs(w - wi) > 0.1:
        raise PhaseAmbiguous(f"accumulated phase {w:.4f} not near an integer")
    dA = model.symbol_derivative(k[:-1])[0]
    integrand = np.trace(np.linalg.solve(A[:-1], dA), axis1=-2, axis2=-1)
    alt = (integrand.sum() * (2 * np.pi / samples) / (2j * np.pi)).real
    if abs(alt - wi) > 0.1:
        raise PhaseAmbiguous(f"phase count {wi} disagrees with the log-derivative integral {alt:.4f}")
    return wi


def degree_3d(model: ModelSpec, grid: int) -> float:
    """(1/24 pi^2) int eps^{ijk} tr(X_i X_j X_k) d^3k with X_j = A^-1 d_j A (Riemann sum)."""
    k1 = 2 * np.pi * np.arange(grid) / grid
    total = 0.0
    for a in k1:
        kk = np.stack(np.meshgrid([a], k1, k1, indexing="ij"), axis=-1)[0]
        A = model.symbol(kk)
        dA = model.symbol_derivative(kk)
        X = [np.linalg.solve(A, dA[j]) for j in range(3)]
        t = np.trace(X[0] @ (X[1] @ X[2] - X[2] @ X[1]), axis1=-2, axis2=-1)
        total += t.sum()
    val = 3 * total * (2 * np.pi / grid) ** 3 / (24 * np.pi**2)
    return float(val.real)


def winding_oracle_3d(model: ModelSpec, grid: int = 24) -> int:
    """Degree of the symbol map, returned in the index convention.

    Computed on grid^3 and (2 grid)^3 meshes; both must round to the same
    integer.
    """
    _require_periodic(model, 3)
    if grid < 24:
        raise ValueError("grid >= 24 required")
    w1, w2 = degree_3d(model, grid), degree_3d(model, 2 * grid)
    i1, i2 = int(np.rint(w1)), int(np.rint(w2))
    if i1 != i2 or abs(w2 - i2) > 0.05:
        raise NotConverged(f"degree sums {w1:.5f} (grid {grid}) and {w2:.5f} (grid {2 * grid}) disagree")
    return index_from_winding(3, i2)


def gap_on_grid(model: ModelSpec, grid: int = 64) -> float:
    """Minimum singular value of the symbol over a uniform grid."""
    k = momentum_grid(model.d, grid).reshape(-1, model.d)
    return float(np.linalg.svd(model.symbol(k), compute_uv=False)[:, -1].min())

