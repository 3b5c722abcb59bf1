"""Finite truncations of operators on l^2(Z^d, C^N).

Sites of a :class:`SiteBox` are enumerated lexicographically (last coordinate
fastest).  Row index of (copy c, site s, fiber f) is ``(c*nsites + s)*N + f``.
A box may optionally be cut down to a Euclidean ball of sites; that keeps the
ambient space small in d = 3 while all Dirichlet restrictions stay exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sp

from .clifford import CliffordRep
from .errors import BallExceedsBox, BoxMismatch, DimensionMismatch, NotInvertible

HERMITIAN_TOL = 1e-14
DIRAC_ZERO_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SiteBox:
    """Sites n in Z^d with ||n||_inf <= R (and |n| <= radius if given), fiber C^N."""

    d: int
    R: int
    N: int
    copies: int = 1
    radius: float | None = None

    def __post_init__(self):
        if self.d < 1 or self.R < 0 or self.N < 1 or self.copies < 1:
            raise ValueError(f"invalid box parameters d={self.d} R={self.R} N={self.N}")

    @property
    def key(self):
        return (self.d, self.R, self.N, self.copies, self.radius)

    def __eq__(self, other):
        return isinstance(other, SiteBox) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        extra = "" if self.radius is None else f", radius={self.radius}"
        return f"SiteBox(d={self.d}, R={self.R}, N={self.N}, copies={self.copies}{extra})"

    @cached_property
    def sites(self) -> np.ndarray:
        side = np.arange(-self.R, self.R + 1)
        grid = np.stack(np.meshgrid(*([side] * self.d), indexing="ij"), axis=-1)
        pts = grid.reshape(-1, self.d)
        if self.radius is not None:
            pts = pts[(pts**2).sum(axis=1) <= self.radius**2 + 1e-9]
        pts.setflags(write=False)
        return pts

    @cached_property
    def _lookup(self) -> np.ndarray | None:
        if self.radius is None:
            return None
        table = np.full((2 * self.R + 1) ** self.d, -1, dtype=np.int64)
        table[self._cube_index(self.sites)] = np.arange(len(self.sites))
        return table

    def _cube_index(self, pts):
        return np.ravel_multi_index(tuple((pts + self.R).T), (2 * self.R + 1,) * self.d)

    @property
    def nsites(self) -> int:
        return len(self.sites)

    @property
    def base_dim(self) -> int:
        return self.nsites * self.N

    @property
    def dim(self) -> int:
        return self.base_dim * self.copies

    def site_index(self, pts) -> np.ndarray:
        """Site numbers of the points ``pts`` (shape (..., d)); -1 where outside."""
        pts = np.asarray(pts, dtype=np.int64)
        inside = (np.abs(pts) <= self.R).all(axis=-1)
        out = np.full(pts.shape[:-1], -1, dtype=np.int64)
        if inside.any():
            idx = self._cube_index(pts[inside])
            out[inside] = idx if self._lookup is None else self._lookup[idx]
        return out

    def row(self, site, fiber=0, copy=0):
        return (copy * self.nsites + np.asarray(site)) * self.N + np.asarray(fiber)

    def unrow(self, row):
        """Inverse of :meth:`row`: returns (site point, fiber, copy)."""
        row = np.asarray(row)
        fiber = row % self.N
        s = row // self.N
        return self.sites[s % self.nsites], fiber, s // self.nsites

    def site_of_rows(self) -> np.ndarray:
        """Site number of every row (length dim)."""
        return np.tile(np.repeat(np.arange(self.nsites), self.N), self.copies)

    def with_copies(self, copies: int) -> "SiteBox":
        return SiteBox(self.d, self.R, self.N, copies, self.radius)


@dataclass(frozen=True, eq=False)
class LatticeOperator:
    """Sparse operator on a :class:`SiteBox`.

    ``site_blocks`` is set for operators that are block diagonal over sites
    (Dirac operator and its functions); it has shape (copies*nsites, N, N).
    ``model`` and ``norms`` carry provenance used by downstream norm checks.
    """

    box: SiteBox
    matrix: sp.csr_matrix
    hermitian: bool = False
    periodic: bool = False
    site_blocks: np.ndarray | None = None
    model: object = None
    norms: object = None

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix)
        if m.shape != (self.box.dim, self.box.dim):
            raise DimensionMismatch(f"matrix shape {m.shape} does not match box dimension {self.box.dim}")
        m.sum_duplicates()
        m.sort_indices()
        object.__setattr__(self, "matrix", m)
        if self.hermitian:
            dev = abs(m - m.conj().T)
            if dev.nnz and dev.max() > HERMITIAN_TOL * max(1.0, abs(m).max()):
                raise ValueError(f"operator flagged Hermitian deviates by {dev.max():.2e}")

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def d(self):
        return self.box.d

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def adjoint(self) -> "LatticeOperator":
        blocks = None if self.site_blocks is None else np.conj(np.swapaxes(self.site_blocks, 1, 2))
        return LatticeOperator(self.box, self.matrix.conj().T.tocsr(), self.hermitian, self.periodic, blocks)

    def hopping_range(self) -> int:
        """Largest inf-norm distance between sites coupled by a stored entry."""
        coo = self.matrix.tocoo()
        if coo.nnz == 0:
            return 0
        srow = self.box.site_of_rows()
        diff = self.box.sites[srow[coo.row]] - self.box.sites[srow[coo.col]]
        return int(np.abs(diff).max())


def identity(box: SiteBox) -> LatticeOperator:
    return LatticeOperator(box, sp.identity(box.dim, dtype=complex, format="csr"), hermitian=True)


def from_hoppings(box: SiteBox, hoppings: dict, periodic: bool = False, **kw) -> LatticeOperator:
    """Translation-invariant operator A|n> = sum_h |n+h> A_h on the box.

    Hops leaving the box are dropped (Dirichlet) unless ``periodic`` is set,
    in which case they wrap around a cubic box.
    """
    if box.copies != 1:
        raise BoxMismatch("hopping operators live on single-copy boxes")
    if periodic and box.radius is not None:
        raise ValueError("periodic wrapping requires a cubic box")
    rows, cols, vals = [], [], []
    src = np.arange(box.nsites)
    L = 2 * box.R + 1
    for h, blk in hoppings.items():
        blk = np.asarray(blk, dtype=complex)
        if blk.shape != (box.N, box.N):
            raise DimensionMismatch(f"hopping block {h} has shape {blk.shape}, fiber is {box.N}")
        h = np.asarray(h, dtype=np.int64)
        if h.shape != (box.d,):
            raise DimensionMismatch(f"hopping vector {tuple(h)} is not in Z^{box.d}")
        tgt_pts = box.sites + h
        if periodic:
            tgt_pts = (tgt_pts + box.R) % L - box.R
        tgt = box.site_index(tgt_pts)
        ok = tgt >= 0
        a, b = np.nonzero(blk)
        if len(a) == 0 or not ok.any():
            continue
        s, t = src[ok], tgt[ok]
        rows.append((t[:, None] * box.N + a[None, :]).ravel())
        cols.append((s[:, None] * box.N + b[None, :]).ravel())
        vals.append(np.broadcast_to(blk[a, b], (len(s), len(a))).ravel())
    if rows:
        m = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(box.dim, box.dim)
        )
    else:
        m = sp.csr_matrix((box.dim, box.dim), dtype=complex)
    return LatticeOperator(box, m, periodic=periodic, **kw)


def block_diagonal(box: SiteBox, blocks: np.ndarray, hermitian: bool = True) -> LatticeOperator:
    """Site-block-diagonal operator from per-site fiber blocks (copy-major order)."""
    blocks = np.asarray(blocks, dtype=complex)
    n, N = box.nsites * box.copies, box.N
    if blocks.shape != (n, N, N):
        raise DimensionMismatch(f"expected blocks of shape {(n, N, N)}, got {blocks.shape}")
    base = np.arange(n) * N
    r = (base[:, None, None] + np.arange(N)[None, :, None]).repeat(N, axis=2)
    c = (base[:, None, None] + np.arange(N)[None, None, :]).repeat(N, axis=1)
    m = sp.csr_matrix((blocks.ravel(), (r.ravel(), c.ravel())), shape=(box.dim, box.dim))
    m.eliminate_zeros()
    return LatticeOperator(box, m, hermitian=hermitian, site_blocks=blocks)


def dirac_blocks(sites: np.ndarray, rep: CliffordRep, orbitals: int = 1) -> np.ndarray:
    """Fiber blocks 1_orb (x) sum_j n_j gamma_j, with gamma_1 at the origin."""
    g = np.asarray(rep.gammas)
    blk = np.einsum("sj,jab->sab", sites.astype(float), g)
    origin = ~sites.any(axis=1)
    blk[origin] = g[0]
    if orbitals > 1:
        blk = np.einsum("ab,sij->saibj", np.eye(orbitals), blk).reshape(len(sites), orbitals * rep.N, -1)
    return blk


def build_dirac(box: SiteBox, rep: CliffordRep) -> LatticeOperator:
    """D = sum_j X_j (x) gamma_j + |0><0| (x) gamma_1 on the box.

    When box.N is a multiple of rep.N the fiber is read as orbital (x) Clifford
    and D acts trivially on the orbital factor.
    """
    if box.d != rep.d or box.N % rep.N:
        raise DimensionMismatch(f"box (d={box.d}, N={box.N}) incompatible with Clifford rep (d={rep.d}, N={rep.N})")
    blk = dirac_blocks(box.sites, rep, box.N // rep.N)
    blk = np.concatenate([blk * (-1) ** c for c in range(box.copies)]) if box.copies > 1 else blk
    return block_diagonal(box, blk)


def _blocks_of(op: LatticeOperator) -> np.ndarray:
    if op.site_blocks is not None:
        return op.site_blocks
    box, N = op.box, op.box.N
    coo = op.matrix.tocoo()
    if np.any(coo.row // N != coo.col // N):
        raise ValueError("operator is not block diagonal over sites")
    blk = np.zeros((box.nsites * box.copies, N, N), dtype=complex)
    np.add.at(blk, (coo.row // N, coo.row % N, coo.col % N), coo.data)
    return blk


def site_function(D: LatticeOperator, f) -> LatticeOperator:
    """Apply a real function to a Hermitian site-block-diagonal operator blockwise."""
    w, v = np.linalg.eigh(_blocks_of(D))
    blk = np.einsum("sij,sj,skj->sik", v, f(w), v.conj())
    return block_diagonal(D.box, blk)


def hardy_projection(D: LatticeOperator) -> LatticeOperator:
    """Pi = chi(D > 0), computed per site from the fiber blocks."""
    w = np.linalg.eigvalsh(_blocks_of(D))
    if np.abs(w).min() <= DIRAC_ZERO_TOL:
        raise NotInvertible(f"D has an eigenvalue within {DIRAC_ZERO_TOL} of zero")
    return site_function(D, lambda x: (x > 0).astype(float))


@dataclass(frozen=True, eq=False)
class BallProjection:
    """Coordinate projection pi_rho onto the rows of the ball (ascending)."""

    box: SiteBox
    rho: float
    rows: np.ndarray
    mode: str = "ball"
    sites: np.ndarray = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return len(self.rows)

    @property
    def selected_rows(self) -> np.ndarray:
        return self.rows


def ball_projection(D: LatticeOperator, rho: float, mode: str = "ball") -> BallProjection:
    """Rows where the site block of D^2 has spectrum <= rho^2.

    ``mode='cube'`` selects ||n||_inf <= rho instead.
    """
    box = D.box
    if rho < 1:
        raise ValueError(f"rho must be >= 1, got {rho}")
    if rho >= box.R:
        raise BallExceedsBox(f"rho={rho} is not strictly inside the box of radius {box.R}")
    if mode == "ball":
        w = np.linalg.eigvalsh(_blocks_of(D)[: box.nsites])
        keep = (w**2).max(axis=1) <= rho**2 * (1 + 1e-12)
    elif mode == "cube":
        keep = np.abs(box.sites).max(axis=1) <= rho
    else:
        raise ValueError(f"unknown restriction mode {mode!r}")
    if box.radius is not None:
        reach = rho * np.sqrt(box.d) if mode == "cube" else rho
        if reach >= box.radius:
            raise BallExceedsBox(f"{mode} of radius {rho} does not fit inside the ball-shaped box")
    sites = np.nonzero(keep)[0]
    rows = np.concatenate([box.row(sites, f, c)[:, None] for c in range(box.copies) for f in range(box.N)], axis=1)
    rows = np.sort(rows.ravel())
    return BallProjection(box, float(rho), rows, mode, sites)


def restrict(op: LatticeOperator, proj: BallProjection, dense: bool = True):
    """Dirichlet restriction pi_rho T pi_rho^* as a dense (or sparse) matrix."""
    if op.box != proj.box:
        raise BoxMismatch(f"operator box {op.box} differs from projection box {proj.box}")
    sub = op.matrix[proj.rows][:, proj.rows]
    return sub.toarray() if dense else sub.tocsr()


def restrict_blocks(op: LatticeOperator, proj: BallProjection) -> np.ndarray:
    """Site blocks of a block-diagonal operator on the selected sites."""
    if op.box != proj.box:
        raise BoxMismatch(f"operator box {op.box} differs from projection box {proj.box}")
    blk = _blocks_of(op)
    n = op.box.nsites
    return np.concatenate([blk[c * n + proj.sites] for c in range(op.box.copies)])


def double(A: LatticeOperator, D: LatticeOperator):
    """H = [[0, A], [A*, 0]] and D' = diag(D, -D) on the two-copy box."""
    if A.box != D.box:
        raise BoxMismatch("A and D live on different boxes")
    box2 = A.box.with_copies(2)
    Am = A.matrix
    H = sp.bmat([[None, Am], [Am.conj().T, None]], format="csr")
    blk = _blocks_of(D)
    Dp = block_diagonal(box2, np.concatenate([blk, -blk]))
    return LatticeOperator(box2, H, hermitian=True), Dp


def write_matrix_market(op: LatticeOperator, target) -> None:
    """Matrix Market export; the box geometry is stored in the header comment."""
    meta = {"d": op.box.d, "R": op.box.R, "N": op.box.N, "copies": op.box.copies, "radius": op.box.radius,
            "hermitian": op.hermitian, "periodic": op.periodic}
    scipy.io.mmwrite(target, op.matrix.tocoo(), comment="oddpairing " + json.dumps(meta, sort_keys=True),
                     field="complex", symmetry="hermitian" if op.hermitian else "general")


def read_matrix_market(source) -> LatticeOperator:
    with open(source) as fh:
        meta = None
        for line in fh:
            if not line.startswith("%"):
                break
            if "oddpairing" in line:
                meta = json.loads(line.split("oddpairing", 1)[1])
    if meta is None:
        raise ValueError(f"{source} carries no box metadata")
    box = SiteBox(meta["d"], meta["R"], meta["N"], meta["copies"], meta["radius"])
    m = sp.csr_matrix(scipy.io.mmread(source)).astype(complex)
    return LatticeOperator(box, m, hermitian=meta["hermitian"], periodic=meta["periodic"])
