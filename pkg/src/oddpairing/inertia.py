"""Inertia and signature of Hermitian matrices.

Dense matrices go through LAPACK's Bunch-Kaufman factorization (``?hetrf``
via :func:`scipy.linalg.ldl`) and Sylvester's law of inertia.  Sparse
matrices go through SuperLU with symmetric ordering and no row pivoting, and
the count is accepted only with a backward-error certificate below the gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationUnreliable, NotHermitian, NotInvertible, OddSignature, SingularAtTolerance

DEFAULT_TOLERANCE = 1e-10


@dataclass
class InertiaResult:
    n_plus: int
    n_minus: int
    n_zero: int
    gap: float
    method: str
    certificate: dict = field(default_factory=dict)

    @property
    def signature(self) -> int:
        return self.n_plus - self.n_minus

    @property
    def dimension(self) -> int:
        return self.n_plus + self.n_minus + self.n_zero

    def as_dict(self) -> dict:
        return {"n_plus": self.n_plus, "n_minus": self.n_minus, "n_zero": self.n_zero,
                "signature": self.signature, "gap": self.gap, "method": self.method}


def _norm1(M) -> float:
    if sp.issparse(M):
        return float(abs(M).sum(axis=0).max()) if M.nnz else 0.0
    return float(np.abs(M).sum(axis=0).max()) if M.size else 0.0


def _check_hermitian(M, scale):
    dev = abs(M - M.conj().T)
    dev = dev.max() if (not sp.issparse(dev) or dev.nnz) else 0.0
    if dev > 1e-12 * max(scale, 1e-300):
        raise NotHermitian(f"matrix deviates from Hermitian by {dev:.2e}")


def _pivot_blocks(Dm):
    """Iterate over the 1x1 and 2x2 diagonal blocks of an LDL^* block diagonal."""
    n = Dm.shape[0]
    i = 0
    while i < n:
        if i + 1 < n and Dm[i + 1, i] != 0:
            yield Dm[i:i + 2, i:i + 2]
            i += 2
        else:
            yield Dm[i:i + 1, i:i + 1]
            i += 1


def _eig_result(w, zero_threshold, method="eigensolve", cert=None):
    n_plus = int((w > zero_threshold).sum())
    n_minus = int((w < -zero_threshold).sum())
    gap = float(np.abs(w).min()) if len(w) else np.inf
    return InertiaResult(n_plus, n_minus, len(w) - n_plus - n_minus, gap, method, cert or {})


def _dense(M, tolerance, zero_threshold, scale):
    n = M.shape[0]
    if n == 0:
        return InertiaResult(0, 0, 0, np.inf, "factorization")
    M = (M + M.conj().T) / 2
    _, Dm, _ = scipy.linalg.ldl(M, hermitian=True)
    n_plus = n_minus = 0
    smallest_pivot = np.inf
    for blk in _pivot_blocks(Dm):
        if blk.shape[0] == 1:
            p = blk[0, 0].real
            smallest_pivot = min(smallest_pivot, abs(p))
            n_plus += p > 0
            n_minus += p < 0
        else:
            ev = np.linalg.eigvalsh(blk)
            smallest_pivot = min(smallest_pivot, np.abs(ev).min())
            # Bunch-Kaufman 2x2 pivots are indefinite: one eigenvalue of each sign
            n_plus += int((ev > 0).sum())
            n_minus += int((ev < 0).sum())
    if smallest_pivot < tolerance * scale:
        w = scipy.linalg.eigvalsh(M)
        return _eig_result(w, zero_threshold, cert={"smallest_pivot": float(smallest_pivot)})
    # eigenvalues closest to zero sit at positions n_minus-1 and n_minus
    lo, hi = max(n_minus - 1, 0), min(n_minus, n - 1)
    w = scipy.linalg.eigvalsh(M, subset_by_index=[lo, hi], driver="evr")
    gap = float(np.abs(w).min())
    res = InertiaResult(int(n_plus), int(n_minus), 0, gap, "factorization",
                        {"smallest_pivot": float(smallest_pivot)})
    if gap <= zero_threshold:
        return _eig_result(scipy.linalg.eigvalsh(M), zero_threshold, cert=res.certificate)
    return res


def sparse_gap(M, solve=None, tol=1e-6, solve_dtype=complex) -> float:
    """Smallest |eigenvalue| of a sparse Hermitian matrix by shift-invert Lanczos."""
    n = M.shape[0]
    if n <= 400:
        return float(np.abs(np.linalg.eigvalsh(M.toarray())).min())
    if solve is None:
        lu = spla.splu(sp.csc_matrix(M))
        solve = lu.solve
    op = spla.LinearOperator(M.shape, matvec=lambda x: solve(np.asarray(x, dtype=solve_dtype)).astype(complex),
                             dtype=complex)
    w = spla.eigsh(M.astype(complex), k=1, sigma=0, which="LM", OPinv=op, tol=tol,
                   return_eigenvectors=False, v0=np.ones(n, dtype=complex))
    return float(np.abs(w).min())


def _sparse(M, zero_threshold, dtype, probes=3, seed=0):
    n = M.shape[0]
    Mc = sp.csc_matrix(M, dtype=dtype)
    try:
        lu = spla.splu(Mc, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise FactorizationUnreliable(f"sparse factorization failed: {exc}") from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationUnreliable("row and column permutations differ; symmetric inertia count invalid")
    piv = lu.U.diagonal()
    n_plus, n_minus = int((piv.real > 0).sum()), int((piv.real < 0).sum())
    # backward-error estimate from random right-hand sides
    rng = np.random.default_rng(seed)
    Mx = sp.csr_matrix(M, dtype=complex)
    berr = 0.0
    for _ in range(probes):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        b = Mx @ x
        y = lu.solve(b.astype(dtype)).astype(complex)
        berr = max(berr, np.linalg.norm(Mx @ y - b) / np.linalg.norm(y))
    gap = sparse_gap(Mx, solve=lu.solve, solve_dtype=dtype)
    cert = {"backward_error": float(berr), "smallest_pivot": float(np.abs(piv).min()), "dtype": np.dtype(dtype).name}
    if gap <= zero_threshold:
        raise SingularAtTolerance(f"gap {gap:.3e} inside zero threshold {zero_threshold:.3e}",
                                  InertiaResult(n_plus, n_minus, 0, gap, "factorization", cert))
    if not berr < gap / 2:
        raise FactorizationUnreliable(f"backward error {berr:.2e} is not below half the gap {gap:.2e}")
    return InertiaResult(n_plus, n_minus, 0, gap, "factorization", cert)


def inertia(M, tolerance: float = DEFAULT_TOLERANCE, zero_threshold: float | None = None,
            dtype=None) -> InertiaResult:
    """Inertia (n+, n-, n0) of a Hermitian matrix.

    ``tolerance`` is relative to ||M||_1 and decides when pivots are too small
    to trust.  ``zero_threshold`` is an absolute bound below which eigenvalues
    count as zero; it defaults to ``tolerance * ||M||_1``.  Callers holding a
    gap certificate pass g/4 here.  Sparse input uses the certified sparse
    path; ``dtype`` may lower its working precision (e.g. complex64).

    Raises SingularAtTolerance when n0 > 0, with the result attached.
    """
    scale = _norm1(M)
    _check_hermitian(M, scale)
    if zero_threshold is None:
        zero_threshold = tolerance * scale
    if sp.issparse(M):
        if M.shape[0] <= 2000 and dtype is None:
            res = _dense(M.toarray(), tolerance, zero_threshold, scale)
        else:
            res = _sparse(M, zero_threshold, dtype or np.complex128)
    else:
        res = _dense(np.asarray(M), tolerance, zero_threshold, scale)
    if res.n_zero:
        raise SingularAtTolerance(f"{res.n_zero} eigenvalue(s) within {zero_threshold:.3e} of zero", res)
    return res


def eig_inertia(M, zero_threshold: float = 0.0) -> InertiaResult:
    """Reference inertia from a full Hermitian eigensolve."""
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    return _eig_result(scipy.linalg.eigvalsh(M), zero_threshold)


def half_signature(res: InertiaResult) -> int:
    if res.n_zero:
        raise NotInvertible("matrix has a kernel; its signature does not define an index")
    if res.signature % 2:
        raise OddSignature(f"signature {res.signature} is odd")
    return res.signature // 2
