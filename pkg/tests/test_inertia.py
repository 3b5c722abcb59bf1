import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from oddpairing.errors import NotHermitian, NotInvertible, OddSignature, SingularAtTolerance
from oddpairing.inertia import InertiaResult, eig_inertia, half_signature, inertia
from oddpairing.localizer import localize
from oddpairing.models import shift_model


def rand_herm(seed, n, gap=0.05):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    w, v = np.linalg.eigh(X + X.conj().T)
    w = np.where(np.abs(w) < gap, gap * np.sign(w + 1e-300), w)
    return (v * w) @ v.conj().T


def test_small_examples():
    r = inertia(np.diag([1.0, -1.0]))
    assert (r.n_plus, r.n_minus, r.n_zero, r.signature) == (1, 1, 0, 0)
    r = inertia(np.eye(5))
    assert (r.n_plus, r.n_minus, r.signature) == (5, 0, 5)
    r = inertia(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert r.signature == 0 and r.gap == pytest.approx(1.0)


def test_shift_localizer_signature_cross_checked():
    res = localize(shift_model(1), 1 / 24, 50)
    assert res.regime.certified
    assert res.inertia.signature == -2
    from oddpairing.lattice import ball_projection, build_dirac, restrict
    from oddpairing.localizer import ambient_box, assemble
    model = shift_model(1)
    A = model.build(ambient_box(model, 50))
    D = build_dirac(A.box, model.rep)
    proj = ball_projection(D, 50)
    L = assemble(restrict(A, proj), restrict(D, proj), 1 / 24).matrix
    assert eig_inertia(L).signature == -2


def test_half_signature():
    assert half_signature(InertiaResult(3, 5, 0, 1.0, "x")) == -1
    assert half_signature(InertiaResult(2, 2, 0, 1.0, "x")) == 0
    with pytest.raises(OddSignature):
        half_signature(InertiaResult(3, 0, 0, 1.0, "x"))
    with pytest.raises(NotInvertible):
        half_signature(InertiaResult(1, 1, 1, 0.0, "x"))


def test_singular_reports_partial_result():
    M = np.diag([1.0, -2.0, 0.0])
    with pytest.raises(SingularAtTolerance) as exc:
        inertia(M)
    assert exc.value.result.n_zero == 1


def test_not_hermitian():
    with pytest.raises(NotHermitian):
        inertia(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_two_by_two_pivots():
    # zero diagonal forces Bunch-Kaufman 2x2 pivots
    blocks = [np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([[0.0, 2j], [-2j, 0.0]]), np.array([[3.0]])]
    M = scipy.linalg.block_diag(*blocks)
    rng = np.random.default_rng(0)
    P = np.eye(5)[rng.permutation(5)]
    r = inertia(P @ M @ P.T)
    assert (r.n_plus, r.n_minus) == (3, 2)


@given(st.integers(0, 10**6), st.integers(1, 60))
def test_factorization_matches_eigensolve(seed, n):
    M = rand_herm(seed, n)
    r, e = inertia(M), eig_inertia(M)
    assert (r.n_plus, r.n_minus) == (e.n_plus, e.n_minus)
    assert r.gap == pytest.approx(np.abs(np.linalg.eigvalsh(M)).min(), rel=1e-8)


@given(st.integers(0, 10**6), st.integers(1, 30))
def test_sylvester_congruence(seed, n):
    M = rand_herm(seed, n, gap=0.5)
    rng = np.random.default_rng(seed + 1)
    X = np.eye(n) + 0.3 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(n)
    assert inertia(X.conj().T @ M @ X).signature == inertia(M).signature


@given(st.integers(0, 10**6), st.integers(1, 20), st.integers(1, 20))
def test_direct_sum_additive(seed, n, m):
    A, B = rand_herm(seed, n), rand_herm(seed + 7, m)
    ra, rb, rs = inertia(A), inertia(B), inertia(scipy.linalg.block_diag(A, B))
    assert (rs.n_plus, rs.n_minus) == (ra.n_plus + rb.n_plus, ra.n_minus + rb.n_minus)


@pytest.mark.parametrize("dtype", [np.complex128, np.complex64])
def test_sparse_path_matches_dense(dtype):
    for seed in range(5):
        rng = np.random.default_rng(seed)
        n = 600
        # banded Hermitian with a spectral gap
        main = rng.choice([-1.0, 1.0], n) * rng.uniform(1.0, 2.0, n)
        off = 0.2 * (rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1))
        M = sp.diags([off.conj(), main, off], [-1, 0, 1], format="csr")
        r = inertia(M, dtype=dtype)
        e = eig_inertia(M)
        assert r.method == "factorization" and r.certificate["backward_error"] < r.gap / 2
        assert (r.n_plus, r.n_minus) == (e.n_plus, e.n_minus)
