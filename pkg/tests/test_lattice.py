import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oddpairing.clifford import build_clifford
from oddpairing.errors import BallExceedsBox, BoxMismatch, DimensionMismatch
from oddpairing.lattice import (SiteBox, ball_projection, build_dirac, double, from_hoppings, hardy_projection,
                                identity, read_matrix_market, restrict, write_matrix_market)
from oddpairing.models import shift_model


def dirac(d, R, radius=None):
    rep = build_clifford(d)
    return build_dirac(SiteBox(d, R, rep.N, radius=radius), rep)


def test_dirac_d1_r2():
    D = dirac(1, 2)
    np.testing.assert_array_equal(D.toarray().real, np.diag([-2, -1, 1, 1, 2]))


def test_hardy_d1_r2():
    Pi = hardy_projection(dirac(1, 2))
    np.testing.assert_array_equal(Pi.toarray().real, np.diag([0, 0, 1, 1, 1]))


def test_hardy_d3_blocks():
    D = dirac(3, 1)
    rep = build_clifford(3)
    Pi = hardy_projection(D).toarray()
    box = D.box
    for s, n in enumerate(box.sites):
        if not n.any():
            continue
        blk = Pi[2 * s:2 * s + 2, 2 * s:2 * s + 2]
        expect = (np.eye(2) + rep.contract(n) / np.linalg.norm(n)) / 2
        np.testing.assert_allclose(blk, expect, atol=1e-14)
        np.testing.assert_allclose(blk @ blk, blk, atol=1e-14)


def test_dirac_d3_blocks_square_to_norm():
    D = dirac(3, 1).toarray()
    box = SiteBox(3, 1, 2)
    for s, n in enumerate(box.sites):
        if n.any():
            blk = D[2 * s:2 * s + 2, 2 * s:2 * s + 2]
            np.testing.assert_allclose(blk @ blk, (n @ n) * np.eye(2), atol=1e-14)


@given(st.sampled_from([1, 3]), st.integers(1, 4))
def test_dirac_invertible_and_trace_of_hardy(d, R):
    D = dirac(d, R)
    w = np.linalg.eigvalsh(D.toarray())
    assert np.abs(w).min() >= 1 - 1e-12
    Pi = hardy_projection(D).toarray()
    assert round(np.trace(Pi).real) == (w > 0).sum()


def test_ball_d1():
    D = dirac(1, 10)
    proj = ball_projection(D, 2.5)
    np.testing.assert_array_equal(D.box.sites[proj.sites].ravel(), [-2, -1, 0, 1, 2])
    assert proj.dimension == 5


def test_ball_d3_lattice_point_count():
    count = sum(1 for n in itertools.product(range(-6, 7), repeat=3) if sum(x * x for x in n) <= 4)
    proj = ball_projection(dirac(3, 6), 2)
    assert len(proj.sites) == count == 33
    assert proj.dimension == 66


def test_cube_mode():
    proj = ball_projection(dirac(3, 4), 1, mode="cube")
    assert len(proj.sites) == 27


@pytest.mark.parametrize("rho", [10, 12])
def test_ball_must_fit(rho):
    with pytest.raises(BallExceedsBox):
        ball_projection(dirac(1, 10), rho)


def test_restrict_identity_and_dirac():
    D = dirac(3, 5)
    proj = ball_projection(D, 3)
    np.testing.assert_array_equal(restrict(identity(D.box), proj), np.eye(proj.dimension))
    Dr = restrict(D, proj)
    np.testing.assert_allclose(Dr, Dr.conj().T, atol=0)
    w = np.linalg.eigvalsh(Dr)
    assert np.abs(w).max() <= 3 + 1e-12


def test_restrict_box_mismatch():
    D = dirac(1, 5)
    with pytest.raises(BoxMismatch):
        restrict(dirac(1, 6), ball_projection(D, 2))


def test_from_hoppings_convention_and_wrap():
    box = SiteBox(1, 3, 1)
    S = from_hoppings(box, {(1,): np.eye(1)}).toarray()
    # <n+1|S|n> = 1, Dirichlet drops the hop out of the box
    np.testing.assert_array_equal(S, np.eye(7, k=-1))
    Sp = from_hoppings(box, {(1,): np.eye(1)}, periodic=True).toarray()
    assert Sp[0, 6] == 1 and np.allclose(Sp @ Sp.conj().T, np.eye(7))


def test_doubling_identities():
    model = shift_model(2)
    box = model.box(6)
    A, D = model.build(box), model.dirac(box)
    H, Dp = double(A, D)
    Am, Dm = A.toarray(), D.toarray()
    Hm, Dpm = H.toarray(), Dp.toarray()
    n = box.dim
    H2 = Hm @ Hm
    np.testing.assert_allclose(H2[:n, :n], Am @ Am.conj().T, atol=1e-14)
    np.testing.assert_allclose(H2[n:, n:], Am.conj().T @ Am, atol=1e-14)
    np.testing.assert_allclose(H2[:n, n:], 0, atol=1e-14)
    comm = Dm @ Am - Am @ Dm
    anti = Dpm @ Hm + Hm @ Dpm
    np.testing.assert_allclose(anti, np.block([[np.zeros((n, n)), comm], [comm.conj().T, np.zeros((n, n))]]),
                               atol=1e-13)
    w = np.linalg.eigvalsh(Dm)
    np.testing.assert_allclose(np.linalg.eigvalsh(Dpm), np.sort(np.concatenate([w, -w])), atol=1e-13)


def test_dirac_fiber_mismatch():
    with pytest.raises(DimensionMismatch):
        build_dirac(SiteBox(3, 2, 3), build_clifford(3))


def test_matrix_market_roundtrip(tmp_path):
    model = shift_model(-1)
    A = model.build(model.box(5))
    write_matrix_market(A, tmp_path / "A.mtx")
    B = read_matrix_market(tmp_path / "A.mtx")
    assert B.box == A.box
    np.testing.assert_array_equal(B.toarray(), A.toarray())
