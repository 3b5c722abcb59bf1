import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oddpairing.errors import BoxMismatch, NotStabilized, OracleDisagreement, WrongDimension
from oddpairing.lattice import ball_projection, hardy_projection, identity
from oddpairing.models import ModelSpec, chiral_3d_model, identity_model, perturb, shift_model, winding_oracle_1d
from oddpairing.toeplitz import IndexReport, consensus, kernel_count_index, toeplitz_matrix


def operators(model, R):
    box = model.box(R)
    A, D = model.build(box), model.dirac(box)
    return A, D, hardy_projection(D)


def test_toeplitz_of_identity():
    A, D, Pi = operators(identity_model(), 10)
    T = toeplitz_matrix(identity(A.box), Pi, ball_projection(D, 6))
    np.testing.assert_array_equal(T, np.eye(13))


def test_toeplitz_of_shift_block_structure():
    A, D, Pi = operators(shift_model(1), 10)
    proj = ball_projection(D, 6)
    T = toeplitz_matrix(A, Pi, proj)
    sites = A.box.sites[proj.sites].ravel()
    pos, neg = sites >= 0, sites < 0
    np.testing.assert_array_equal(T[np.ix_(neg, neg)], np.eye(neg.sum()))
    np.testing.assert_array_equal(T[np.ix_(pos, pos)], np.eye(pos.sum(), k=-1))
    assert not T[np.ix_(pos, neg)].any() and not T[np.ix_(neg, pos)].any()
    with pytest.raises(BoxMismatch):
        toeplitz_matrix(A, Pi, ball_projection(operators(shift_model(1), 11)[1], 6))


def test_toeplitz_hermitian_commuting_case():
    # A = diag(sign(D)) commutes with Pi; on ran Pi it is 1, so T is invertible
    A, D, Pi = operators(identity_model(), 10)
    T = toeplitz_matrix(identity(A.box), Pi, ball_projection(D, 6))
    assert np.abs(np.linalg.eigvalsh(T)).min() > 0.5


@pytest.mark.parametrize("m,expected,ker,coker", [(1, -1, 0, 1), (-3, 3, 3, 0), (2, -2, 0, 2)])
def test_kernel_count_shifts(m, expected, ker, coker):
    A, _, _ = operators(shift_model(m), 40)
    rep = kernel_count_index(A)
    assert rep.value == expected and (rep.diagnostics["ker"], rep.diagnostics["coker"]) == (ker, coker)
    assert rep.diagnostics["separation"] >= 100


def test_kernel_count_identity():
    A, _, _ = operators(identity_model(), 20)
    assert kernel_count_index(A).value == 0


def test_kernel_count_not_stabilized_for_slow_decay():
    model = ModelSpec("slow", 1, 1, {}, {(1,): np.eye(1), (0,): -0.95 * np.eye(1)})
    A = model.build(model.box(14))
    with pytest.raises(NotStabilized):
        kernel_count_index(A)


def test_kernel_count_fast_decay_resolves():
    model = ModelSpec("fast", 1, 1, {}, {(1,): np.eye(1), (0,): -0.3 * np.eye(1)})
    A = model.build(model.box(50))
    assert kernel_count_index(A).value == -1 == -winding_oracle_1d(model)


def test_kernel_count_needs_d1():
    A = chiral_3d_model(4.0).build(chiral_3d_model(4.0).box(3))
    with pytest.raises(WrongDimension):
        kernel_count_index(A)


@given(st.sampled_from([-3, -2, -1, 1, 2, 3]))
@settings(max_examples=6)
def test_kernel_count_is_minus_winding(m):
    A, _, _ = operators(shift_model(m), 40)
    assert kernel_count_index(A).value == -winding_oracle_1d(shift_model(m))


@pytest.mark.parametrize("m", [-3, -2, -1, 1, 2, 3])
def test_consensus_shift(m):
    rep = consensus(shift_model(m))
    assert rep.value == -m
    assert [r["method"] for r in rep.diagnostics["methods"]] == ["kernel_count", "winding_1d", "spectral_flow"]


def test_consensus_chiral_trivial_phase():
    rep = consensus(chiral_3d_model(4.0))
    assert rep.value == 0
    assert [r["method"] for r in rep.diagnostics["methods"]] == ["degree_3d", "spectral_flow"]


def test_fault_injection():
    with pytest.raises(OracleDisagreement) as exc:
        consensus(shift_model(1), [lambda t: 1, lambda t: IndexReport("dummy", 2)])
    assert len(exc.value.reports) == 2
    with pytest.raises(OracleDisagreement):
        consensus(shift_model(1), ["kernel_count", lambda t: 5])


@pytest.mark.parametrize("seed", range(3))
def test_consensus_stable_under_perturbation(seed):
    model = shift_model(2)
    A = model.build(model.box(40))
    assert consensus(perturb(A, 0.2, seed)).value == -2


def test_consensus_needs_two_methods():
    with pytest.raises(ValueError):
        consensus(shift_model(1), ["winding_1d"])
    A = chiral_3d_model(4.0).build(chiral_3d_model(4.0).box(3))
    with pytest.raises(ValueError):
        consensus(A)
