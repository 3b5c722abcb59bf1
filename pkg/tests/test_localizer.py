import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oddpairing.errors import GapClosed, PreconditionViolated, ZeroCommutator
from oddpairing.inertia import eig_inertia
from oddpairing.lattice import ball_projection, build_dirac, double, restrict
from oddpairing.localizer import (CSV_COLUMNS, OffDiagonalHomotopy, TaperHomotopy, ambient_box, assemble, build_taper,
                                  certify_path, check_regime, constancy_violations, gap_check, kappa0, localize,
                                  offdiagonal_certificate, sweep, taper_bound, taper_commutator_check,
                                  taper_fourier_l1, taper_homotopy_certificate, write_csv)
from oddpairing.models import NormData, chiral_3d_model, identity_model, shift_model

UNIT = NormData(1.0, 1.0, 1.0)


def test_kappa0_values():
    assert kappa0(UNIT) == pytest.approx(1 / 12)
    assert kappa0(NormData(2.0, 1.0, 1.0)) == pytest.approx(1 / 24)
    assert kappa0(NormData(4.0, 2.0, 1.0)) / kappa0(NormData(4.0, 1.0, 1.0)) == pytest.approx(8)
    with pytest.raises(ZeroCommutator):
        kappa0(NormData(1.0, 1.0, 0.0))


def test_regime_boundaries():
    assert check_regime(1 / 12, 25, UNIT).certified
    assert not check_regime(1 / 12, 24, UNIT).certified
    assert not check_regime(1 / 6, 1000, UNIT).certified
    # with the true shift norms kappa0 is 1/24, so 1/12 is outside
    assert not check_regime(1 / 12, 25, shift_model(1).declared).certified
    assert check_regime(1 / 24, 50, shift_model(1).declared).certified


@given(st.floats(1e-3, 1.0), st.floats(1.0, 200.0), st.floats(0.1, 1.0), st.floats(1.0, 5.0), st.floats(0.01, 5))
def test_regime_definition(kappa, rho, g, a, c):
    norms = NormData(a, min(g, a), c)
    rep = check_regime(kappa, rho, norms)
    assert rep.certified == (kappa <= kappa0(norms) and 2 * norms.g / kappa < rho)


def test_assemble_closed_form():
    M = assemble(np.eye(1), np.eye(1), 1.0).matrix
    np.testing.assert_array_equal(M, [[1, 1], [1, -1]])
    np.testing.assert_allclose(np.linalg.eigvalsh(M), [-np.sqrt(2), np.sqrt(2)])


@given(st.integers(0, 1000), st.integers(1, 12), st.floats(0, 2))
def test_assemble_hermitian(seed, n, kappa):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    D = np.diag(rng.standard_normal(n))
    M = assemble(A, D, kappa).matrix
    np.testing.assert_array_equal(M, M.conj().T)


def test_kappa_zero_has_zero_signature():
    model = shift_model(1)
    A = model.build(ambient_box(model, 25))
    D = build_dirac(A.box, model.rep)
    proj = ball_projection(D, 25)
    Ar = restrict(A, proj)
    r = eig_inertia(assemble(Ar, restrict(D, proj), 0.0).matrix, zero_threshold=1e-10)
    # the truncated shift is nilpotent, so kappa = 0 gives a kernel and no index
    assert r.signature == 0
    assert r.gap == pytest.approx(np.linalg.svd(Ar, compute_uv=False).min(), abs=1e-12)


def test_identity_kappa_zero_gap_without_index():
    model = identity_model()
    A = model.build(ambient_box(model, 10))
    D = build_dirac(A.box, model.rep)
    proj = ball_projection(D, 10)
    r = eig_inertia(assemble(restrict(A, proj), restrict(D, proj), 0.0).matrix)
    assert r.signature == 0 and r.gap == pytest.approx(1.0)


def test_shift_gap_bound():
    res = localize(shift_model(1), 1 / 12, 25)
    assert res.regime.gap_measured >= 0.5
    assert res.half_signature == -1
    assert res.regime.label == "heuristic"


def test_chiral_heuristic_flag():
    res = localize(chiral_3d_model(4.0), 0.25, 4)
    assert not res.regime.certified and res.regime.heuristic
    assert res.regime.gap_measured > 0 and res.half_signature == 0


def test_gap_closed_raised():
    model = shift_model(1)
    A = model.build(ambient_box(model, 10))
    D = build_dirac(A.box, model.rep)
    proj = ball_projection(D, 10)
    prob = assemble(restrict(A, proj), restrict(D, proj), 0.0, model.declared, 10)
    with pytest.raises(GapClosed):
        gap_check(prob)


def test_taper_shape():
    for rho in (4.0, 10.0, 25.0):
        G = build_taper(rho)
        assert G.eval(0.0) == pytest.approx(1.0)
        assert G.eval(rho / 2) == pytest.approx(1.0)
        assert G.eval(rho) == pytest.approx(0.0, abs=1e-15)
        x = np.linspace(-2 * rho, 2 * rho, 101)
        np.testing.assert_allclose(G.eval(x), G.eval(-x), atol=0)
        assert G.fourier_l1_bound <= 8 / rho


def test_taper_scaling():
    a, b = taper_fourier_l1(5.0), taper_fourier_l1(10.0)
    assert b["value"] == pytest.approx(a["value"] / 2, rel=1e-12)
    x = np.linspace(-20, 20, 81)
    np.testing.assert_allclose(build_taper(10.0).eval(2 * x), build_taper(5.0).eval(x), atol=1e-14)
    assert a["difference"] < 1e-6


def taper_case(model, rho, R):
    box = model.box(R)
    A, D = model.build(box), model.dirac(box)
    H, Dp = double(A, D)
    return taper_commutator_check(build_taper(rho), Dp, H)


def test_taper_commutator_identity_is_zero():
    assert taper_case(identity_model(), 10, 14) == 0


def test_taper_commutator_shift():
    v10, v20 = taper_case(shift_model(1), 10, 14), taper_case(shift_model(1), 20, 24)
    assert v10 <= 0.8 and v20 <= 0.4
    assert v10 <= taper_bound(10, 2.0) and v20 <= taper_bound(20, 2.0)


def test_taper_commutator_matches_dense():
    model = shift_model(2)
    box = model.box(14)
    A, D = model.build(box), model.dirac(box)
    H, Dp = double(A, D)
    G = build_taper(10.0)
    Gm = np.diag(G.eval(np.abs(np.diag(Dp.toarray().real))))
    C = Gm @ H.toarray() - H.toarray() @ Gm
    assert taper_commutator_check(G, Dp, H) == pytest.approx(np.linalg.norm(C, 2), rel=1e-8)


def test_taper_homotopy_endpoints():
    model = shift_model(1)
    box = model.box(60)
    A, D = model.build(box), model.dirac(box)
    kappa, rho, rp = 1 / 24, 50.0, 55.0
    path = TaperHomotopy(A, D, kappa, rho, rp)
    proj = ball_projection(D, rp)
    L = assemble(restrict(A, proj), restrict(D, proj), kappa).matrix
    np.testing.assert_allclose(path(0.0), L, atol=1e-15)
    cert = taper_homotopy_certificate(A, D, kappa, rho, rp, model.declared)
    assert cert["path"].certified
    assert cert["annulus_signature"] == 0 and cert["decoupled"]
    assert cert["signature_start"] == cert["signature_end"] == -2
    with pytest.raises(PreconditionViolated):
        TaperHomotopy(A, D, kappa, rho, rho - 1)


def test_offdiagonal_homotopy():
    model = shift_model(1)
    box = model.box(40)
    A, D = model.build(box), model.dirac(box)
    kappa, rho = 1 / 12, 25.0
    path = OffDiagonalHomotopy(A, D, kappa, rho, ambient=ball_projection(D, 35))
    M0 = path(0.0)
    w = np.sort(np.concatenate([np.linalg.eigvalsh(path.inner_block), np.linalg.eigvalsh(path.complement_block)]))
    np.testing.assert_allclose(np.linalg.eigvalsh(M0), w, atol=1e-12)
    cert = offdiagonal_certificate(A, D, kappa, rho, model.declared, ambient=ball_projection(D, 35), points=32)
    assert cert["path"].certified and cert["complement_bound_holds"]
    assert cert["complement_signature"] == 0 and cert["ball_signature"] == cert["ambient_signature"] == -2
    with pytest.raises(PreconditionViolated):
        offdiagonal_certificate(A, D, 1e-3, 25.0, model.declared)


def test_sweep_grid_order_and_csv():
    model = shift_model(-1)
    res = sweep(model, [1 / 12, 1 / 24], [25, 30], modes=("ball", "cube"), oracle_index=1)
    assert [(r.mode, r.kappa, r.rho) for r in res][:3] == [("ball", 1 / 12, 25), ("ball", 1 / 12, 30),
                                                            ("ball", 1 / 24, 25)]
    assert {r.half_signature for r in res} == {1}
    assert not constancy_violations(res)
    text = write_csv(res)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert text == write_csv(sweep(model, [1 / 12, 1 / 24], [25, 30], modes=("ball", "cube"), oracle_index=1,
                                   workers=3))


def test_path_certificate_step_boundary():
    h = 1 / 63
    const = lambda t: np.array([[1.0]])
    assert certify_path(const, 0.95 / h, 64).certified
    assert not certify_path(const, 1.05 / h, 64).certified
    crossing = lambda t: np.array([[1.0 - 2 * t]])
    assert not certify_path(crossing, 2.0, 64).certified
