import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from darmois.charfn import convolve, gaussian_charfn, point_mass, signed_pi_charfn, symmetrize, tabulate
from darmois.exceptions import DecompositionError, GroupMismatchError, OutOfGridError
from darmois.groups import Automorphism, DualTable, LcaGroup, dual_grid
from darmois.sd import (
    CosetDecomposer,
    SdInstance,
    check_m5,
    extract_quadratic_form,
    lemma7_residual,
    lemma9_decompose,
    pexider_fit,
    sd_residual,
)

T = LcaGroup.of("T")
Z = T.dual()
NEG = Automorphism.negation(T)
INTS = np.arange(-32, 33.0)[:, None]


def pm(sigma, kappa, which, x=0.0):
    return convolve(gaussian_charfn([[sigma]], [x]), signed_pi_charfn(kappa, which))


def test_trivial_instance_has_zero_residual():
    inst = SdInstance.two_forms(point_mass(T), point_mass(T), NEG)
    rep = sd_residual(inst, INTS)
    assert rep.max_residual == 0.0 and rep.passed


@pytest.mark.parametrize("method", ["direct", "bilinear"])
def test_equal_gaussians_pass(method):
    g = gaussian_charfn([[0.8]])
    rep = sd_residual(SdInstance.two_forms(g, g, NEG), INTS, method=method)
    assert rep.max_residual <= 1e-12


@pytest.mark.parametrize("method", ["direct", "bilinear"])
@pytest.mark.parametrize("kappa", [-0.3, 0.0, 0.2, 1.0])
def test_m10_m11_family_passes(kappa, method):
    inst = SdInstance.two_forms(pm(0.6, kappa, 1, 1.3), pm(0.6, kappa, 2, -0.4), NEG)
    assert sd_residual(inst, INTS, method=method).max_residual <= 1e-12


def test_negative_control_value():
    inst = SdInstance.two_forms(gaussian_charfn([[0.5]]), gaussian_charfn([[0.7]]), NEG)
    rep = sd_residual(inst, [[1.0]])
    assert rep.max_residual == pytest.approx(np.exp(-2) - np.exp(-2.4), abs=1e-14)
    assert rep.max_residual > 0.01


def test_methods_agree_on_failing_instance():
    G = LcaGroup.of("R", "T")
    delta = Automorphism(G, [[-0.5]], [[0.3]], [-1])
    f1 = gaussian_charfn([[0.4, 0.1], [0.1, 0.9]], [0.2, 1.0], G)
    f2 = convolve(gaussian_charfn([[1.0, 0.2], [0.2, 0.5]], None, G),
                  signed_pi_charfn(0.1, 2, G))
    inst = SdInstance.two_forms(f1, f2, delta)
    pts = dual_grid(G.dual(), radius=3, real_points=5, real_extent=1.0)
    a = sd_residual(inst, pts, method="direct")
    b = sd_residual(inst, pts, method="bilinear")
    assert a.max_residual > 1e-3
    assert a.max_residual == pytest.approx(b.max_residual, rel=1e-9)
    assert a.mean_residual == pytest.approx(b.mean_residual, rel=1e-9)


def test_tabulated_instance_and_out_of_grid():
    g = tabulate(gaussian_charfn([[0.8]]), INTS)
    rep = sd_residual(SdInstance.two_forms(g, g, NEG), np.arange(-16, 17.0)[:, None])
    assert rep.tolerance == 1e-6 and rep.passed
    with pytest.raises(OutOfGridError):
        sd_residual(SdInstance.two_forms(g, g, NEG), INTS)
    with pytest.raises(ValueError):
        sd_residual(SdInstance.two_forms(g, g, NEG), INTS, method="bilinear")


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 1.5), st.floats(-0.3, 0.3))
def test_shift_invariance(x1, x2, sigma, kappa):
    base = sd_residual(SdInstance.two_forms(pm(sigma, kappa, 1), pm(sigma + 0.2, kappa, 2), NEG), INTS)
    moved = sd_residual(SdInstance.two_forms(pm(sigma, kappa, 1, x1), pm(sigma + 0.2, kappa, 2, x2), NEG),
                        INTS, method="direct")
    assert abs(base.max_residual - moved.max_residual) <= 1e-12


def test_symmetrization_preserves_passing():
    f1, f2 = pm(0.6, 0.2, 1, 1.0), pm(0.6, 0.2, 2, 2.0)
    tau = sd_residual(SdInstance.two_forms(f1, f2, NEG), INTS).max_residual
    rep = sd_residual(SdInstance.two_forms(symmetrize(f1), symmetrize(f2), NEG), INTS,
                      method="direct")
    assert rep.max_residual <= 10 * max(tau, 1e-16) or rep.max_residual <= 1e-12


def test_instance_validation():
    g = gaussian_charfn([[1.0]])
    with pytest.raises(ValueError):
        SdInstance(T, (g,), (NEG,), (NEG,))
    R = LcaGroup.of("R")
    with pytest.raises(GroupMismatchError):
        SdInstance.two_forms(g, g, Automorphism.identity(R))


def test_report_json_and_csv(tmp_path):
    g = gaussian_charfn([[1.0]])
    rep = sd_residual(SdInstance.two_forms(g, g, NEG), [[0.0], [1.0]], keep_points=True)
    js = rep.to_json()
    assert set(js) >= {"max_residual", "mean_residual", "grid", "pass"}
    assert js["max_residual"] >= js["mean_residual"] >= 0
    path = tmp_path / "r.csv"
    rep.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["p0", "p1", "residual"] and len(rows) == 5


def test_instance_json_round_trip():
    inst = SdInstance.two_forms(pm(0.6, 0.2, 1, 1.0), pm(0.6, 0.2, 2), NEG)
    back = SdInstance.from_json(inst.to_json())
    assert sd_residual(back, INTS).max_residual == sd_residual(inst, INTS).max_residual


def test_lemma7_examples():
    eps = NEG.adjoint()
    assert lemma7_residual(point_mass(T), eps, INTS).max_residual == 0.0
    rep = lemma7_residual(pm(1.0, 0.2, 1), eps, INTS)
    assert rep.max_residual <= 1e-12
    assert rep.grid["n_u"] == 33  # (eps - I)Y meets the grid in the even integers
    assert lemma7_residual(gaussian_charfn([[1.0]]), eps, INTS).max_residual <= 1e-12


def test_lemma7_on_tabulated_and_empty():
    t = tabulate(pm(1.0, 0.2, 1), INTS)
    assert lemma7_residual(t, NEG.adjoint(), INTS).max_residual <= 1e-12
    ident = Automorphism.identity(Z)
    assert lemma7_residual(t, ident, INTS).grid["n_u"] == 1
    with pytest.raises(GroupMismatchError):
        lemma7_residual(t, NEG, INTS)


def test_m5_examples():
    table = DualTable(Z, INTS, 0.7 * INTS[:, 0] ** 2)
    assert check_m5(table).passed
    parity = DualTable(Z, INTS, 0.7 * INTS[:, 0] ** 2 + 0.3 * (1 - (-1.0) ** INTS[:, 0]))
    rep = check_m5(parity)
    assert rep.passed and 0 < rep.grid["coverage"] <= 1
    quartic = lambda y: y[..., 0] ** 4
    rep = check_m5(quartic, [[0.0], [1.0]], group=Z)
    # (y, h, k) = (0, 1, 1): Delta_2 Delta_1^2 n^4 at 0
    direct = (4 ** 4 - 2 * 3 ** 4 + 2 ** 4) - (2 ** 4 - 2 * 1 ** 4 + 0)
    assert rep.max_residual >= direct > 1


def test_m5_degenerate_grid():
    with pytest.raises(ValueError):
        check_m5(DualTable(Z, [[1.0]], [0.0]))


def test_m5_follows_from_passing_instance():
    f1, f2 = tabulate(pm(0.5, 0.25, 1), INTS), tabulate(pm(0.5, 0.25, 2), INTS)
    inner = np.arange(-16, 17.0)[:, None]
    assert sd_residual(SdInstance.two_forms(f1, f2, NEG), inner).max_residual <= 1e-12
    for f in (f1, f2):
        psi = DualTable(Z, INTS, -np.log(np.abs(f.values)))
        assert check_m5(psi, tol=1e-9).passed


@pytest.mark.parametrize("kappa,which,c_odd", [(0.2, 1, -0.4), (0.2, 2, 0.4), (-0.1, 1, 0.2)])
def test_lemma9_recovers_constants(kappa, which, c_odd):
    f = pm(1.3, kappa, which, 0.7)
    psi = DualTable(Z, INTS, -f.log_modulus(INTS))
    dec = lemma9_decompose(psi)
    assert dec.constants[0] == 0.0
    assert dec.c_odd == pytest.approx(c_odd, abs=1e-6)
    assert dec.Q[0, 0] == pytest.approx(1.3, abs=1e-6)
    assert np.abs(dec(INTS) - psi.values).max() <= max(dec.residual, 1e-9)


def test_lemma9_pure_quadratic():
    psi = DualTable(Z, INTS, 0.5 * INTS[:, 0] ** 2)
    dec = lemma9_decompose(psi)
    assert dec.c_odd == pytest.approx(0.0, abs=1e-9)


def test_lemma9_on_plane_slice():
    Y = LcaGroup.of("R", "Z")
    pts = dual_grid(Y, radius=6, real_points=9, real_extent=2.0)
    Q = np.array([[0.5, 0.1], [0.1, 0.8]])
    vals = np.einsum("ki,ij,kj->k", pts, Q, pts) - 0.6 * np.mod(pts[:, 1], 2)
    dec = lemma9_decompose(DualTable(Y, pts, vals))
    assert np.allclose(dec.Q, Q, atol=1e-8)
    assert dec.c_odd == pytest.approx(-0.6, abs=1e-8)


def test_lemma9_errors():
    with pytest.raises(DecompositionError):
        lemma9_decompose(DualTable(Z, INTS, INTS[:, 0] ** 2 + 1.0))
    with pytest.raises(DecompositionError):
        lemma9_decompose(DualTable(Z, INTS, INTS[:, 0] ** 2 + INTS[:, 0]))
    with pytest.raises(DecompositionError):
        lemma9_decompose(DualTable(Z, INTS, INTS[:, 0] ** 4 / 1e3))
    with pytest.raises(DecompositionError):
        lemma9_decompose(DualTable(LcaGroup.of("Z(5)"), [[0.0]], [0.0]))


def test_coset_decomposer_estimator():
    est = CosetDecomposer()
    psi = 1.1 * INTS[:, 0] ** 2 + 0.25 * (1 - (-1.0) ** INTS[:, 0])
    est.fit(INTS, psi)
    assert est.Q_[0, 0] == pytest.approx(1.1)
    assert est.c_odd_ == pytest.approx(0.5)
    assert np.allclose(est.predict(INTS), psi)
    assert est.score(INTS, psi) == pytest.approx(1.0)
    assert clone(est).get_params() == {"n_real": 0}


def test_pexider_examples():
    small = np.arange(-8, 9.0)[:, None]
    eps = NEG.adjoint()
    zero = lambda y: np.zeros(y.shape[:-1])
    fit = pexider_fit(zero, zero, eps, small)
    assert np.abs(fit.P.values).max() <= 1e-12 and np.abs(fit.Q.values).max() <= 1e-12
    sigma = 0.4
    q = lambda y: sigma * y[..., 0] ** 2
    fit = pexider_fit(q, q, eps, small)
    assert fit.residual <= 1e-10
    assert np.allclose(fit.P.values, 2 * sigma * small[:, 0] ** 2, atol=1e-9)
    assert np.allclose(fit.Q.values, 2 * sigma * small[:, 0] ** 2, atol=1e-9)


def test_pexider_theorem3_structure():
    small = np.arange(-8, 9.0)[:, None]
    eps = NEG.adjoint()
    f1, f2 = pm(0.5, 0.2, 1), pm(0.5, 0.2, 2)
    psi1, psi2 = (lambda y: -f1.log_modulus(y)), (lambda y: -f2.log_modulus(y))
    fit = pexider_fit(psi1, psi2, eps, small)
    assert fit.residual <= 1e-10
    assert np.allclose(fit.P.values, psi1(small) + psi2(small), atol=1e-9)
    assert np.allclose(fit.Q.values, psi1(small) + psi2(eps.apply(small)), atol=1e-9)


def test_pexider_negative_control_and_underdetermined():
    grid = np.arange(-16, 17.0)[:, None]
    eps = NEG.adjoint()
    fit = pexider_fit(lambda y: 0.5 * y[..., 0] ** 2, lambda y: 0.7 * y[..., 0] ** 2, eps, grid)
    assert fit.residual >= 0.01
    with pytest.raises(ValueError):
        pexider_fit(lambda y: y[..., 0], lambda y: y[..., 0], eps, grid, max_equations=10)


def test_extract_quadratic_form_examples():
    assert np.allclose(extract_quadratic_form(lambda y: 3 * y[..., 0] ** 2, [[1.0]], Z), [[3.0]])
    Y = LcaGroup.of("R", "Z")
    Q = extract_quadratic_form(lambda y: y[..., 0] ** 2 + y[..., 0] * y[..., 1] + y[..., 1] ** 2,
                               [[1.0, 0.0], [0.0, 1.0]], Y)
    assert np.allclose(Q, [[1.0, 0.5], [0.5, 1.0]])
    with pytest.raises(ValueError):
        extract_quadratic_form(lambda y: y[..., 0] ** 4, [[1.0]], Z)


@settings(max_examples=20)
@given(st.integers(0, 2**31))
def test_extract_round_trip(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    Q = A @ A.T
    R3 = LcaGroup.of("R", "R", "R")
    phi = lambda y: np.einsum("...i,ij,...j->...", y, Q, y)
    assert np.abs(extract_quadratic_form(phi, np.eye(3), R3) - Q).max() <= 1e-12 * max(1, np.abs(Q).max())
