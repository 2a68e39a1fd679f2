import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darmois.charfn import (
    CharFn,
    ClosedFormCharFn,
    SignedPi,
    TabulatedCharFn,
    circle_conditional,
    convolve,
    gaussian_charfn,
    parallelogram_residual,
    point_mass,
    probability_defects,
    reflect,
    require_positive_definite,
    signed_pi_charfn,
    symmetrize,
    tabulate,
    validate_positive_definite,
)
from darmois.exceptions import NotPositiveDefiniteError, OutOfGridError
from darmois.groups import LcaGroup, dual_grid

T = LcaGroup.of("T")
INTS = np.arange(-32, 33.0)[:, None]


def test_gaussian_zero_form_is_one():
    f = gaussian_charfn([[0.0]])
    assert np.all(f(INTS) == 1.0)


def test_gaussian_on_integers():
    f = gaussian_charfn([[0.4]])
    assert f([[3.0]])[0] == pytest.approx(np.exp(-0.4 * 9))
    phi = lambda y: 0.4 * y[..., 0] ** 2
    Z = T.dual()
    u, v = np.meshgrid(np.arange(-10, 11.0), np.arange(-10, 11.0))
    r = parallelogram_residual(phi, Z, u.reshape(-1, 1), v.reshape(-1, 1))
    assert r.max() <= 1e-12 * 100


def test_gaussian_on_plane_satisfies_parallelogram_law():
    R2 = LcaGroup.of("R", "R")
    f = gaussian_charfn([[1.0, 0.5], [0.5, 1.0]], group=R2)
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=(50, 2)), rng.normal(size=(50, 2))
    phi = lambda y: f.gaussian.phi(y)
    r = parallelogram_residual(phi, R2, u, v)
    assert np.all(r <= 1e-12 * (1 + np.abs(phi(u)) + np.abs(phi(v))))


def test_non_psd_rejected():
    with pytest.raises(NotPositiveDefiniteError):
        gaussian_charfn([[1.0, 2.0], [2.0, 1.0]], group=LcaGroup.of("R", "T"))
    with pytest.raises(ValueError):
        gaussian_charfn([[1.0, 0.0], [1.0, 1.0]], group=LcaGroup.of("R", "T"))


def test_signed_pi_parity():
    f = signed_pi_charfn(0.9, 1)
    even = np.arange(-10, 11, 2.0)[:, None]
    assert np.all(f(even) == 1.0)
    assert np.all(signed_pi_charfn(0.0, 2)(INTS) == 1.0)


@pytest.mark.parametrize("which", [1, 2])
@pytest.mark.parametrize("kappa", [0.3, -0.3, 1.2])
def test_signed_pi_matches_two_point_sum(kappa, which):
    pi = SignedPi(kappa, which)
    p, q = pi.masses
    assert p + q == pytest.approx(1.0, abs=1e-15)
    n = INTS[:, 0]
    oracle = p * 1.0 + q * (-1.0) ** n
    assert np.abs(signed_pi_charfn(kappa, which)(INTS) - oracle).max() <= 1e-14
    if kappa == 0.3 and which == 1:
        assert signed_pi_charfn(kappa, which)([[1.0]])[0] == pytest.approx(np.exp(0.6))


@given(st.floats(-3, 3).filter(lambda k: abs(k) > 1e-9))
def test_exactly_one_pi_is_a_distribution(kappa):
    assert SignedPi(kappa, 1).is_distribution != SignedPi(kappa, 2).is_distribution


def test_pi1_convolved_with_pi2_is_identity():
    k = 0.37
    c = convolve(signed_pi_charfn(k, 1), signed_pi_charfn(k, 2))
    assert isinstance(c, ClosedFormCharFn)
    assert c.pi is None and np.all(c.shift == 0) and np.all(c.Q == 0)


def test_convolve_identity_and_gaussians():
    f = gaussian_charfn([[0.3]], [1.0])
    one = point_mass(T)
    g = convolve(f, one)
    assert np.allclose(g.Q, f.Q) and np.allclose(g.shift, f.shift)
    s = convolve(gaussian_charfn([[0.3]]), gaussian_charfn([[0.5]]))
    assert np.abs(s(INTS) - gaussian_charfn([[0.8]])(INTS)).max() <= 1e-14


def test_convolution_commutes_and_associates():
    a = gaussian_charfn([[0.3]], [1.0])
    b = convolve(gaussian_charfn([[0.5]], [2.0]), signed_pi_charfn(0.2, 1))
    c = signed_pi_charfn(0.1, 2)
    ab, ba = convolve(a, b), convolve(b, a)
    assert np.allclose(ab.Q, ba.Q) and np.allclose(ab.shift, ba.shift)
    assert ab.kappa_exponent == ba.kappa_exponent
    l, r = convolve(convolve(a, b), c), convolve(a, convolve(b, c))
    assert np.allclose(l.Q, r.Q) and l.kappa_exponent == pytest.approx(r.kappa_exponent)
    ta, tb = tabulate(a, INTS), tabulate(b, INTS)
    assert np.abs(convolve(ta, tb).values - convolve(tb, ta).values).max() <= 1e-12


def test_reflect_and_symmetrize():
    f = gaussian_charfn([[0.3]], [1.0])
    r = reflect(f)
    assert np.allclose(r(INTS), np.conj(f(INTS)))
    s = symmetrize(f)
    assert np.all(s.shift == 0)
    assert np.allclose(s(INTS), np.abs(f(INTS)) ** 2)
    real = gaussian_charfn([[0.3]])
    assert np.allclose(reflect(real)(INTS), real(INTS))


def test_symmetrize_m10_form():
    sigma, kappa = 1.0, 0.2
    f = convolve(gaussian_charfn([[sigma]], [0.4]), signed_pi_charfn(kappa, 1))
    s = symmetrize(f)
    n = INTS[:, 0]
    expected = np.exp(-2 * sigma * n ** 2 + 2 * kappa * (1 - (-1.0) ** n))
    assert np.allclose(s(INTS), expected, rtol=1e-14)


def test_tabulated_out_of_grid():
    t = tabulate(gaussian_charfn([[1.0]]), INTS)
    with pytest.raises(OutOfGridError):
        t([[100.0]])


def test_json_round_trips():
    f = convolve(gaussian_charfn([[0.3]], [1.0]), signed_pi_charfn(0.2, 2))
    back = CharFn.from_json(json.loads(json.dumps(f.to_json())), T)
    assert np.allclose(back(INTS), f(INTS))
    t = tabulate(f, INTS)
    tb = CharFn.from_json(json.loads(json.dumps(t.to_json())), T)
    assert isinstance(tb, TabulatedCharFn)
    assert np.allclose(tb.values, t.values)


def test_pd_gaussian_is_positive():
    rep = validate_positive_definite(gaussian_charfn([[1.0]]))
    assert rep.ok and rep.grid_size == 256 and rep.min_density > 0
    assert rep.increment_excess <= 1e-9


def test_pd_point_mass_is_positive():
    assert validate_positive_definite(point_mass(T)).ok
    assert validate_positive_definite(point_mass(T, [1.0])).ok


def test_pd_rejects_exploding_signed_pair():
    f = convolve(gaussian_charfn([[0.1]]), signed_pi_charfn(1.0, 1))
    assert abs(f([[1.0]])[0]) == pytest.approx(np.exp(1.9))
    rep = validate_positive_definite(f)
    assert rep.verdict == "violated"
    with pytest.raises(NotPositiveDefiniteError) as info:
        require_positive_definite(f)
    assert info.value.report is rep or info.value.report.verdict == "violated"


def test_pd_small_grid_rejected():
    with pytest.raises(ValueError):
        validate_positive_definite(gaussian_charfn([[1.0]]), density_points=4)


def test_pd_tabulated_matches_closed():
    f = gaussian_charfn([[1.0]])
    a = validate_positive_definite(f)
    b = validate_positive_definite(tabulate(f, np.arange(-64, 65.0)[:, None]))
    assert a.min_density == pytest.approx(b.min_density, abs=1e-9)


def test_pd_finite_group():
    Z5 = LcaGroup.of(5)
    pts = Z5.dual().enumerate()
    uniform = TabulatedCharFn.from_values(Z5, pts, (pts[:, 0] == 0).astype(float))
    assert validate_positive_definite(uniform).ok
    bad = TabulatedCharFn.from_values(Z5, pts, np.full(5, 1.0) * np.array([1, 1.5, 1.5, 1.5, 1.5]))
    assert not validate_positive_definite(bad).ok


def test_circle_conditional_uses_schur_complement():
    G = LcaGroup.of("R", "T")
    f = ClosedFormCharFn(G, None, [[1.0, 0.5], [0.5, 2.0]], SignedPi(0.1))
    sigma, e = circle_conditional(f)
    assert sigma == pytest.approx(2.0 - 0.25)
    assert e == pytest.approx(0.1)


@settings(max_examples=25)
@given(st.floats(0.05, 3.0), st.floats(-2, 2))
def test_probability_defects_of_gaussians(sigma, x):
    f = gaussian_charfn([[sigma]], [x])
    d = probability_defects(f, INTS)
    assert d["at_zero"] == 0.0
    assert d["max_modulus_excess"] <= 1e-9
    assert d["hermitian"] <= 1e-12


def test_increment_inequality_holds_for_validated_mixture():
    f = convolve(gaussian_charfn([[2.0]], [0.5]), signed_pi_charfn(0.3, 1))
    rep = validate_positive_definite(f)
    assert rep.ok
    assert rep.increment_excess <= 1e-9
    grid = dual_grid(LcaGroup.of("Z"), radius=8)
    assert np.abs(f(grid)).max() <= 1 + 1e-9
