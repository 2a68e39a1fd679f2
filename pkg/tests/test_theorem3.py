from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darmois.charfn import convolve, gaussian_charfn, point_mass
from darmois.exceptions import InadmissibleParametersError, InvariantViolationError
from darmois.groups import Automorphism, LcaGroup
from darmois.theorem3 import (
    Theorem3Params,
    closed_forms,
    compatible_form,
    construct_pair,
    kernel_subgroup,
    pair_pieces,
    reduce,
    theorem3_group,
    verify_characterization,
)

T = theorem3_group(0)
NEG = Automorphism.negation(T)


def test_gaussian_case():
    (f1, f2), reps = construct_pair(Theorem3Params(0, [[1.0]], [[1.0]], 0.0))
    assert f1.pi is None and f2.pi is None
    assert reps["verify"].passed


def test_m10_value_at_one():
    f1, f2 = closed_forms(Theorem3Params(0, [[1.0]], [[1.0]], 0.2))
    assert f1([[1.0]])[0] == pytest.approx(np.exp(-1 + 0.4))
    assert f1([[1.0]])[0] == pytest.approx(np.exp(-0.6))
    assert f2([[1.0]])[0] == pytest.approx(np.exp(-1.4))


def test_inadmissible_rejected():
    with pytest.raises(InadmissibleParametersError) as info:
        construct_pair(Theorem3Params(0, [[0.05]], [[0.05]], 1.0))
    assert info.value.report.verdict == "violated"


def test_admissible_with_larger_sigma():
    (f1, f2), reps = construct_pair(Theorem3Params(0, [[1.5]], [[1.5]], 0.2, [1.0], [2.0]))
    assert reps["pd1"].ok and reps["pd2"].ok and reps["verify"].passed


def test_mismatched_sigma_invariant():
    with pytest.raises(InvariantViolationError):
        construct_pair(Theorem3Params(0, [[1.0]], [[1.2]], 0.1))


def test_case_1a_rejects_kappa():
    ident = Automorphism.identity(T)
    with pytest.raises(InvariantViolationError):
        construct_pair(Theorem3Params(0, [[1.0]], [[1.0]], 0.1, delta=ident))


def test_case_1a_gaussian_checked_numerically():
    G = theorem3_group(1)
    delta = Automorphism(G, [[-2.0]], None, [1])
    Q2 = np.array([[1.0, 0.0], [0.0, 0.0]])
    params = Theorem3Params.compatible(1, Q2, 0.0, delta)
    (_, _), reps = construct_pair(params)
    assert reps["verify"].passed
    # a circle component breaks the cross-term identity
    bad = Theorem3Params(1, params.Q1, Q2 + np.diag([0.0, 0.3]), 0.0, delta=delta)
    with pytest.raises(InvariantViolationError):
        construct_pair(bad)


def test_compatible_form_rxt():
    G = theorem3_group(1)
    delta = Automorphism(G, [[-0.5]], [[0.3]], [-1])
    Q2 = np.array([[1.0, 0.6], [0.6, 2.0]])
    Q1 = compatible_form(Q2, delta)
    assert np.allclose(Q1, Q1.T)
    params = Theorem3Params(1, Q1, Q2, 0.3, [0.1, 2.0], [-1.0, 3.0], delta)
    (f1, f2), reps = construct_pair(params)
    assert reps["verify"].max_residual <= 1e-12
    with pytest.raises(InvariantViolationError):
        compatible_form(np.array([[1.0, 0.0], [0.0, 2.0]]), delta)


def test_pieces_convolve_to_closed_form():
    params = Theorem3Params(0, [[1.0]], [[1.0]], 0.25, [0.5], [1.5])
    g1, p1, g2, p2 = pair_pieces(params)
    f1, f2 = closed_forms(params)
    c1 = convolve(g1, p1)
    assert np.allclose(c1.Q, f1.Q) and c1.kappa_exponent == f1.kappa_exponent == 0.25
    assert convolve(g2, p2).kappa_exponent == f2.kappa_exponent == -0.25
    assert convolve(p1, p2).pi is None


def test_params_json_round_trip():
    G = theorem3_group(1)
    delta = Automorphism(G, [[-0.5]], [[0.3]], [-1])
    params = Theorem3Params.compatible(1, [[1.0, 0.6], [0.6, 2.0]], 0.3, delta, [0.1, 2.0])
    back = Theorem3Params.from_json(params.to_json())
    assert np.allclose(back.Q1, params.Q1) and back.kappa == params.kappa
    assert np.allclose(back.delta.matrix, delta.matrix)


@settings(max_examples=15, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_shift_never_changes_verdict(a, b, c, d):
    G = theorem3_group(1)
    delta = Automorphism(G, [[-0.5]], [[0.3]], [-1])
    params = Theorem3Params.compatible(1, [[1.0, 0.6], [0.6, 2.0]], 0.3, delta, [a, b], [c, d])
    assert verify_characterization(closed_forms(params), delta, radius=8).passed


def test_verify_negative_control():
    f1, f2 = closed_forms(Theorem3Params(0, [[0.5]], [[0.7]], 0.2))
    rep = verify_characterization((f1, f2), NEG)
    assert not rep.passed and rep.max_residual >= 0.01


def test_verify_point_masses():
    rep = verify_characterization((point_mass(T, [1.0]), point_mass(T, [2.0])), NEG)
    assert rep.passed


def test_reduce_identity():
    tr = reduce(Automorphism.identity(theorem3_group(2)))
    assert len(tr.L_basis) == 2 and tr.case == "1a"


def test_reduce_b1_case_1b():
    G = theorem3_group(1)
    tr = reduce(Automorphism(G, [[2.0]], [[3.0]], [-1]), G)
    assert tr.L_trivial and tr.case == "1b" and tr.H_is_doubled
    assert tr.H == "R^1 x 2Z"


def test_reduce_b2_kernel_oracle():
    # I - alpha^T = [[0, 0], [-1, -1]] has null space spanned by (-1, 1)
    G = theorem3_group(2)
    delta = Automorphism(G, [[1.0, 1.0], [0.0, 2.0]], None, [1])
    tr = reduce(delta)
    assert tr.case == "1a"
    assert tr.L_basis == ((Fraction(-1), Fraction(1)),)
    L = kernel_subgroup(delta)
    assert L.contains([[2.0, -2.0, 0.0]]).all()
    assert not L.contains([[1.0, 0.0, 0.0]]).any()


def test_reduce_rejects_wrong_group():
    with pytest.raises(ValueError):
        reduce(Automorphism.identity(LcaGroup.of("T", "T")))
