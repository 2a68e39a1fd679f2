"""Distribution pairs on ``R^a x T`` with independent ``xi1 + xi2`` and ``xi1 + delta xi2``.

When the circle sign of ``delta`` is ``-1`` the characterized
characteristic functions are

    mu1(y) = (x1, y) exp{-phi1(y) + kappa (1 - (-1)^n)}
    mu2(y) = (x2, y) exp{-phi2(y) - kappa (1 - (-1)^n)}

with ``n`` the integer coordinate of ``y``, i.e. ``mu_j = gamma_j * pi_j``
for Gaussians ``gamma_j`` and the signed two-point measures ``pi_j`` on
``{0, pi}``. Here they are built as closed forms, gated on positivity and
re-verified against the functional equation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy

from .charfn import (
    ClosedFormCharFn,
    SignedPi,
    _schur_circle,
    convolve,
    validate_positive_definite,
)
from .exceptions import GroupMismatchError, InadmissibleParametersError, InvariantViolationError
from .groups import Automorphism, KernelOf, LcaGroup, dual_grid
from .sd import SdInstance, SdReport, sd_residual

logger = logging.getLogger(__name__)

SCHUR_TOL = 1e-9


def theorem3_group(a: int) -> LcaGroup:
    """``R^a x T``."""
    if a < 0:
        raise ValueError("real dimension must be >= 0")
    return LcaGroup.of(*(["R"] * a + ["T"]))


def _circle_sign(delta: Automorphism) -> int:
    g = delta.group
    if len(g.circle_idx) != 1 or len(g.torus_idx) != 1 or g.cyclic_idx:
        raise GroupMismatchError(f"expected a group R^a x T, got {g}")
    return delta.signs[0]


def compatible_form(Q2, delta: Automorphism) -> np.ndarray:
    """The form ``Q1 = -Q2 E`` (``E`` the matrix of the adjoint of ``delta``).

    This is exactly the condition under which the Gaussian cross terms of
    the functional equation cancel:
    ``<Q1 u, v> + <Q2 u, E v> = 0`` for all ``u, v``.

    Raises
    ------
    InvariantViolationError
        If ``-Q2 E`` is not symmetric positive semidefinite, in which case
        no Gaussian partner of ``Q2`` exists for this ``delta``.
    """
    Q2 = np.atleast_2d(np.asarray(Q2, dtype=float))
    E = delta.adjoint().matrix
    Q1 = -Q2 @ E
    scale = max(1.0, float(np.abs(Q1).max(initial=0.0)))
    if np.abs(Q1 - Q1.T).max(initial=0.0) > 1e-12 * scale:
        raise InvariantViolationError("-Q2 E is not symmetric: no compatible partner form")
    Q1 = 0.5 * (Q1 + Q1.T)
    if Q1.size and np.linalg.eigvalsh(Q1).min() < -1e-8:
        raise InvariantViolationError("-Q2 E is not positive semidefinite")
    return Q1


@dataclass(frozen=True, eq=False)
class Theorem3Params:
    """Parameters of a candidate pair on ``X = R^a x T``.

    ``Q1``, ``Q2`` are ``(a+1) x (a+1)`` forms over the dual coordinates
    (real coordinates first, then the integer coordinate). With circle
    sign ``-1`` the conditional circle coefficients (Schur complements of
    the integer coordinate) of ``Q1`` and ``Q2`` must agree; without real
    part this is ``Q1 == Q2``.
    """

    a: int
    Q1: np.ndarray
    Q2: np.ndarray
    kappa: float
    x1: np.ndarray = None
    x2: np.ndarray = None
    delta: Automorphism = None

    def __post_init__(self):
        g = theorem3_group(self.a)
        delta = Automorphism.negation(g) if self.delta is None else self.delta
        if delta.group != g:
            raise GroupMismatchError(f"delta acts on {delta.group}, not {g}")
        Q1 = np.atleast_2d(np.asarray(self.Q1, dtype=float))
        Q2 = np.atleast_2d(np.asarray(self.Q2, dtype=float))
        for Q in (Q1, Q2):
            if Q.shape != (self.a + 1, self.a + 1):
                raise ValueError(f"forms must be {(self.a + 1, self.a + 1)}, got {Q.shape}")
        x1 = np.zeros(g.dim) if self.x1 is None else np.asarray(self.x1, dtype=float).reshape(g.dim)
        x2 = np.zeros(g.dim) if self.x2 is None else np.asarray(self.x2, dtype=float).reshape(g.dim)
        object.__setattr__(self, "Q1", Q1)
        object.__setattr__(self, "Q2", Q2)
        object.__setattr__(self, "x1", g.reduce(x1))
        object.__setattr__(self, "x2", g.reduce(x2))
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def group(self) -> LcaGroup:
        return self.delta.group

    @property
    def circle_sign(self) -> int:
        return _circle_sign(self.delta)

    @classmethod
    def compatible(cls, a: int, Q2, kappa: float, delta: Automorphism | None = None,
                   x1=None, x2=None) -> "Theorem3Params":
        """Parameters with ``Q1`` chosen by :func:`compatible_form`."""
        delta = Automorphism.negation(theorem3_group(a)) if delta is None else delta
        return cls(a, compatible_form(Q2, delta), Q2, kappa, x1, x2, delta)

    def check_invariants(self) -> None:
        if self.circle_sign == 1:
            if self.kappa != 0.0:
                raise InvariantViolationError(
                    "circle sign +1 admits only Gaussian pairs: kappa must be 0")
            return
        c = self.a
        s1, s2 = _schur_circle(self.Q1, c), _schur_circle(self.Q2, c)
        if abs(s1 - s2) > SCHUR_TOL * max(1.0, abs(s1), abs(s2)):
            raise InvariantViolationError(
                f"conditional circle coefficients differ: {s1:.12g} vs {s2:.12g}")

    def to_json(self) -> dict:
        return {
            "a": self.a,
            "Q1": self.Q1.tolist(),
            "Q2": self.Q2.tolist(),
            "kappa": self.kappa,
            "x1": self.x1.tolist(),
            "x2": self.x2.tolist(),
            "delta": self.delta.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Theorem3Params":
        a = int(data["a"])
        g = theorem3_group(a)
        delta = Automorphism.from_json(data["delta"], g) if data.get("delta") else None
        if data.get("Q1") is None:
            return cls.compatible(a, data["Q2"], data.get("kappa", 0.0), delta,
                                  data.get("x1"), data.get("x2"))
        return cls(a, data["Q1"], data["Q2"], data.get("kappa", 0.0), data.get("x1"),
                   data.get("x2"), delta)


def pair_pieces(params: Theorem3Params):
    """``(gamma1, pi1, gamma2, pi2)`` as closed forms; ``pi_j`` is ``None`` when ``kappa = 0``."""
    g = params.group
    gamma1 = ClosedFormCharFn(g, params.x1, params.Q1)
    gamma2 = ClosedFormCharFn(g, params.x2, params.Q2)
    if params.kappa == 0.0:
        return gamma1, None, gamma2, None
    pi1 = ClosedFormCharFn(g, None, None, SignedPi(params.kappa, 1))
    pi2 = ClosedFormCharFn(g, None, None, SignedPi(params.kappa, 2))
    return gamma1, pi1, gamma2, pi2


def closed_forms(params: Theorem3Params) -> tuple[ClosedFormCharFn, ClosedFormCharFn]:
    """The pair without any gating."""
    g1, p1, g2, p2 = pair_pieces(params)
    f1 = g1 if p1 is None else convolve(g1, p1)
    f2 = g2 if p2 is None else convolve(g2, p2)
    return f1, f2


def standard_grid(group: LcaGroup, radius: int = 32) -> np.ndarray:
    """Dual grid ``|n| <= radius`` and 33 real points on ``[-8, 8]``."""
    return dual_grid(group.dual(), radius=radius, real_points=33, real_extent=8.0)


def verify_characterization(pair, delta: Automorphism, grid=None, *, tol: float | None = None,
                            radius: int = 32, keep_points: bool = False) -> SdReport:
    """Functional-equation residual for ``L1 = xi1 + xi2``, ``L2 = xi1 + delta xi2``."""
    f1, f2 = pair
    instance = SdInstance.two_forms(f1, f2, delta)
    pts = standard_grid(delta.group, radius) if grid is None else grid
    return sd_residual(instance, pts, tol=tol, keep_points=keep_points)


def construct_pair(params: Theorem3Params, *, tol: float = 1e-9, verify: bool = True,
                   pd_cutoff: int = 64, grid=None):
    """Build ``(mu1, mu2)`` and check that it is a genuine solution.

    Returns
    -------
    pair : tuple of ClosedFormCharFn
    reports : dict
        ``"pd1"``, ``"pd2"`` (:class:`PdReport`) and, if ``verify``,
        ``"verify"`` (:class:`SdReport`).

    Raises
    ------
    InvariantViolationError
        Structural conditions fail, or the pair does not solve the
        functional equation at ``tol``.
    InadmissibleParametersError
        Either function is not the characteristic function of a
        probability measure. The offending report is attached.
    """
    params.check_invariants()
    f1, f2 = closed_forms(params)
    reports = {}
    for name, f in (("pd1", f1), ("pd2", f2)):
        rep = validate_positive_definite(f, cutoff=pd_cutoff)
        reports[name] = rep
        if not rep.ok:
            raise InadmissibleParametersError(
                f"{'mu1' if name == 'pd1' else 'mu2'} is not a probability characteristic "
                f"function (min density {rep.min_density:.4g})", rep)
    if verify:
        rep = verify_characterization((f1, f2), params.delta, grid, tol=tol)
        reports["verify"] = rep
        if not rep.passed:
            raise InvariantViolationError(
                f"pair does not solve the functional equation (residual {rep.max_residual:.3g})")
    return (f1, f2), reports


# -- reduction ---------------------------------------------------------------


def _exact(x: float) -> sympy.Rational:
    fr = Fraction(float(x)).limit_denominator(10**12)
    return sympy.Rational(fr.numerator, fr.denominator)


@dataclass(frozen=True)
class ReductionTrace:
    """Output of :func:`reduce`.

    ``L_basis`` spans the real kernel ``L = Ker(I - eps)`` as exact
    rational vectors (empty when ``L = {0}``).
    """

    L_basis: tuple[tuple[Fraction, ...], ...]
    case: str
    H: str
    H_is_doubled: bool
    chain: tuple[str, ...] = field(default=())

    @property
    def L_trivial(self) -> bool:
        return not self.L_basis

    def to_json(self) -> dict:
        return {
            "L_basis": [[str(c) for c in b] for b in self.L_basis],
            "L_trivial": self.L_trivial,
            "case": self.case,
            "H": self.H,
            "H_is_doubled": self.H_is_doubled,
            "chain": list(self.chain),
        }


def _fmt(vec) -> str:
    return "(" + ", ".join(str(c) for c in vec) + ")"


def reduce(delta: Automorphism, group: LcaGroup | None = None) -> ReductionTrace:
    """Kernel subgroup and case split for ``delta`` on ``R^b x T``.

    ``L`` is the exact null space of ``I - alpha^T`` on the real dual
    coordinates; the case is ``1a`` for circle sign ``+1`` and ``1b`` for
    ``-1``; ``H = (I - eps) Y`` is described in words, and flagged when it
    equals ``Y^(2) = R^b x 2Z``.
    """
    if group is not None and group != delta.group:
        raise GroupMismatchError(f"delta acts on {delta.group}, not {group}")
    sign = _circle_sign(delta)
    b = delta.alpha.shape[0]
    A = sympy.Matrix(b, b, lambda i, j: _exact(delta.alpha[j, i]))  # alpha^T
    M = sympy.eye(b) - A
    null = M.nullspace() if b else []
    basis = tuple(tuple(Fraction(int(sympy.Rational(c).p), int(sympy.Rational(c).q)) for c in vec)
                  for vec in null)
    rank = b - len(basis)
    case = "1a" if sign == 1 else "1b"
    chain = [f"eps = adjoint(delta) on R^{b} x Z", f"L = Ker(I - alpha^T), dim {len(basis)}"]
    if basis:
        chain.append("L spanned by " + ", ".join(_fmt(v) for v in basis))
    real_part = f"R^{b}" if rank == b else f"range(I - alpha^T) (rank {rank}) + Z v"
    if b == 0:
        real_part = ""
    if sign == -1:
        int_part = "2Z"
    else:
        int_part = "{0}"
    H = f"{real_part} x {int_part}" if real_part else int_part
    doubled = sign == -1 and rank == b
    if doubled:
        chain.append("H = (I - eps)Y = Y^(2)")
    else:
        chain.append(f"H = (I - eps)Y = {H}")
    if sign == 1:
        chain.append("case 1a: circle fixed, pair reduces to Gaussians")
    else:
        chain.append("case 1b: circle inverted, signed factors on {0, pi} allowed")
    return ReductionTrace(basis, case, H, doubled, tuple(chain))


def kernel_subgroup(delta: Automorphism) -> KernelOf:
    """``L`` as a subgroup predicate on the dual."""
    return KernelOf(delta.adjoint())
