"""Characteristic functions on character groups.

A characteristic function of a distribution on ``X`` lives on ``Y = X*``.
Two representations are supported:

* :class:`ClosedFormCharFn` -- ``f(y) = (x, y) exp{-<Q y, y>} pi(y)`` with a
  shift ``x``, a positive semidefinite form ``Q`` over the real and
  circle-dual coordinates, and an optional two-point signed-measure factor
  ``pi`` on the subgroup ``{0, pi}`` of the (single) circle factor.
* :class:`TabulatedCharFn` -- explicit values on a finite set of characters.

Closed forms stay symbolic under convolution, reflection and
symmetrisation, so parameter identities can be checked exactly.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import GroupMismatchError, NotPositiveDefiniteError
from .groups import TWO_PI, DualTable, Kind, LcaGroup, dual_grid, pair

PSD_TOL = 1e-8
DENSITY_TOL = 1e-9


def _parity(n) -> np.ndarray:
    """``(1 - (-1)^n) / 2`` for integer-valued ``n``."""
    return np.mod(np.rint(n), 2.0)


@dataclass(frozen=True)
class SignedPi:
    """Two-point signed measure on ``{0, pi}`` in the circle.

    ``which=1`` has masses ``((1 + e^{2k})/2, (1 - e^{2k})/2)`` at
    ``(0, pi)``; ``which=2`` flips the sign of ``kappa``. Its
    characteristic function at the integer ``n`` is
    ``exp{+-kappa (1 - (-1)^n)}``.
    """

    kappa: float
    which: int = 1

    def __post_init__(self):
        if self.which not in (1, 2):
            raise ValueError(f"which must be 1 or 2, got {self.which!r}")
        if not math.isfinite(self.kappa):
            raise ValueError("kappa must be finite")
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def exponent(self) -> float:
        return self.kappa if self.which == 1 else -self.kappa

    @property
    def masses(self) -> tuple[float, float]:
        p = 0.5 * (1.0 + math.exp(2.0 * self.exponent))
        return p, 1.0 - p

    @property
    def is_distribution(self) -> bool:
        return min(self.masses) >= 0.0

    def characteristic(self, n) -> np.ndarray:
        return np.exp(2.0 * self.exponent * _parity(n))

    @staticmethod
    def from_exponent(e: float) -> "SignedPi | None":
        if e == 0.0:
            return None
        return SignedPi(abs(e), 1 if e > 0 else 2)


def _combine_pi(a: SignedPi | None, b: SignedPi | None) -> SignedPi | None:
    ea = a.exponent if a is not None else 0.0
    eb = b.exponent if b is not None else 0.0
    return SignedPi.from_exponent(ea + eb)


@dataclass(frozen=True, eq=False)
class GaussianForm:
    """Quadratic form ``phi(y) = <Q y, y>`` together with a shift ``x``."""

    Q: np.ndarray
    shift: np.ndarray

    def phi(self, y_cont) -> np.ndarray:
        y = np.asarray(y_cont, dtype=float)
        return np.einsum("...i,ij,...j->...", y, self.Q, y)


class CharFn(abc.ABC):
    """Characteristic function of a (possibly signed) measure on ``group``."""

    group: LcaGroup

    @property
    def dual_group(self) -> LcaGroup:
        return self.group.dual()

    @abc.abstractmethod
    def __call__(self, y) -> np.ndarray:
        """Values at dual points ``y`` (last axis indexes the factors)."""

    def log_modulus(self, y) -> np.ndarray:
        return np.log(np.abs(self(y)))

    @abc.abstractmethod
    def to_json(self) -> dict:
        ...

    @staticmethod
    def from_json(data: dict, group: LcaGroup) -> "CharFn":
        if data["kind"] == "closed":
            return ClosedFormCharFn.from_json(data, group)
        if data["kind"] == "tabulated":
            return TabulatedCharFn.from_json(data, group)
        raise ValueError(f"unknown charfn kind {data['kind']!r}")


@dataclass(frozen=True, eq=False)
class ClosedFormCharFn(CharFn):
    group: LcaGroup
    shift: np.ndarray = None
    Q: np.ndarray = None
    pi: SignedPi | None = None

    def __post_init__(self):
        g = self.group
        q = len(self.q_idx)
        shift = g.reduce(np.zeros(g.dim) if self.shift is None
                         else np.asarray(self.shift, dtype=float).reshape(g.dim))
        Q = np.zeros((q, q)) if self.Q is None else np.array(self.Q, dtype=float, copy=True)
        if Q.size == 0:
            Q = np.zeros((q, q))
        if Q.shape != (q, q):
            raise ValueError(f"Q must be {q}x{q} for {g}, got {Q.shape}")
        scale = max(1.0, float(np.abs(Q).max(initial=0.0)))
        if np.abs(Q - Q.T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        if q and np.linalg.eigvalsh(Q).min() < -PSD_TOL:
            raise NotPositiveDefiniteError("Q is not positive semidefinite")
        if self.pi is not None and len(g.circle_idx) != 1:
            raise ValueError("a signed-measure factor needs exactly one circle factor")
        shift.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "Q", Q)

    @property
    def q_idx(self) -> tuple[int, ...]:
        """Dual coordinates carried by ``Q``: real factors, then circle factors."""
        return self.group.real_idx + self.group.circle_idx

    @property
    def gaussian(self) -> GaussianForm:
        return GaussianForm(self.Q, self.shift)

    @property
    def kappa_exponent(self) -> float:
        return self.pi.exponent if self.pi is not None else 0.0

    def _log_modulus(self, y: np.ndarray) -> np.ndarray:
        out = -self.gaussian.phi(y[..., list(self.q_idx)]) if self.q_idx else np.zeros(y.shape[:-1])
        if self.pi is not None:
            n = y[..., self.group.circle_idx[0]]
            out = out + 2.0 * self.pi.exponent * _parity(n)
        return out

    def log_modulus(self, y) -> np.ndarray:
        y = self.dual_group._check(y)
        return self._log_modulus(y)

    def __call__(self, y) -> np.ndarray:
        y = self.dual_group._check(y)
        return pair(self.shift, y, group=self.group) * np.exp(self._log_modulus(y))

    def to_json(self) -> dict:
        return {
            "kind": "closed",
            "shift": self.shift.tolist(),
            "Q": self.Q.tolist(),
            "kappa": None if self.pi is None else self.pi.kappa,
            "which": None if self.pi is None else self.pi.which,
        }

    @classmethod
    def from_json(cls, data: dict, group: LcaGroup) -> "ClosedFormCharFn":
        pi = None
        if data.get("kappa") is not None:
            pi = SignedPi(data["kappa"], data.get("which") or 1)
        return cls(group, data.get("shift"), data.get("Q"), pi)

    def __repr__(self):
        return (f"ClosedFormCharFn({self.group}, shift={self.shift.tolist()}, "
                f"Q={self.Q.tolist()}, pi={self.pi})")


@dataclass(frozen=True, eq=False)
class TabulatedCharFn(CharFn):
    group: LcaGroup
    table: DualTable = field(repr=False)

    def __post_init__(self):
        if self.table.group != self.group.dual():
            raise GroupMismatchError(f"table lives on {self.table.group}, not on {self.group.dual()}")

    @classmethod
    def from_values(cls, group: LcaGroup, points, values) -> "TabulatedCharFn":
        return cls(group, DualTable(group.dual(), points, np.asarray(values, dtype=complex)))

    @property
    def points(self) -> np.ndarray:
        return self.table.points

    @property
    def values(self) -> np.ndarray:
        return self.table.values

    def __call__(self, y) -> np.ndarray:
        return self.table.lookup(y)

    def to_json(self) -> dict:
        vals = np.asarray(self.values, dtype=complex)
        return {
            "kind": "tabulated",
            "grid": self.points.tolist(),
            "values": [[float(v.real), float(v.imag)] for v in vals],
        }

    @classmethod
    def from_json(cls, data: dict, group: LcaGroup) -> "TabulatedCharFn":
        vals = np.array([complex(re, im) for re, im in data["values"]])
        return cls.from_values(group, data["grid"], vals)


# -- constructors ----------------------------------------------------------


def gaussian_charfn(Q, x=None, group: LcaGroup | None = None) -> ClosedFormCharFn:
    """``f(y) = (x, y) exp{-<Q y, y>}``; ``group`` defaults to ``T`` for a 1x1 form."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if group is None:
        if Q.shape != (1, 1):
            raise TypeError("group is required for forms larger than 1x1")
        group = LcaGroup.of("T")
    return ClosedFormCharFn(group, x, Q)


def signed_pi_charfn(kappa: float, which: int = 1, group: LcaGroup | None = None) -> ClosedFormCharFn:
    group = LcaGroup.of("T") if group is None else group
    return ClosedFormCharFn(group, None, None, SignedPi(kappa, which))


def point_mass(group: LcaGroup, x=None) -> ClosedFormCharFn:
    return ClosedFormCharFn(group, x, None, None)


def tabulate(f: CharFn, points) -> TabulatedCharFn:
    pts = f.dual_group.reduce(np.atleast_2d(points))
    return TabulatedCharFn.from_values(f.group, pts, f(pts))


# -- algebra ---------------------------------------------------------------


def convolve(f: CharFn, g: CharFn) -> CharFn:
    """Characteristic function of the convolution: the pointwise product."""
    if f.group != g.group:
        raise GroupMismatchError(f"cannot convolve measures on {f.group} and {g.group}")
    if isinstance(f, ClosedFormCharFn) and isinstance(g, ClosedFormCharFn):
        return ClosedFormCharFn(f.group, f.group.add(f.shift, g.shift), f.Q + g.Q,
                                _combine_pi(f.pi, g.pi))
    base = f if isinstance(f, TabulatedCharFn) else g
    pts = base.points
    return TabulatedCharFn.from_values(f.group, pts, f(pts) * g(pts))


def reflect(f: CharFn) -> CharFn:
    """Characteristic function of ``mu(-B)``: the complex conjugate."""
    if isinstance(f, ClosedFormCharFn):
        return ClosedFormCharFn(f.group, f.group.neg(f.shift), f.Q, f.pi)
    return TabulatedCharFn.from_values(f.group, f.points, np.conj(f.values))


def symmetrize(f: CharFn) -> CharFn:
    """``mu * reflect(mu)``, whose characteristic function is ``|f|^2``."""
    if isinstance(f, ClosedFormCharFn):
        return ClosedFormCharFn(f.group, None, 2.0 * f.Q,
                                SignedPi.from_exponent(2.0 * f.kappa_exponent))
    return TabulatedCharFn.from_values(f.group, f.points, np.abs(f.values) ** 2)


def parallelogram_residual(phi, group: LcaGroup, u, v) -> np.ndarray:
    """``|phi(u+v) + phi(u-v) - 2 phi(u) - 2 phi(v)|`` pointwise."""
    return np.abs(phi(group.add(u, v)) + phi(group.sub(u, v)) - 2.0 * phi(u) - 2.0 * phi(v))


# -- positivity ------------------------------------------------------------


@dataclass(frozen=True)
class PdReport:
    """Result of :func:`validate_positive_definite`.

    ``min_density`` is the smallest value of the inverse Fourier sum,
    normalised so that the uniform (Haar) distribution has density 1.
    """

    min_density: float
    grid_size: int
    increment_excess: float = 0.0

    @property
    def verdict(self) -> str:
        return "violated" if self.min_density < -DENSITY_TOL else "positive-definite"

    @property
    def ok(self) -> bool:
        return self.verdict == "positive-definite"

    def to_json(self) -> dict:
        return {"min_density": self.min_density, "grid_size": self.grid_size,
                "increment_excess": self.increment_excess, "verdict": self.verdict}


def _circle_density(values: np.ndarray, n: np.ndarray, points: int) -> np.ndarray:
    """Inverse Fourier sum on ``points`` equally spaced angles.

    When the coefficients have not decayed at the cutoff (point masses,
    nearly degenerate Gaussians) the plain partial sum rings negative even
    for genuine measures, so Fejer weights are applied instead; the Fejer
    kernel is nonnegative, making the sum of a measure nonnegative.
    """
    edge = np.abs(values[np.abs(n) == np.abs(n).max()]).max()
    if edge > 1e-12:
        values = values * (1.0 - np.abs(n) / (np.abs(n).max() + 1.0))
    theta = TWO_PI * np.arange(points) / points
    return np.real(np.exp(-1j * np.outer(theta, n)) @ values)


def _schur_circle(Q: np.ndarray, c: int) -> float:
    """Conditional quadratic coefficient of coordinate ``c`` given the others."""
    rest = [i for i in range(Q.shape[0]) if i != c]
    if not rest:
        return float(Q[c, c])
    Qrr = Q[np.ix_(rest, rest)]
    qcr = Q[c, rest]
    return float(Q[c, c] - qcr @ np.linalg.pinv(Qrr, rcond=1e-12, hermitian=True) @ qcr)


def circle_conditional(f: ClosedFormCharFn, circle: int = 0) -> tuple[float, float]:
    """Effective ``(sigma, kappa-exponent)`` of the circle conditional of a closed form.

    Conditioning a Gaussian on ``R^a x T`` on the real coordinates leaves a
    wrapped Gaussian on the circle whose quadratic coefficient is the
    Schur complement of ``Q``. The signed factor acts on the circle only,
    so the measure is nonnegative iff that one-dimensional conditional is.
    """
    pos = len(f.group.real_idx) + circle
    return _schur_circle(np.asarray(f.Q), pos), (f.kappa_exponent if circle == 0 else 0.0)


def _increment_excess(f: CharFn, points: np.ndarray, n_pairs: int, rng: np.random.Generator) -> float:
    Y = f.dual_group
    if len(points) == 0:
        return 0.0
    i = rng.integers(0, len(points), size=n_pairs)
    j = rng.integers(0, len(points), size=n_pairs)
    u, v = points[i], points[j]
    d = Y.sub(u, v)
    if isinstance(f, TabulatedCharFn):
        keep = f.table.contains(d)
        u, v, d = u[keep], v[keep], d[keep]
        if len(u) == 0:
            return 0.0
    lhs = np.abs(f(u) - f(v)) ** 2
    rhs = 2.0 * (1.0 - np.real(f(d)))
    return float(max(0.0, np.max(lhs - rhs)))


def validate_positive_definite(f: CharFn, cutoff: int = 64, density_points: int | None = None,
                               n_pairs: int = 500, seed: int = 0) -> PdReport:
    """Check that ``f`` is the characteristic function of a probability measure.

    The measure's density is reconstructed by a truncated inverse Fourier
    sum and its minimum reported; the inequality
    ``|f(u) - f(v)|^2 <= 2 (1 - Re f(u - v))`` is spot-checked on random
    pairs and its largest excess reported as ``increment_excess``.

    Closed forms are reduced to their circle conditional (see
    :func:`circle_conditional`) and summed over ``|n| <= cutoff`` on
    ``density_points`` angles (default ``4 * cutoff``). Groups without a
    circle factor carry no signed factor, so their Gaussian is a measure and
    the reported density is that of the trivial slice, 1. Tabulated
    functions are supported on ``T`` (symmetric integer grid) and on finite
    groups (full dual, exact inverse DFT).
    """
    density_points = 4 * cutoff if density_points is None else density_points
    if density_points < 8:
        raise ValueError("density grid needs at least 8 points")
    rng = np.random.default_rng(seed)
    X, Y = f.group, f.dual_group

    if isinstance(f, ClosedFormCharFn):
        mins = [1.0]
        n = np.arange(-cutoff, cutoff + 1, dtype=float)
        for c in range(len(X.circle_idx)):
            sigma, e = circle_conditional(f, c)
            vals = np.exp(-sigma * n ** 2 + 2.0 * e * _parity(n))
            mins.append(float(_circle_density(vals, n, density_points).min()))
        min_density = min(mins[1:]) if len(mins) > 1 else 1.0
        check_pts = dual_grid(Y, radius=min(cutoff, 8), real_points=9, real_extent=2.0)
        grid_size = density_points if X.circle_idx else 1
    elif X.is_finite:
        pts = Y.enumerate()
        if not np.all(f.table.contains(pts)):
            raise ValueError("tabulated function on a finite group must cover the whole dual")
        vals = f(pts)
        xs = X.enumerate()
        dens = np.real(np.conj(pair(xs[:, None, :], pts[None, :, :], group=X)) @ vals)
        min_density = float(dens.min())
        check_pts = pts
        grid_size = len(xs)
    elif X.dim == 1 and X.factors[0].kind is Kind.CIRCLE:
        n = f.points[:, 0]
        if not np.all(f.table.contains(-f.points)):
            raise ValueError("tabulated grid must be symmetric")
        min_density = float(_circle_density(f.values, n, density_points).min())
        check_pts = f.points
        grid_size = density_points
    else:
        raise ValueError(f"positivity check for tabulated functions on {X} is not supported")

    excess = _increment_excess(f, check_pts, n_pairs, rng)
    return PdReport(min_density, grid_size, excess)


def require_positive_definite(f: CharFn, **kwargs) -> PdReport:
    report = validate_positive_definite(f, **kwargs)
    if not report.ok:
        raise NotPositiveDefiniteError(
            f"not a probability characteristic function (min density {report.min_density:.3g})",
            report)
    return report


def probability_defects(f: CharFn, points) -> dict:
    """Deviations from ``f(0) = 1``, ``|f| <= 1`` and ``f(-y) = conj f(y)`` on ``points``."""
    Y = f.dual_group
    pts = Y.reduce(np.atleast_2d(points))
    vals = f(pts)
    return {
        "at_zero": float(abs(f(Y.zero()[None, :])[0] - 1.0)),
        "max_modulus_excess": float(max(0.0, np.abs(vals).max() - 1.0)),
        "hermitian": float(np.abs(f(Y.neg(pts)) - np.conj(vals)).max()),
    }
