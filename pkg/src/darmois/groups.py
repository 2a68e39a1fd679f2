"""Locally compact Abelian groups built from elementary factors.

A group is a finite product of factors drawn from the real line, the
circle, the integers and finite cyclic groups. Points are stored as
float arrays whose last axis indexes the factors:

* real line -- any real number
* circle -- an angle in ``[0, 2*pi)``
* integers -- an integer (stored as a float)
* ``Z(n)`` -- a residue in ``{0, ..., n-1}``

Character groups are computed factorwise (the real line and ``Z(n)`` are
self-dual, the circle and the integers are dual to each other), and the
pairing of a point with a character is ``exp(i * sum_k phase_k)``.
"""

from __future__ import annotations

import abc
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import GroupMismatchError, OutOfGridError

TWO_PI = 2.0 * np.pi

#: Tolerance used when comparing circle coordinates modulo 2*pi.
CIRCLE_TOL = 1e-9

_KEY_SCALE = 1e6


class Kind(str, enum.Enum):
    REAL = "real"
    CIRCLE = "circle"
    CYCLIC = "cyclic"
    INTEGERS = "integers"


_DUAL_KIND = {
    Kind.REAL: Kind.REAL,
    Kind.CIRCLE: Kind.INTEGERS,
    Kind.INTEGERS: Kind.CIRCLE,
    Kind.CYCLIC: Kind.CYCLIC,
}


@dataclass(frozen=True)
class Factor:
    """One elementary factor of a product group."""

    kind: Kind
    n: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.CYCLIC:
            if self.n is None or int(self.n) != self.n or self.n < 2:
                raise ValueError(f"cyclic modulus must be an integer >= 2, got {self.n!r}")
            object.__setattr__(self, "n", int(self.n))
        elif self.n is not None:
            raise ValueError(f"only cyclic factors take a modulus, got n={self.n!r}")

    def dual(self) -> "Factor":
        return Factor(_DUAL_KIND[self.kind], self.n)

    @property
    def is_torus_like(self) -> bool:
        return self.kind in (Kind.CIRCLE, Kind.INTEGERS)

    def __str__(self):
        return {
            Kind.REAL: "R",
            Kind.CIRCLE: "T",
            Kind.INTEGERS: "Z",
            Kind.CYCLIC: f"Z({self.n})",
        }[self.kind]

    def to_json(self) -> dict:
        out = {"kind": self.kind.value}
        if self.n is not None:
            out["n"] = self.n
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Factor":
        return cls(Kind(data["kind"]), data.get("n"))


REAL_LINE = Factor(Kind.REAL)
CIRCLE = Factor(Kind.CIRCLE)
INTEGERS = Factor(Kind.INTEGERS)


def cyclic(n: int) -> Factor:
    return Factor(Kind.CYCLIC, n)


_SHORTHAND = {"R": REAL_LINE, "T": CIRCLE, "Z": INTEGERS}


def _coerce_factor(spec) -> Factor:
    if isinstance(spec, Factor):
        return spec
    if isinstance(spec, (int, np.integer)):
        return cyclic(int(spec))
    if isinstance(spec, str):
        key = spec.strip()
        if key in _SHORTHAND:
            return _SHORTHAND[key]
        if key.startswith("Z(") and key.endswith(")"):
            return cyclic(int(key[2:-1]))
        return Factor(Kind(key))
    if isinstance(spec, dict):
        return Factor.from_json(spec)
    raise TypeError(f"cannot interpret {spec!r} as a group factor")


@dataclass(frozen=True)
class LcaGroup:
    """A finite product of elementary LCA factors.

    Examples
    --------
    >>> G = LcaGroup.of("R", "T")
    >>> str(G.dual())
    'R x Z'
    """

    factors: tuple[Factor, ...]

    def __post_init__(self):
        factors = tuple(_coerce_factor(f) for f in self.factors)
        if not factors:
            raise ValueError("a group needs at least one factor")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, *specs) -> "LcaGroup":
        """Build a group from shorthand: ``"R"``, ``"T"``, ``"Z"``, ``"Z(n)"`` or an int ``n``."""
        return cls(tuple(specs))

    def __str__(self):
        return " x ".join(str(f) for f in self.factors)

    @property
    def dim(self) -> int:
        return len(self.factors)

    def dual(self) -> "LcaGroup":
        return LcaGroup(tuple(f.dual() for f in self.factors))

    def indices(self, *kinds: Kind) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.factors) if f.kind in kinds)

    @property
    def real_idx(self) -> tuple[int, ...]:
        return self.indices(Kind.REAL)

    @property
    def circle_idx(self) -> tuple[int, ...]:
        return self.indices(Kind.CIRCLE)

    @property
    def integer_idx(self) -> tuple[int, ...]:
        return self.indices(Kind.INTEGERS)

    @property
    def cyclic_idx(self) -> tuple[int, ...]:
        return self.indices(Kind.CYCLIC)

    @property
    def torus_idx(self) -> tuple[int, ...]:
        """Circle and integer factors, in factor order."""
        return self.indices(Kind.CIRCLE, Kind.INTEGERS)

    @property
    def moduli(self) -> np.ndarray:
        return np.array([self.factors[i].n for i in self.cyclic_idx], dtype=float)

    @property
    def is_finite(self) -> bool:
        return all(f.kind is Kind.CYCLIC for f in self.factors)

    @property
    def order(self) -> int | None:
        if not self.is_finite:
            return None
        return int(np.prod([f.n for f in self.factors]))

    # -- points -----------------------------------------------------------

    def _check(self, points) -> np.ndarray:
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 0 or arr.shape[-1] != self.dim:
            raise GroupMismatchError(
                f"expected points with last axis {self.dim} for {self}, got shape {arr.shape}"
            )
        return arr

    def reduce(self, points) -> np.ndarray:
        """Bring coordinates into their canonical ranges."""
        arr = np.array(self._check(points), dtype=float, copy=True)
        for i, f in enumerate(self.factors):
            col = arr[..., i]
            if f.kind is Kind.CIRCLE:
                col = np.mod(col, TWO_PI)
                col = np.where(np.abs(col - TWO_PI) < 1e-12, 0.0, col)
            elif f.kind is Kind.INTEGERS:
                col = np.rint(col)
            elif f.kind is Kind.CYCLIC:
                col = np.mod(np.rint(col), f.n)
            arr[..., i] = col
        return arr

    def zero(self) -> np.ndarray:
        return np.zeros(self.dim)

    def add(self, a, b) -> np.ndarray:
        return self.reduce(self._check(a) + self._check(b))

    def neg(self, a) -> np.ndarray:
        return self.reduce(-self._check(a))

    def sub(self, a, b) -> np.ndarray:
        return self.reduce(self._check(a) - self._check(b))

    def multiply(self, a, k: int) -> np.ndarray:
        """Integer multiple ``k * a``."""
        return self.reduce(int(k) * self._check(a))

    def difference(self, a, b) -> np.ndarray:
        """Coordinatewise distance, measured modulo 2*pi on circle factors."""
        d = self._check(a) - self._check(b)
        for i in self.circle_idx:
            d[..., i] = np.angle(np.exp(1j * d[..., i]))
        for i in self.cyclic_idx:
            n = self.factors[i].n
            r = np.mod(np.rint(d[..., i]), n)
            d[..., i] = np.minimum(r, n - r)
        return d

    def equal(self, a, b, tol: float = CIRCLE_TOL) -> np.ndarray:
        return np.all(np.abs(self.difference(a, b)) <= tol, axis=-1)

    def in_range(self, points) -> np.ndarray:
        """Whether each point already lies in the canonical coordinate ranges."""
        arr = self._check(points)
        ok = np.ones(arr.shape[:-1], dtype=bool)
        for i, f in enumerate(self.factors):
            col = arr[..., i]
            if f.kind is Kind.CIRCLE:
                ok &= (col >= 0) & (col < TWO_PI)
            elif f.kind is Kind.INTEGERS:
                ok &= col == np.rint(col)
            elif f.kind is Kind.CYCLIC:
                ok &= (col == np.rint(col)) & (col >= 0) & (col < f.n)
            ok &= np.isfinite(col)
        return ok

    def element(self, coords) -> "GroupElement":
        return GroupElement(self, coords)

    def random(self, rng: np.random.Generator, size: int, *, real_scale: float = 3.0,
               integer_range: int = 8) -> np.ndarray:
        out = np.empty((size, self.dim))
        for i, f in enumerate(self.factors):
            if f.kind is Kind.REAL:
                out[:, i] = rng.normal(scale=real_scale, size=size)
            elif f.kind is Kind.CIRCLE:
                out[:, i] = rng.uniform(0.0, TWO_PI, size=size)
            elif f.kind is Kind.INTEGERS:
                out[:, i] = rng.integers(-integer_range, integer_range + 1, size=size)
            else:
                out[:, i] = rng.integers(0, f.n, size=size)
        return self.reduce(out)

    def enumerate(self) -> np.ndarray:
        """All elements of a finite group, row-major in the factor moduli."""
        if not self.is_finite:
            raise ValueError(f"{self} is not finite")
        grids = np.meshgrid(*[np.arange(f.n) for f in self.factors], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1).astype(float)

    def index_of(self, points) -> np.ndarray:
        """Row index in :meth:`enumerate` of points of a finite group."""
        arr = self.reduce(points).astype(np.int64)
        mods = [f.n for f in self.factors]
        return np.ravel_multi_index(tuple(np.moveaxis(arr, -1, 0)), mods)

    # -- serialisation ----------------------------------------------------

    def to_json(self) -> dict:
        return {"factors": [f.to_json() for f in self.factors]}

    @classmethod
    def from_json(cls, data: dict) -> "LcaGroup":
        return cls(tuple(Factor.from_json(f) for f in data["factors"]))


def dual(group: LcaGroup) -> LcaGroup:
    """Character group, computed factorwise."""
    return group.dual()


@dataclass(frozen=True, eq=False)
class GroupElement:
    """A single point of a group."""

    group: LcaGroup
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = self.group.reduce(np.asarray(self.coords, dtype=float).reshape(self.group.dim))
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    def _other(self, other) -> np.ndarray:
        if isinstance(other, GroupElement):
            if other.group != self.group:
                raise GroupMismatchError(f"{other.group} vs {self.group}")
            return other.coords
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        return GroupElement(self.group, self.group.add(self.coords, self._other(other)))

    def __sub__(self, other):
        return GroupElement(self.group, self.group.sub(self.coords, self._other(other)))

    def __neg__(self):
        return GroupElement(self.group, self.group.neg(self.coords))

    def __eq__(self, other):
        if not isinstance(other, GroupElement) or other.group != self.group:
            return NotImplemented
        return bool(self.group.equal(self.coords, other.coords))

    def __hash__(self):
        return hash((self.group, tuple(np.round(self.coords, 9))))

    def __repr__(self):
        return f"GroupElement({self.group}, {self.coords.tolist()})"


def pair(x, y, group: LcaGroup | None = None) -> np.ndarray:
    """Evaluate the character ``y`` at the point ``x``.

    ``x`` and ``y`` are either :class:`GroupElement` instances (``y`` on the
    dual group) or arrays of coordinates broadcasting against each other, in
    which case ``group`` is the group containing ``x``.
    """
    if isinstance(x, GroupElement):
        if group is not None and group != x.group:
            raise GroupMismatchError(f"{x.group} vs {group}")
        group = x.group
        x = x.coords
    if isinstance(y, GroupElement):
        if group is None:
            group = y.group.dual()
        if y.group != group.dual():
            raise GroupMismatchError(f"character on {y.group} cannot pair with {group}")
        y = y.coords
    if group is None:
        raise TypeError("group is required when pairing raw coordinates")
    x = group._check(x)
    y = group.dual()._check(y)
    phase = np.zeros(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]))
    for i, f in enumerate(group.factors):
        if f.kind is Kind.CYCLIC:
            prod = np.mod(np.rint(x[..., i]) * np.rint(y[..., i]), f.n)
            phase = phase + TWO_PI * prod / f.n
        else:
            phase = phase + x[..., i] * y[..., i]
    return np.exp(1j * phase)


# -- automorphisms ---------------------------------------------------------


def _as_matrix(value, rows: int, cols: int, name: str) -> np.ndarray:
    if value is None:
        return np.zeros((rows, cols))
    arr = np.asarray(value, dtype=float)
    if arr.size == 0:
        return np.zeros((rows, cols))
    if arr.ndim == 1 and rows == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim == 0 and rows == 1 and cols == 1:
        arr = arr.reshape(1, 1)
    if arr.shape != (rows, cols):
        raise ValueError(f"{name} must have shape {(rows, cols)}, got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Automorphism:
    """A topological automorphism in block-triangular form.

    Parameters
    ----------
    group : LcaGroup
        Group acted on.
    alpha : array (a, a)
        Invertible block on the real coordinates.
    v : array (m, a)
        Cross block, one row per circle or integer factor (in factor
        order). On a circle factor, row ``v_j`` adds ``<v_j, t>`` to the
        angle; on an integer factor it adds ``k * v_j`` to the real
        coordinates. These are the two faces of the same block under
        duality, which is why the adjoint keeps ``v`` unchanged.
    signs : sequence of +-1, length m
        Action on each circle or integer factor.
    units : sequence of int
        Multiplier on each cyclic factor; must be coprime to its modulus.
    """

    group: LcaGroup
    alpha: np.ndarray = None
    v: np.ndarray = None
    signs: tuple[int, ...] = None
    units: tuple[int, ...] = None

    def __post_init__(self):
        g = self.group
        a, m = len(g.real_idx), len(g.torus_idx)
        alpha = _as_matrix(np.eye(a) if self.alpha is None else self.alpha, a, a, "alpha")
        if a and np.linalg.matrix_rank(alpha) < a:
            raise ValueError("real block alpha must be invertible")
        v = _as_matrix(self.v, m, a, "v")
        signs = tuple(int(s) for s in (self.signs if self.signs is not None else [1] * m))
        if len(signs) != m or any(s not in (1, -1) for s in signs):
            raise ValueError(f"signs must be {m} values in {{+1, -1}}, got {signs}")
        moduli = [g.factors[i].n for i in g.cyclic_idx]
        units = tuple(int(u) for u in (self.units if self.units is not None else [1] * len(moduli)))
        if len(units) != len(moduli):
            raise ValueError(f"expected {len(moduli)} cyclic units, got {len(units)}")
        units = tuple(u % n for u, n in zip(units, moduli))
        for u, n in zip(units, moduli):
            if math.gcd(u, n) != 1:
                raise ValueError(f"unit {u} is not coprime to modulus {n}")
        alpha.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "units", units)

    @classmethod
    def identity(cls, group: LcaGroup) -> "Automorphism":
        return cls(group)

    @classmethod
    def negation(cls, group: LcaGroup) -> "Automorphism":
        a, m = len(group.real_idx), len(group.torus_idx)
        units = [group.factors[i].n - 1 for i in group.cyclic_idx]
        return cls(group, -np.eye(a), None, [-1] * m, units)

    @property
    def _cont_idx(self) -> tuple[int, ...]:
        return self.group.real_idx + self.group.torus_idx

    @property
    def matrix(self) -> np.ndarray:
        """Matrix on (real coordinates, circle/integer coordinates), acting on columns."""
        g = self.group
        a = len(g.real_idx)
        m = len(g.torus_idx)
        M = np.zeros((a + m, a + m))
        M[:a, :a] = self.alpha
        for j, i in enumerate(g.torus_idx):
            M[a + j, a + j] = self.signs[j]
            if g.factors[i].kind is Kind.CIRCLE:
                M[a + j, :a] = self.v[j]
            else:
                M[:a, a + j] = self.v[j]
        return M

    @classmethod
    def from_matrix(cls, group: LcaGroup, M: np.ndarray, units=None, tol: float = 1e-12):
        a, m = len(group.real_idx), len(group.torus_idx)
        M = np.asarray(M, dtype=float)
        v = np.zeros((m, a))
        mask = np.zeros_like(M, dtype=bool)
        mask[:a, :a] = True
        signs = []
        for j, i in enumerate(group.torus_idx):
            mask[a + j, a + j] = True
            s = M[a + j, a + j]
            if abs(abs(s) - 1) > tol:
                raise ValueError("circle/integer diagonal entries must be +-1")
            signs.append(int(round(s)))
            if group.factors[i].kind is Kind.CIRCLE:
                v[j] = M[a + j, :a]
                mask[a + j, :a] = True
            else:
                v[j] = M[:a, a + j]
                mask[:a, a + j] = True
        if np.any(np.abs(M[~mask]) > tol):
            raise ValueError("matrix leaves the block-triangular automorphism form")
        return cls(group, M[:a, :a], v, signs, units)

    def apply(self, points) -> np.ndarray:
        g = self.group
        arr = g._check(points)
        out = np.array(arr, dtype=float, copy=True)
        idx = list(self._cont_idx)
        if idx:
            out[..., idx] = arr[..., idx] @ self.matrix.T
        for u, i in zip(self.units, g.cyclic_idx):
            out[..., i] = u * np.rint(arr[..., i])
        return g.reduce(out)

    def __call__(self, x):
        if isinstance(x, GroupElement):
            return GroupElement(self.group, self.apply(x.coords))
        return self.apply(x)

    def adjoint(self) -> "Automorphism":
        """Adjoint automorphism on the character group: ``(delta x, y) = (x, eps y)``."""
        return Automorphism(self.group.dual(), self.alpha.T, self.v, self.signs, self.units)

    def compose(self, other: "Automorphism") -> "Automorphism":
        """``self o other``."""
        if other.group != self.group:
            raise GroupMismatchError(f"{other.group} vs {self.group}")
        moduli = [self.group.factors[i].n for i in self.group.cyclic_idx]
        units = [(u1 * u2) % n for u1, u2, n in zip(self.units, other.units, moduli)]
        return Automorphism.from_matrix(self.group, self.matrix @ other.matrix, units)

    def inverse(self) -> "Automorphism":
        moduli = [self.group.factors[i].n for i in self.group.cyclic_idx]
        units = [pow(u, -1, n) for u, n in zip(self.units, moduli)]
        M = self.matrix
        Minv = np.linalg.inv(M) if M.size else M
        return Automorphism.from_matrix(self.group, Minv, units, tol=1e-9)

    def minus_identity(self, points) -> np.ndarray:
        """``(self - I)`` applied to points."""
        return self.group.sub(self.apply(points), points)

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "v": self.v.tolist(),
            "signs": list(self.signs),
            "units": list(self.units),
        }

    @classmethod
    def from_json(cls, data: dict, group: LcaGroup) -> "Automorphism":
        return cls(group, data.get("alpha"), data.get("v"), data.get("signs"), data.get("units"))

    def __repr__(self):
        return (f"Automorphism({self.group}, alpha={self.alpha.tolist()}, v={self.v.tolist()}, "
                f"signs={list(self.signs)}, units={list(self.units)})")


def adjoint(delta: Automorphism, on: LcaGroup | None = None) -> Automorphism:
    if on is not None and on != delta.group:
        raise GroupMismatchError(f"automorphism acts on {delta.group}, not {on}")
    return delta.adjoint()


# -- subgroups -------------------------------------------------------------


class Subgroup(abc.ABC):
    """A subgroup described by a membership predicate."""

    group: LcaGroup

    @abc.abstractmethod
    def contains(self, points, tol: float = CIRCLE_TOL) -> np.ndarray:
        """Boolean mask over the leading axes of ``points``."""

    def __contains__(self, x) -> bool:
        coords = x.coords if isinstance(x, GroupElement) else x
        return bool(self.contains(coords))


@dataclass(frozen=True)
class FullGroup(Subgroup):
    group: LcaGroup

    def contains(self, points, tol=CIRCLE_TOL):
        return np.ones(self.group._check(points).shape[:-1], dtype=bool)


@dataclass(frozen=True)
class Trivial(Subgroup):
    group: LcaGroup

    def contains(self, points, tol=CIRCLE_TOL):
        return self.group.equal(points, self.group.zero(), tol)


@dataclass(frozen=True)
class DoubledSubgroup(Subgroup):
    """The subgroup ``{2y : y in group}``."""

    group: LcaGroup

    def contains(self, points, tol=CIRCLE_TOL):
        arr = self.group.reduce(points)
        ok = np.ones(arr.shape[:-1], dtype=bool)
        for i, f in enumerate(self.group.factors):
            if f.kind is Kind.INTEGERS:
                ok &= np.mod(arr[..., i], 2) == 0
            elif f.kind is Kind.CYCLIC and f.n % 2 == 0:
                ok &= np.mod(arr[..., i], 2) == 0
        return ok


@dataclass(frozen=True, eq=False)
class KernelOf(Subgroup):
    """``Ker(I - eps)`` restricted to the real coordinates.

    Elements have zero non-real coordinates and real part in the null
    space of ``I - alpha``.
    """

    epsilon: Automorphism

    @property
    def group(self) -> LcaGroup:
        return self.epsilon.group

    @property
    def basis(self) -> np.ndarray:
        """Orthonormal basis (rows) of the real null space."""
        a = self.epsilon.alpha.shape[0]
        if a == 0:
            return np.zeros((0, 0))
        A = np.eye(a) - self.epsilon.alpha
        _, s, vt = np.linalg.svd(A)
        rank = int(np.sum(s > 1e-10 * max(1.0, s.max(initial=0.0))))
        return vt[rank:]

    def contains(self, points, tol=CIRCLE_TOL):
        g = self.group
        arr = g.reduce(points)
        masked = arr.copy()
        masked[..., list(g.real_idx)] = 0.0
        ok = g.equal(masked, g.zero(), tol)
        if g.real_idx:
            s = arr[..., list(g.real_idx)]
            A = np.eye(len(g.real_idx)) - self.epsilon.alpha
            ok &= np.all(np.abs(s @ A.T) <= tol * (1 + np.abs(s).max(axis=-1, keepdims=True)), axis=-1)
        return ok


@dataclass(frozen=True, eq=False)
class Annihilator(Subgroup):
    """``A(X, H) = {x : (x, y) = 1 for all y in H}``.

    ``of`` is either a :class:`Subgroup` of the dual or an explicit list of
    dual elements generating ``H``.
    """

    group: LcaGroup
    of: object

    def __post_init__(self):
        if isinstance(self.of, Subgroup):
            if self.of.group != self.group.dual():
                raise GroupMismatchError(f"{self.of.group} is not the dual of {self.group}")
        else:
            gens = np.atleast_2d(np.asarray(self.of, dtype=float))
            if gens.size == 0:
                gens = np.zeros((0, self.group.dim))
            object.__setattr__(self, "of", self.group.dual().reduce(gens))

    def contains(self, points, tol=CIRCLE_TOL):
        g = self.group
        arr = g.reduce(points)
        H = self.of
        if isinstance(H, Trivial):
            return np.ones(arr.shape[:-1], dtype=bool)
        if isinstance(H, FullGroup):
            return g.equal(arr, g.zero(), tol)
        if isinstance(H, DoubledSubgroup):
            return g.equal(g.multiply(arr, 2), g.zero(), tol)
        if isinstance(H, KernelOf):
            basis = H.basis
            if basis.size == 0:
                return np.ones(arr.shape[:-1], dtype=bool)
            t = arr[..., list(g.real_idx)]
            return np.all(np.abs(t @ basis.T) <= tol, axis=-1)
        if isinstance(H, Subgroup):
            raise NotImplementedError(f"annihilator of {type(H).__name__} is not supported")
        vals = pair(arr[..., None, :], H, group=g)
        return np.all(np.abs(vals - 1.0) <= tol, axis=-1)


def annihilator(group: LcaGroup, sub) -> Annihilator:
    return Annihilator(group, sub)


# -- functions on grids ----------------------------------------------------


class DualTable:
    """Values of a function tabulated on a finite set of group points.

    Lookup outside the tabulated set raises :class:`OutOfGridError` (or
    yields NaN with ``strict=False``); there is no extrapolation.
    """

    def __init__(self, group: LcaGroup, points, values):
        self.group = group
        pts = group.reduce(np.atleast_2d(np.asarray(points, dtype=float)))
        vals = np.asarray(values)
        if vals.shape[0] != pts.shape[0]:
            raise ValueError("points and values differ in length")
        keys = self._keys(pts)
        order = np.argsort(keys, kind="stable")
        skeys = keys[order]
        if len(skeys) > 1 and np.any(skeys[1:] == skeys[:-1]):
            raise ValueError("duplicate grid points")
        self.points = pts
        self.values = vals
        self._sorted_keys = skeys
        self._order = order

    def _keys(self, pts: np.ndarray) -> np.ndarray:
        k = np.rint(pts * _KEY_SCALE).astype(np.int64)
        period = int(round(TWO_PI * _KEY_SCALE))
        for i in self.group.circle_idx:
            k[..., i] = np.mod(k[..., i], period)
        dt = np.dtype([(f"f{i}", np.int64) for i in range(self.group.dim)])
        return np.ascontiguousarray(k).view(dt).reshape(k.shape[:-1])

    def _locate(self, points):
        pts = self.group.reduce(points)
        q = self._keys(pts.reshape(-1, self.group.dim))
        pos = np.searchsorted(self._sorted_keys, q)
        pos_c = np.minimum(pos, len(self._sorted_keys) - 1)
        found = self._sorted_keys[pos_c] == q
        return pts.shape[:-1], self._order[pos_c], found

    def contains(self, points) -> np.ndarray:
        shape, _, found = self._locate(points)
        return found.reshape(shape)

    def lookup(self, points, strict: bool = True) -> np.ndarray:
        shape, idx, found = self._locate(points)
        if strict and not np.all(found):
            bad = self.group.reduce(points).reshape(-1, self.group.dim)[~found][0]
            raise OutOfGridError(f"point {bad.tolist()} is outside the tabulated grid")
        out = self.values[idx].astype(np.result_type(self.values.dtype, float), copy=True)
        if not strict:
            out[~found] = np.nan
        return out.reshape(shape + self.values.shape[1:])

    __call__ = lookup

    def __len__(self):
        return len(self.points)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "DualTable":
        return DualTable(self.group, self.points, fn(self.values))


GridFunction = Callable[[np.ndarray], np.ndarray]


def finite_difference(psi, h, group: LcaGroup | None = None):
    """``(Delta_h psi)(y) = psi(y + h) - psi(y)``.

    For a :class:`DualTable` the result is tabulated on the points ``y``
    with ``y + h`` still on the grid; an empty result raises ``ValueError``.
    For a callable, ``group`` is required and the result is a callable.
    """
    if isinstance(psi, DualTable):
        g = psi.group
        shifted = g.add(psi.points, h)
        keep = psi.contains(shifted)
        if not np.any(keep):
            raise ValueError("finite difference leaves an empty domain")
        values = psi.lookup(shifted[keep]) - psi.values[keep]
        return DualTable(g, psi.points[keep], values)
    if group is None:
        raise TypeError("group is required to difference a callable")
    h = np.asarray(h, dtype=float)

    def delta(y):
        return psi(group.add(y, h)) - psi(y)

    return delta


def dual_grid(group: LcaGroup, radius: int = 32, real_points: int = 33,
              real_extent: float = 8.0, circle_points: int = 16) -> np.ndarray:
    """Product grid of points on ``group``.

    Integer coordinates run over ``-radius..radius``, real coordinates over
    ``real_points`` evenly spaced values in ``[-real_extent, real_extent]``,
    cyclic coordinates over all residues and circle coordinates over
    ``circle_points`` equally spaced angles.
    """
    axes = []
    for f in group.factors:
        if f.kind is Kind.INTEGERS:
            axes.append(np.arange(-radius, radius + 1, dtype=float))
        elif f.kind is Kind.REAL:
            axes.append(np.linspace(-real_extent, real_extent, real_points))
        elif f.kind is Kind.CYCLIC:
            axes.append(np.arange(f.n, dtype=float))
        else:
            axes.append(TWO_PI * np.arange(circle_points) / circle_points)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def lattice_combinations(group: LcaGroup, basis: Sequence, coeffs: Iterable[Sequence[int]]) -> np.ndarray:
    """Points ``sum_i c_i e_i`` for each coefficient vector ``c``."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    rows = [np.asarray(c, dtype=float) @ basis for c in coeffs]
    return group.reduce(np.array(rows))
