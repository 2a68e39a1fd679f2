"""Exact rational coordinates for finite-rank torsion-free groups.

A torsion-free group ``D`` of finite rank ``l`` is modelled as a subgroup
of ``Q^m`` with a chosen maximal independent system ``d_1, ..., d_l``.
Every ``d`` in ``D`` then satisfies ``q d = q_1 d_1 + ... + q_l d_l`` for
integers ``q != 0, q_i``, and the ratios ``q_i / q`` are unique. Mapping
``d`` to those ratios embeds ``D`` into ``Q^l``; extended by the identity
on the real and free parts, this is the monomorphism

    f(s, d, k) = (s, q_1/q, ..., q_l/q, k).

All arithmetic here is exact (``fractions.Fraction``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import sympy


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, sympy.Rational):
        return Fraction(int(x.p), int(x.q))
    return Fraction(x)


def _vector(d) -> tuple[Fraction, ...]:
    if isinstance(d, (int, Fraction, float, str, sympy.Rational)):
        return (_frac(d),)
    return tuple(_frac(x) for x in d)


def rational_coordinates(d, basis: Sequence) -> tuple[Fraction, ...]:
    """Coordinates ``(q_1/q, ..., q_l/q)`` of ``d`` in the independent system ``basis``.

    Raises
    ------
    ValueError
        If ``basis`` is linearly dependent over Q or ``d`` is not in its
        rational span.
    """
    vecs = [_vector(b) for b in basis]
    if not vecs:
        raise ValueError("basis is empty")
    target = _vector(d)
    m = len(target)
    if any(len(v) != m for v in vecs):
        raise ValueError("basis vectors and d have different lengths")
    B = sympy.Matrix([[sympy.Rational(v[i].numerator, v[i].denominator) for v in vecs]
                      for i in range(m)])
    if B.rank() < len(vecs):
        raise ValueError("basis is not independent over Q")
    rhs = sympy.Matrix([sympy.Rational(x.numerator, x.denominator) for x in target])
    aug = B.row_join(rhs)
    if aug.rank() > B.rank():
        raise ValueError(f"{[str(x) for x in target]} is not in the rational span of the basis")
    sol, params = B.gauss_jordan_solve(rhs)
    if params.shape[0]:
        raise ValueError("basis is not independent over Q")
    return tuple(_frac(sympy.Rational(c)) for c in sol)


def integer_relation(d, basis: Sequence) -> tuple[int, tuple[int, ...]]:
    """Integers ``q > 0`` and ``q_i`` with ``q d = sum q_i d_i``."""
    coords = rational_coordinates(d, basis)
    q = 1
    for c in coords:
        q = math.lcm(q, c.denominator)
    return q, tuple(int(c * q) for c in coords)


def _radical_ok(x: Fraction, primes: frozenset[int]) -> bool:
    den = x.denominator
    for p in primes:
        while den % p == 0:
            den //= p
    return den == 1


@dataclass(frozen=True)
class LocalizedLattice:
    """The group ``{sum c_i d_i : c_i in Z[1/S]}`` inside ``Q^m``.

    ``S`` is the set of inverted primes; ``S = {2}`` with the single
    generator ``1`` gives ``Z[1/2]``. An empty ``S`` gives the lattice
    spanned by the generators.
    """

    basis: tuple[tuple[Fraction, ...], ...]
    primes: frozenset[int] = frozenset()

    def __init__(self, basis: Iterable, primes: Iterable[int] = ()):
        vecs = tuple(_vector(b) for b in basis)
        object.__setattr__(self, "basis", vecs)
        object.__setattr__(self, "primes", frozenset(int(p) for p in primes))
        rational_coordinates(vecs[0], vecs)  # validates independence

    @property
    def rank(self) -> int:
        return len(self.basis)

    def element(self, coeffs: Sequence) -> tuple[Fraction, ...]:
        cs = [_frac(c) for c in coeffs]
        if len(cs) != self.rank or not all(_radical_ok(c, self.primes) for c in cs):
            raise ValueError(f"coefficients {cs} do not define an element of this group")
        m = len(self.basis[0])
        return tuple(sum((c * b[i] for c, b in zip(cs, self.basis)), Fraction(0)) for i in range(m))

    def contains(self, d) -> bool:
        try:
            coords = rational_coordinates(d, self.basis)
        except ValueError:
            return False
        return all(_radical_ok(c, self.primes) for c in coords)

    def coordinates(self, d) -> tuple[Fraction, ...]:
        if not self.contains(d):
            raise ValueError(f"{d!r} is not an element of this group")
        return rational_coordinates(d, self.basis)


@dataclass(frozen=True)
class MixedElement:
    """An element ``(s, d, k)`` of ``R^a x D x Z^m``."""

    s: tuple
    d: tuple[Fraction, ...]
    k: tuple[int, ...]

    def __add__(self, other: "MixedElement") -> "MixedElement":
        return MixedElement(
            tuple(a + b for a, b in zip(self.s, other.s)),
            tuple(a + b for a, b in zip(self.d, other.d)),
            tuple(a + b for a, b in zip(self.k, other.k)),
        )


def embed_f(y: MixedElement, basis: Sequence) -> tuple:
    """Embed ``(s, d, k)`` as ``(s, q_1/q, ..., q_l/q, k)``."""
    if isinstance(basis, LocalizedLattice):
        coords = basis.coordinates(y.d)
    else:
        coords = rational_coordinates(y.d, basis)
    return tuple(y.s) + tuple(coords) + tuple(y.k)
