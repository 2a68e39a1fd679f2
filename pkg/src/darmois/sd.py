"""Residuals and decompositions for the Skitovich-Darmois functional equation.

For independent ``xi_j`` with characteristic functions ``f_j`` on ``Y`` and
automorphisms ``alpha_j, beta_j`` of ``X`` with adjoints ``a_j, b_j``, the
linear forms ``sum alpha_j xi_j`` and ``sum beta_j xi_j`` are independent iff

    prod f_j(a_j u + b_j v) = prod f_j(a_j u) * prod f_j(b_j v)   for all u, v.

This module measures how far given functions are from satisfying that
equation and its consequences on grids of characters, and fits the
structured solutions (quadratic part plus coset constants) that the
equation forces.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .charfn import CharFn, ClosedFormCharFn, TabulatedCharFn
from .exceptions import DecompositionError, GroupMismatchError
from .groups import Automorphism, DualTable, Kind, LcaGroup, lattice_combinations

logger = logging.getLogger(__name__)

CLOSED_TOL = 1e-9
TABULATED_TOL = 1e-6
MAX_EQUATIONS = 10_000
_CHUNK = 256


@dataclass(frozen=True, eq=False)
class SdInstance:
    """``n`` characteristic functions on ``dual(group)`` with coefficient automorphisms."""

    group: LcaGroup
    charfns: tuple[CharFn, ...]
    alphas: tuple[Automorphism, ...]
    betas: tuple[Automorphism, ...]

    def __post_init__(self):
        object.__setattr__(self, "charfns", tuple(self.charfns))
        object.__setattr__(self, "alphas", tuple(self.alphas))
        object.__setattr__(self, "betas", tuple(self.betas))
        n = len(self.charfns)
        if n < 2 or len(self.alphas) != n or len(self.betas) != n:
            raise ValueError("need at least two charfns and one alpha and beta per charfn")
        for obj in self.charfns + self.alphas + self.betas:
            if obj.group != self.group:
                raise GroupMismatchError(f"{obj.group} is not {self.group}")

    @classmethod
    def two_forms(cls, f1: CharFn, f2: CharFn, delta: Automorphism) -> "SdInstance":
        """``L1 = xi1 + xi2`` and ``L2 = xi1 + delta xi2``."""
        identity = Automorphism.identity(delta.group)
        return cls(delta.group, (f1, f2), (identity, identity), (identity, delta))

    @property
    def default_tolerance(self) -> float:
        if all(isinstance(f, ClosedFormCharFn) for f in self.charfns):
            return CLOSED_TOL
        return TABULATED_TOL

    def to_json(self) -> dict:
        return {
            "group": self.group.to_json(),
            "charfns": [f.to_json() for f in self.charfns],
            "alphas": [a.to_json() for a in self.alphas],
            "betas": [b.to_json() for b in self.betas],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SdInstance":
        group = LcaGroup.from_json(data["group"])
        charfns = [CharFn.from_json(f, group) for f in data["charfns"]]
        alphas = [Automorphism.from_json(a, group) for a in data["alphas"]]
        betas = [Automorphism.from_json(b, group) for b in data["betas"]]
        return cls(group, charfns, alphas, betas)


@dataclass
class SdReport:
    max_residual: float
    mean_residual: float
    grid: dict
    tolerance: float
    points: np.ndarray | None = field(default=None, repr=False)
    residuals: np.ndarray | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.tolerance)

    def to_json(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "grid": self.grid,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }

    def write_csv(self, path) -> None:
        """One row per evaluated grid point: its coordinates and residual."""
        if self.points is None or self.residuals is None:
            raise ValueError("report was computed without keep_points=True")
        width = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"p{i}" for i in range(width)] + ["residual"])
            for row, r in zip(self.points, self.residuals):
                w.writerow([repr(float(c)) for c in row] + [repr(float(r))])


def _report(res_chunks: list[np.ndarray], grid: dict, tol: float, points=None,
            keep: bool = False) -> SdReport:
    total = 0.0
    count = 0
    mx = 0.0
    for r in res_chunks:
        total += float(np.sum(r))
        count += r.size
        mx = max(mx, float(r.max(initial=0.0)))
    mean = total / count if count else 0.0
    residuals = np.concatenate([r.ravel() for r in res_chunks]) if keep else None
    return SdReport(mx, mean, grid, tol, points if keep else None, residuals)


def _closed_cross_terms(instance: SdInstance, aU, bV, sl) -> np.ndarray:
    """``log LHS - log RHS`` for closed forms, which is bilinear in ``(u, v)``.

    Shifts contribute linearly and cancel; ``-<Q y, y>`` leaves
    ``-2 <Q a u, b v>``; the parity factor leaves ``-4 e par(a u) par(b v)``
    since ``par(m + n) = par(m) + par(n) - 2 par(m) par(n)``.
    """
    S = np.zeros((len(aU[0][sl]), len(bV[0])))
    for f, au, bv in zip(instance.charfns, aU, bV):
        q = list(f.q_idx)
        if q:
            S -= 2.0 * (au[sl][:, q] @ f.Q) @ bv[:, q].T
        if f.pi is not None:
            c = f.group.circle_idx[0]
            S -= 4.0 * f.pi.exponent * np.outer(np.mod(au[sl][:, c], 2.0), np.mod(bv[:, c], 2.0))
    return S


def sd_residual(instance: SdInstance, u, v=None, *, tol: float | None = None,
                keep_points: bool = False, method: str = "auto") -> SdReport:
    """Residual of the functional equation over all pairs ``(u, v)`` in ``u x v``.

    ``u`` and ``v`` are arrays of dual points; ``v`` defaults to ``u``.
    The residual at a pair is the complex modulus of LHS - RHS. Pairs are
    processed in fixed row chunks so the reported mean does not depend on
    chunking.

    ``method="direct"`` evaluates both sides pointwise. ``"bilinear"``
    (closed forms only; the ``"auto"`` choice for them) writes
    ``LHS = RHS * exp(S)`` with ``S`` the cross terms of the exponents, so
    the residual is ``|RHS| * |expm1(S)|``, computed with matrix products.
    """
    Y = instance.group.dual()
    U = Y.reduce(np.atleast_2d(u))
    V = U if v is None else Y.reduce(np.atleast_2d(v))
    tol = instance.default_tolerance if tol is None else tol
    closed = all(isinstance(f, ClosedFormCharFn) for f in instance.charfns)
    if method == "auto":
        method = "bilinear" if closed else "direct"
    if method not in ("direct", "bilinear"):
        raise ValueError(f"unknown method {method!r}")
    if method == "bilinear" and not closed:
        raise ValueError("bilinear evaluation needs closed-form characteristic functions")
    a_adj = [a.adjoint() for a in instance.alphas]
    b_adj = [b.adjoint() for b in instance.betas]

    # RHS factors separate: evaluate once per point
    rhs_u = np.ones(len(U), dtype=complex)
    rhs_v = np.ones(len(V), dtype=complex)
    aU = [a.apply(U) for a in a_adj]
    bV = [b.apply(V) for b in b_adj]
    for f, au, bv in zip(instance.charfns, aU, bV):
        rhs_u *= f(au)
        rhs_v *= f(bv)

    if method == "bilinear":
        lr_u = sum(f.log_modulus(au) for f, au in zip(instance.charfns, aU))
        lr_v = sum(f.log_modulus(bv) for f, bv in zip(instance.charfns, bV))
    chunks = []
    pts = []
    for start in range(0, len(U), _CHUNK):
        sl = slice(start, start + _CHUNK)
        if method == "bilinear":
            S = _closed_cross_terms(instance, aU, bV, sl)
            L = lr_u[sl, None] + lr_v[None, :]
            with np.errstate(over="ignore", invalid="ignore"):
                res = np.exp(L) * np.abs(np.expm1(S))
                res = np.where(np.isfinite(res), res, np.abs(np.exp(L + S) - np.exp(L)))
            chunks.append(res)
        else:
            lhs = np.ones((len(U[sl]), len(V)), dtype=complex)
            for f, au, bv in zip(instance.charfns, aU, bV):
                lhs *= f(Y.add(au[sl, None, :], bv[None, :, :]))
            chunks.append(np.abs(lhs - rhs_u[sl, None] * rhs_v[None, :]))
        if keep_points:
            uu = np.broadcast_to(U[sl, None, :], (len(U[sl]), len(V), Y.dim))
            vv = np.broadcast_to(V[None, :, :], (len(U[sl]), len(V), Y.dim))
            pts.append(np.concatenate([uu, vv], axis=-1).reshape(-1, 2 * Y.dim))
    grid = {"n_u": int(len(U)), "n_v": int(len(V)), "pairs": int(len(U) * len(V))}
    points = np.concatenate(pts) if keep_points else None
    return _report(chunks, grid, tol, points, keep_points)


def lemma7_residual(f: CharFn, epsilon: Automorphism, points, *, tol: float | None = None) -> SdReport:
    """Residual of ``f(u+v) f(u-v) = f(u)^2 f(v) f(-v)`` for ``u`` in ``(eps - I)Y``.

    ``epsilon`` acts on ``dual(f.group)``. The admissible ``u`` are the
    images ``(eps - I) y`` of grid points that themselves lie on the grid;
    ``v`` runs over the whole grid. For tabulated ``f`` only pairs whose
    arguments are all tabulated are used.
    """
    Y = f.dual_group
    if epsilon.group != Y:
        raise GroupMismatchError(f"epsilon acts on {epsilon.group}, not {Y}")
    pts = Y.reduce(np.atleast_2d(points))
    grid_table = DualTable(Y, pts, np.arange(len(pts)))
    images = epsilon.minus_identity(pts)
    U = np.unique(images[grid_table.contains(images)], axis=0)
    if len(U) == 0:
        raise ValueError("(eps - I)Y does not meet the grid")
    V = pts
    tol = (CLOSED_TOL if isinstance(f, ClosedFormCharFn) else TABULATED_TOL) if tol is None else tol
    chunks = []
    for start in range(0, len(U), _CHUNK):
        uu = U[start:start + _CHUNK, None, :]
        s = Y.add(uu, V[None])
        d = Y.sub(uu, V[None])
        negv = Y.neg(V)
        if isinstance(f, TabulatedCharFn):
            ok = f.table.contains(s) & f.table.contains(d) & f.table.contains(negv)[None, :] \
                & f.table.contains(uu[:, 0, :])[:, None]
            if not np.any(ok):
                continue
            s_, d_ = s[ok], d[ok]
            ui = np.broadcast_to(uu, s.shape)[ok]
            vi = np.broadcast_to(V[None], s.shape)[ok]
            lhs = f(s_) * f(d_)
            rhs = f(ui) ** 2 * f(vi) * f(Y.neg(vi))
        else:
            lhs = f(s) * f(d)
            rhs = (f(uu[:, 0, :]) ** 2)[:, None] * (f(V) * f(negv))[None, :]
        chunks.append(np.abs(lhs - rhs).ravel())
    if not chunks:
        raise ValueError("no admissible (u, v) pairs on the tabulated grid")
    grid = {"n_u": int(len(U)), "n_v": int(len(V))}
    return _report(chunks, grid, tol)


def _as_callable(psi, group: LcaGroup | None):
    if isinstance(psi, DualTable):
        return psi.group, (lambda y: psi.lookup(y, strict=False)), psi
    if group is None:
        raise TypeError("group is required for callable psi")
    return group, psi, None


def check_m5(psi, points=None, *, group: LcaGroup | None = None, tol: float = 1e-10,
             k_radius: int | None = None, max_triples: int = 200_000, seed: int = 0) -> SdReport:
    """Residual of ``Delta_{2k} Delta_h^2 psi(y) = 0`` over grid triples ``(y, k, h)``.

    ``psi`` is a :class:`DualTable` or a callable on dual points (then
    ``group`` and ``points`` are required). ``y, h, k`` range over the
    grid points; for a table only triples whose six arguments are
    tabulated count, and ``k`` is limited to ``|k| <= radius / 4`` where
    ``radius`` is the largest integer coordinate on the grid. The report's
    ``grid`` entry carries the fraction of triples evaluated as
    ``coverage``. Passing requires ``max_residual <= tol * max(1, max|psi|)``.
    """
    Y, fn, table = _as_callable(psi, group)
    pts = Y.reduce(np.atleast_2d(table.points if (points is None and table is not None) else points))
    ks = pts
    if table is not None:
        ints = list(Y.integer_idx)
        if ints:
            radius = np.abs(pts[:, ints]).max()
            limit = radius / 4.0 if k_radius is None else k_radius
            ks = pts[np.all(np.abs(pts[:, ints]) <= limit, axis=1)]
        elif k_radius is not None:
            ks = pts[np.all(np.abs(pts) <= k_radius, axis=1)]
    n_y, n_h, n_k = len(pts), len(pts), len(ks)
    total = n_y * n_h * n_k
    if total == 0:
        raise ValueError("degenerate grid")
    if total <= max_triples:
        iy, ih, ik = np.meshgrid(np.arange(n_y), np.arange(n_h), np.arange(n_k), indexing="ij")
        iy, ih, ik = iy.ravel(), ih.ravel(), ik.ravel()
    else:
        rng = np.random.default_rng(seed)
        iy = rng.integers(0, n_y, max_triples)
        ih = rng.integers(0, n_h, max_triples)
        ik = rng.integers(0, n_k, max_triples)
    y, h, k = pts[iy], pts[ih], ks[ik]
    k2 = Y.multiply(k, 2)
    h2 = Y.multiply(h, 2)
    y2k = Y.add(y, k2)
    args = [Y.add(y2k, h2), Y.add(y2k, h), y2k, Y.add(y, h2), Y.add(y, h), y]
    vals = [np.asarray(fn(a), dtype=float) for a in args]
    ok = np.all([np.isfinite(v) for v in vals], axis=0)
    if not np.any(ok):
        raise ValueError("degenerate grid: no triple stays on the tabulated domain")
    vals = [v[ok] for v in vals]
    res = np.abs((vals[0] - 2.0 * vals[1] + vals[2]) - (vals[3] - 2.0 * vals[4] + vals[5]))
    scale = max(1.0, max(float(np.abs(v).max()) for v in vals))
    grid = {"triples": int(ok.sum()), "coverage": float(ok.sum()) / len(ok), "scale": scale}
    return _report([res], grid, tol * scale)


# -- coset decomposition ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class CosetDecomposition:
    """``psi = phi + c_alpha`` on the cosets of ``Y^(2)`` in ``R^b x Z``.

    ``phi(y) = <Q y, y>`` over (real coordinates, integer coordinate);
    ``constants`` maps coset label (0 = even, 1 = odd integer coordinate) to
    its constant, with ``constants[0] == 0`` by construction.
    """

    group: LcaGroup
    Q: np.ndarray
    constants: dict
    residual: float

    def phi(self, y) -> np.ndarray:
        z = _quad_coords(self.group, y)
        return np.einsum("...i,ij,...j->...", z, self.Q, z)

    def __call__(self, y) -> np.ndarray:
        y = self.group.reduce(np.atleast_2d(y))
        coset = np.mod(y[..., self.group.integer_idx[0]], 2).astype(int)
        return self.phi(y) + np.where(coset == 1, self.constants[1], self.constants[0])

    @property
    def c_odd(self) -> float:
        return self.constants[1]

    def to_json(self) -> dict:
        return {"Q": self.Q.tolist(), "constants": {str(k): v for k, v in self.constants.items()},
                "c_odd": self.c_odd, "residual": self.residual}


def _quad_coords(Y: LcaGroup, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y[..., list(Y.real_idx) + list(Y.integer_idx)]


def _check_decomposable_group(Y: LcaGroup) -> None:
    kinds = {f.kind for f in Y.factors}
    if len(Y.integer_idx) != 1 or not kinds <= {Kind.REAL, Kind.INTEGERS}:
        raise DecompositionError(f"decomposition needs a dual of the form R^b x Z, got {Y}")


def _fit_quadratic_plus_parity(Y: LcaGroup, y: np.ndarray, values: np.ndarray):
    z = _quad_coords(Y, y)
    d = z.shape[1]
    cols, pairs = [], []
    for i in range(d):
        for j in range(i, d):
            cols.append(z[:, i] * z[:, j] * (1.0 if i == j else 2.0))
            pairs.append((i, j))
    parity = np.mod(z[:, -1], 2.0)
    A = np.column_stack(cols + [parity])
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    Q = np.zeros((d, d))
    for c, (i, j) in zip(coef[:-1], pairs):
        Q[i, j] = Q[j, i] = c
    resid = float(np.abs(A @ coef - values).max(initial=0.0))
    return Q, float(coef[-1]), resid


def lemma9_decompose(psi, points=None, *, group: LcaGroup | None = None, tol: float = 1e-6,
                     m5_tol: float = 1e-9) -> CosetDecomposition:
    """Split an even ``psi`` with ``psi(0) = 0`` into a quadratic form plus coset constants.

    The dual must be ``R^b x Z``; ``Y^(2) = R^b x 2Z`` has the two cosets
    of even and odd integer coordinate. ``phi`` is fitted in the
    quadratic-form ansatz by least squares together with the odd-coset
    constant.

    Raises
    ------
    DecompositionError
        If ``psi`` is not even, ``psi(0) != 0``, the second-difference
        equation fails, or the fit residual exceeds ``tol``.
    """
    Y, fn, table = _as_callable(psi, group)
    _check_decomposable_group(Y)
    pts = Y.reduce(np.atleast_2d(table.points if (points is None and table is not None) else points))
    vals = np.asarray(fn(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DecompositionError("psi is not defined on every grid point")
    scale = max(1.0, float(np.abs(vals).max()))
    zero = fn(Y.zero()[None, :])[0]
    if not np.isfinite(zero) or abs(zero) > tol:
        raise DecompositionError(f"psi(0) = {zero} is not 0")
    neg = np.asarray(fn(Y.neg(pts)), dtype=float)
    even_ok = np.isfinite(neg)
    if np.any(np.abs(neg[even_ok] - vals[even_ok]) > tol * scale):
        raise DecompositionError("psi is not even")
    m5 = check_m5(table if table is not None else psi, pts if table is None else None,
                  group=Y, tol=m5_tol)
    if not m5.passed:
        raise DecompositionError(f"second-difference equation fails (residual {m5.max_residual:.3g})")
    Q, c_odd, resid = _fit_quadratic_plus_parity(Y, pts, vals)
    if resid > tol * scale:
        raise DecompositionError(f"fit residual {resid:.3g} exceeds tolerance")
    return CosetDecomposition(Y, Q, {0: 0.0, 1: c_odd}, resid)


class CosetDecomposer(RegressorMixin, BaseEstimator):
    """Estimator form of :func:`lemma9_decompose`.

    ``fit(X, y)`` takes dual points ``X`` of ``R^b x Z`` (integer coordinate
    last) and values ``y = psi(X)``; ``predict`` evaluates
    ``phi + c_alpha``. Unlike :func:`lemma9_decompose` no structural
    preconditions are enforced; ``residual_`` reports the fit quality.

    Attributes
    ----------
    Q_ : ndarray
        Fitted quadratic form.
    c_odd_ : float
        Constant on the odd coset.
    residual_ : float
        Maximum absolute fit residual.
    """

    def __init__(self, n_real: int = 0):
        self.n_real = n_real

    def _group(self) -> LcaGroup:
        return LcaGroup.of(*(["R"] * self.n_real + ["Z"]))

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        Y = self._group()
        if X.shape[1] != Y.dim:
            raise ValueError(f"expected {Y.dim} columns, got {X.shape[1]}")
        self.Q_, self.c_odd_, self.residual_ = _fit_quadratic_plus_parity(Y, Y.reduce(X), y)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "Q_")
        X = check_array(X)
        dec = CosetDecomposition(self._group(), self.Q_, {0: 0.0, 1: self.c_odd_}, self.residual_)
        return dec(X)


# -- Pexider form ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PexiderFit:
    P: DualTable
    Q: DualTable
    residual: float
    n_equations: int


def pexider_fit(psi1, psi2, epsilon: Automorphism, points, *, seed: int = 0,
                max_equations: int = MAX_EQUATIONS) -> PexiderFit:
    """Least-squares ``P, Q`` with ``psi1(u+v) + psi2(u + eps v) ~ P(u) + Q(v)``.

    ``psi1`` and ``psi2`` are callables or :class:`DualTable` on
    ``epsilon.group``; ``u`` and ``v`` range over ``points``. The additive
    gauge is fixed by ``P(0) = psi1(0) + psi2(0)``. At most
    ``max_equations`` pairs are used, subsampled with ``seed``. The
    reported residual is the largest absolute equation residual.
    """
    Y = epsilon.group
    _, f1, _ = _as_callable(psi1, Y)
    _, f2, _ = _as_callable(psi2, Y)
    pts = Y.reduce(np.atleast_2d(points))
    n = len(pts)
    iu, iv = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    iu, iv = iu.ravel(), iv.ravel()
    eV = epsilon.apply(pts)
    lhs = np.asarray(f1(Y.add(pts[iu], pts[iv])), float) + np.asarray(f2(Y.add(pts[iu], eV[iv])), float)
    ok = np.isfinite(lhs)
    iu, iv, lhs = iu[ok], iv[ok], lhs[ok]
    if len(lhs) > max_equations:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(len(lhs), max_equations, replace=False))
        iu, iv, lhs = iu[pick], iv[pick], lhs[pick]
    if len(lhs) < 2 * n:
        raise ValueError(f"underdetermined: {len(lhs)} equations for {2 * n} unknowns")
    m = len(lhs)
    A = np.zeros((m + 1, 2 * n))
    A[np.arange(m), iu] = 1.0
    A[np.arange(m), n + iv] = 1.0
    zero = np.flatnonzero(Y.equal(pts, Y.zero()))
    b = np.append(lhs, 0.0)
    if len(zero):
        A[m, zero[0]] = 1.0
        b[m] = float(f1(Y.zero()[None])[0] + f2(Y.zero()[None])[0])
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.abs(A[:m] @ sol - lhs).max())
    return PexiderFit(DualTable(Y, pts, sol[:n]), DualTable(Y, pts, sol[n:]), resid, m)


# -- quadratic forms -------------------------------------------------------


def extract_quadratic_form(phi: Callable, basis: Sequence, group: LcaGroup, *,
                           check_coeffs=None, tol: float = 1e-9) -> np.ndarray:
    """Polarise ``phi`` on the lattice spanned by ``basis``.

    ``Q_ij = (phi(e_i + e_j) - phi(e_i) - phi(e_j)) / 2``. The parallelogram
    law is checked on the combinations ``check_coeffs`` (default: all
    integer vectors in ``[-2, 2]^m``), as is the reconstruction
    ``phi(sum c_i e_i) = c^T Q c``.

    Raises
    ------
    ValueError
        If either check exceeds ``tol`` relative to ``max(1, |phi|)``.
    """
    E = group.reduce(np.atleast_2d(np.asarray(basis, dtype=float)))
    m = len(E)
    pe = np.asarray(phi(E), dtype=float)
    Q = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            Q[i, j] = 0.5 * (float(phi(group.add(E[i], E[j])[None])[0]) - pe[i] - pe[j])
    if check_coeffs is None:
        rng = np.arange(-2, 3)
        mesh = np.meshgrid(*([rng] * m), indexing="ij")
        check_coeffs = np.stack([g.ravel() for g in mesh], axis=-1)
    C = np.asarray(check_coeffs, dtype=float)
    pts = lattice_combinations(group, E, C)
    vals = np.asarray(phi(pts), dtype=float)
    scale = max(1.0, float(np.abs(vals).max()))
    # parallelogram law on all pairs of check points
    i, j = np.meshgrid(np.arange(len(pts)), np.arange(len(pts)), indexing="ij")
    u, v = pts[i.ravel()], pts[j.ravel()]
    par = np.abs(phi(group.add(u, v)) + phi(group.sub(u, v)) - 2 * phi(u) - 2 * phi(v))
    if par.max() > tol * scale * 4:
        raise ValueError(f"phi violates the parallelogram law (residual {par.max():.3g})")
    recon = np.einsum("ki,ij,kj->k", C, Q, C)
    if np.abs(recon - vals).max() > tol * scale:
        raise ValueError("reconstruction <Qc, c> does not match phi")
    return Q
