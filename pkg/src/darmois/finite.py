"""Brute-force solutions of the two-form equation on finite Abelian groups.

For probability vectors ``p1, p2`` on a finite group ``X`` with
characteristic functions ``f1, f2`` the forms ``xi1 + xi2`` and
``xi1 + delta xi2`` are independent iff

    f1(u + v) f2(u + eps v) = f1(u) f2(u) f1(v) f2(eps v)   on Y x Y.

:func:`solve` scans the simplex (``mode="grid"``) or minimises the summed
squared residual from seeded random starts (``mode="opt"``), keeps the
solutions whose characteristic functions do not vanish, identifies pairs
that differ by translations and classifies what remains.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import minimize

from .charfn import TabulatedCharFn
from .exceptions import GroupMismatchError
from .groups import Automorphism, LcaGroup, pair
from .sd import SdInstance, SdReport, sd_residual

logger = logging.getLogger(__name__)

MAX_ORDER = 64
NONVANISHING = 1e-6
UNIMODULAR_TOL = 1e-9
MAX_GRID_EVALUATIONS = 50_000_000


@dataclass(frozen=True, eq=False)
class FiniteInstance:
    """Search problem on a finite group.

    Parameters
    ----------
    group : LcaGroup
        Product of cyclic factors, order at most 64.
    delta : Automorphism
        Acts on ``group``.
    tolerance : float
        Largest accepted residual ``max |LHS - RHS|``.
    mode : {"grid", "opt"}
    step : float
        Simplex grid step; ``1/step`` must be an integer.
    restarts : int
        Number of optimiser starts in ``opt`` mode.
    opt_tol : float
        Optimiser accuracy; sets the degeneracy radius in ``opt`` mode.
    seed : int
    """

    group: LcaGroup
    delta: Automorphism
    tolerance: float = 1e-9
    mode: str = "grid"
    step: float = 0.05
    restarts: int = 200
    opt_tol: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if not self.group.is_finite:
            raise ValueError(f"{self.group} is not a finite group")
        if self.group.order > MAX_ORDER:
            raise ValueError(f"group order {self.group.order} exceeds {MAX_ORDER}")
        if self.delta.group != self.group:
            raise GroupMismatchError(f"delta acts on {self.delta.group}, not {self.group}")
        if self.mode not in ("grid", "opt"):
            raise ValueError(f"mode must be 'grid' or 'opt', got {self.mode!r}")
        if self.mode == "grid":
            k = 1.0 / self.step
            if self.step <= 0 or abs(k - round(k)) > 1e-9:
                raise ValueError("1/step must be a positive integer")
        if self.restarts < 1:
            raise ValueError("restarts must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    @property
    def resolution(self) -> float:
        """Step or optimiser accuracy, whichever the mode uses."""
        return self.step if self.mode == "grid" else self.opt_tol

    def to_json(self) -> dict:
        return {"group": self.group.to_json(), "delta": self.delta.to_json(),
                "tolerance": self.tolerance, "mode": self.mode, "step": self.step,
                "restarts": self.restarts, "opt_tol": self.opt_tol, "seed": self.seed}

    @classmethod
    def from_json(cls, data: dict) -> "FiniteInstance":
        g = LcaGroup.from_json(data["group"])
        delta = Automorphism.from_json(data["delta"], g) if data.get("delta") else Automorphism.negation(g)
        keys = ("tolerance", "mode", "step", "restarts", "opt_tol", "seed")
        return cls(g, delta, **{k: data[k] for k in keys if k in data})


@dataclass(frozen=True, eq=False)
class SolutionRecord:
    p1: np.ndarray
    p2: np.ndarray
    residual: float
    classification: str = "other"
    distance_to_nearest_degenerate: float = float("nan")
    group: LcaGroup | None = field(default=None, repr=False)


class _Equation:
    """Precomputed index maps for residual evaluation on ``Y x Y``."""

    def __init__(self, group: LcaGroup, delta: Automorphism):
        X = group
        Y = X.dual()
        self.X, self.Y = X, Y
        xs, ys = X.enumerate(), Y.enumerate()
        self.C = pair(xs[None, :, :], ys[:, None, :], group=X)  # (|Y|, |X|)
        eps = delta.adjoint()
        n = len(ys)
        iu, iv = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        self.iu, self.iv = iu.ravel(), iv.ravel()
        self.i_eps = Y.index_of(eps.apply(ys))
        self.i_sum = Y.index_of(Y.add(ys[self.iu], ys[self.iv]))
        self.i_mix = Y.index_of(Y.add(ys[self.iu], ys[self.i_eps[self.iv]]))

    def charfn(self, p: np.ndarray) -> np.ndarray:
        return p @ self.C.T

    def residuals(self, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
        """``LHS - RHS`` over all ``(u, v)``; leading axes of ``f`` broadcast."""
        lhs = f1[..., self.i_sum] * f2[..., self.i_mix]
        rhs = (f1[..., self.iu] * f2[..., self.iu]) * (f1[..., self.iv] * f2[..., self.i_eps[self.iv]])
        return lhs - rhs


def simplex_grid(dim: int, step: float) -> np.ndarray:
    """All probability vectors with entries in ``step * Z``, lexicographic order."""
    k = int(round(1.0 / step))
    rows = []
    # stars and bars: bar positions among k + dim - 1 slots
    for bars in combinations(range(k + dim - 1), dim - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(k + dim - 1 - prev - 1)
        rows.append(parts)
    out = np.array(rows, dtype=float) / k
    return out[np.lexsort(out.T[::-1])]


def translate(group: LcaGroup, p: np.ndarray, x) -> np.ndarray:
    """Distribution of ``xi + x`` when ``xi ~ p``."""
    xs = group.enumerate()
    out = np.zeros_like(p)
    out[group.index_of(group.add(xs, x))] = p
    return out


def _canonical(group: LcaGroup, p: np.ndarray, decimals: int) -> tuple:
    best = None
    for x in group.enumerate():
        key = tuple(np.round(translate(group, p, x), decimals))
        if best is None or key > best:
            best = key
    return best


def distance_to_point_mass(p: np.ndarray) -> float:
    """Total variation distance to the nearest point mass: ``1 - max p``."""
    return float(1.0 - np.max(p))


def classify(record: SolutionRecord, resolution: float, group: LcaGroup | None = None) -> str:
    """``degenerate`` | ``character-pair`` | ``other``.

    Degenerate means both distributions are within ``10 * resolution`` of
    point masses in total variation. A pair of unimodular characteristic
    functions counts as a character pair.
    """
    d = max(distance_to_point_mass(record.p1), distance_to_point_mass(record.p2))
    if d <= 10.0 * resolution:
        return "degenerate"
    g = group if group is not None else record.group
    if g is not None:
        eq = _Equation(g, Automorphism.identity(g))
        f1, f2 = eq.charfn(record.p1), eq.charfn(record.p2)
        if np.all(np.abs(np.abs(f1) - 1) <= UNIMODULAR_TOL) and \
                np.all(np.abs(np.abs(f2) - 1) <= UNIMODULAR_TOL):
            return "character-pair"
    return "other"


def _grid_candidates(inst: FiniteInstance, eq: _Equation):
    P = simplex_grid(inst.group.order, inst.step)
    F = eq.charfn(P)
    n = len(P)
    work = n * n * len(eq.iu)
    if work > MAX_GRID_EVALUATIONS:
        raise ValueError(f"grid search needs {work} evaluations; coarsen the step")
    logger.info("grid scan: %d simplex points, %d pairs", n, n * n)
    out = []
    rows = max(1, MAX_GRID_EVALUATIONS // (10 * n * len(eq.iu)))
    for start in range(0, n, rows):
        F1 = F[start:start + rows, None, :]
        res = np.abs(eq.residuals(F1, F[None, :, :])).max(axis=-1)
        i, j = np.nonzero(res <= inst.tolerance)
        for a, b in zip(i, j):
            out.append((P[start + a], P[b], float(res[a, b])))
    return out


def _opt_candidates(inst: FiniteInstance, eq: _Equation):
    m = inst.group.order
    rng = np.random.default_rng(inst.seed)
    starts = rng.dirichlet(np.full(m, 0.5), size=(inst.restarts, 2))

    def objective(z):
        r = eq.residuals(eq.charfn(z[:m]), eq.charfn(z[m:]))
        return float(np.sum(np.abs(r) ** 2))

    cons = [{"type": "eq", "fun": lambda z: np.sum(z[:m]) - 1.0},
            {"type": "eq", "fun": lambda z: np.sum(z[m:]) - 1.0}]
    bounds = [(0.0, 1.0)] * (2 * m)
    out = []
    for s in starts:
        z0 = np.concatenate(s)
        sol = minimize(objective, z0, method="SLSQP", bounds=bounds, constraints=cons,
                       options={"ftol": inst.opt_tol ** 2 * 1e-2, "maxiter": 500})
        z = np.clip(sol.x, 0.0, None)
        p1, p2 = z[:m] / z[:m].sum(), z[m:] / z[m:].sum()
        res = float(np.abs(eq.residuals(eq.charfn(p1), eq.charfn(p2))).max())
        if res <= inst.tolerance:
            out.append((p1, p2, res))
    return out


def solve(instance: FiniteInstance) -> list[SolutionRecord]:
    """Non-vanishing solutions, one per translation class, classified.

    Returns an empty list when the search finds nothing. The order is by
    residual, then lexicographically by ``p1``; it depends only on the
    instance (including its seed).
    """
    eq = _Equation(instance.group, instance.delta)
    cands = _grid_candidates(instance, eq) if instance.mode == "grid" else _opt_candidates(instance, eq)
    decimals = 6 if instance.mode == "grid" else max(1, int(-np.log10(instance.opt_tol * 10)))
    best: dict = {}
    for p1, p2, res in cands:
        f1, f2 = eq.charfn(p1), eq.charfn(p2)
        if min(np.abs(f1).min(), np.abs(f2).min()) <= NONVANISHING:
            continue
        key = (_canonical(instance.group, p1, decimals), _canonical(instance.group, p2, decimals))
        if key not in best or res < best[key][2]:
            best[key] = (p1, p2, res)
    records = []
    for p1, p2, res in best.values():
        d = max(distance_to_point_mass(p1), distance_to_point_mass(p2))
        rec = SolutionRecord(p1, p2, res, "other", d, instance.group)
        cls = classify(rec, instance.resolution)
        records.append(SolutionRecord(p1, p2, res, cls, d, instance.group))
    records.sort(key=lambda r: (r.residual, tuple(r.p1), tuple(r.p2)))
    logger.info("solve: %d candidates, %d classes", len(cands), len(records))
    return records


def reverify(instance: FiniteInstance, record: SolutionRecord, shift1=None, shift2=None) -> SdReport:
    """Re-check a record (optionally translated) with :func:`sd_residual`."""
    g = instance.group
    p1 = record.p1 if shift1 is None else translate(g, record.p1, shift1)
    p2 = record.p2 if shift2 is None else translate(g, record.p2, shift2)
    eq = _Equation(g, instance.delta)
    ys = g.dual().enumerate()
    f1 = TabulatedCharFn.from_values(g, ys, eq.charfn(p1))
    f2 = TabulatedCharFn.from_values(g, ys, eq.charfn(p2))
    return sd_residual(SdInstance.two_forms(f1, f2, instance.delta), ys, tol=instance.tolerance)


def _record_row(instance: FiniteInstance, r: SolutionRecord) -> dict:
    return {
        "group": str(instance.group),
        "delta": json.dumps(instance.delta.to_json()),
        "residual": r.residual,
        "classification": r.classification,
        "distance_to_nearest_degenerate": r.distance_to_nearest_degenerate,
        "p1": r.p1.tolist(),
        "p2": r.p2.tolist(),
    }


def records_to_json(instance: FiniteInstance, records: list[SolutionRecord]) -> dict:
    return {"instance": instance.to_json(), "records": [_record_row(instance, r) for r in records]}


def write_csv(path, instance: FiniteInstance, records: list[SolutionRecord]) -> None:
    """Columns: group, delta, residual, classification, p1_0.., p2_0.."""
    m = instance.group.order
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "delta", "residual", "classification"]
                   + [f"p1_{i}" for i in range(m)] + [f"p2_{i}" for i in range(m)])
        for r in records:
            w.writerow([str(instance.group), json.dumps(instance.delta.to_json()),
                        repr(r.residual), r.classification]
                       + [repr(float(x)) for x in r.p1] + [repr(float(x)) for x in r.p2])
