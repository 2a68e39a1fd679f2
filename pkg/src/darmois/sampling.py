"""Samplers for closed-form distributions and an empirical independence check.

Conventions: a Gaussian with form ``Q`` over the (real, circle) coordinates
has covariance ``2 Q`` on the covering space, so on the circle
``E exp(i n theta) = exp(-sigma n^2)`` corresponds to real-line variance
``2 sigma``. The signed factor ``pi`` puts mass ``p`` at ``0`` and
``1 - p`` at ``pi``; when ``1 - p < 0`` the convolution is sampled by
rejection from the wrapped Gaussian, accepting with probability

    1 + ((1 - p) / p) * w(theta - m - pi) / w(theta - m)

where ``w`` is the wrapped normal density and ``m`` its conditional mean.
The expected acceptance rate is ``1 / p``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .charfn import CharFn, ClosedFormCharFn, _schur_circle, require_positive_definite
from .exceptions import GroupMismatchError, NotPositiveDefiniteError
from .groups import TWO_PI, Automorphism, Kind, LcaGroup, pair

logger = logging.getLogger(__name__)

MIN_INDEPENDENCE_SAMPLES = 1000
METHODS = ("exact-gaussian", "wrapped-gaussian", "rejection-mixture")


def wrapped_normal_pdf(theta, mean, var) -> np.ndarray:
    """Density of ``N(mean, var)`` reduced mod ``2 pi``, w.r.t. Lebesgue measure on ``[0, 2 pi)``."""
    theta = np.asarray(theta, dtype=float)
    sd = float(np.sqrt(var))
    K = int(np.ceil(8.0 * sd / TWO_PI)) + 2
    k = np.arange(-K, K + 1)
    d = np.angle(np.exp(1j * (theta - mean)))[..., None] + TWO_PI * k
    return np.exp(-0.5 * d ** 2 / var).sum(axis=-1) / np.sqrt(TWO_PI * var)


def _default_method(target: ClosedFormCharFn) -> str:
    if target.pi is not None:
        return "rejection-mixture"
    if target.group.circle_idx:
        return "wrapped-gaussian"
    return "exact-gaussian"


class Sampler:
    """i.i.d. draws from a validated closed-form characteristic function.

    Parameters
    ----------
    target : ClosedFormCharFn
    seed : int
        Seeds a PCG64 stream; equal seeds give bit-identical draws.
    method : {"auto", "exact-gaussian", "wrapped-gaussian", "rejection-mixture"}
    validate : bool
        Run the positivity check on ``target`` (default). Construction
        fails with :class:`NotPositiveDefiniteError` if it is violated.
    """

    def __init__(self, target: CharFn, seed: int = 0, method: str = "auto", validate: bool = True):
        if not isinstance(target, ClosedFormCharFn):
            raise TypeError("only closed-form targets can be sampled")
        resolved = _default_method(target) if method == "auto" else method
        if resolved not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        if resolved != _default_method(target):
            raise ValueError(f"method {resolved!r} does not fit this target")
        if validate:
            require_positive_definite(target)
        if target.pi is not None and target.pi.masses[1] < 0 and self._circle_var(target) <= 0:
            raise NotPositiveDefiniteError("signed factor on a degenerate circle component")
        self.target = target
        self.seed = int(seed)
        self.method = resolved
        self.group = target.group
        self._rng = np.random.default_rng(self.seed)
        self.proposals = 0
        self.accepted = 0

    @staticmethod
    def _circle_var(target: ClosedFormCharFn) -> float:
        c = len(target.group.real_idx)
        return 2.0 * _schur_circle(np.asarray(target.Q), c)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else float("nan")

    def _gaussian(self, rng: np.random.Generator, count: int) -> np.ndarray:
        g = self.group
        q = list(self.target.q_idx)
        out = np.zeros((count, g.dim))
        if q:
            cov = 2.0 * np.asarray(self.target.Q)
            out[:, q] = rng.multivariate_normal(np.zeros(len(q)), cov, size=count, method="eigh")
        return out

    def _mixture(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Gaussian plus the signed two-point factor on the circle."""
        g = self.group
        a = len(g.real_idx)
        c = g.circle_idx[0]
        p, _ = self.target.pi.masses
        if p <= 1.0:
            base = self._gaussian(rng, count)
            flip = rng.random(count) >= p
            base[:, c] += np.pi * flip
            self.proposals += count
            self.accepted += count
            return base
        # conditional law of the circle coordinate given the real ones
        Sigma = 2.0 * np.asarray(self.target.Q)
        Stt = Sigma[:a, :a]
        Sct = Sigma[a, :a]
        gain = Sct @ np.linalg.pinv(Stt, hermitian=True) if a else np.zeros(0)
        var = float(Sigma[a, a] - gain @ Sct) if a else float(Sigma[0, 0])
        ratio = (1.0 - p) / p
        chunks = []
        have = 0
        while have < count:
            batch = max(64, int(1.2 * p * (count - have)) + 16)
            prop = self._gaussian(rng, batch)
            m = prop[:, list(g.real_idx)] @ gain if a else np.zeros(batch)
            theta = prop[:, c]
            acc = 1.0 + ratio * (wrapped_normal_pdf(theta, m + np.pi, var)
                                 / wrapped_normal_pdf(theta, m, var))
            keep = rng.random(batch) < acc
            self.proposals += batch
            self.accepted += int(keep.sum())
            chunks.append(prop[keep])
            have += int(keep.sum())
        return np.concatenate(chunks)[:count]

    def _draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.method == "rejection-mixture":
            out = self._mixture(rng, count)
        else:
            out = self._gaussian(rng, count)
            self.proposals += count
            self.accepted += count
        return self.group.reduce(out + self.target.shift)

    def sample(self, count: int, shards: int = 1) -> np.ndarray:
        """``count`` draws as an array of shape ``(count, group.dim)``.

        With ``shards > 1`` the draws come from independent child streams
        of the seed (``numpy.random.SeedSequence.spawn``), concatenated in
        shard order; the output then depends on the shard count.
        """
        if count < 0:
            raise ValueError("count must be nonnegative")
        if shards <= 1:
            return self._draw(self._rng, count)
        children = np.random.SeedSequence(self.seed).spawn(shards)
        sizes = [count // shards + (i < count % shards) for i in range(shards)]
        return np.concatenate([self._draw(np.random.default_rng(s), n)
                               for s, n in zip(children, sizes)])

    def __repr__(self):
        return f"Sampler({self.target!r}, seed={self.seed}, method={self.method!r})"


def sample(sampler: Sampler, count: int, shards: int = 1) -> np.ndarray:
    return sampler.sample(count, shards)


def write_samples_csv(path, group: LcaGroup, samples: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}_{f}" for i, f in enumerate(group.factors)])
        for row in samples:
            w.writerow([repr(float(v)) for v in row])


def empirical_charfn(samples: np.ndarray, y, group: LcaGroup) -> np.ndarray:
    """``(1/N) sum_k (x_k, y)`` for each row of ``y``."""
    Y = np.atleast_2d(np.asarray(y, dtype=float))
    return pair(np.asarray(samples)[:, None, :], Y[None, :, :], group=group).mean(axis=0)


# -- independence -----------------------------------------------------------


@dataclass(frozen=True)
class IndependenceReport:
    statistic: float
    n_samples: int
    threshold: float
    argmax: tuple
    shards: int = 1

    @property
    def verdict(self) -> str:
        return "consistent" if self.statistic <= self.threshold else "rejected"

    def to_json(self) -> dict:
        return {"statistic": self.statistic, "n_samples": self.n_samples,
                "threshold": self.threshold, "verdict": self.verdict,
                "argmax": [list(map(float, a)) for a in self.argmax], "shards": self.shards}


def default_frequencies(group: LcaGroup) -> np.ndarray:
    """Nonzero dual points with integer coordinates in ``[-2, 2]``, real ones in ``[-1, 1]``.

    Cyclic coordinates run over all residues.
    """
    Y = group.dual()
    axes = []
    for f in Y.factors:
        if f.kind is Kind.REAL:
            axes.append(np.array([-1.0, 0.0, 1.0]))
        elif f.kind is Kind.CYCLIC:
            axes.append(np.arange(f.n, dtype=float))
        elif f.kind is Kind.INTEGERS:
            axes.append(np.arange(-2.0, 3.0))
        else:
            axes.append(np.array([0.0, np.pi / 2, np.pi, 3 * np.pi / 2]))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return pts[~Y.equal(pts, Y.zero())]


def independence_statistic(l1: np.ndarray, l2: np.ndarray, group: LcaGroup, u, v=None):
    """``max |E (L1,u)(L2,v) - E (L1,u) E (L2,v)|`` over ``u x v`` (empirical)."""
    U = np.atleast_2d(np.asarray(u, dtype=float))
    V = U if v is None else np.atleast_2d(np.asarray(v, dtype=float))
    A = pair(l1[:, None, :], U[None], group=group)
    B = pair(l2[:, None, :], V[None], group=group)
    n = len(l1)
    joint = A.T @ B / n
    dev = np.abs(joint - np.outer(A.mean(axis=0), B.mean(axis=0)))
    i, j = np.unravel_index(np.argmax(dev), dev.shape)
    return float(dev[i, j]), (U[i], V[j])


def independence_test(mu1: Sampler, mu2: Sampler, delta: Automorphism, n_samples: int,
                      frequencies=None, threshold: float | None = None,
                      shards: int = 1) -> IndependenceReport:
    """Empirical check that ``L1 = xi1 + xi2`` and ``L2 = xi1 + delta xi2`` are independent.

    Raises
    ------
    ValueError
        If ``n_samples < 1000``.
    """
    if n_samples < MIN_INDEPENDENCE_SAMPLES:
        raise ValueError(f"need at least {MIN_INDEPENDENCE_SAMPLES} samples, got {n_samples}")
    g = mu1.group
    if mu2.group != g or delta.group != g:
        raise GroupMismatchError("samplers and delta must share a group")
    xi1 = mu1.sample(n_samples, shards)
    xi2 = mu2.sample(n_samples, shards)
    l1 = g.add(xi1, xi2)
    l2 = g.add(xi1, delta.apply(xi2))
    freqs = default_frequencies(g) if frequencies is None else frequencies
    stat, arg = independence_statistic(l1, l2, g, freqs)
    thr = float(5.0 / np.sqrt(n_samples)) if threshold is None else float(threshold)
    return IndependenceReport(stat, n_samples, thr, arg, shards)


class EmpiricalCharFn(TransformerMixin, BaseEstimator):
    """Empirical characteristic function as a transformer.

    ``fit(X)`` stores samples on the group given by ``factors``;
    ``transform(Y)`` returns ``[Re f, Im f]`` at the dual points ``Y``.
    """

    def __init__(self, factors=("T",)):
        self.factors = factors

    def fit(self, X, y=None):
        X = check_array(X)
        group = LcaGroup.of(*self.factors)
        if X.shape[1] != group.dim:
            raise ValueError(f"expected {group.dim} columns, got {X.shape[1]}")
        self.group_ = group
        self.samples_ = group.reduce(X)
        self.n_features_in_ = X.shape[1]
        return self

    def evaluate(self, Y) -> np.ndarray:
        check_is_fitted(self, "samples_")
        return empirical_charfn(self.samples_, check_array(Y), self.group_)

    def transform(self, Y):
        f = self.evaluate(Y)
        return np.column_stack([f.real, f.imag])
