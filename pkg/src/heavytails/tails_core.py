"""Pareto laws and generic log-domain survival functions.

A distribution is either a :class:`ParetoSpec` (closed forms available) or a
:class:`TailFunction`, which stores ``ell -> log P(X >= e**ell)`` so that tails
reaching ``t = exp(4 e**4)`` and beyond stay representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

import numpy as np

from .errors import DomainError, InfiniteMomentError, InvariantViolation

__all__ = [
    "ParetoSpec",
    "TailFunction",
    "SampleBatch",
    "Distribution",
    "pareto_tail",
    "pareto_moment",
    "shifted_pareto_tail",
    "pareto_tail_function",
    "two_level_tail",
    "log_factor_tail",
    "as_tail_function",
    "inverse_tail",
    "make_generator",
    "draw",
    "sample",
    "BISECTION_TOL",
]

BISECTION_TOL = 1e-12


@dataclass(frozen=True)
class ParetoSpec:
    """Par(alpha, b), or its symmetrization Par_s(alpha, b) when ``symmetric``.

    For the symmetric law the magnitude ``|X|`` is Par(alpha, b) and the sign
    is an independent fair coin.
    """

    alpha: float
    b: float = 1.0
    symmetric: bool = False

    def __post_init__(self):
        if not (self.alpha > 0 and self.b > 0):
            raise DomainError(f"Pareto parameters must be positive, got alpha={self.alpha}, b={self.b}")

    def descriptor(self) -> dict:
        return {"kind": "pareto", "alpha": self.alpha, "b": self.b, "symmetric": self.symmetric}


def pareto_tail(spec: ParetoSpec, t):
    """``P(X >= t)`` (``P(|X| >= t)`` if symmetric): 1 below ``b``, ``(b/t)**alpha`` above."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("pareto_tail needs t > 0")
    out = np.where(t <= spec.b, 1.0, (spec.b / np.maximum(t, spec.b)) ** spec.alpha)
    return float(out) if out.ndim == 0 else out


def pareto_moment(spec: ParetoSpec, p: float) -> float:
    """``E[X**p] = b**p * alpha / (alpha - p)`` (of ``|X|`` if symmetric)."""
    if p >= spec.alpha:
        raise InfiniteMomentError(f"E|X|^p is infinite for p={p} >= alpha={spec.alpha}")
    return spec.b ** p * spec.alpha / (spec.alpha - p)


def shifted_pareto_tail(spec: ParetoSpec, t):
    """Tail of the shifted magnitude, ``P(|X| - b >= t)`` for ``t >= 0``.

    Satisfies ``2**-alpha * P(|X| >= t) <= P(|X| - b >= t) <= P(|X| >= t)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("shifted tail needs t >= 0")
    out = (spec.b / (t + spec.b)) ** spec.alpha
    return float(out) if out.ndim == 0 else out


def _no_kinks(lo: float, hi: float) -> np.ndarray:
    return np.empty(0)


@dataclass(frozen=True)
class TailFunction:
    """Survival function of a variable supported on ``[exp(log_onset), inf)``.

    ``log_survival`` maps ``ell`` (array) to ``log P(X >= exp(ell))`` and only
    needs to be correct for ``ell >= log_onset``; :meth:`log_sf` pins the value
    to 0 below the onset.  ``tail_index`` is the polynomial decay rate used for
    analytic remainders, ``kinks(lo, hi)`` lists non-smooth points in a range.
    """

    log_onset: float
    log_survival: Callable[[np.ndarray], np.ndarray]
    kind: str = "custom"
    tail_index: float | None = None
    kinks: Callable[[float, float], np.ndarray] = _no_kinks
    params: Mapping = field(default_factory=dict)

    def log_sf(self, ell):
        ell = np.asarray(ell, dtype=float)
        raw = self.log_survival(np.maximum(ell, self.log_onset))
        out = np.where(ell <= self.log_onset, 0.0, raw)
        return float(out) if out.ndim == 0 else out

    def sf(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(self.log_sf(np.log(t)))

    def log_h(self, ell, alpha: float):
        """``log(t**alpha * P(X >= t))`` at ``t = exp(ell)``."""
        return alpha * np.asarray(ell, dtype=float) + self.log_sf(ell)

    def descriptor(self) -> dict:
        return {"kind": self.kind, **dict(self.params)}


Distribution = Union[ParetoSpec, TailFunction]


def pareto_tail_function(spec: ParetoSpec) -> TailFunction:
    lb = math.log(spec.b)
    alpha = spec.alpha
    return TailFunction(
        log_onset=lb,
        log_survival=lambda ell: -alpha * (ell - lb),
        kind="pareto",
        tail_index=alpha,
        params={"alpha": alpha, "b": spec.b, "symmetric": spec.symmetric},
    )


def two_level_tail(alpha: float, a: float, b: float) -> TailFunction:
    """``P(X >= x) = max((b/x)**(2 alpha), (a/x)**alpha)`` for ``x >= b``, with ``0 < a < b``."""
    if not (0 < a < b) or alpha <= 0:
        raise DomainError("two-level tail needs 0 < a < b and alpha > 0")
    lb, la = math.log(b), math.log(a)
    kink = 2 * lb - la  # log(b**2 / a)

    def log_survival(ell):
        return np.maximum(2 * alpha * (lb - ell), alpha * (la - ell))

    return TailFunction(
        log_onset=lb,
        log_survival=log_survival,
        kind="two-level",
        tail_index=alpha,
        kinks=lambda lo, hi: np.array([kink]) if lo < kink < hi else np.empty(0),
        params={"alpha": alpha, "a": a, "b": b},
    )


def log_factor_tail(alpha: float, b: float = 1.0) -> TailFunction:
    """Tail ``min(1, e*alpha*log(t/b)*(b/t)**alpha)``: the Chebyshev bound used as a law.

    It equals 1 up to ``b * e**(1/alpha)`` and is decreasing afterwards.
    """
    if alpha <= 0 or b <= 0:
        raise DomainError("log-factor tail needs alpha > 0, b > 0")
    lb = math.log(b)
    onset = lb + 1.0 / alpha

    def log_survival(ell):
        u = np.maximum(ell - lb, 1.0 / alpha)
        return np.minimum(1.0 + math.log(alpha) + np.log(u) - alpha * u, 0.0)

    return TailFunction(
        log_onset=onset,
        log_survival=log_survival,
        kind="log-factor",
        tail_index=alpha,
        params={"alpha": alpha, "b": b},
    )


def as_tail_function(dist: Distribution) -> TailFunction:
    if isinstance(dist, TailFunction):
        return dist
    if isinstance(dist, ParetoSpec):
        return pareto_tail_function(dist)
    raise TypeError(f"expected ParetoSpec or TailFunction, got {type(dist).__name__}")


def _bisect(tail: TailFunction, target: np.ndarray) -> np.ndarray:
    """Vectorised monotone bisection for ``log_sf(ell) == target``."""
    lo = np.full(target.shape, tail.log_onset)
    hi = lo + 1.0
    f_lo = np.zeros(target.shape)
    f_hi = tail.log_sf(hi) * np.ones(target.shape)
    width = 1.0
    for _ in range(2100):
        need = f_hi > target
        if not need.any():
            break
        width *= 2.0
        hi = np.where(need, lo + width, hi)
        f_hi = np.where(need, tail.log_sf(hi), f_hi)
    else:
        raise InvariantViolation("tail does not reach the requested level; not a vanishing survival function")
    done = np.zeros(target.shape, dtype=bool)
    mid = lo.copy()
    for _ in range(400):
        mid = np.where(done, mid, 0.5 * (lo + hi))
        f_mid = tail.log_sf(mid)
        if np.any((f_mid > f_lo + BISECTION_TOL) | (f_mid < f_hi - BISECTION_TOL)):
            raise InvariantViolation("non-monotone tail detected during bisection")
        done |= np.abs(f_mid - target) <= BISECTION_TOL
        done |= (hi - lo) <= 4 * np.spacing(np.abs(hi) + 1.0)
        if done.all():
            break
        go_right = f_mid > target
        lo = np.where(done | ~go_right, lo, mid)
        f_lo = np.where(done | ~go_right, f_lo, f_mid)
        hi = np.where(done | go_right, hi, mid)
        f_hi = np.where(done | go_right, f_hi, f_mid)
    return mid


def inverse_tail(tail: Distribution, u=None, *, log_u=None):
    """Return ``ell = log t`` with ``log P(X >= t) = log u``.

    Pass either a probability ``u`` in ``(0, 1]`` or its logarithm ``log_u``
    (needed for levels below the float range).  Scalars and arrays are both
    accepted; ``u == 1`` maps to the onset.
    """
    tail = as_tail_function(tail)
    if (u is None) == (log_u is None):
        raise TypeError("give exactly one of u or log_u")
    if log_u is None:
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0) or np.any(u > 1):
            raise DomainError("inverse_tail needs 0 < u <= 1")
        log_u = np.log(u)
    target = np.asarray(log_u, dtype=float)
    if np.any(target > 0) or np.any(np.isnan(target)):
        raise DomainError("inverse_tail needs log_u <= 0")
    scalar = target.ndim == 0
    target = np.atleast_1d(target)
    out = np.where(target >= 0.0, tail.log_onset, _bisect(tail, np.minimum(target, -0.0)))
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class SampleBatch:
    values: np.ndarray
    seed: int
    count: int
    source: dict
    chunk: int = 0


def make_generator(seed: int, chunk: int = 0) -> np.random.Generator:
    """Counter-based stream for ``(seed, chunk)``; chunks are independent streams."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chunk),))
    return np.random.Generator(np.random.Philox(ss))


def draw(dist: Distribution, rng: np.random.Generator, size) -> np.ndarray:
    """Inverse-transform draws of shape ``size`` from ``dist``."""
    u = 1.0 - rng.random(size)  # in (0, 1]
    if isinstance(dist, ParetoSpec):
        values = dist.b * np.exp(-np.log(u) / dist.alpha)
        if dist.symmetric:
            values = np.where(rng.random(size) < 0.5, -values, values)
        return values
    tail = as_tail_function(dist)
    shape = np.shape(u)
    ell = inverse_tail(tail, log_u=np.log(u).ravel())
    values = np.exp(ell).reshape(shape)
    if tail.params.get("symmetric"):
        values = np.where(rng.random(size) < 0.5, -values, values)
    return values


def sample(dist: Distribution, seed: int, count: int, chunk: int = 0) -> SampleBatch:
    """Reproducible sample of ``count`` values; identical inputs give identical output."""
    if count < 1:
        raise DomainError("count must be >= 1")
    values = draw(dist, make_generator(seed, chunk), count)
    values.setflags(write=False)
    src = dist.descriptor()
    return SampleBatch(values=values, seed=int(seed), count=int(count), source=src, chunk=chunk)
