"""Segmented adaptive quadrature in log coordinates.

All integrals in this package are taken over ``ell = log t``.  Integrands are
piecewise smooth with known kinks, so a range is cut at the kinks and long
smooth stretches are subdivided geometrically before each piece is handed to
:func:`scipy.integrate.quad`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable

import numpy as np
from scipy import integrate

from .errors import QuadratureError

__all__ = [
    "QuadratureConfig",
    "DEFAULT_CONFIG",
    "integrate_pieces",
    "integrate_range",
    "integrate_to_infinity",
]

Kinks = Callable[[float, float], np.ndarray]


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for the log-domain integrators.

    ``segment_length`` is the initial piece length (in log units) used when
    a smooth stretch is subdivided; halving it doubles the quadrature grid.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    oscillatory_tol: float = 1e-4
    max_subdivisions: int = 200
    segment_length: float = 1.0
    max_segments: int = 20000

    def __post_init__(self):
        if min(self.rel_tol, self.abs_tol, self.oscillatory_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.oscillatory_tol < self.rel_tol:
            raise ValueError("oscillatory_tol must be >= rel_tol")
        if self.segment_length <= 0 or self.max_subdivisions < 1:
            raise ValueError("segment_length and max_subdivisions must be positive")

    def refined(self, factor: float = 2.0) -> "QuadratureConfig":
        return replace(self, segment_length=self.segment_length / factor)


DEFAULT_CONFIG = QuadratureConfig()


def _quad(f, a, b, cfg: QuadratureConfig) -> float:
    if b <= a:
        return 0.0
    val, err = integrate.quad(
        f, a, b,
        epsabs=cfg.abs_tol * 1e-3,
        epsrel=cfg.rel_tol * 1e-2,
        limit=cfg.max_subdivisions,
    )
    if not math.isfinite(val):
        raise QuadratureError(f"non-finite integral on [{a}, {b}]", partial=val)
    return val


def _split(a: float, b: float, h0: float) -> list[float]:
    # geometric subdivision from the left end, step doubling
    edges = [a]
    h = h0
    x = a
    while x + h < b:
        x += h
        edges.append(x)
        h *= 2.0
    edges.append(b)
    return edges


def integrate_pieces(f, edges: Iterable[float], cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Sum of adaptive integrals of ``f`` over consecutive ``edges``."""
    edges = list(edges)
    return math.fsum(_quad(f, a, b, cfg) for a, b in zip(edges[:-1], edges[1:]))


def _merged_edges(lo, hi, kinks: Kinks | None, h0) -> list[float]:
    cuts = [lo]
    if kinks is not None:
        cuts.extend(float(k) for k in np.asarray(kinks(lo, hi)) if lo < k < hi)
    cuts.append(hi)
    cuts = sorted(set(cuts))
    edges = [lo]
    for a, b in zip(cuts[:-1], cuts[1:]):
        edges.extend(_split(a, b, h0)[1:])
    return edges


def integrate_range(f, lo: float, hi: float, cfg: QuadratureConfig = DEFAULT_CONFIG,
                    kinks: Kinks | None = None) -> float:
    """Integrate ``f`` over the finite range ``[lo, hi]`` split at ``kinks``."""
    if hi <= lo:
        return 0.0
    return integrate_pieces(f, _merged_edges(lo, hi, kinks, cfg.segment_length), cfg)


def integrate_to_infinity(f, lo: float, decay: float, cfg: QuadratureConfig = DEFAULT_CONFIG,
                          kinks: Kinks | None = None, start_at: float | None = None) -> float:
    """Integrate ``f`` over ``[lo, inf)`` for an integrand decaying like ``exp(-decay * x)``.

    Pieces are accumulated until the analytic exponential remainder
    ``f(H) / decay`` falls below the tolerance; that remainder is then added.
    ``start_at`` marks where the decay is known to set in (no stopping before).
    """
    if decay <= 0:
        raise QuadratureError("integrand must decay (decay > 0)")
    h0 = cfg.segment_length
    total = 0.0
    x = lo
    h = h0
    prev_fx = abs(f(lo))
    floor = lo if start_at is None else start_at
    for _ in range(cfg.max_segments):
        nxt = x + h
        if kinks is not None:
            ks = [float(k) for k in np.asarray(kinks(x, nxt)) if x < k < nxt]
            if ks:
                nxt = min(ks)
        piece = _quad(f, x, nxt, cfg)
        total += piece
        # restart small after a kink, otherwise keep doubling
        h = h0 if (kinks is not None and nxt < x + h) else 2.0 * h
        x = nxt
        fx = abs(f(x))
        remainder = fx / decay
        if x >= floor and fx <= prev_fx and remainder <= cfg.rel_tol * 1e-3 * abs(total) + cfg.abs_tol * 1e-3:
            return total + math.copysign(remainder, f(x)) if fx else total
        prev_fx = fx
    raise QuadratureError(f"no convergence to infinity after {cfg.max_segments} pieces", partial=total)
