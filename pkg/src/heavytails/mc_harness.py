"""Seeded Monte Carlo experiments for chaos functionals.

Samples are drawn chunk by chunk, each chunk from its own stream derived from
``(seed, chunk index)``.  Chunk results are placed by index before any
reduction, so the output does not depend on completion order or on the
number of worker threads.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .certificates import chebyshev_tail_bound, generalized_threshold
from .chaos import (
    BoundCurve,
    CoefficientTensor,
    decompose,
    evaluate_recentered,
    fuk_nagaev_optimized,
    hwi_fn_combined,
    hwi_tail,
    prop31_tail,
    prop32_tail,
)
from .errors import DataError, DomainError
from .tails_core import Distribution, ParetoSpec, draw, make_generator
from .transforms import fractional_moment

__all__ = [
    "WILSON_LEVEL",
    "DEFAULT_EXCEEDANCE",
    "ExperimentConfig",
    "EmpiricalTail",
    "MomentEstimate",
    "ExperimentResult",
    "DominanceReport",
    "wilson_interval",
    "empirical_tail",
    "simulate",
    "run_experiment",
    "tail_slope",
    "dominance_check",
    "target_bound",
]

WILSON_LEVEL = 0.99
DEFAULT_EXCEEDANCE = np.geomspace(1e-1, 1e-5, 33)  # 8 points per decade
MIN_EXCEEDANCES = 10


def wilson_interval(counts, N: int, level: float = WILSON_LEVEL):
    """Wilson score interval for ``counts`` successes out of ``N``."""
    k = np.asarray(counts, dtype=float)
    z = float(ndtri(0.5 + level / 2))
    q = k / N
    denom = 1 + z * z / N
    centre = (q + z * z / (2 * N)) / denom
    half = z * np.sqrt(q * (1 - q) / N + z * z / (4 * N * N)) / denom
    lo = np.clip(centre - half, 0.0, 1.0)
    hi = np.clip(centre + half, 0.0, 1.0)
    # guard rounding at the endpoints so the interval always holds q
    return np.minimum(lo, q), np.maximum(hi, q)


@dataclass(frozen=True)
class EmpiricalTail:
    """Exceedance counts ``#{f >= t}`` out of ``N`` with Wilson intervals."""

    thresholds: np.ndarray
    counts: np.ndarray
    N: int
    estimates: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    level: float = WILSON_LEVEL

    def rows(self):
        return zip(self.thresholds, self.counts, self.estimates, self.ci_lo, self.ci_hi)


def empirical_tail(values, thresholds, level: float = WILSON_LEVEL) -> EmpiricalTail:
    """Empirical tail of ``values`` on an increasing threshold grid."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    t = np.asarray(thresholds, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) <= 0):
        raise DomainError("thresholds must be a strictly increasing 1-d grid")
    N = v.size
    counts = N - np.searchsorted(v, t, side="left")
    lo, hi = wilson_interval(counts, N, level)
    return EmpiricalTail(t, counts, N, counts / N, lo, hi, level)


@dataclass(frozen=True)
class ExperimentConfig:
    """Monte Carlo setup.

    ``tensor`` of order 1 gives the linear form ``sum a_i X_i``; higher orders
    are evaluated as recentered chaos with exact Pareto moments (or quadrature
    moments for other laws).  ``statistic`` is ``"value"`` or ``"abs"``.
    ``thresholds`` is ``{"kind": "quantile", "levels": [...]}`` (exceedance
    probabilities), ``{"kind": "geometric", "lo", "hi", "count"}`` or an
    explicit list.
    """

    distribution: Distribution
    tensor: CoefficientTensor
    N: int
    seed: int
    chunk_size: int = 50_000
    thresholds: object = None
    p_grid: tuple = ()
    statistic: str = "value"
    allow_extrapolation: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.N < 1000:
            raise DomainError("sample count N must be >= 1000")
        if self.chunk_size < 1:
            raise DomainError("chunk_size must be positive")
        if self.statistic not in ("value", "abs"):
            raise DomainError("statistic must be 'value' or 'abs'")

    def chunk_counts(self) -> list[int]:
        full, rest = divmod(self.N, self.chunk_size)
        return [self.chunk_size] * full + ([rest] if rest else [])

    def to_dict(self) -> dict:
        return {
            "distribution": self.distribution.descriptor(),
            "tensor": {"d": self.tensor.d, "n": self.tensor.n},
            "N": self.N,
            "seed": self.seed,
            "chunk_size": self.chunk_size,
            "statistic": self.statistic,
            "p_grid": list(self.p_grid),
        }


@dataclass(frozen=True)
class MomentEstimate:
    p: float
    estimate: float
    std_error: float
    divergent: bool


@dataclass(frozen=True)
class ExperimentResult:
    tail: EmpiricalTail
    moments: list
    metadata: dict
    warnings: list = field(default_factory=list)


def _moments_for(dist: Distribution, k_max: int) -> dict:
    if isinstance(dist, ParetoSpec):
        out = {}
        for k in range(1, k_max + 1):
            if dist.symmetric and k % 2 == 1:
                out[k] = 0.0
            elif k >= dist.alpha:
                out[k] = math.inf
            else:
                out[k] = dist.b ** k * dist.alpha / (dist.alpha - k)
        return out
    sym = bool(getattr(dist, "params", {}).get("symmetric"))
    return {k: 0.0 if sym and k % 2 else fractional_moment(dist, k) for k in range(1, k_max + 1)}


def _functional(config: ExperimentConfig, moments):
    A = config.tensor
    if A.d == 1:
        a = np.asarray(A.entries, dtype=float)
        return lambda x: x @ a
    return lambda x: evaluate_recentered(A, x, moments)


def _chunk_values(config: ExperimentConfig, fn, index: int, count: int) -> np.ndarray:
    rng = make_generator(config.seed, index)
    x = draw(config.distribution, rng, (count, config.tensor.n))
    vals = np.asarray(fn(x), dtype=float)
    return np.abs(vals) if config.statistic == "abs" else vals


def simulate(config: ExperimentConfig) -> np.ndarray:
    """All ``N`` functional values, concatenated in chunk-index order."""
    dec = decompose(config.tensor)
    moments = _moments_for(config.distribution, max(dec.k_star, 1)) if config.tensor.d > 1 else {}
    fn = _functional(config, moments)
    sizes = config.chunk_counts()
    jobs = list(enumerate(sizes))
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(lambda job: _chunk_values(config, fn, *job), jobs))
    else:
        parts = [_chunk_values(config, fn, i, c) for i, c in jobs]
    return np.concatenate(parts)


def _thresholds(spec, sorted_vals: np.ndarray) -> np.ndarray:
    if spec is None:
        spec = {"kind": "quantile", "levels": DEFAULT_EXCEEDANCE}
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "quantile":
            levels = np.asarray(spec.get("levels", DEFAULT_EXCEEDANCE), dtype=float)
            t = np.quantile(sorted_vals, 1 - levels)
        elif kind == "geometric":
            t = np.geomspace(float(spec["lo"]), float(spec["hi"]), int(spec["count"]))
        else:
            raise DomainError(f"unknown threshold grid kind {kind!r}")
    else:
        t = np.asarray(spec, dtype=float)
    return np.unique(t)


def _alpha_of(dist: Distribution) -> float:
    if isinstance(dist, ParetoSpec):
        return dist.alpha
    if dist.tail_index is None:
        raise DomainError("distribution has no tail index")
    return float(dist.tail_index)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Simulate, then tabulate the empirical tail and ``E|f|**p`` estimates."""
    notes = []
    alpha = _alpha_of(config.distribution)
    k_star = max(decompose(config.tensor).k_star, 1)
    if not alpha > 2 * k_star:
        notes.append(f"chaos hypothesis alpha > 2 k* fails (alpha={alpha}, k*={k_star})")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    values = np.sort(simulate(config))
    t = _thresholds(config.thresholds, values)
    if not config.allow_extrapolation and (t[0] < values[0] or t[-1] > values[-1]):
        raise DomainError("thresholds leave the observed sample range")
    tail = empirical_tail(values, t)
    moments = []
    absvals = np.abs(values)
    for p in config.p_grid:
        powered = absvals ** p
        est = float(np.mean(powered))
        se = float(np.std(powered, ddof=1) / math.sqrt(values.size))
        moments.append(MomentEstimate(float(p), est, se, bool(p >= alpha / k_star)))
    meta = {**config.to_dict(), "k_star": k_star, "alpha": alpha, "chunks": len(config.chunk_counts())}
    return ExperimentResult(tail, moments, meta, notes)


def tail_slope(emp: EmpiricalTail, quantile_range=(1e-4, 1e-2)) -> float:
    """Least-squares slope of ``log P(f >= t)`` against ``log t``.

    Uses thresholds whose estimated exceedance lies in ``quantile_range`` and
    whose count exceeds the top :data:`MIN_EXCEEDANCES` order statistics.
    """
    lo, hi = sorted(quantile_range)
    q = np.asarray(emp.estimates)
    t = np.asarray(emp.thresholds)
    keep = (q >= lo * (1 - 1e-9)) & (q <= hi * (1 + 1e-9)) & (emp.counts > MIN_EXCEEDANCES) & (t > 0)
    if np.count_nonzero(keep) < 8:
        raise DataError(f"only {np.count_nonzero(keep)} usable thresholds in the slope window; need 8")
    x, y = np.log(t[keep]), np.log(q[keep])
    if np.ptp(x) == 0:
        raise DataError("slope window has a single threshold value")
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class DominanceReport:
    formula_id: str
    thresholds: np.ndarray
    bound: np.ndarray
    ci_lo: np.ndarray
    estimates: np.ndarray
    passed: np.ndarray
    considered: np.ndarray

    @property
    def pass_fraction(self) -> float:
        n = int(np.count_nonzero(self.considered))
        return float(np.count_nonzero(self.passed & self.considered) / n) if n else math.nan

    def to_dict(self) -> dict:
        return {"formula_id": self.formula_id, "pass_fraction": self.pass_fraction,
                "thresholds": self.thresholds, "bound": self.bound, "ci_lo": self.ci_lo,
                "estimate": self.estimates, "passed": self.passed, "considered": self.considered}


def dominance_check(bound: BoundCurve, emp: EmpiricalTail) -> DominanceReport:
    """Flag thresholds where the bound lies at or above the lower Wilson limit.

    Thresholds where the bound is not established are reported but not
    counted in the pass fraction.
    """
    if bound.thresholds.shape != emp.thresholds.shape or not np.allclose(bound.thresholds, emp.thresholds,
                                                                          rtol=1e-12, atol=0):
        raise DomainError("bound and empirical tail use different threshold grids")
    passed = bound.values >= emp.ci_lo
    return DominanceReport(bound.formula_id, emp.thresholds, bound.values, emp.ci_lo, emp.estimates,
                           passed, np.asarray(bound.established, dtype=bool))


def target_bound(target: dict, config: ExperimentConfig, thresholds) -> BoundCurve:
    """Evaluate the bound named by ``target["formula"]`` on ``thresholds``.

    Formulas: ``fuk_nagaev`` (linear forms; ``two_sided`` doubles it),
    ``chebyshev`` (single-coordinate linear forms), ``prop31``, ``prop32``,
    ``hwi`` and ``hwi_fn`` (needs ``p``).  ``C`` and ``C_prime`` default to 1.
    """
    dist, A = config.distribution, config.tensor
    if not isinstance(dist, ParetoSpec):
        raise DomainError("bound targets need a Pareto distribution")
    t = np.asarray(thresholds, dtype=float)
    formula = target.get("formula")
    C = float(target.get("C", 1.0))
    if formula == "fuk_nagaev":
        if A.d != 1:
            raise DomainError("fuk_nagaev applies to linear forms (d = 1)")
        vals, p_opt = fuk_nagaev_optimized(A.entries, dist.alpha, dist.b, t, bool(target.get("two_sided", False)))
        return BoundCurve(t, vals, "fuk_nagaev", {"alpha": dist.alpha, "b": dist.b},
                          {"p_opt": p_opt})
    if formula == "chebyshev":
        nz = np.flatnonzero(A.entries)
        if A.d != 1 or nz.size != 1:
            raise DomainError("chebyshev target needs a single-coordinate linear form")
        gamma = dist.b * abs(float(A.entries[nz[0]]))
        ok = t >= generalized_threshold(gamma, 1.0, dist.alpha)
        vals = np.zeros_like(t)
        if ok.any():
            vals[ok] = chebyshev_tail_bound(dist.alpha, gamma, t[ok]).value
        return BoundCurve(t, vals, "chebyshev", {"alpha": dist.alpha, "b": gamma}, {}, ok)
    if formula == "prop31":
        return prop31_tail(A, dist.alpha, dist.b, t, C)
    if formula == "prop32":
        return prop32_tail(A, dist.alpha, dist.b, t, C)
    if formula == "hwi":
        return hwi_tail(A, dist.alpha, dist.b, t, C)
    if formula == "hwi_fn":
        return hwi_fn_combined(A, dist.alpha, dist.b, float(target["p"]), t, C, float(target.get("C_prime", 1.0)))
    raise DomainError(f"unknown formula {formula!r}")
