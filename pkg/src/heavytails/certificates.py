"""Chebyshev-type tail bounds and measured moment-growth certificates.

A law with ``E[X**p] <= C1/(alpha - p)`` has three equivalent descriptions in
terms of a truncated moment (``C2``), a tail integral (``C3``) and a damped
moment (``C4``), each growing like a logarithm.  :func:`measure_certificate`
estimates all four constants as grid suprema and checks the explicit
conversions between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._quadrature import DEFAULT_CONFIG, QuadratureConfig
from .errors import DomainError, HeavyTailsError, PreconditionError, TheoremViolation
from .tails_core import Distribution, as_tail_function, log_factor_tail
from .transforms import damped_moment, fractional_moment, tail_integral_curve, truncated_moment

__all__ = [
    "TailBound",
    "chebyshev_tail_bound",
    "generalized_tail_bound",
    "generalized_threshold",
    "CertificateGrids",
    "Relation",
    "MomentCertificate",
    "measure_certificate",
    "ConvexityReport",
    "discrete_convexity",
    "RecoveryReport",
    "tail_recovery_logconvex",
    "tail_recovery_logconcave",
    "BandReport",
    "einsweiter_band",
    "RELATION_SLACK",
]

RELATION_SLACK = 1 + 1e-6
CONVEXITY_SLACK = 1e-9


# --------------------------------------------------------------------------- tail bounds


class TailBound(NamedTuple):
    value: float
    p_star: float


def generalized_threshold(gamma: float, beta: float, alpha: float) -> float:
    """Smallest ``t`` at which the generalized bound is established, ``gamma e**(beta/alpha)``."""
    return gamma * math.exp(beta / alpha)


def generalized_tail_bound(gamma: float, beta: float, alpha: float, t):
    """``(alpha/beta)**beta e**beta log(t/gamma)**beta (gamma/t)**alpha``.

    Follows from ``||Z||_p <= gamma (alpha/(alpha-p))**(beta/p)`` with
    ``p = alpha - beta/log(t/gamma)``; valid for ``t >= gamma e**(beta/alpha)``.
    """
    if not (gamma > 0 and beta > 0 and alpha > 0):
        raise DomainError("gamma, beta and alpha must be positive")
    t_arr = np.asarray(t, dtype=float)
    lt = np.log(t_arr / gamma)
    if np.any(lt < (beta / alpha) * (1 - 1e-12)):
        raise DomainError(f"bound not established below t = gamma*e^(beta/alpha) = {generalized_threshold(gamma, beta, alpha)}")
    lt = np.maximum(lt, beta / alpha)
    out = (alpha / beta) ** beta * math.e ** beta * lt ** beta * (gamma / t_arr) ** alpha
    return float(out) if out.ndim == 0 else out


def chebyshev_tail_bound(alpha: float, b: float, t) -> TailBound:
    """``e alpha log(t/b) (b/t)**alpha`` and the optimizing exponent ``alpha - 1/log(t/b)``."""
    value = generalized_tail_bound(b, 1.0, alpha, t)
    p_star = alpha - 1.0 / np.maximum(np.log(np.asarray(t, dtype=float) / b), 1.0 / alpha)
    return TailBound(value, float(p_star) if np.ndim(p_star) == 0 else p_star)


# --------------------------------------------------------------------------- certificate


@dataclass(frozen=True)
class CertificateGrids:
    """Grids for the four suprema: exponents ``p``, levels ``log r`` and dampings ``s``."""

    p: np.ndarray
    log_r: np.ndarray
    s: np.ndarray

    @classmethod
    def default(cls, alpha: float, per_decade: int = 64, decades: int = 8, p_points: int = 64,
                min_gap: float = 1e-4) -> "CertificateGrids":
        log_r = 1.0 + math.log(10) * np.arange(per_decade * decades + 1) / per_decade
        gaps = np.geomspace(min_gap, 0.99 * alpha, p_points)
        return cls(p=np.sort(alpha - gaps), log_r=log_r, s=np.exp(-log_r))

    def refined(self) -> "CertificateGrids":
        def mid(x, geometric=False):
            x = np.asarray(x)
            m = np.sqrt(x[:-1] * x[1:]) if geometric else 0.5 * (x[:-1] + x[1:])
            return np.sort(np.concatenate([x, m]))
        return CertificateGrids(p=mid(self.p), log_r=mid(self.log_r), s=np.sort(mid(self.s, True))[::-1])

    def to_dict(self) -> dict:
        return {"p": self.p.tolist(), "log_r": self.log_r.tolist(), "s": self.s.tolist()}


@dataclass(frozen=True)
class Relation:
    name: str
    lhs: float
    rhs: float
    passed: bool


@dataclass(frozen=True)
class MomentCertificate:
    """Measured constants ``C1..C4`` with the implied relations between them."""

    alpha: float
    C1: float
    C2: float
    C3: float
    C4: float
    grids: CertificateGrids
    relations: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    source: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return all(math.isfinite(c) for c in (self.C1, self.C2, self.C3, self.C4))

    @property
    def passed(self) -> bool:
        return self.finite and all(r.passed for r in self.relations)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "source": self.source,
            "C1": self.C1,
            "C2": self.C2,
            "C3": self.C3,
            "C4": self.C4,
            "finite": self.finite,
            "passed": self.passed,
            "failures": list(self.failures),
            "relations": [r.__dict__ for r in self.relations],
            "grids": self.grids.to_dict(),
        }


def _relations(alpha, c1, c2, c3, c4) -> list[Relation]:
    e = math.e
    k_ab = e * math.pi ** 3 / 4 if alpha >= 2 else e * math.pi ** 3 / (2 * alpha)
    rows = [
        ("(a)->(b): C2 <= K C1", c2, k_ab * c1),
        ("(b)->(a): C1 <= C2 + alpha e^alpha", c1, c2 + alpha * math.exp(alpha)),
        ("(c)->(b): C2 <= alpha C3", c2, alpha * c3),
        ("(a,b)->(c): C3 <= (e C1 + C2)/alpha", c3, (e * c1 + c2) / alpha),
        ("(b)->(d): C4 <= e^alpha + C2 (1/e + 1)", c4, math.exp(alpha) + c2 * (1 / e + 1)),
        ("(d)->(b): C2 <= e C4", c2, e * c4),
    ]
    out = []
    for name, lhs, rhs in rows:
        ok = math.isfinite(lhs) and math.isfinite(rhs) and lhs <= rhs * RELATION_SLACK
        out.append(Relation(name, float(lhs), float(rhs), bool(ok)))
    return out


def measure_certificate(dist: Distribution, alpha: float, grids: CertificateGrids | None = None,
                        cfg: QuadratureConfig = DEFAULT_CONFIG) -> MomentCertificate:
    """Measure ``C1..C4`` as grid suprema and check the six conversions.

    * ``C1 = max_p (alpha - p) E[X**p]``
    * ``C2 = max_r E[X**alpha; X <= r] / log r``
    * ``C3 = max_r int_0^r y**(alpha-1) P(X >= y) dy / log r``
    * ``C4 = max_s E[X**alpha e**(-sX)] / |log s|``

    A functional that cannot be evaluated (e.g. an infinite moment) makes
    its constant infinite and is listed in ``failures``.
    """
    grids = CertificateGrids.default(alpha) if grids is None else grids
    if np.any(grids.p <= 0) or np.any(grids.p >= alpha):
        raise DomainError("p-grid must lie in (0, alpha)")
    if np.any(grids.log_r < 1 - 1e-12):
        raise DomainError("r-grid must satisfy r >= e")
    if np.any(grids.s <= 0) or np.any(grids.s > math.exp(-1) * (1 + 1e-12)):
        raise DomainError("s-grid must lie in (0, 1/e]")
    tf = as_tail_function(dist)
    failures = []

    def guarded(label, fn):
        try:
            vals = np.asarray(fn(), dtype=float)
        except HeavyTailsError as exc:
            failures.append(f"{label}: {exc}")
            return math.inf
        if not np.all(np.isfinite(vals)):
            failures.append(f"{label}: non-finite value on the grid")
            return math.inf
        return float(np.max(vals))

    c1 = guarded("(a) moments", lambda: [(alpha - p) * fractional_moment(tf, p, cfg) for p in grids.p])
    c2 = guarded("(b) truncated moment",
                 lambda: [truncated_moment(tf, alpha, log_r=lr, cfg=cfg) / lr for lr in grids.log_r])
    c3 = guarded("(c) tail integral", lambda: tail_integral_curve(tf, alpha, grids.log_r, cfg) / grids.log_r)
    c4 = guarded("(d) damped moment",
                 lambda: [damped_moment(tf, alpha, s, cfg) / abs(math.log(s)) for s in grids.s])
    return MomentCertificate(alpha=alpha, C1=c1, C2=c2, C3=c3, C4=c4, grids=grids,
                             relations=_relations(alpha, c1, c2, c3, c4), failures=failures,
                             source=tf.descriptor())


# --------------------------------------------------------------------------- convexity


@dataclass(frozen=True)
class ConvexityReport:
    direction: str
    passed: bool
    worst_margin: float
    worst_index: int
    worst_log_t: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def discrete_convexity(log_t, values, direction: str = "convex", slack: float = CONVEXITY_SLACK) -> ConvexityReport:
    """Second divided differences, in ``t``, of ``values`` sampled at ``t = exp(log_t)``.

    Each margin is ``t_i`` times the jump of the secant slope at ``t_i``,

        ``dy+ / expm1(dl+) - dy- / -expm1(-dl-)``,

    which is dimensionless and stays finite however large ``t`` is.  The test
    passes when every margin (sign-flipped for ``"concave"``) is at least ``-slack``.
    """
    if direction not in ("convex", "concave"):
        raise ValueError("direction must be 'convex' or 'concave'")
    ell = np.asarray(log_t, dtype=float)
    y = np.asarray(values, dtype=float)
    if ell.ndim != 1 or ell.shape != y.shape or ell.size < 3:
        raise ValueError("need matching 1-d grids with at least 3 points")
    if np.any(np.diff(ell) <= 0):
        raise ValueError("grid must be strictly increasing")
    dl = np.diff(ell)
    dy = np.diff(y)
    margin = dy[1:] / np.expm1(dl[1:]) - dy[:-1] / -np.expm1(-dl[:-1])
    if direction == "concave":
        margin = -margin
    i = int(np.argmin(margin))
    worst = float(margin[i])
    return ConvexityReport(direction, bool(worst >= -slack), worst, i + 1, float(ell[i + 1]))


# --------------------------------------------------------------------------- tail recovery


@dataclass(frozen=True)
class RecoveryReport:
    """Tail constant ``C5`` with ``P(X >= t) <= C5 t**-alpha`` for ``t >= e`` and its grid check."""

    branch: str
    C5: float
    sup_h: float
    sup_at_log_t: float
    convexity: ConvexityReport

    @property
    def passed(self) -> bool:
        return self.sup_h <= self.C5 * (1 + 1e-9)

    def to_dict(self) -> dict:
        return {"branch": self.branch, "C5": self.C5, "sup_h": self.sup_h, "sup_at_log_t": self.sup_at_log_t,
                "passed": self.passed, "convexity": self.convexity.to_dict()}


def _default_h_grid(tf, points=2049):
    lo = tf.log_onset
    return np.linspace(lo, max(lo, 1.0) + 8 * math.log(10), points)


def _recovery(dist, alpha, constant, log_t, branch, direction):
    tf = as_tail_function(dist)
    log_t = _default_h_grid(tf) if log_t is None else np.asarray(log_t, dtype=float)
    if np.any(log_t < tf.log_onset - 1e-12):
        raise DomainError("grid must start at or above the onset")
    log_h = alpha * log_t + tf.log_sf(log_t)
    conv = discrete_convexity(log_t, log_h, direction)
    above = log_t >= 1.0
    if not above.any():
        raise DomainError("grid has no point with t >= e")
    i = int(np.argmax(np.where(above, log_h, -np.inf)))
    report = RecoveryReport(branch, float(constant), float(math.exp(log_h[i])), float(log_t[i]), conv)
    if not conv.passed:
        raise PreconditionError(
            f"h(t) = t^alpha P(X >= t) is not log-{direction} on the grid "
            f"(margin {conv.worst_margin:.3g} at log t = {conv.worst_log_t:.6g}); "
            f"grid sup of h is {report.sup_h:.6g} at log t = {report.sup_at_log_t:.6g}", report)
    return report, log_h


def tail_recovery_logconvex(dist: Distribution, alpha: float, C1: float, log_t=None) -> RecoveryReport:
    """Recover ``C5 = e C1`` when ``h(t) = t**alpha P(X >= t)`` is log-convex.

    Raises :class:`PreconditionError` if log-convexity of ``h`` fails on the
    grid (for instance for tails that are log-convex while ``h`` oscillates)
    and :class:`TheoremViolation` if ``sup h`` over ``t >= e`` exceeds ``C5``.
    """
    report, _ = _recovery(dist, alpha, math.e * C1, log_t, "log-convex", "convex")
    if not report.passed:
        raise TheoremViolation(f"sup h = {report.sup_h:.6g} exceeds C5 = e*C1 = {report.C5:.6g}", report)
    return report


def tail_recovery_logconcave(dist: Distribution, alpha: float, C3: float, delta: float,
                             log_t=None) -> RecoveryReport:
    """Recover ``C5 = C3`` when ``h`` is log-concave and bounded below by ``delta > 0``."""
    if not delta > 0:
        raise DomainError("delta must be positive")
    report, log_h = _recovery(dist, alpha, C3, log_t, "log-concave", "concave")
    if np.min(log_h) < math.log(delta):
        raise PreconditionError(f"h drops below delta = {delta} on the grid", report)
    if not report.passed:
        raise TheoremViolation(f"sup h = {report.sup_h:.6g} exceeds C5 = C3 = {report.C5:.6g}", report)
    return report


# --------------------------------------------------------------------------- band


@dataclass(frozen=True)
class BandReport:
    alpha: float
    b: float
    p: np.ndarray
    values: np.ndarray
    ratio: float

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "b": self.b, "p": self.p.tolist(), "values": self.values.tolist(),
                "ratio": self.ratio}


def einsweiter_band(alpha: float, b: float, p_grid, cfg: QuadratureConfig = DEFAULT_CONFIG) -> BandReport:
    """``v(p) = (alpha - p)**2 E[Y**p]`` for ``Y`` with tail ``min(1, e alpha log(t/b) (b/t)**alpha)``.

    ``ratio`` is ``max v / min v`` over the grid points with ``p >= alpha - 1``.
    """
    p = np.asarray(p_grid, dtype=float)
    if np.any(p <= 0) or np.any(p >= alpha):
        raise DomainError("p-grid must lie in (0, alpha)")
    y = log_factor_tail(alpha, b)
    v = np.array([(alpha - q) ** 2 * fractional_moment(y, q, cfg) for q in p])
    sub = v[p >= alpha - 1]
    ratio = float(sub.max() / sub.min()) if sub.size else math.nan
    return BandReport(alpha, b, p, v, ratio)
