"""Counterexample tails ``g(t) = t**-alpha * L(t)`` built from an epsilon profile.

Blocks are indexed by ``n >= 1`` and live on ``[a_n, a_{n+1})`` with
``log a_n = n e**n``, ``log b_n = log a_n + n`` and ``log(b_n e**n) = log a_n + 2n``.
On a block the log-derivative ``eps(t) = t d/dt log L(t)`` rises, falls back and
rests at zero, so ``L`` returns to 1 at the end of every block while
``log L(b_n)`` reaches the block checkpoint.

Two shapes are supported:

* piecewise: ``eps = gamma(n)`` on the ascent, ``-gamma(n)`` on the descent;
* smoothed: ``eps = +-(gamma(n) / c_n) * Lambda(x)`` with the tent
  ``Lambda(x) = min(2x, 2 - 2x)`` and ``x`` the relative position in linear
  ``t``.  This makes the tail itself log-convex once ``n`` is large enough.

Everything is evaluated in ``ell = log t``; breakpoints up to ``exp(30 e**30)``
are plain floats there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import ConstructionError, DescriptorError, ProfileError
from .tails_core import TailFunction

__all__ = [
    "BLOCK_LIMIT",
    "GammaSequence",
    "EpsilonProfile",
    "ConstructionBreakpoints",
    "BlockCheck",
    "LogConvexReport",
    "block_breakpoints",
    "correction_cn",
    "smoothed_primitive",
    "epsilon_at",
    "t_epsilon_prime",
    "log_L",
    "constructed_tail",
    "verify_logconvex",
    "gamma_from_h",
    "checkpoint_table",
    "tail_integral_majorant",
    "karamata_increments",
    "preset_profile",
]

# beyond n = 36 the block width n drops below the float spacing of n e**n;
# 30 keeps every piece resolved to better than 1/400 of its length
BLOCK_LIMIT = 30


# --------------------------------------------------------------------------- blocks


@dataclass(frozen=True)
class ConstructionBreakpoints:
    """Log-breakpoints of blocks ``1..n_max``; arrays are indexed by ``n - 1``."""

    n: np.ndarray
    log_a: np.ndarray
    log_b: np.ndarray
    log_end: np.ndarray


def block_breakpoints(n_max: int = BLOCK_LIMIT) -> ConstructionBreakpoints:
    if not 1 <= n_max <= BLOCK_LIMIT:
        raise ValueError(f"n_max must lie in [1, {BLOCK_LIMIT}]")
    n = np.arange(1, n_max + 1, dtype=float)
    log_a = n * np.exp(n)
    return ConstructionBreakpoints(n=n.astype(int), log_a=log_a, log_b=log_a + n, log_end=log_a + 2 * n)


_BP = block_breakpoints()


def correction_cn(n) -> float | np.ndarray:
    """``c_n = int_0^1 Lambda(x) / (x + kappa) dx`` with ``kappa = 1/(e**n - 1)``.

    Closed form from splitting the tent at ``x = 1/2``; increases to ``log 4``.
    """
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 1):
        raise ValueError("correction_cn needs n >= 1")
    kappa = 1.0 / np.expm1(n_arr)
    out = (2 + 2 * kappa) * np.log((1 + kappa) / (0.5 + kappa)) - 2 * kappa * np.log1p(0.5 / kappa)
    return float(out) if out.ndim == 0 else out


def smoothed_primitive(x, kappa):
    """``F(x) = int_0^x Lambda(y) / (y + kappa) dy`` for ``x`` in ``[0, 1]``."""
    x = np.asarray(x, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    half = 1.0 - 2 * kappa * np.log1p(0.5 / kappa)
    xl = np.minimum(x, 0.5)
    rising = 2 * xl - 2 * kappa * np.log1p(xl / kappa)
    xr = np.maximum(x, 0.5)
    falling = half - 2 * (xr - 0.5) + (2 + 2 * kappa) * np.log((xr + kappa) / (0.5 + kappa))
    return np.where(x <= 0.5, rising, falling)


# --------------------------------------------------------------------------- gamma


@dataclass(frozen=True)
class GammaSequence:
    """Block heights ``gamma(n)``, clipped from below at ``1/n``.

    ``kind`` is ``"power"`` (``gamma(n) = n**(delta - 1)``) or ``"table"``
    (explicit values for ``n = 1..len(values)``, continued with a constant
    product ``n * gamma(n)``).
    """

    kind: str
    delta: float = 0.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind == "power":
            if not 0 <= self.delta < 1:
                raise ProfileError(f"power gamma needs 0 <= delta < 1, got {self.delta}")
        elif self.kind == "table":
            if not self.values or any(not (v > 0 and math.isfinite(v)) for v in self.values):
                raise ProfileError("gamma table must be a non-empty list of positive numbers")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        else:
            raise ProfileError(f"unknown gamma kind {self.kind!r}")

    def raw(self, n: int) -> float:
        if self.kind == "power":
            return float(n) ** (self.delta - 1.0)
        m = len(self.values)
        if n <= m:
            return self.values[n - 1]
        return m * self.values[-1] / n

    def __call__(self, n: int) -> float:
        return max(1.0 / n, self.raw(n))

    def array(self, n_max: int = BLOCK_LIMIT) -> np.ndarray:
        return np.array([self(n) for n in range(1, n_max + 1)])

    def descriptor(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "delta": self.delta}
        return {"kind": "table", "values": list(self.values)}

    @classmethod
    def from_descriptor(cls, obj) -> "GammaSequence":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise DescriptorError("gamma must be an object with a 'kind' field")
        if obj["kind"] == "power":
            return cls("power", delta=float(obj.get("delta", 0.0)))
        if obj["kind"] == "table":
            return cls("table", values=tuple(obj.get("values", ())))
        raise DescriptorError(f"unknown gamma kind {obj['kind']!r}")


# --------------------------------------------------------------------------- profile


@dataclass(frozen=True)
class EpsilonProfile:
    """Construction data for the counterexample tails.

    Parameters
    ----------
    alpha : float
        Tail index of the resulting law.
    rho : float
        Growth cap in ``(0, 1)``; block heights from ``n_min`` on must satisfy
        ``gamma(n) <= rho * min(alpha, 1)``.
    gamma : GammaSequence
    smoothed : bool
        Use the tent-shaped profile (log-convex tails) instead of the step one.
    n_min : int, optional
        First block where the cap (and, if smoothed, the convexity inequality)
        is enforced.  Smoothed profiles set ``eps = 0`` before it.  When omitted
        the smallest admissible value is computed.
    n_max : int
        Last block that is built; the tail is pure Pareto beyond it.
    """

    alpha: float
    rho: float
    gamma: GammaSequence
    smoothed: bool = False
    n_min: int | None = None
    n_max: int = BLOCK_LIMIT

    def __post_init__(self):
        if not self.alpha > 0:
            raise ProfileError("alpha must be positive")
        if not 0 < self.rho < 1:
            raise ProfileError(f"rho must lie in (0, 1), got {self.rho}")
        if not 1 <= self.n_max <= BLOCK_LIMIT:
            raise ProfileError(f"n_max must lie in [1, {BLOCK_LIMIT}]")
        if self.smoothed and not self.rho < correction_cn(1):
            raise ProfileError(f"smoothed profiles need rho < c_1 = {correction_cn(1):.6f}, got {self.rho}")
        resolved = self._resolve_n_min() if self.n_min is None else int(self.n_min)
        if resolved < 1:
            raise ProfileError("n_min must be >= 1")
        object.__setattr__(self, "n_min", resolved)
        self.check()

    @property
    def cap(self) -> float:
        return self.rho * min(self.alpha, 1.0)

    def sufficient_lhs(self, n: int) -> float:
        """``2 (gamma(n)/c_n) (1/(e**n - 1) + 1)``, to be compared with ``alpha``."""
        return 2 * self.gamma(n) / correction_cn(n) * (1.0 / math.expm1(n) + 1.0)

    def _valid(self, m: int) -> bool:
        # what an enforced block must satisfy
        if self.gamma(m) > self.cap:
            return False
        return not self.smoothed or self.sufficient_lhs(m) <= self.alpha

    def _admissible(self, m: int) -> bool:
        # default n_min additionally waits for c_1/c_n <= 1/2
        if self.smoothed and correction_cn(m) < 2 * correction_cn(1):
            return False
        return self._valid(m)

    def _resolve_n_min(self) -> int:
        n = self.n_max
        if not self._admissible(n):
            raise ProfileError(self._describe_failure(n))
        while n > 1 and self._admissible(n - 1):
            n -= 1
        return n

    def _describe_failure(self, n: int) -> str:
        g = self.gamma(n)
        if g > self.cap:
            return f"block {n}: gamma = {g:.6g} exceeds the cap rho*min(alpha,1) = {self.cap:.6g}"
        if self.smoothed and self.sufficient_lhs(n) <= self.alpha:
            return f"block {n}: c_n = {correction_cn(n):.6g} below 2 c_1"
        return f"block {n}: 2(gamma/c_n)(1 + 1/(e^n - 1)) = {self.sufficient_lhs(n):.6g} exceeds alpha = {self.alpha}"

    def check(self) -> None:
        """Raise :class:`ProfileError` if any profile invariant fails."""
        g = self.gamma_array
        ng = np.arange(1, self.n_max + 1) * g
        bad = np.nonzero(np.diff(ng) < -1e-12 * ng[1:])[0]
        if bad.size:
            k = int(bad[0]) + 2
            raise ProfileError(f"n*gamma(n) decreases at block {k}")
        for m in range(self.n_min, self.n_max + 1):
            if not self._valid(m):
                raise ProfileError(self._describe_failure(m))

    @cached_property
    def gamma_array(self) -> np.ndarray:
        return self.gamma.array(self.n_max)

    @cached_property
    def amplitude(self) -> np.ndarray:
        """Peak ``|eps|`` per block, zero for inactive blocks."""
        n = np.arange(1, self.n_max + 1)
        amp = self.gamma_array / correction_cn(n) if self.smoothed else self.gamma_array.copy()
        if self.smoothed:
            amp[n < self.n_min] = 0.0
        return amp

    def descriptor(self) -> dict:
        return {
            "alpha": self.alpha,
            "rho": self.rho,
            "gamma": self.gamma.descriptor(),
            "smoothed": self.smoothed,
            "n_min": self.n_min,
        }

    @classmethod
    def from_descriptor(cls, obj) -> "EpsilonProfile":
        if not isinstance(obj, dict):
            raise DescriptorError("profile must be a JSON object")
        try:
            alpha = float(obj["alpha"])
            rho = float(obj["rho"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DescriptorError(f"profile needs numeric alpha and rho: {exc}") from None
        gamma = GammaSequence.from_descriptor(obj.get("gamma", {"kind": "power", "delta": 0.0}))
        n_min = obj.get("n_min")
        return cls(alpha=alpha, rho=rho, gamma=gamma, smoothed=bool(obj.get("smoothed", False)),
                   n_min=None if n_min is None else int(n_min), n_max=int(obj.get("n_max", BLOCK_LIMIT)))


def preset_profile(name: str, alpha: float, rho: float, smoothed: bool = False) -> EpsilonProfile:
    """Named profiles: ``"inverse"`` (``gamma = 1/n``) and ``"sqrt"`` (``gamma = n**-0.5``)."""
    deltas = {"inverse": 0.0, "sqrt": 0.5}
    if name not in deltas:
        raise ProfileError(f"unknown preset {name!r}; choose from {sorted(deltas)}")
    return EpsilonProfile(alpha, rho, GammaSequence("power", delta=deltas[name]), smoothed=smoothed)


# --------------------------------------------------------------------------- evaluation


def _locate(profile: EpsilonProfile, ell: np.ndarray):
    """Block index (0-based, -1 before a_1), phase (0 ascent, 1 descent, 2 rest) and relative x."""
    la = _BP.log_a[: profile.n_max]
    idx = np.searchsorted(la, ell, side="right") - 1
    safe = np.clip(idx, 0, None)
    n = safe + 1.0
    off = ell - la[safe]
    # compare against the stored breakpoints so that block edges classify exactly
    phase = np.where(ell < _BP.log_b[safe], 0, np.where(ell < _BP.log_end[safe], 1, 2))
    phase = np.where(idx < 0, 2, phase)
    rel = np.where(phase == 0, off, off - n)
    with np.errstate(over="ignore", invalid="ignore"):
        x = np.clip(np.expm1(np.clip(rel, 0.0, n)) / np.expm1(n), 0.0, 1.0)
    return idx, phase, x, n


def epsilon_at(profile: EpsilonProfile, log_t):
    """``eps(t)`` at ``t = exp(log_t)``; intervals are closed on the left."""
    ell = np.asarray(log_t, dtype=float)
    idx, phase, x, n = _locate(profile, ell)
    amp = np.where(idx >= 0, profile.amplitude[np.clip(idx, 0, None)], 0.0)
    shape = np.minimum(2 * x, 2 - 2 * x) if profile.smoothed else np.ones_like(x)
    out = np.where(phase == 0, amp * shape, np.where(phase == 1, -amp * shape, 0.0))
    return float(out) if out.ndim == 0 else out


def t_epsilon_prime(profile: EpsilonProfile, log_t):
    """``t * eps'(t)`` at continuity points of ``eps'`` (zero for the step profile)."""
    ell = np.asarray(log_t, dtype=float)
    if not profile.smoothed:
        out = np.zeros_like(ell)
        return float(out) if out.ndim == 0 else out
    idx, phase, x, n = _locate(profile, ell)
    amp = np.where(idx >= 0, profile.amplitude[np.clip(idx, 0, None)], 0.0)
    kappa = 1.0 / np.expm1(n)
    slope = 2 * amp * (x + kappa)
    up = x < 0.5
    out = np.where(phase == 0, np.where(up, slope, -slope), np.where(phase == 1, np.where(up, -slope, slope), 0.0))
    return float(out) if out.ndim == 0 else out


def log_L(profile: EpsilonProfile, log_t):
    """``log L(t) = int_0^{log t} eps(e**u) du`` from per-piece closed forms."""
    ell = np.asarray(log_t, dtype=float)
    if np.any(ell < 0):
        raise ValueError("log_L is defined for log_t >= 0")
    idx, phase, x, n = _locate(profile, ell)
    safe = np.clip(idx, 0, None)
    amp = np.where(idx >= 0, profile.amplitude[safe], 0.0)
    if profile.smoothed:
        kappa = 1.0 / np.expm1(n)
        F = smoothed_primitive(x, kappa)
        cn = correction_cn(n)
        up, down = amp * F, amp * (cn - F)
    else:
        off = ell - _BP.log_a[safe]
        up, down = amp * off, amp * (2 * n - off)
    out = np.where(phase == 0, up, np.where(phase == 1, down, 0.0))
    return float(out) if out.ndim == 0 else out


def _kinks(profile: EpsilonProfile) -> np.ndarray:
    bp = _BP
    m = profile.n_max
    pts = [bp.log_a[:m], bp.log_b[:m], bp.log_end[:m]]
    if profile.smoothed:
        n = bp.n[:m].astype(float)
        mid = np.log1p(np.expm1(n) / 2)  # x = 1/2 in both halves
        pts += [bp.log_a[:m] + mid, bp.log_b[:m] + mid]
    return np.sort(np.concatenate(pts))


def constructed_tail(profile: EpsilonProfile) -> TailFunction:
    """Tail ``log g(e**ell) = -alpha*ell + log L(ell)`` with onset 1.

    Raises :class:`ConstructionError` if ``eps`` exceeds ``alpha`` on an
    active block, since ``g`` would then increase there.
    """
    amp = profile.amplitude
    if np.any(amp > profile.alpha):
        k = int(np.argmax(amp > profile.alpha)) + 1
        raise ConstructionError(f"eps = {amp[k - 1]:.6g} > alpha = {profile.alpha} on block {k}: tail not monotone")
    kinks_all = _kinks(profile)
    alpha = profile.alpha

    def log_survival(ell):
        return -alpha * ell + log_L(profile, ell)

    def kinks(lo, hi):
        i, j = np.searchsorted(kinks_all, [lo, hi])
        return kinks_all[i:j]

    return TailFunction(
        log_onset=0.0,
        log_survival=log_survival,
        kind="constructed",
        tail_index=alpha,
        kinks=kinks,
        params=profile.descriptor(),
    )


# --------------------------------------------------------------------------- verification


@dataclass(frozen=True)
class BlockCheck:
    n: int
    min_margin: float
    sufficient_lhs: float
    sufficient_ok: bool
    passed: bool


@dataclass(frozen=True)
class LogConvexReport:
    """Margins of ``t eps'(t) + alpha - eps(t) >= 0`` on the enforced blocks."""

    alpha: float
    n_min: int
    n_max: int
    blocks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.blocks)

    def failing_blocks(self) -> list[int]:
        return [b.n for b in self.blocks if not b.passed]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "n_min": self.n_min,
            "n_max": self.n_max,
            "passed": self.passed,
            "blocks": [b.__dict__ for b in self.blocks],
        }


def verify_logconvex(profile: EpsilonProfile, n_max: int | None = None, points: int = 257,
                     tol: float = 1e-12) -> LogConvexReport:
    """Check the log-convexity condition block by block.

    Each of the four linear pieces of a block is sampled at ``points``
    positions (uniform in ``x``, endpoints nudged inwards so that ``eps'`` is
    continuous), and the closed-form sufficient inequality for the falling
    half of the ascent is reported alongside.
    """
    if not profile.smoothed:
        raise ProfileError("verify_logconvex applies to smoothed profiles")
    n_max = profile.n_max if n_max is None else min(n_max, profile.n_max)
    u = np.linspace(0.0, 1.0, points)
    u = np.clip(u, 1e-9, 1 - 1e-9)
    blocks = []
    for n in range(profile.n_min, n_max + 1):
        la = _BP.log_a[n - 1]
        ell = []
        for start in (la, la + n):
            for x in (0.5 * u, 0.5 + 0.5 * u):
                ell.append(start + np.log1p(x * math.expm1(n)))
        ell = np.concatenate(ell)
        margin = t_epsilon_prime(profile, ell) + profile.alpha - epsilon_at(profile, ell)
        lhs = profile.sufficient_lhs(n)
        ok = lhs <= profile.alpha * (1 + 1e-12)
        mm = float(np.min(margin))
        blocks.append(BlockCheck(n=n, min_margin=mm, sufficient_lhs=lhs, sufficient_ok=ok, passed=ok and mm >= -tol))
    return LogConvexReport(alpha=profile.alpha, n_min=profile.n_min, n_max=n_max, blocks=blocks)


def gamma_from_h(log_h: Callable[[float], float], alpha: float, rho: float,
                 n_min: int | None = None, n_max: int = BLOCK_LIMIT) -> GammaSequence:
    """Block heights ``gamma(n) = max(1/n, log h(b_n) / n)`` from a target ``h``.

    ``log_h`` receives ``ell = log t``.  Heights are lower-clipped silently;
    a height above ``rho * min(alpha, 1)`` from ``n_min`` on raises
    :class:`ProfileError` naming the block.  Without ``n_min`` every block
    from the first admissible tail segment on is checked, so an ``h`` whose
    heights stay above the cap up to ``n_max`` is rejected.
    """
    cap = rho * min(alpha, 1.0)
    vals = []
    for n in range(1, n_max + 1):
        lh = float(log_h(float(_BP.log_b[n - 1])))
        if not math.isfinite(lh):
            raise ProfileError(f"log h(b_{n}) is not finite")
        vals.append(max(1.0 / n, lh / n))
    vals = np.array(vals)
    over = vals > cap
    if n_min is None:
        if over[-1]:
            raise ProfileError(f"block {n_max}: gamma = {vals[-1]:.6g} exceeds the cap {cap:.6g}")
    else:
        hits = np.nonzero(over[n_min - 1:])[0]
        if hits.size:
            k = int(hits[0]) + n_min
            raise ProfileError(f"block {k}: gamma = {vals[k - 1]:.6g} exceeds the cap {cap:.6g}")
    return GammaSequence("table", values=tuple(vals))


def checkpoint_table(profile: EpsilonProfile, n_max: int = 6) -> list[dict]:
    """``log L(b_n)`` against the block target, with the absolute residual.

    The target is ``n gamma(n)`` for the step profile and ``gamma(n)`` (times
    the activity indicator) for the smoothed one, where a tent of height
    ``gamma/c_n`` integrates to ``gamma`` over ``[log a_n, log b_n]``.
    """
    rows = []
    for n in range(1, min(n_max, profile.n_max) + 1):
        lb = float(_BP.log_b[n - 1])
        val = log_L(profile, lb)
        if profile.smoothed:
            target = profile.gamma(n) if n >= profile.n_min else 0.0
        else:
            target = n * profile.gamma(n)
        rows.append({"n": n, "log_b": lb, "log_L": val, "target": target, "residual": abs(val - target)})
    return rows


def tail_integral_majorant(profile: EpsilonProfile, n: int) -> float:
    """``n max_{k<=n} gamma(k)**-1 exp(n gamma(n)) / log b_n``, the block bound on ``C_3``."""
    g = profile.gamma_array[:n]
    return n * float(np.max(1.0 / g)) * math.exp(n * g[-1]) / float(_BP.log_b[n - 1])


def karamata_increments(profile: EpsilonProfile, log_a: float, ells: Sequence[float]) -> np.ndarray:
    """``log L(a t) - log L(t)`` along ``ells``; tends to 0 when ``L`` is slowly varying."""
    ells = np.asarray(ells, dtype=float)
    return log_L(profile, ells + log_a) - log_L(profile, ells)
