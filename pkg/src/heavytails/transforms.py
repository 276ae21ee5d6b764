"""Moment functionals of a tail, and the Laplace / characteristic-function identities.

All functionals are integrals of ``P(X >= y)`` against powers of ``y``; they are
evaluated over ``ell = log y`` where the integrands are slowly varying.  For a
distribution with onset ``b`` and ``h(ell) = exp(alpha*ell) P(X >= e**ell)``:

* ``tail_integral(r) = b**alpha/alpha + int_{log b}^{log r} h``
* ``truncated_moment(r) = alpha int_0^r y**(alpha-1) P(y <= X <= r) dy``
* ``damped_moment(s) = s int_0^inf e**(-s t) E[X**alpha; X <= t] dt``
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, special

from ._quadrature import DEFAULT_CONFIG, QuadratureConfig, integrate_range, integrate_to_infinity
from .errors import DomainError, InfiniteMomentError, QuadratureError
from .tails_core import Distribution, ParetoSpec, as_tail_function, pareto_moment

__all__ = [
    "QuadratureConfig",
    "DEFAULT_CONFIG",
    "IdentityReport",
    "truncated_moment",
    "tail_integral",
    "tail_integral_curve",
    "damped_moment",
    "fractional_moment",
    "laplace_identity_check",
    "charfn_identity_check",
    "log_factor_moment",
    "two_level_moment_exact",
]


def _log_arg(value, log_value, name):
    if (value is None) == (log_value is None):
        raise TypeError(f"give exactly one of {name} or log_{name}")
    if log_value is None:
        if not value > 0:
            raise DomainError(f"{name} must be positive")
        return math.log(value)
    return float(log_value)


def truncated_moment(dist: Distribution, alpha: float, r: float | None = None, *,
                     log_r: float | None = None, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """``E[X**alpha 1{X <= r}]`` as ``alpha int_0^r y**(alpha-1) P(y <= X <= r) dy``.

    Below the onset ``b`` the probability is ``1 - P(X > r)``, which contributes
    ``b**alpha (1 - g(r))`` in closed form; the rest is integrated over ``log y``.
    """
    tf = as_tail_function(dist)
    lr = _log_arg(r, log_r, "r")
    lb = tf.log_onset
    if lr < lb - 1e-15 * max(1.0, abs(lb)):
        raise DomainError(f"truncation level below the onset (log r = {lr} < {lb})")
    if lr <= lb:
        return 0.0
    lgr = tf.log_sf(lr)

    def f(ell):
        lg = tf.log_sf(ell)
        return math.exp(alpha * ell + lg) * -math.expm1(lgr - lg)

    head = math.exp(alpha * lb) * -math.expm1(lgr)
    return head + alpha * integrate_range(f, lb, lr, cfg, tf.kinks)


def tail_integral(dist: Distribution, alpha: float, r: float | None = None, *,
                  log_r: float | None = None, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """``int_0^r y**(alpha-1) P(X >= y) dy``; equals ``r**alpha/alpha`` below the onset."""
    tf = as_tail_function(dist)
    lr = _log_arg(r, log_r, "r")
    lb = tf.log_onset
    if lr <= lb:
        return math.exp(alpha * lr) / alpha
    return math.exp(alpha * lb) / alpha + integrate_range(
        lambda ell: math.exp(alpha * ell + tf.log_sf(ell)), lb, lr, cfg, tf.kinks)


def tail_integral_curve(dist: Distribution, alpha: float, log_r, cfg: QuadratureConfig = DEFAULT_CONFIG) -> np.ndarray:
    """:func:`tail_integral` on an increasing grid of ``log r``, accumulated piece by piece."""
    tf = as_tail_function(dist)
    log_r = np.asarray(log_r, dtype=float)
    if np.any(np.diff(log_r) <= 0):
        raise DomainError("log_r grid must be strictly increasing")
    lb = tf.log_onset
    head = math.exp(alpha * lb) / alpha
    f = lambda ell: math.exp(alpha * ell + tf.log_sf(ell))  # noqa: E731
    out = np.empty_like(log_r)
    acc = 0.0
    prev = lb
    for i, lr in enumerate(log_r):
        if lr <= lb:
            out[i] = math.exp(alpha * lr) / alpha
            continue
        acc += integrate_range(f, prev, lr, cfg, tf.kinks)
        prev = lr
        out[i] = head + acc
    return out


# --------------------------------------------------------------------------- damped moment

_GL16 = np.polynomial.legendre.leggauss(16)
_GL8 = np.polynomial.legendre.leggauss(8)


def _partition(lo, hi, step, kinks):
    cuts = [lo, hi]
    if kinks is not None:
        cuts += [float(k) for k in np.asarray(kinks(lo, hi)) if lo < k < hi]
    cuts = np.unique(cuts)
    edges = [lo]
    for a, b in zip(cuts[:-1], cuts[1:]):
        m = max(1, int(math.ceil((b - a) / step)))
        edges.extend(np.linspace(a, b, m + 1)[1:])
    return np.asarray(edges)


def damped_moment(dist: Distribution, alpha: float, s: float, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """``E[X**alpha exp(-s X)]`` for ``0 < s <= 1/e`` through the truncated-moment identity.

    With ``T(t) = E[X**alpha 1{X <= t}] = b**alpha + alpha J(t) - h(t)`` and
    ``J(t) = int_{log b}^{log t} h``, the outer integral
    ``s int e**u exp(-s e**u) T(e**u) du`` is taken with 16-point Gauss-Legendre
    on pieces of length at most ``cfg.segment_length / 2``, and ``J`` is
    accumulated with 8-point Gauss-Legendre on the same partition.
    """
    if not 0 < s <= math.exp(-1) * (1 + 1e-15):
        raise DomainError(f"damped_moment needs 0 < s <= 1/e, got {s}")
    tf = as_tail_function(dist)
    lb = tf.log_onset
    hi = math.log(60.0 / s)
    if hi <= lb:
        hi = lb + 60.0
    edges = _partition(lb, hi, 0.5 * cfg.segment_length, tf.kinks)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    x16, w16 = _GL16
    x8, w8 = _GL8

    def h(ell):
        return np.exp(alpha * ell + tf.log_sf(ell))

    # J at left edges
    seg = (half[:, None] * (x8[None, :] + 1) + a[:, None])
    seg_int = (h(seg) * w8[None, :]).sum(axis=1) * half
    j_left = np.concatenate([[0.0], np.cumsum(seg_int)[:-1]])
    # outer nodes and J at each node (partial piece)
    u = half[:, None] * (x16[None, :] + 1) + a[:, None]
    part_half = 0.5 * (u - a[:, None])
    inner = part_half[..., None] * (x8[None, None, :] + 1) + a[:, None, None]
    j_part = (h(inner) * w8).sum(axis=-1) * part_half
    J = j_left[:, None] + j_part
    T = math.exp(alpha * lb) + alpha * J - h(u)
    kern = s * np.exp(u - s * np.exp(u))
    return float(((kern * T) * w16[None, :]).sum(axis=1) @ half)


# --------------------------------------------------------------------------- fractional moments


def fractional_moment(dist: Distribution, p: float, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """``E[X**p] = p int_0^inf t**(p-1) P(X >= t) dt`` for ``0 < p < `` tail index.

    The integral above the onset runs in ``log t`` until the exponential
    remainder ``f/(alpha - p)`` is below tolerance, and that remainder is added.
    """
    tf = as_tail_function(dist)
    if not p > 0:
        raise DomainError("fractional_moment needs p > 0")
    if tf.tail_index is None:
        raise DomainError("tail has no declared tail index")
    if p >= tf.tail_index:
        raise InfiniteMomentError(f"E[X^p] is infinite for p={p} >= tail index {tf.tail_index}")
    lb = tf.log_onset
    body = integrate_to_infinity(lambda ell: math.exp(p * ell + tf.log_sf(ell)), lb,
                                 decay=tf.tail_index - p, cfg=cfg, kinks=tf.kinks)
    return math.exp(p * lb) + p * body


def log_factor_moment(alpha: float, b: float, p: float) -> float:
    """Closed form ``E[Y**p]`` for the tail ``min(1, e alpha log(t/b) (b/t)**alpha)``."""
    if not 0 < p < alpha:
        raise DomainError("need 0 < p < alpha")
    d = alpha - p
    return b ** p * (math.exp(p / alpha) + p * math.e * alpha * math.exp(-d / alpha) * (1 / (alpha * d) + 1 / d ** 2))


def two_level_moment_exact(alpha: float, a: float, b: float, p: float) -> float:
    """Closed-form ``E[X**p]`` for the tail ``max((b/x)**(2 alpha), (a/x)**alpha)``, ``x >= b``."""
    if not (0 < a < b):
        raise DomainError("two-level moment needs 0 < a < b")
    if not 0 <= p < alpha:
        raise DomainError("two-level moment needs 0 <= p < alpha")
    first = b ** p * 2 * alpha / (2 * alpha - p)
    second = a ** p * (b / a) ** (2 * p - 2 * alpha) * (p / (2 * alpha - p)) * (alpha / (alpha - p))
    return first + second


# --------------------------------------------------------------------------- identities


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of a transform identity check on a Pareto law."""

    identity: str
    alpha: float
    b: float
    s: float
    integral: float
    expected_integral: float
    moment_estimate: float
    exact_moment: float
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def _q_integral(c: float, alpha: float, cfg: QuadratureConfig) -> float:
    # Q(c) = int_c^inf y**-alpha (1 - e**-y) dy over w = log y
    return integrate_to_infinity(
        lambda w: math.exp((1 - alpha) * w) * -math.expm1(-math.exp(w)),
        math.log(c), decay=alpha - 1, cfg=cfg, start_at=max(math.log(c), 3.0))


def laplace_identity_check(dist: ParetoSpec, s: float, cfg: QuadratureConfig = DEFAULT_CONFIG,
                           tolerance: float = 1e-4) -> IdentityReport:
    """Check ``I s / Gamma(1-s) = E[X**(1+s)]`` with ``I = int (L'(u) - L'(0)) u**-(1+s) du``.

    ``L'(u) - L'(0) = E[X (1 - exp(-uX))] = alpha b**alpha u**(alpha-1) Q(ub)``
    where ``Q`` is itself computed by quadrature, so ``I`` is a nested integral.
    """
    if not isinstance(dist, ParetoSpec) or dist.symmetric:
        raise DomainError("laplace_identity_check takes a one-sided ParetoSpec")
    if not 0 < s < 1:
        raise DomainError("s must lie in (0, 1)")
    alpha, b = dist.alpha, dist.b
    if alpha <= 1:
        raise DomainError(f"X is not integrable for alpha={alpha} <= 1")
    exact = pareto_moment(dist, 1 + s)  # raises when alpha <= 1 + s
    mean = pareto_moment(dist, 1.0)
    lb = math.log(b)
    pref = alpha * b ** alpha

    def integrand(z):  # N(e**z) e**(-s z)
        u = math.exp(z)
        return pref * math.exp((alpha - 1 - s) * z) * _q_integral(u * b, alpha, cfg)

    z_hi = math.log(40.0) - lb  # E[X exp(-uX)] <= E[X] e**-40 beyond
    z_lo = z_hi - 8.0
    middle = integrate_range(integrand, z_lo, z_hi, cfg)
    lower = integrate_to_infinity(lambda y: integrand(z_lo - y), 0.0,
                                  decay=min(1.0, alpha - 1) - s, cfg=cfg, start_at=4.0)
    upper = mean * math.exp(-s * z_hi) / s
    total = lower + middle + upper
    expected = exact * special.gamma(1 - s) / s
    estimate = total * s / special.gamma(1 - s)
    return IdentityReport("laplace", alpha, b, s, total, expected, estimate, exact,
                          abs(estimate - exact) / exact, tolerance)


def _k_tail(c: float, alpha: float, cfg: QuadratureConfig) -> float:
    # K(c) = int_c^inf (1 - cos y) y**(-alpha-1) dy for c >= pi, via QAWF
    osc, _ = integrate.quad(lambda y: y ** (-alpha - 1), c, np.inf, weight="cos", wvar=1.0,
                            epsabs=cfg.abs_tol * 1e-2, limlst=200)
    return c ** -alpha / alpha - osc


def _k_log_integrand(alpha: float):
    # 2 sin(y/2)**2 y**-alpha at y = e**w, written as sinc**2 * y**(2-alpha) / 2
    def f(w: float) -> float:
        half = 0.5 * math.exp(w)
        sinc = math.sin(half) / half if half > 1e-8 else 1.0
        return 0.5 * sinc * sinc * math.exp((2 - alpha) * w)

    return f


def _k_func(alpha: float, cfg: QuadratureConfig):
    k_pi = _k_tail(math.pi, alpha, cfg)
    lpi = math.log(math.pi)

    def k(c: float) -> float:
        if c >= math.pi:
            return _k_tail(c, alpha, cfg)
        head = integrate_range(_k_log_integrand(alpha), math.log(c), lpi, cfg)
        return head + k_pi

    return k


def charfn_identity_check(dist: ParetoSpec, s: float, cfg: QuadratureConfig = DEFAULT_CONFIG,
                          tolerance: float | None = None, horizon: float = 200.0) -> IdentityReport:
    """Check ``E[X**(1+s)] = s(s+1) / (sin(pi s/2) Gamma(1-s)) * J``.

    ``J = int (1 - Re phi(u)) u**-(2+s) du`` with ``1 - Re phi(u) = alpha c**alpha K(c)``,
    ``c = u b``.  The outer integral is cut at the zeros ``k pi`` of the cosine
    factor up to ``c = horizon``; beyond it ``1 - Re phi`` is replaced by 1.
    Near zero the integral is taken in reflected log form.
    """
    if not isinstance(dist, ParetoSpec):
        raise DomainError("charfn_identity_check takes a ParetoSpec")
    if not 0 < s < 1:
        raise DomainError("s must lie in (0, 1)")
    alpha, b = dist.alpha, dist.b
    exact = pareto_moment(dist, 1 + s)
    tol = cfg.oscillatory_tol * 10 if tolerance is None else tolerance
    k = _k_func(alpha, cfg)

    def g_c(c):  # (1 - Re phi) c**-(2+s), in the c = u b variable
        return alpha * c ** (alpha - 2 - s) * k(c)

    n_seg = int(horizon / math.pi)
    edges = [1.0, math.pi] + [j * math.pi for j in range(2, n_seg + 1)]
    middle = math.fsum(_integrate_piece(g_c, lo, hi, cfg) for lo, hi in zip(edges[:-1], edges[1:]))
    c_top = edges[-1]
    far = c_top ** (-1 - s) / (1 + s)
    lower = integrate_to_infinity(lambda y: g_c(math.exp(-y)) * math.exp(-y), 0.0,
                                  decay=min(1.0, alpha - 1) - s, cfg=cfg, start_at=4.0)
    total_c = lower + middle + far
    J = b ** (1 + s) * total_c
    factor = s * (s + 1) / (math.sin(math.pi * s / 2) * special.gamma(1 - s))
    expected = exact / factor
    estimate = factor * J
    return IdentityReport("charfn", alpha, b, s, J, expected, estimate, exact,
                          abs(estimate - exact) / exact, tol)


def _integrate_piece(f, lo, hi, cfg):
    val, err = integrate.quad(f, lo, hi, epsabs=cfg.abs_tol * 1e-3, epsrel=cfg.rel_tol, limit=cfg.max_subdivisions)
    if not math.isfinite(val):
        raise QuadratureError(f"non-finite oscillatory piece on [{lo}, {hi}]", partial=val)
    return val
