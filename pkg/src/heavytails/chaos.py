"""Coefficient tensors, polynomial chaos evaluation and chaos tail/moment bounds.

A chaos of order ``d`` in ``n`` variables is ``sum a[i1..id] X[i1]...X[id]``.
Entries are classified by the largest number of equal indices (their
multiplicity ``k``); the bounds for each class scale with ``alpha/k``.
Constants that the bounds leave unspecified are explicit parameters that
default to 1, so shapes can be compared and a single constant calibrated.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from .certificates import generalized_threshold, generalized_tail_bound
from .errors import DescriptorError, DomainError, HypothesisError, InfiniteMomentError, PreconditionError
from .tails_core import ParetoSpec

__all__ = [
    "MAX_ENTRIES",
    "CoefficientTensor",
    "MultiplicityDecomposition",
    "BoundCurve",
    "multiplicity_of",
    "multiplicity_array",
    "decompose",
    "group_coefficients",
    "evaluate_multilinear",
    "evaluate_recentered",
    "pareto_power_moments",
    "hs_norm",
    "lp_norm",
    "operator_norm_2d",
    "prop31_bounds",
    "prop32_bounds",
    "prop31_moment",
    "prop31_tail",
    "prop32_moment",
    "prop32_tail",
    "fuk_nagaev_bound",
    "fuk_nagaev_optimized",
    "hwi_tail",
    "hwi_fn_combined",
    "two_level_moment",
]

MAX_ENTRIES = 10 ** 7


# --------------------------------------------------------------------------- tensors


@dataclass(frozen=True)
class CoefficientTensor:
    """Dense order-``d`` tensor over ``n`` variables (row-major entries)."""

    d: int
    n: int
    entries: np.ndarray

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise DescriptorError("tensor needs d >= 1 and n >= 1")
        if self.n ** self.d > MAX_ENTRIES:
            raise DescriptorError(f"n^d = {self.n ** self.d} exceeds {MAX_ENTRIES} entries")
        arr = np.asarray(self.entries, dtype=float)
        if arr.size != self.n ** self.d:
            raise DescriptorError(f"expected {self.n ** self.d} entries, got {arr.size}")
        arr = arr.reshape((self.n,) * self.d).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @classmethod
    def from_array(cls, array) -> "CoefficientTensor":
        arr = np.asarray(array, dtype=float)
        if arr.ndim == 0 or len(set(arr.shape)) != 1:
            raise DescriptorError("tensor must be a non-empty cube array")
        return cls(arr.ndim, arr.shape[0], arr)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @property
    def has_generalized_diagonal_zero(self) -> bool:
        return not np.any(self.entries[multiplicity_array(self.d, self.n) >= 2])


def multiplicity_of(index_tuple: Sequence[int]) -> int:
    """Largest number of positions sharing one index, e.g. ``(1, 2, 1, 3) -> 2``."""
    if len(index_tuple) < 1:
        raise ValueError("index tuple must be non-empty")
    return max(Counter(index_tuple).values())


def multiplicity_array(d: int, n: int) -> np.ndarray:
    """Multiplicity of every multi-index of an ``n**d`` cube."""
    idx = np.indices((n,) * d).reshape(d, -1)
    counts = np.zeros(idx.shape[1], dtype=int)
    for j in range(d):
        counts = np.maximum(counts, (idx == idx[j]).sum(axis=0))
    return counts.reshape((n,) * d)


@dataclass(frozen=True)
class MultiplicityDecomposition:
    """``A = A_1 + ... + A_d`` with ``A_k`` holding the entries of multiplicity ``k``.

    ``k_star`` is the largest ``k`` with ``A_k != 0``; a zero tensor has
    ``k_star = 0`` and ``degenerate = True``.
    """

    parts: tuple
    k_star: int
    degenerate: bool

    def part(self, k: int) -> CoefficientTensor:
        return self.parts[k - 1]


def decompose(A: CoefficientTensor) -> MultiplicityDecomposition:
    mult = multiplicity_array(A.d, A.n)
    parts = []
    k_star = 0
    for k in range(1, A.d + 1):
        part = np.where(mult == k, A.entries, 0.0)
        if np.any(part != 0):
            k_star = k
        parts.append(CoefficientTensor(A.d, A.n, part))
    return MultiplicityDecomposition(tuple(parts), k_star, k_star == 0)


def group_coefficients(A: CoefficientTensor) -> dict:
    """Regrouped coefficients keyed by ``(nu, multiplicities, indices)``.

    For each multi-index with non-zero entry the distinct indices are ordered
    by decreasing multiplicity, ties by increasing index (0-based); entries
    that share the same key are summed.
    """
    groups: dict = {}
    nz = np.argwhere(A.entries != 0)
    for multi in nz:
        cnt = Counter(multi.tolist())
        order = sorted(cnt.items(), key=lambda kv: (-kv[1], kv[0]))
        key = (len(order), tuple(c for _, c in order), tuple(i for i, _ in order))
        groups[key] = groups.get(key, 0.0) + float(A.entries[tuple(multi)])
    return dict(sorted(groups.items()))


def _contract(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    # sum a[i1..id] x[:, i1] ... x[:, id] for a batch of rows x
    d = A.ndim
    letters = "abcdefgh"[:d]
    expr = letters + "," + ",".join("z" + c for c in letters) + "->z"
    return np.einsum(expr, A, *([x] * d), optimize=True)


def evaluate_multilinear(A: CoefficientTensor, x) -> float | np.ndarray:
    """``sum a[i1..id] x[i1]...x[id]`` for ``A`` with zero generalized diagonal.

    ``x`` may be one vector of length ``n`` or a batch of shape ``(N, n)``.
    """
    if not A.has_generalized_diagonal_zero:
        raise PreconditionError("tensor has a non-zero generalized diagonal; use evaluate_recentered")
    xa = np.asarray(x, dtype=float)
    single = xa.ndim == 1
    xb = np.atleast_2d(xa)
    if xb.shape[1] != A.n:
        raise DomainError(f"x has length {xb.shape[1]}, tensor has n = {A.n}")
    if A.d == 1:
        out = xb @ A.entries
    elif A.d == 2:
        out = np.einsum("zi,ij,zj->z", xb, A.entries, xb, optimize=True)
    else:
        out = _contract(A.entries, xb)
    return float(out[0]) if single else out


def pareto_power_moments(spec: ParetoSpec, k_max: int) -> dict:
    """``E[X**k]`` for ``k = 1..k_max``; odd moments vanish for the symmetric law."""
    out = {}
    for k in range(1, k_max + 1):
        if spec.symmetric and k % 2 == 1:
            if k >= spec.alpha:
                raise InfiniteMomentError(f"E|X|^{k} is infinite for alpha={spec.alpha}")
            out[k] = 0.0
            continue
        if k >= spec.alpha:
            raise InfiniteMomentError(f"E[X^{k}] is infinite for alpha={spec.alpha}")
        out[k] = spec.b ** k * spec.alpha / (spec.alpha - k)
    return out


def _moment_vector(moments: Mapping, k: int, n: int) -> np.ndarray:
    if k not in moments:
        raise DomainError(f"missing moment of order {k}")
    m = np.asarray(moments[k], dtype=float)
    if not np.all(np.isfinite(m)):
        raise InfiniteMomentError(f"moment of order {k} is infinite")
    return np.broadcast_to(m, (n,))


def evaluate_recentered(A: CoefficientTensor, x, moments: Mapping, method: str = "auto"):
    """Recentered chaos ``sum over groups of a~ * prod (x_i**k - E[X_i**k])``.

    ``moments`` maps each order ``k`` to a scalar or per-coordinate vector.
    ``method="grouped"`` always uses the regrouped coefficients; ``"auto"``
    takes a matrix route for ``d = 2``.
    """
    xa = np.asarray(x, dtype=float)
    single = xa.ndim == 1
    xb = np.atleast_2d(xa)
    if xb.shape[1] != A.n:
        raise DomainError(f"x has length {xb.shape[1]}, tensor has n = {A.n}")
    dec = decompose(A)
    m = {k: _moment_vector(moments, k, A.n) for k in range(1, max(dec.k_star, 1) + 1)}
    if method == "auto" and A.d == 2:
        off = A.entries - np.diag(np.diag(A.entries))
        y = xb - m[1]
        out = np.einsum("zi,ij,zj->z", y, off, y, optimize=True)
        diag = np.diag(A.entries)
        if np.any(diag != 0):
            out = out + (xb ** 2 - m[2]) @ diag
    elif method in ("auto", "grouped"):
        out = np.zeros(xb.shape[0])
        for (nu, ks, idx), coef in group_coefficients(A).items():
            term = np.full(xb.shape[0], coef)
            for k, i in zip(ks, idx):
                term = term * (xb[:, i] ** k - m[k][i])
            out += term
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out[0]) if single else out


def hs_norm(A) -> float:
    return float(np.linalg.norm(np.asarray(A, dtype=float).ravel()))


def lp_norm(v, p: float) -> float:
    if p < 1 and p != 0:
        raise DomainError("lp_norm needs p >= 1")
    return float(np.linalg.norm(np.asarray(v, dtype=float).ravel(), ord=p))


def operator_norm_2d(A, rel_tol: float = 1e-10, max_iter: int = 2000) -> float:
    """Largest singular value by power iteration on ``A^T A``, falling back to an SVD."""
    M = np.asarray(A, dtype=float)
    if M.ndim != 2:
        raise DomainError("operator norm needs a matrix (d = 2)")
    if not np.any(M):
        return 0.0
    G = M.T @ M
    v = np.ones(G.shape[0]) / math.sqrt(G.shape[0]) + 1e-3 * np.arange(G.shape[0]) / G.shape[0]
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = G @ v
        new = float(np.linalg.norm(w))
        if new == 0.0:
            break
        v = w / new
        if abs(new - lam) <= rel_tol * new:
            return math.sqrt(new)
        lam = new
    return float(np.linalg.svd(M, compute_uv=False)[0])


# --------------------------------------------------------------------------- bound curves


@dataclass(frozen=True)
class BoundCurve:
    """Bound values on a threshold grid, with per-term columns and an established mask."""

    thresholds: np.ndarray
    values: np.ndarray
    formula_id: str
    parameters: dict = field(default_factory=dict)
    columns: dict = field(default_factory=dict)
    established: np.ndarray | None = None

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.thresholds, dtype=float))
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if t.shape != v.shape:
            raise ValueError("thresholds and values differ in shape")
        if np.any(np.diff(t) <= 0):
            raise ValueError("thresholds must be increasing")
        if np.any(v < 0) or np.any(np.isnan(v)):
            raise ValueError("bound values must lie in [0, inf)")
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "values", v)
        est = np.ones_like(t, dtype=bool) if self.established is None else np.atleast_1d(self.established)
        object.__setattr__(self, "established", est.astype(bool))


def _check_alpha(alpha: float, k_star: int = 1):
    if not alpha / max(k_star, 1) > 2:
        raise HypothesisError(f"need alpha/k* > 2, got alpha={alpha}, k*={k_star}")


def _check_p(p: float, upper: float):
    if not 2 <= p < upper:
        raise DomainError(f"p must lie in [2, {upper}), got {p}")


def _clamped_term(gamma, beta, alpha, t, C):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if gamma == 0:
        return np.zeros_like(t), np.ones_like(t, dtype=bool)
    thr = max(C, 1.0) * generalized_threshold(gamma, beta, alpha)
    ok = t >= thr * (1 - 1e-12)
    vals = np.zeros_like(t)
    if ok.any():
        vals[ok] = C * np.atleast_1d(generalized_tail_bound(gamma, beta, alpha, np.maximum(t[ok], thr)))
    return vals, ok


def prop31_moment(A: CoefficientTensor, alpha: float, b: float, p: float, C: float = 1.0) -> float:
    """``C ||A||_HS b**d (alpha/(alpha-p))**(d/p)`` for multilinear ``A``."""
    _check_alpha(alpha)
    _check_p(p, alpha)
    if not A.has_generalized_diagonal_zero:
        raise PreconditionError("bound applies to tensors with zero generalized diagonal")
    return C * hs_norm(A) * b ** A.d * (alpha / (alpha - p)) ** (A.d / p)


def prop31_tail(A: CoefficientTensor, alpha: float, b: float, t, C: float = 1.0) -> BoundCurve:
    """``C (alpha/d)**d e**d log(t/g)**d (g/t)**alpha`` with ``g = ||A||_HS b**d``; zero below its threshold."""
    _check_alpha(alpha)
    if not A.has_generalized_diagonal_zero:
        raise PreconditionError("bound applies to tensors with zero generalized diagonal")
    g = hs_norm(A) * b ** A.d
    vals, ok = _clamped_term(g, A.d, alpha, t, C)
    return BoundCurve(np.atleast_1d(t), vals, "prop31", {"alpha": alpha, "b": b, "C": C, "hs": g / b ** A.d, "d": A.d},
                      {"k1": vals}, ok)


def prop32_moment(A: CoefficientTensor, alpha: float, b: float, p: float, C: float = 1.0) -> float:
    """``C sum_k ||A_k||_HS b**d ((alpha/k)/(alpha/k - p))**((d-k+1)/p)``."""
    dec = decompose(A)
    ks = max(dec.k_star, 1)
    _check_alpha(alpha, ks)
    _check_p(p, alpha / ks)
    total = 0.0
    for k in range(1, ks + 1):
        hk = hs_norm(dec.part(k))
        if hk:
            ak = alpha / k
            total += hk * b ** A.d * (ak / (ak - p)) ** ((A.d - k + 1) / p)
    return C * total


def prop32_tail(A: CoefficientTensor, alpha: float, b: float, t, C: float = 1.0) -> BoundCurve:
    """Max over ``k`` of ``C`` times the generalized bound with ``gamma = ||A_k|| b**d``,
    ``beta = d - k + 1`` and index ``alpha/k``; each term is zero below its own threshold."""
    dec = decompose(A)
    ks = max(dec.k_star, 1)
    _check_alpha(alpha, ks)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    cols, masks = {}, []
    for k in range(1, ks + 1):
        g = hs_norm(dec.part(k)) * b ** A.d
        vals, ok = _clamped_term(g, A.d - k + 1, alpha / k, t_arr, C)
        cols[f"k{k}"] = vals
        masks.append(ok)
    values = np.max(np.vstack(list(cols.values())), axis=0)
    params = {"alpha": alpha, "b": b, "C": C, "d": A.d, "k_star": dec.k_star,
              "hs": [hs_norm(dec.part(k)) for k in range(1, ks + 1)]}
    return BoundCurve(t_arr, values, "prop32", params, cols, np.all(np.vstack(masks), axis=0))


def _dispatch(moment, tail, A, alpha, b, C, p, t):
    if (p is None) == (t is None):
        raise TypeError("give exactly one of p (moment bound) or t (tail bound)")
    if p is not None:
        return moment(A, alpha, b, p, C)
    return tail(A, alpha, b, t, C)


def prop31_bounds(A: CoefficientTensor, alpha: float, b: float, C: float = 1.0, *, p=None, t=None):
    """Moment bound (given ``p``) or tail :class:`BoundCurve` (given ``t``) for multilinear chaos."""
    return _dispatch(prop31_moment, prop31_tail, A, alpha, b, C, p, t)


def prop32_bounds(A: CoefficientTensor, alpha: float, b: float, C: float = 1.0, *, p=None, t=None):
    """Moment bound (given ``p``) or tail :class:`BoundCurve` (given ``t``) for general chaos."""
    return _dispatch(prop32_moment, prop32_tail, A, alpha, b, C, p, t)


def hwi_tail(A: CoefficientTensor, alpha: float, b: float, t, C: float = 1.0) -> BoundCurve:
    """The two-term (off-diagonal / diagonal) bound for ``d = 2``."""
    if A.d != 2:
        raise DomainError("hwi_tail needs a 2-tensor")
    curve = prop32_tail(A, alpha, b, t, C)
    cols = {"offdiag": curve.columns["k1"], "diag": curve.columns.get("k2", np.zeros_like(curve.values))}
    return BoundCurve(curve.thresholds, curve.values, "hwi", curve.parameters, cols, curve.established)


# --------------------------------------------------------------------------- Fuk-Nagaev


def fuk_nagaev_bound(a, alpha: float, b: float, p: float, t, two_sided: bool = False):
    """``((p+2)/p)**p alpha/(alpha-p) ||a||_p**p / t**p + exp(-2(alpha-2) t**2 / ((p+2)**2 e**p ||a||_2**2 alpha))``.

    ``t`` is measured in units of ``b`` (``t -> t/b``); ``two_sided`` doubles the bound.
    """
    if not alpha > 2:
        raise HypothesisError("Fuk-Nagaev bound needs alpha > 2")
    if not 2 < p < alpha:
        raise DomainError(f"p must lie in (2, alpha), got {p}")
    a = np.asarray(a, dtype=float)
    ts = np.asarray(t, dtype=float) / b
    if np.any(ts <= 0):
        raise DomainError("t must be positive")
    poly = ((p + 2) / p) ** p * alpha / (alpha - p) * lp_norm(a, p) ** p / ts ** p
    a2 = lp_norm(a, 2) ** 2
    gauss = np.exp(-2 * (alpha - 2) * ts ** 2 / ((p + 2) ** 2 * math.e ** p * a2 * alpha))
    out = (poly + gauss) * (2 if two_sided else 1)
    return float(out) if out.ndim == 0 else out


def fuk_nagaev_optimized(a, alpha: float, b: float, t, two_sided: bool = False, points: int = 64):
    """Minimise :func:`fuk_nagaev_bound` over a geometric ``p``-grid in ``(2, alpha)``
    together with the plug-in ``p = alpha - 1/log(t/(b ||a||_alpha))``, then polish
    the best grid point with a bounded scalar search.

    Returns ``(values, p_opt)`` arrays aligned with ``t``.
    """
    if not alpha > 2:
        raise HypothesisError("Fuk-Nagaev bound needs alpha > 2")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    width = alpha - 2
    base = alpha - np.geomspace(1e-3 * width, (1 - 1e-3) * width, points)
    na = lp_norm(a, alpha)
    best = np.full(t_arr.shape, np.inf)
    p_opt = np.full(t_arr.shape, np.nan)
    for i, ti in enumerate(t_arr):
        cands = list(base)
        lt = math.log(ti / (b * na)) if ti > b * na else 0.0
        if lt > 0:
            plug = alpha - 1.0 / lt
            if 2 < plug < alpha:
                cands.append(plug)
        cands = np.sort(cands)
        vals = [fuk_nagaev_bound(a, alpha, b, p, ti, two_sided) for p in cands]
        j = int(np.argmin(vals))
        best[i], p_opt[i] = vals[j], cands[j]
        # polish between the neighbouring grid points
        lo, hi = cands[max(j - 1, 0)], cands[min(j + 1, len(cands) - 1)]
        if hi > lo:
            res = optimize.minimize_scalar(lambda p: fuk_nagaev_bound(a, alpha, b, p, ti, two_sided),
                                           bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
            if res.fun < best[i]:
                best[i], p_opt[i] = res.fun, res.x
    return best, p_opt


def hwi_fn_combined(A: CoefficientTensor, alpha: float, b: float, p: float, t,
                    C: float = 1.0, C_prime: float = 1.0) -> BoundCurve:
    """Three-term max: Gaussian and polynomial terms for the diagonal, log-square term off it.

    ``C exp(-C' (t/(||a_d||_2 b**2))**2)``, ``C (alpha/2)/(alpha/2 - p) b**(2p) ||a_d||_p**p / t**p``
    and ``C`` times the generalized bound for ``A_od`` (``beta = 2``, index ``alpha``).
    """
    if A.d != 2:
        raise DomainError("hwi_fn_combined needs a 2-tensor")
    if not alpha > 4:
        raise HypothesisError("diagonal Fuk-Nagaev part needs alpha > 4")
    if not 2 < p < alpha / 2:
        raise DomainError(f"p must lie in (2, alpha/2), got {p}")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    diag = np.diag(A.entries)
    off = A.entries - np.diag(diag)
    n2 = lp_norm(diag, 2)
    if n2 > 0:
        gauss = C * np.exp(-C_prime * (t_arr / (n2 * b ** 2)) ** 2)
        poly = C * (alpha / 2) / (alpha / 2 - p) * b ** (2 * p) * lp_norm(diag, p) ** p / t_arr ** p
    else:
        gauss = np.zeros_like(t_arr)
        poly = np.zeros_like(t_arr)
    offv, ok = _clamped_term(hs_norm(off) * b ** 2, 2, alpha, t_arr, C)
    values = np.maximum(np.maximum(gauss, poly), offv)
    cols = {"gauss": gauss, "poly": poly, "offdiag": offv}
    return BoundCurve(t_arr, values, "hwi_fn", {"alpha": alpha, "b": b, "p": p, "C": C, "C_prime": C_prime}, cols, ok)


# --------------------------------------------------------------------------- two-level law


def two_level_moment(alpha: float, a: float, b: float, p: float) -> tuple[float, float]:
    """``(exact, bound)`` for the tail ``max((b/x)**(2 alpha), (a/x)**alpha)``, ``x >= b``."""
    if not (0 < a < b):
        raise DomainError("need 0 < a < b")
    if not 0 <= p < alpha:
        raise DomainError("need 0 <= p < alpha")
    first = b ** p * 2 * alpha / (2 * alpha - p)
    exact = first + a ** p * (b / a) ** (2 * p - 2 * alpha) * (p / (2 * alpha - p)) * (alpha / (alpha - p))
    bound = first + a ** p * alpha / (alpha - p)
    return exact, bound
