from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heavytails.certificates import discrete_convexity
from heavytails.constructions import (
    BLOCK_LIMIT,
    EpsilonProfile,
    GammaSequence,
    block_breakpoints,
    checkpoint_table,
    constructed_tail,
    correction_cn,
    epsilon_at,
    gamma_from_h,
    karamata_increments,
    log_L,
    preset_profile,
    tail_integral_majorant,
    verify_logconvex,
)
from heavytails.errors import ConstructionError, ProfileError
from heavytails.transforms import tail_integral_curve

BP = block_breakpoints()


@pytest.fixture(scope="module")
def step():
    return preset_profile("inverse", 2.5, 0.5)


@pytest.fixture(scope="module")
def smooth():
    return preset_profile("inverse", 2.5, 0.4, smoothed=True)


def test_breakpoints_are_ordered():
    la, lb, le = BP.log_a, BP.log_b, BP.log_end
    assert np.all(la < lb) and np.all(lb < le) and np.all(le[:-1] < la[1:])
    n = np.arange(1, BLOCK_LIMIT + 1)
    np.testing.assert_allclose(la, n * np.exp(n), rtol=1e-15)
    np.testing.assert_allclose(le - la, 2 * n, rtol=1e-12)


def test_correction_cn_values():
    assert correction_cn(1) == pytest.approx(0.480156, abs=1e-5)
    assert abs(correction_cn(20) - math.log(4)) < 1e-6
    c = np.array([correction_cn(n) for n in range(1, 22)])
    assert np.all(np.diff(c) > 0)


def test_correction_cn_against_quadrature():
    from scipy.integrate import quad

    for n in (1, 2, 5, 12):
        kappa = 1 / math.expm1(n)
        ref, _ = quad(lambda t: min(2 * t, 2 - 2 * t) / (t + kappa), 0, 1, points=[0.5], epsabs=1e-13)
        assert correction_cn(n) == pytest.approx(ref, abs=1e-9)


def test_step_epsilon_values(step):
    for n in range(2, 7):
        g = step.gamma(n)
        assert epsilon_at(step, BP.log_a[n - 1]) == g
        assert epsilon_at(step, BP.log_b[n - 1]) == -g
        assert epsilon_at(step, BP.log_end[n - 1]) == 0.0


def test_smoothed_epsilon_values(smooth):
    for n in range(smooth.n_min, 8):
        la, lb = BP.log_a[n - 1], BP.log_b[n - 1]
        assert epsilon_at(smooth, la) == pytest.approx(0.0, abs=1e-12)
        assert epsilon_at(smooth, lb) == pytest.approx(0.0, abs=1e-12)
        mid = la + math.log1p(math.expm1(n) / 2)  # log((a_n + b_n)/2)
        assert epsilon_at(smooth, mid) == pytest.approx(smooth.gamma(n) / correction_cn(n), rel=1e-12)
    assert epsilon_at(smooth, BP.log_a[0] + 0.5) == 0.0  # inactive block


def test_log_L_examples(step):
    for n in range(1, 7):
        rest = 0.5 * (BP.log_end[n - 1] + BP.log_a[n])
        assert log_L(step, rest) == 0.0
        assert log_L(step, BP.log_b[n - 1]) == pytest.approx(n * step.gamma(n), abs=1e-12)
    assert log_L(step, BP.log_b[2]) == pytest.approx(1.0, abs=1e-12)


def test_log_L_matches_numerical_integral(smooth):
    from scipy.integrate import quad

    n = 3
    la = BP.log_a[n - 1]
    for target in (la + 1.3, la + n + 0.4, la + 2 * n):
        ref, _ = quad(lambda u: epsilon_at(smooth, u), la, target, limit=200, epsabs=1e-13,
                      points=[la + n, la + math.log1p(math.expm1(n) / 2)])
        assert log_L(smooth, target) == pytest.approx(ref, abs=1e-9)


def test_constructed_tail_examples(step):
    tf = constructed_tail(step)
    assert tf.log_sf(0.0) == 0.0
    for n in range(1, 7):
        lb = BP.log_b[n - 1]
        assert tf.log_sf(lb) + step.alpha * lb == pytest.approx(n * step.gamma(n), abs=1e-9)
        rest = 0.5 * (BP.log_end[n - 1] + BP.log_a[n])
        assert tf.log_sf(rest) == pytest.approx(-step.alpha * rest, rel=1e-15)


def test_constructed_tail_rejects_rising_tail():
    # alpha < 1: the clipped gamma(1) = 1 exceeds alpha on block 1
    prof = preset_profile("inverse", 0.8, 0.5)
    with pytest.raises(ConstructionError, match="block 1"):
        constructed_tail(prof)


def test_profile_invariants():
    with pytest.raises(ProfileError):
        preset_profile("inverse", 2.5, 0.9, smoothed=True)
    with pytest.raises(ProfileError):
        EpsilonProfile(2.5, 0.5, GammaSequence("table", values=(0.4, 0.1)), n_min=1)
    with pytest.raises(ProfileError, match="cap"):
        EpsilonProfile(2.5, 0.2, GammaSequence("power", delta=0.9), n_min=1)


def test_default_n_min(step, smooth):
    assert step.n_min == 2
    assert smooth.n_min == 3
    for n in range(smooth.n_min, BLOCK_LIMIT + 1):
        assert smooth.sufficient_lhs(n) <= smooth.alpha
        assert correction_cn(n) >= 2 * correction_cn(1)


def test_profile_descriptor_roundtrip(smooth):
    again = EpsilonProfile.from_descriptor(smooth.descriptor())
    assert again == smooth


def test_verify_logconvex_passes(smooth):
    report = verify_logconvex(smooth)
    assert report.passed
    assert [b.n for b in report.blocks] == list(range(smooth.n_min, BLOCK_LIMIT + 1))


def test_verify_logconvex_rejects_step_profile(step):
    with pytest.raises(ProfileError):
        verify_logconvex(step)


def test_misscaled_profile_fails_sufficient_inequality():
    alpha = 2.5
    for n in range(1, 8):
        lhs = 2 * (alpha * correction_cn(n) / correction_cn(n)) * (1 / math.expm1(n) + 1)
        assert lhs > alpha
    table = GammaSequence("table", values=tuple(alpha * correction_cn(n) for n in range(1, 8)))
    with pytest.raises(ProfileError, match="block"):
        EpsilonProfile(alpha, 0.4, table, smoothed=True, n_min=3, n_max=7)


def test_rising_pieces_have_positive_margin(smooth):
    # on the rising half of each ascent eps' >= 0 so the margin is at least alpha - eps
    for n in range(smooth.n_min, 10):
        la = BP.log_a[n - 1]
        ell = la + np.log1p(np.linspace(0.01, 0.49, 50) * math.expm1(n))
        assert np.all(epsilon_at(smooth, ell) <= smooth.alpha)


def test_discrete_logconvexity_of_smoothed_tail(smooth):
    tf = constructed_tail(smooth)
    for n in range(smooth.n_min, 9):
        lo, hi = BP.log_a[n - 1], BP.log_end[n - 1]
        ell = np.linspace(lo, hi, 4001)
        assert discrete_convexity(ell, tf.log_sf(ell)).passed, n


def test_step_tail_is_not_logconvex(step):
    tf = constructed_tail(step)
    ell = np.linspace(BP.log_a[1] - 1, BP.log_end[1] + 1, 2001)
    assert not discrete_convexity(ell, tf.log_sf(ell)).passed


def test_monotone_on_fine_grid(step, smooth):
    for prof in (step, smooth):
        tf = constructed_tail(prof)
        ell = np.linspace(0, BP.log_end[5] + 5, 10_000)
        assert np.all(np.diff(tf.log_sf(ell)) <= 0)


def test_checkpoint_table(step, smooth):
    for row in checkpoint_table(step):
        assert row["target"] == pytest.approx(1.0)
        assert row["residual"] <= 1e-9
    for row in checkpoint_table(smooth):
        assert row["residual"] <= 1e-9


def test_gamma_from_h_examples():
    const = gamma_from_h(lambda ell: 1.0, 2.5, 0.5)
    np.testing.assert_allclose(const.array(10), 1 / np.arange(1, 11), rtol=1e-15)
    delta = 0.3
    slow = gamma_from_h(lambda ell: delta * math.log(math.log(ell)), 2.5, 0.5)  # h = (log log t)**delta
    g = slow.array(BLOCK_LIMIT)
    assert g[-1] < 0.04 and np.all(np.diff(g) <= 1e-15)
    with pytest.raises(ProfileError, match="block"):
        gamma_from_h(lambda ell: math.log(ell), 0.5, 0.5)


def test_karamata_increments_vanish():
    prof = preset_profile("sqrt", 2.5, 0.5)
    worst = []
    for n in (3, 6, 12, 24):
        ell = np.linspace(BP.log_a[n - 1], BP.log_end[n - 1], 500)
        worst.append(np.max(np.abs(karamata_increments(prof, math.log(3.0), ell))))
    assert np.all(np.diff(worst) < 0)
    # |increment| <= gamma(n) log 3, up to the float spacing of ell near n e**n
    assert worst[-1] <= prof.gamma(24) * (math.log(3.0) + 1e-3)


def test_tail_integral_below_majorant(step):
    tf = constructed_tail(step)
    log_r = BP.log_b[:4]
    ratios = tail_integral_curve(tf, step.alpha, log_r) / log_r
    for n, ratio in enumerate(ratios, start=1):
        assert math.isfinite(ratio)
        assert ratio <= tail_integral_majorant(step, n) + 2


@settings(max_examples=40, deadline=None)
@given(delta=st.floats(0.0, 0.6), rho=st.floats(0.3, 0.95), alpha=st.floats(1.0, 6.0))
def test_power_profiles_satisfy_invariants(delta, rho, alpha):
    try:
        prof = EpsilonProfile(alpha, rho, GammaSequence("power", delta=delta))
    except ProfileError:
        return
    ng = np.arange(1, prof.n_max + 1) * prof.gamma_array
    assert np.all(np.diff(ng) >= -1e-12)
    assert np.all(prof.gamma_array[prof.n_min - 1:] <= prof.cap)
    tf = constructed_tail(prof)
    ell = np.linspace(0, BP.log_end[4], 3000)
    assert np.all(np.diff(tf.log_sf(ell)) <= 1e-12)
