from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heavytails.certificates import (
    CertificateGrids,
    chebyshev_tail_bound,
    discrete_convexity,
    einsweiter_band,
    generalized_tail_bound,
    measure_certificate,
    tail_recovery_logconcave,
    tail_recovery_logconvex,
)
from heavytails.constructions import constructed_tail, preset_profile
from heavytails.errors import DomainError, PreconditionError, TheoremViolation
from heavytails.tails_core import ParetoSpec, pareto_tail, pareto_tail_function, two_level_tail
from heavytails.transforms import DEFAULT_CONFIG


def test_chebyshev_examples():
    bound = chebyshev_tail_bound(2.0, 1.0, math.e)
    assert bound.value == pytest.approx(2 / math.e, rel=1e-15)
    assert bound.p_star == pytest.approx(1.0, rel=1e-15)
    assert chebyshev_tail_bound(3.0, 2.0, 2.0 * math.exp(1 / 3)).value == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DomainError):
        chebyshev_tail_bound(2.0, 1.0, 1.2)


@settings(max_examples=100, deadline=None)
@given(alpha=st.floats(0.3, 10.0), b=st.floats(0.01, 100.0), beta=st.floats(0.5, 4.0))
def test_threshold_normalization(alpha, b, beta):
    assert chebyshev_tail_bound(alpha, b, b * math.exp(1 / alpha)).value == pytest.approx(1.0, abs=1e-12)
    assert generalized_tail_bound(b, beta, alpha, b * math.exp(beta / alpha)) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(0.3, 10.0), b=st.floats(0.01, 100.0), x=st.floats(0.0, 50.0))
def test_chebyshev_dominates_pareto(alpha, b, x):
    t = b * math.exp(1 / alpha + x / alpha)
    assert chebyshev_tail_bound(alpha, b, t).value >= pareto_tail(ParetoSpec(alpha, b), t) * (1 - 1e-12)


def test_generalized_with_beta_one_is_chebyshev():
    t = np.geomspace(1.7, 1e6, 50)
    np.testing.assert_array_equal(generalized_tail_bound(1.0, 1.0, 2.0, t), chebyshev_tail_bound(2.0, 1.0, t).value)


def test_certificate_on_pareto():
    cert = measure_certificate(ParetoSpec(2.0, 1.0), 2.0)
    assert cert.C1 == pytest.approx(2.0, rel=1e-8)
    assert cert.C2 == pytest.approx(2.0, rel=1e-8)
    assert cert.C3 == pytest.approx(1.5, rel=1e-8)
    assert cert.finite and cert.passed
    assert len(cert.relations) == 6


def test_certificate_on_two_level_tail():
    cert = measure_certificate(two_level_tail(3.0, 1.0, 2.0), 3.0)
    assert cert.finite and cert.passed, cert.to_dict()


def test_certificate_reports_divergence():
    cert = measure_certificate(ParetoSpec(2.0, 1.0), 2.5)
    assert not cert.finite and not cert.passed
    assert any("(a)" in f for f in cert.failures)


def test_certificate_grid_validation():
    grids = CertificateGrids.default(2.0)
    with pytest.raises(DomainError):
        measure_certificate(ParetoSpec(2.0, 1.0), 1.5, grids)


def test_certificate_serializes_grids():
    cert = measure_certificate(ParetoSpec(2.5, 1.0), 2.5)
    d = cert.to_dict()
    assert len(d["grids"]["p"]) == len(cert.grids.p)
    assert d["passed"] is True


def test_discrete_convexity_examples():
    ell = np.linspace(0, 10, 101)
    flat = np.zeros_like(ell)
    assert discrete_convexity(ell, flat, "convex").passed
    assert discrete_convexity(ell, flat, "concave").passed
    tf = pareto_tail_function(ParetoSpec(2.0, 1.0))
    # affine in log t is convex in t
    assert discrete_convexity(ell, tf.log_sf(ell), "convex").passed
    bump = -np.abs(ell - 5)
    assert not discrete_convexity(ell, bump, "convex").passed


def test_recovery_on_pareto():
    rep = tail_recovery_logconvex(ParetoSpec(2.0, 1.0), 2.0, C1=2.0)
    assert rep.C5 == pytest.approx(2 * math.e)
    assert rep.sup_h == pytest.approx(1.0)
    assert rep.passed
    rep2 = tail_recovery_logconcave(ParetoSpec(2.0, 1.0), 2.0, C3=1.5, delta=0.5)
    assert rep2.passed


def test_recovery_on_two_level_tail():
    dist = two_level_tail(3.0, 1.0, 2.0)
    cert = measure_certificate(dist, 3.0)
    rep = tail_recovery_logconvex(dist, 3.0, cert.C1)
    assert rep.passed
    assert rep.sup_h <= max(1.0, 2.0 ** 3) * (1 + 1e-12)


def test_recovery_never_passes_a_violated_bound():
    with pytest.raises(TheoremViolation):
        tail_recovery_logconvex(ParetoSpec(2.0, 1.0), 2.0, C1=0.1)


def test_recovery_rejects_smoothed_construction():
    tf = constructed_tail(preset_profile("inverse", 2.5, 0.4, smoothed=True))
    ell = np.linspace(0.0, 250.0, 20001)
    with pytest.raises(PreconditionError) as info:
        tail_recovery_logconvex(tf, 2.5, C1=3.0, log_t=ell)
    assert info.value.report is not None
    assert not info.value.report.convexity.passed


def test_logconcave_needs_lower_bound():
    with pytest.raises(DomainError):
        tail_recovery_logconcave(ParetoSpec(2.0, 1.0), 2.0, C3=1.5, delta=0.0)
    with pytest.raises(PreconditionError):
        tail_recovery_logconcave(ParetoSpec(2.0, 1.0), 2.0, C3=1.5, delta=2.0)


def test_band_examples():
    rep = einsweiter_band(2.0, 1.0, [1.0, 1.5, 1.9, 1.99, 1.999])
    assert np.all(rep.values > 0)
    assert rep.values[3] / rep.values[4] < math.e and rep.values[4] / rep.values[3] < math.e
    fine = einsweiter_band(2.0, 1.0, [1.0, 1.5, 1.9, 1.99, 1.999], DEFAULT_CONFIG.refined())
    assert abs(fine.ratio / rep.ratio - 1) < 0.05
