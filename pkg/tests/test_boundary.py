import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from diffscope.boundary import (
    ABSORBING,
    ACCESSIBLE,
    INACCESSIBLE,
    INCONCLUSIVE,
    LOWER,
    NOT_APPLICABLE,
    REFLECTING,
    UPPER,
    AuditSkipped,
    audit_boundary_consistency,
    boundary_anchor,
    boundary_report,
    feller_accessibility,
    scale_at_boundary,
)
from diffscope.catalog import CATALOG_ORDER, get_model
from diffscope.quadrature import IntegralVerdict


def test_bessel_lower_report(oracles):
    r = boundary_report(get_model("bessel3"), LOWER)
    assert (r.b, r.b_finite, r.s_finite) == (0.0, True, False)
    assert r.s_at_b == -math.inf
    assert r.accessibility == INACCESSIBLE and r.behavior == NOT_APPLICABLE
    assert r.beta_integral.outcome == "infinite"
    assert r.scale_speed_integral.outcome == "finite"
    np.testing.assert_allclose(r.scale_speed_integral.value, oracles["bessel3_scale_speed_integral_x1"], rtol=1e-6)
    assert audit_boundary_consistency(r) == []


def test_bm_upper_report():
    r = boundary_report(get_model("bm"), UPPER)
    assert not r.b_finite and r.accessibility == INACCESSIBLE
    assert r.kotani.outcome == "infinite"
    assert audit_boundary_consistency(r) == []


def test_absorbed_and_reflecting_bm():
    r = boundary_report(get_model("absorbed_bm"), LOWER)
    assert (r.accessibility, r.behavior) == (ACCESSIBLE, ABSORBING)
    assert r.beta_integral.outcome == "finite" and r.scale_speed_integral.outcome == "finite"
    assert audit_boundary_consistency(r) == []
    r = boundary_report(get_model("reflecting_bm"), LOWER)
    assert (r.accessibility, r.behavior) == (ACCESSIBLE, REFLECTING)


def test_inverse_bessel_kotani(oracles):
    r = boundary_report(get_model("inverse_bessel3"), UPPER)
    assert r.accessibility == INACCESSIBLE
    assert r.kotani.outcome == "finite"
    np.testing.assert_allclose(r.kotani.value, oracles["inverse_bessel3_kotani_x1"], rtol=1e-6)


def test_scale_at_boundary_values():
    # bounded BM in raw natural scale s(x) = x
    spec = get_model("bounded_bm_01")
    v, s_b = scale_at_boundary(spec, LOWER)
    assert v.is_finite
    np.testing.assert_allclose(s_b, 0.0, atol=1e-12)
    v, s_b = scale_at_boundary(spec, UPPER)
    np.testing.assert_allclose(s_b, 1.0, rtol=1e-12)
    # GBM: s(inf) = 1 / 1.5 with s(1) = 0
    v, s_b = scale_at_boundary(get_model("gbm"), UPPER)
    np.testing.assert_allclose(s_b, 1.0 / 1.5, rtol=1e-6)


def test_feller_integral_bounded_bm():
    spec = get_model("bounded_bm_01")
    acc, trace = feller_accessibility(spec, LOWER)
    assert acc == ACCESSIBLE
    # int_0^c (s(x) - s(0)) dx with c = 0.25
    np.testing.assert_allclose(trace["feller"].value, 0.25**2 / 2, rtol=1e-6)


def test_feller_integral_power_family_against_scipy():
    # dX = 0.25/x dt + dW: s'(x) = x^-0.5, m(dx) = x^0.5 dx
    spec = get_model("power_family(c=0.25,q=0)")
    acc, trace = feller_accessibility(spec, LOWER)
    c = boundary_anchor(spec, LOWER)
    want, _ = integrate.quad(lambda x: 2.0 * math.sqrt(x) * math.sqrt(x), 0.0, c)
    assert acc == ACCESSIBLE
    np.testing.assert_allclose(trace["feller"].value, want, rtol=1e-6)


def test_bad_side():
    with pytest.raises(ValueError):
        boundary_report(get_model("bm"), "left")


def test_audit_forged_reports():
    r = boundary_report(get_model("bessel3"), LOWER)
    finite = IntegralVerdict("finite", value=1.0, abs_err=0.0)
    forged = dataclasses.replace(r, beta_integral=finite)
    labels = audit_boundary_consistency(forged)
    assert "violates 2.4(i)" in labels
    # accessible with a finite scale-speed integral is the consistent pairing for a finite beta integral
    ok = dataclasses.replace(r, s_finite=True, accessibility=ACCESSIBLE, beta_integral=finite)
    assert audit_boundary_consistency(ok) == []
    bad = dataclasses.replace(ok, accessibility=INACCESSIBLE)
    assert audit_boundary_consistency(bad) == ["violates 2.4(ii)", "violates 2.4(iii)"]
    with pytest.raises(AuditSkipped):
        audit_boundary_consistency(dataclasses.replace(r, accessibility=INCONCLUSIVE))


def test_report_to_dict_is_json_ready():
    import json

    d = boundary_report(get_model("bessel3"), LOWER).to_dict()
    json.dumps(d, allow_nan=False)
    assert d["s_at_b"] == "-inf" and d["scale_integral"]["outcome"] == "infinite"


def test_catalog_reports_are_consistent():
    for name in CATALOG_ORDER:
        spec = get_model(name)
        for side in (LOWER, UPPER):
            assert audit_boundary_consistency(boundary_report(spec, side)) == [], (name, side)


def _classes(r):
    return (r.accessibility, r.behavior, r.beta_integral.outcome, r.scale_speed_integral.outcome, r.kotani.outcome)


@pytest.mark.parametrize("name", CATALOG_ORDER)
def test_affine_invariance_of_reports(name):
    spec = get_model(name)
    for side in (LOWER, UPPER):
        base = _classes(boundary_report(spec, side))
        for alpha, c in ((0.5, -1.0), (3.0, 2.0)):
            assert _classes(boundary_report(spec.with_affine_scale(alpha, c), side)) == base


def test_atom_changes_integrals_by_exact_amount():
    # an atom at 0.25 in (0, anchor) adds |x - b| s'(x) * gamma to the scale-speed integral
    spec = get_model("bessel3")
    base = boundary_report(spec, LOWER).scale_speed_integral.value
    with_atom = boundary_report(spec.with_atom(0.25, 2.0), LOWER)
    np.testing.assert_allclose(with_atom.scale_speed_integral.value, base + 0.25 * 0.25**-2 * 2.0, rtol=1e-6)
    assert with_atom.beta_integral.outcome == "infinite"


# --- properties ---------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-2.0, 3.0).filter(lambda v: abs(v - 0.5) > 0.1))
def test_bessel_dimension_accessibility(c):
    # dX = c/x dt + dW is Bessel of dimension 2c + 1; 0 is reached iff the dimension is below 2
    spec = get_model(f"power_family(c={c!r},q=0)")
    acc, _ = feller_accessibility(spec, LOWER)
    assert acc == (ACCESSIBLE if c < 0.5 else INACCESSIBLE)


@settings(max_examples=30, deadline=None)
@given(p=st.floats(-3.0, 3.0), q=st.floats(-3.0, 3.0), k=st.floats(-3.0, 3.0))
def test_power_law_reports_pass_audit(p, q, k):
    from test_acceptance import fuzz_spec

    class Fixed:
        def uniform(self, lo, hi, n):
            return np.array([p, q, k])

    spec, _ = fuzz_spec(Fixed())
    r = boundary_report(spec, LOWER)
    try:
        assert audit_boundary_consistency(r) == []
    except AuditSkipped:
        pass
