import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffscope.catalog import CATALOG_ORDER, get_model
from diffscope.classifier import (
    IMPLICATIONS,
    VERDICT_KEYS,
    TraceEntry,
    Truth,
    Verdict,
    _enforce_implications,
    all_of,
    any_of,
    classify,
    regularity_condition,
    verdict_emm,
    verdict_nflvr,
    verdict_nupbr,
)
from diffscope.cli import _clean
from diffscope.model import DiffusionSpec, SpeedSpec, StateInterval, scale_from_beta

H, F, I = Truth.HOLDS, Truth.FAILS, Truth.INCONCLUSIVE
truths = st.sampled_from([H, F, I])


def test_kleene_tables():
    assert [a & b for a, b in itertools.product([H, F, I], repeat=2)] == [H, F, I, F, F, F, I, F, I]
    assert [a | b for a, b in itertools.product([H, F, I], repeat=2)] == [H, H, H, H, F, I, H, I, I]
    assert [~a for a in (H, F, I)] == [F, H, I]
    assert all_of([]) is H and any_of([]) is F
    assert Truth.of(True) is H and Truth.of(False) is F and Truth.of(None) is I


@given(a=truths, b=truths, c=truths)
def test_kleene_laws(a, b, c):
    assert ~(a & b) is (~a | ~b)
    assert ~(a | b) is (~a & ~b)
    assert (a & (b | c)) is ((a & b) | (a & c))
    assert (a & b) is (b & a) and (a | b) is (b | a)
    assert ~~a is a


def _row(values):
    return dict(zip(VERDICT_KEYS, [v.value for v in values]))


@pytest.mark.parametrize("name", CATALOG_ORDER)
def test_catalog_verdicts(name, verdict_table):
    report = classify(get_model(name))
    assert report.table_row() == verdict_table[name]["verdicts"]
    assert report.conclusive
    assert not report.warnings


@pytest.mark.parametrize(
    "params, row",
    [
        ("c=1,q=0", (H, F, F, F, F, F)),
        ("c=0.25,q=3", (H, H, F, F, F, F)),
        ("c=0,q=3", (H, H, H, H, F, F)),
        ("c=0,q=0", (H, H, H, H, H, F)),
    ],
)
def test_power_family(params, row):
    report = classify(get_model(f"power_family({params})"))
    assert report.table_row() == _row(row)


def test_bessel_trace():
    r = classify(get_model("bessel3"))
    assert r.nupbr_finite.cites("2.8(i.b)", "lower", H)
    assert r.nupbr_finite.cites("2.8(i.a)", "lower", F)
    assert r.nflvr_finite.cites("2.8(ii.a)", "lower", F)
    assert r.nflvr_finite.cites("2.8(ii.b)", "lower", F)
    assert r.emm_finite.value is F
    assert r.regularity.value is H


def test_natural_scale_route():
    r = classify(get_model("inverse_bessel3"))
    assert r.natural_scale
    assert r.nupbr_infinite.cites("2.11")
    assert r.emm_finite.cites("2.12", "upper", F)


def test_reflecting_breaks_regularity():
    r = classify(get_model("reflecting_bm"))
    assert r.regularity.value is F
    assert r.regularity.cites("2.3", "lower", F)


def test_irregular_beta_fails_regularity():
    # beta = |x|^-1/2 near an interior point: beta^2 = 1/|x| is not locally integrable
    line = StateInterval(-math.inf, math.inf)
    sc = scale_from_beta(lambda x: np.abs(x) ** -0.5, 1.0, (0.0,), line)
    spec = DiffusionSpec(line, sc, SpeedSpec(lambda x: np.ones_like(x)), 1.0)
    reg = regularity_condition(spec)
    assert reg.value is F
    assert verdict_nupbr(spec, "finite").value is F


def test_single_verdict_helpers_match_classify():
    spec = get_model("gbm")
    report = classify(spec)
    for horizon in ("finite", "infinite"):
        assert verdict_nupbr(spec, horizon).value is report.verdicts[f"nupbr_{horizon}"].value
        assert verdict_nflvr(spec, horizon).value is report.verdicts[f"nflvr_{horizon}"].value
        assert verdict_emm(spec, horizon).value is report.verdicts[f"emm_{horizon}"].value
    with pytest.raises(ValueError):
        verdict_nupbr(spec, "forever")


def test_inconsistent_verdicts_are_downgraded():
    verdicts = {k: Verdict(H) for k in VERDICT_KEYS}
    verdicts["nupbr_finite"] = Verdict(F)
    warnings = []
    _enforce_implications(verdicts, warnings)
    assert verdicts["nflvr_finite"].value is I
    assert verdicts["nupbr_finite"].value is I
    assert verdicts["nflvr_finite"].cites("InternalInconsistency")
    assert any("InternalInconsistency" in w for w in warnings)


def test_report_serializes():
    d = classify(get_model("bessel3")).to_dict()
    text = json.dumps(_clean(d), allow_nan=False, sort_keys=True)
    assert set(json.loads(text)) == {"natural_scale", "regularity", "verdicts", "boundary_reports", "lemma_audit", "warnings"}
    assert d["lemma_audit"] == {"lower": [], "upper": "not applicable"}


def test_trace_entry_dict():
    e = TraceEntry("2.12", "upper", H, "Kotani integral infinite")
    assert e.to_dict() == {"clause": "2.12", "side": "upper", "value": "holds", "detail": "Kotani integral infinite"}


# --- properties ---------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(c=st.floats(-1.5, 2.5), q=st.floats(-1.0, 3.0))
def test_power_family_verdicts_respect_implications(c, q):
    report = classify(get_model(f"power_family(c={c!r},q={q!r})"))
    v = report.verdicts
    for premise, conclusion in IMPLICATIONS:
        assert not (v[premise].value is H and v[conclusion].value is F)
    assert not any("InternalInconsistency" in w for w in report.warnings)


@settings(max_examples=10, deadline=None)
@given(alpha=st.floats(0.05, 20.0), c=st.floats(-10.0, 10.0), name=st.sampled_from(CATALOG_ORDER))
def test_affine_scale_invariance(alpha, c, name):
    spec = get_model(name)
    assert classify(spec.with_affine_scale(alpha, c)).table_row() == classify(spec).table_row()
