import math

import pytest

from diffscope.catalog import (
    ALIASES,
    CATALOG,
    CATALOG_ORDER,
    UnknownModel,
    catalog_lookup,
    get_model,
    load_model,
    parse_model_name,
)
from diffscope.config import parse_model_config


def test_parse_model_name():
    assert parse_model_name("bm") == ("bm", {})
    assert parse_model_name(" gbm(mu=0.05, sigma=0.2) ") == ("gbm", {"mu": 0.05, "sigma": 0.2})
    assert parse_model_name("ou()") == ("ou", {})
    with pytest.raises(ValueError):
        parse_model_name("gbm(0.05)")
    with pytest.raises(UnknownModel):
        parse_model_name("1bm")


@pytest.mark.parametrize("name", list(CATALOG) + list(CATALOG_ORDER))
def test_every_entry_is_a_valid_config(name):
    doc = catalog_lookup(name)
    parsed = parse_model_config(doc)
    assert parsed.spec.interval.contains_interior(parsed.spec.x0)
    assert None not in parsed.expectations.values()


def test_parameters_reach_the_model():
    spec = get_model("gbm(mu=0.1,sigma=0.5)")
    # beta = -2 mu / (sigma^2 x)
    assert spec.beta([2.0])[0] == pytest.approx(-2 * 0.1 / (0.25 * 2.0))
    assert catalog_lookup("gbm(mu=0.1,sigma=0.5)")["name"] == "gbm(mu=0.1,sigma=0.5)"
    sticky = get_model("sticky_bm(gamma=2)")
    assert sticky.speed.atoms == ((0.0, 2.0),)
    assert catalog_lookup("sticky_bm(gamma=2)")["expectations"]["mean_exit_time(-1,1)"] == 3.0


def test_alias():
    assert ALIASES["example_2_14"] == "power_family"
    a = catalog_lookup("example_2_14(c=0.25,q=3)")
    b = catalog_lookup("power_family(c=0.25,q=3)")
    assert a["scale"] == b["scale"] and a["speed"] == b["speed"]


def test_unknown_model_suggests():
    with pytest.raises(UnknownModel) as info:
        catalog_lookup("besel3")
    assert info.value.suggestion == "bessel3"
    assert "did you mean 'bessel3'" in str(info.value)


def test_unknown_parameter():
    with pytest.raises(ValueError, match="no parameter"):
        catalog_lookup("bm(sigma=2)")


def test_boundary_masses():
    assert get_model("absorbed_bm").speed.boundary_mass_l == math.inf
    assert get_model("reflecting_bm").speed.boundary_mass_l == 5.0
    assert get_model("reflecting_bm(mass=0.5)").speed.boundary_mass_l == 0.5


def test_load_model_carries_simulation_defaults():
    p = load_model("ou")
    assert p.simulation.truncation == (-4.0, 4.0)
    assert p.simulation.seed == 7
