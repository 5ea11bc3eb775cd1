import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from e2i2.scenario import LIGHT_YEAR, ConfigError, ScenarioConfig, bundled, parse_quantity

MINIMAL = """\
name: demo
sources:
  - kind: point
    center: [0 m, 0 m, 1 km]
    wavelength: 500 nm
"""


@pytest.mark.parametrize("text, meters", [
    ("292 nm", 292e-9), ("2e6 km", 2e9), ("8.611 ly", 8.611 * 9460730472580800.0),
    ("1.5 m", 1.5), ("-3 mm", -3e-3), (".5 um", 5e-7), ("2E+3cm", 20.0),
])
def test_units(text, meters):
    assert parse_quantity(text) == pytest.approx(meters, rel=1e-15)


@pytest.mark.parametrize("bad", ["12", "12 parsecs", "m 12", "1.2.3 m", 12.0, True])
def test_bad_units(bad):
    with pytest.raises(ValueError):
        parse_quantity(bad)


def test_light_year_is_julian():
    assert LIGHT_YEAR == 299792458.0 * 365.25 * 86400


@pytest.mark.parametrize("name", ["sirius", "two_star", "triangle3"])
def test_bundled_round_trip(name):
    cfg = bundled(name)
    again = ScenarioConfig.parse(cfg.dump())
    assert again == cfg
    assert again.dump() == cfg.dump()
    assert again.digest() == cfg.digest()


def test_sirius_constants(sirius):
    (disc,) = sirius.build_sources()
    assert disc.radius == 2e9
    assert disc.distance == pytest.approx(8.611 * LIGHT_YEAR)
    assert disc.wavelength == pytest.approx(292e-9)


def test_two_star_geometry(two_star):
    a, b = two_star.build_sources()
    assert abs(a.center.x - b.center.x) == pytest.approx(4 * 2 * a.radius)
    assert sorted([a.wavelength, b.wavelength]) == pytest.approx([292e-9, 828e-9])
    assert two_star.conversion.theta == pytest.approx(np.pi / 4)


def test_minimal_defaults():
    cfg = ScenarioConfig.parse(MINIMAL)
    assert cfg.conversion is None
    assert cfg.detection().mode == "distinguishable"
    assert len(cfg.separations()) == cfg.baseline.samples


def test_unknown_key_reports_line():
    text = MINIMAL + "    colour: blue\n"
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.parse(text, source="demo.scenario")
    assert exc.value.line == 6
    assert exc.value.field == "sources[0].colour"
    assert "demo.scenario:line 6" in str(exc.value)


def test_malformed_unit_names_field():
    text = MINIMAL.replace("500 nm", "500 nanometres")
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.parse(text)
    assert exc.value.field == "sources[0].wavelength"
    assert exc.value.line == 5


def test_bare_number_rejected_for_length():
    with pytest.raises(ConfigError, match="explicit unit"):
        ScenarioConfig.parse(MINIMAL.replace("1 km", "1000"))


def test_trials_accepts_exponent_form():
    cfg = ScenarioConfig.parse(MINIMAL + "montecarlo:\n  trials: 1e6\n  seed: 7\n")
    assert cfg.montecarlo.trials == 1_000_000
    with pytest.raises(ConfigError):
        ScenarioConfig.parse(MINIMAL + "montecarlo:\n  trials: 0\n")
    with pytest.raises(ConfigError):
        ScenarioConfig.parse(MINIMAL + "montecarlo:\n  trials: 2.5\n")


def test_yaml_syntax_error_has_line():
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.parse(MINIMAL + "baseline: [unclosed\n")
    assert exc.value.line is not None


def test_disc_needs_radius_and_positive_distance():
    with pytest.raises(ConfigError, match="radius"):
        ScenarioConfig.parse(MINIMAL.replace("kind: point", "kind: disc"))
    text = MINIMAL.replace("kind: point", "kind: disc").replace("1 km", "-1 km") + "    radius: 1 m\n"
    with pytest.raises(ConfigError):
        ScenarioConfig.parse(text)


def test_reference_method_rejected_for_montecarlo():
    cfg = ScenarioConfig.parse(MINIMAL + "conversion:\n  method: reference\n")
    with pytest.raises(ConfigError):
        cfg.detection("e2i2")


def test_angles_in_degrees():
    cfg = ScenarioConfig.parse(MINIMAL + "conversion:\n  theta: 90 deg\n  phi: 0.25\n")
    assert cfg.conversion.theta == pytest.approx(np.pi / 2)
    assert cfg.conversion.phi == 0.25


lengths = st.floats(1e-9, 1e18, allow_nan=False).map(lambda v: f"{v!r} m")


@given(lengths, lengths)
def test_round_trip_arbitrary_lengths(wl, z):
    text = MINIMAL.replace("500 nm", wl).replace("1 km", z)
    cfg = ScenarioConfig.parse(text)
    assert ScenarioConfig.parse(cfg.dump()) == cfg


def test_sampled_source_config():
    text = """\
name: blob
sources:
  - kind: sampled
    wavelength: 600 nm
    points: [[0 m, 0 m, 1 ly], [1e6 km, 0 m, 1 ly]]
    intensity: [1.0, 3.0]
"""
    cfg = ScenarioConfig.parse(text)
    (src,) = cfg.build_sources()
    assert src.weight == 4.0
    assert ScenarioConfig.parse(cfg.dump()) == cfg
