
import numpy as np
import pytest

from e2i2.conversion import ConversionUnitary
from e2i2.correlation import correlation_curve, sweep_baselines
from e2i2.montecarlo import (
    TALLY_HEADER,
    CoincidenceTally,
    Detection,
    LowAcceptanceWarning,
    histogram_to_curve,
    label_table,
    run_trials,
    simulate,
)
from e2i2.sources import DiscSource, PointSource

LY = 9460730472580800.0
L = 8.611 * LY
SIRIUS = DiscSource((0.0, 0.0, L), 2e9, 292e-9)


def _sweep(n=8, stop=20.0):
    s = np.linspace(0, stop, n)
    return (s,) + sweep_baselines(s)


def test_deterministic_for_fixed_seed():
    s, ra, rb = _sweep()
    a = simulate([SIRIUS], ra, rb, 5000, seed=3, separation=s, block_size=1000)
    b = simulate([SIRIUS], ra, rb, 5000, seed=3, separation=s, block_size=1000)
    c = simulate([SIRIUS], ra, rb, 5000, seed=4, separation=s, block_size=1000)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv() != c.to_csv()


def test_threads_do_not_change_tallies():
    s, ra, rb = _sweep()
    a = simulate([SIRIUS], ra, rb, 4000, seed=9, separation=s, block_size=500)
    b = simulate([SIRIUS], ra, rb, 4000, seed=9, separation=s, block_size=500, workers=4)
    np.testing.assert_array_equal(a.coincidences, b.coincidences)
    np.testing.assert_array_equal(a.singles_a, b.singles_a)


def test_zero_trials_rejected():
    s, ra, rb = _sweep()
    with pytest.raises(ValueError):
        simulate([SIRIUS], ra, rb, 0, seed=1)


def test_zero_weight_source_rejected():
    s, ra, rb = _sweep()
    with pytest.raises(ValueError):
        simulate([DiscSource((0, 0, L), 2e9, 292e-9, weight=0.0)], ra, rb, 10, seed=1)


def test_single_disc_agrees_with_analytic():
    s, ra, rb = _sweep(20)
    tally = simulate([SIRIUS], ra, rb, 20000, seed=11, detection=Detection("distinguishable"), separation=s)
    curve = histogram_to_curve(tally)
    exact = correlation_curve([SIRIUS], s, "single").value
    assert curve.variant == "single"
    assert curve.value[0] == 2.0   # every trial coincides at zero baseline
    inside = np.abs(curve.value - exact) <= 3 * curve.error
    assert inside.mean() >= 0.9


def test_erasing_detectors_on_one_source_keep_the_curve():
    s, ra, rb = _sweep(10)
    curve = histogram_to_curve(simulate([SIRIUS], ra, rb, 40000, seed=12, separation=s))
    exact = correlation_curve([SIRIUS], s, "single").value
    assert np.mean(np.abs(curve.value - exact) <= 3 * curve.error) >= 0.9


def test_two_star_e2i2_agrees_with_analytic():
    src = [DiscSource((-8e9, 0.0, L), 2e9, 292e-9), DiscSource((8e9, 0.0, L), 2e9, 828e-9)]
    s, ra, rb = _sweep(12, 6.0)
    det = Detection("e2i2", "single-crystal", ConversionUnitary(np.pi / 4), (292e-9, 828e-9))
    tally = simulate(src, ra, rb, 20000, seed=5, detection=det, separation=s)
    curve = histogram_to_curve(tally)
    exact = correlation_curve(src, s, "e2i2").value
    assert np.mean(np.abs(curve.value - exact) <= 3 * curve.error) >= 0.9
    # two filters each pass half the photons
    np.testing.assert_allclose(tally.acceptance, 0.25)


def test_two_crystal_method_matches_single_crystal_curve():
    src = [PointSource((-8e9, 0.0, L), 292e-9), PointSource((8e9, 0.0, L), 828e-9)]
    s, ra, rb = _sweep(10, 3.0)
    det = Detection("e2i2", "two-crystal", wavelengths=(292e-9, 828e-9))
    curve = histogram_to_curve(simulate(src, ra, rb, 20000, seed=2, detection=det, separation=s))
    exact = correlation_curve(src, s, "e2i2").value
    assert np.mean(np.abs(curve.value - exact) <= 3 * curve.error) >= 0.9


def test_label_tables():
    t = label_table([292e-9, 828e-9], Detection("distinguishable"))
    np.testing.assert_array_equal(t, np.eye(2))
    t = label_table([292e-9, 828e-9], Detection(wavelengths=(292e-9, 828e-9)))
    np.testing.assert_allclose(np.abs(t[:, 0]) ** 2, [0.5, 0.5])
    t = label_table([292e-9, 550e-9], Detection(wavelengths=(292e-9, 828e-9), extinction=0.01))
    assert abs(t[1, 0]) == 0.0
    assert abs(t[1, 3]) ** 2 == pytest.approx(0.01)


def test_reference_method_not_simulated():
    with pytest.raises(ValueError):
        Detection("e2i2", "reference")


def test_low_acceptance_warning():
    s, ra, rb = _sweep(3)
    det = Detection("e2i2", wavelengths=(292e-9, 828e-9), efficiency=0.01)
    with pytest.warns(LowAcceptanceWarning):
        simulate([SIRIUS], ra, rb, 200, seed=1, detection=det)


def test_tally_csv_round_trip():
    s, ra, rb = _sweep(4)
    t = simulate([SIRIUS], ra, rb, 300, seed=1, separation=s)
    t.meta["scenario_sha256"] = "ab" * 32
    text = t.to_csv()
    lines = text.splitlines()
    assert lines[0].startswith("# seed=1 ")
    assert lines[1] == ",".join(TALLY_HEADER)
    back = CoincidenceTally.from_csv(text)
    assert back.to_csv() == text


def test_tally_merge_and_validation():
    s, ra, rb = _sweep(4)
    a = simulate([SIRIUS], ra, rb, 300, seed=1, separation=s)
    b = simulate([SIRIUS], ra, rb, 300, seed=2, separation=s)
    m = a + b
    np.testing.assert_array_equal(m.trials, 600)
    np.testing.assert_array_equal(m.coincidences, a.coincidences + b.coincidences)
    with pytest.raises(ValueError):
        CoincidenceTally([0.0], [5], [4], [6], [10], seed=0)


def test_empty_bins_become_nan():
    t = CoincidenceTally([0.0, 1.0], [0, 3], [0, 5], [0, 5], [10, 10], seed=0)
    c = histogram_to_curve(t)
    assert np.isnan(c.value[0]) and c.meta["empty_bins"] == [0]
    assert np.isfinite(c.value[1])


def test_no_coincidences_flagged_empty():
    t = CoincidenceTally([0.0, 1.0], [0, 0], [3, 5], [2, 5], [10, 10], seed=0)
    c = histogram_to_curve(t)
    assert c.meta["empty"]
    assert np.all(c.error > 0)


def test_run_trials_uses_scenario(sirius):
    t = run_trials(sirius, n_trials=200, seed=1)
    assert len(t.separation) == sirius.montecarlo.samples
    assert t.separation[-1] == sirius.baseline.stop
    assert t.meta["scenario_sha256"] == sirius.digest()
    assert t.variant == "single"
