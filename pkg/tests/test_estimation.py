import numpy as np
import pytest

from e2i2.correlation import CorrelationCurve, correlation_curve, correlation_map
from e2i2.estimation import (
    REPORT_CSV_HEADER,
    AmbiguousPeaksError,
    EstimationError,
    InsufficientSpanError,
    NoOscillationError,
    NyquistError,
    estimate_diameter,
    estimate_separation,
    extract_center_vectors,
    pair_energy,
    report_csv,
    report_text,
    spectral_peak_snr,
)
from e2i2.sources import DiscSource, PointSource

LY = 9460730472580800.0
L = 8.611 * LY
A = 2e9
SIRIUS = DiscSource((0.0, 0.0, L), A, 292e-9)
TWO_STAR = [DiscSource((-8e9, 0.0, L), A, 292e-9), DiscSource((8e9, 0.0, L), A, 828e-9)]
F_TWO_STAR = 0.45490065502567392   # d / L * (1/292 nm + 1/828 nm) / 2, 40-digit oracle


def _sirius_curve(stop=20.0, n=401):
    return correlation_curve([SIRIUS], np.linspace(0, stop, n), "single")


def _delta(stop=20.0, n=201, sources=TWO_STAR):
    return correlation_curve(sources, np.linspace(0, stop, n), "delta")


def test_diameter_round_trip():
    est = estimate_diameter(_sirius_curve(), 292e-9)
    assert est.angular_diameter == pytest.approx(2 * A / L, rel=1e-3)
    assert est.first_zero == pytest.approx(7.253429968835236, rel=1e-3)
    assert est.method == "zero"
    assert est.radius_at(L) == pytest.approx(A, rel=1e-3)


def test_diameter_fit_on_noisy_curve():
    rng = np.random.default_rng(0)
    c = _sirius_curve(n=50)
    err = np.full(len(c), 2e-3)
    noisy = CorrelationCurve(c.separation, c.value + rng.normal(0, 2e-3, len(c)), "single", err)
    est = estimate_diameter(noisy, 292e-9)
    assert est.method == "fit"
    assert est.angular_diameter == pytest.approx(2 * A / L, rel=0.02)
    assert est.uncertainty < 0.02 * est.angular_diameter


def test_point_source_has_no_zero():
    c = correlation_curve([PointSource((0.0, 0.0, L), 292e-9)], np.linspace(0, 20, 50), "single")
    with pytest.raises(InsufficientSpanError, match="insufficient baseline span"):
        estimate_diameter(c, 292e-9)


def test_short_sweep_has_no_zero():
    with pytest.raises(InsufficientSpanError):
        estimate_diameter(_sirius_curve(stop=6.0, n=61), 292e-9)


def test_separation_round_trip():
    est = estimate_separation(_delta(), 292e-9, 828e-9, distance=L)
    assert est.frequency == pytest.approx(F_TWO_STAR, rel=1e-3)
    assert est.separation == pytest.approx(1.6e10, rel=1e-2)
    assert est.angular_separation == pytest.approx(1.6e10 / L, rel=1e-2)
    assert est.snr_db > 20


def test_separation_without_distance_is_angular():
    est = estimate_separation(_delta(), 292e-9, 828e-9)
    assert est.separation is None
    assert est.angular_separation == pytest.approx(1.6e10 / L, rel=1e-2)


def test_zero_delta_curve_has_no_oscillation():
    c = correlation_curve([SIRIUS], np.linspace(0, 20, 201), "delta")
    with pytest.raises(NoOscillationError, match="no oscillation detected"):
        estimate_separation(c, 292e-9, 828e-9)


def test_plain_curve_has_no_oscillation():
    c = correlation_curve(TWO_STAR, np.linspace(0, 20, 201), "no-e2i2")
    with pytest.raises(NoOscillationError):
        estimate_separation(c, 292e-9, 828e-9)
    assert spectral_peak_snr(c)[1] < 3


def test_nyquist_guard():
    c = _delta(n=15)   # spacing 1.43 m, Nyquist 0.35 cycles/m
    with pytest.raises(NyquistError):
        estimate_separation(c, 292e-9, 828e-9, expected_frequency=F_TWO_STAR)


def test_nonuniform_grid_rejected():
    s = np.sort(np.random.default_rng(1).uniform(0, 20, 100))
    c = correlation_curve(TWO_STAR, s, "delta")
    with pytest.raises(EstimationError, match="uniformly"):
        estimate_separation(c, 292e-9, 828e-9)


def test_separation_error_grows_with_noise():
    clean = _delta(n=50)
    errors = []
    for sigma in (1e-3, 1e-2, 5e-2):
        e = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            noisy = CorrelationCurve(clean.separation, clean.value + rng.normal(0, sigma, 50), "delta")
            est = estimate_separation(noisy, 292e-9, 828e-9, distance=L, snr_threshold_db=0)
            e.append(abs(est.separation / 1.6e10 - 1))
        errors.append(np.mean(e))
    assert errors[0] < errors[1] < errors[2]


def _map(sources, half=24.0, n=121):
    xs = np.linspace(-half, half, n)
    return correlation_map(sources, xs, xs, "delta")


def _truth(centers, wavelengths, p, q):
    return (np.asarray(centers[p]) / wavelengths[p] - np.asarray(centers[q]) / wavelengths[q]) / L


def test_center_vectors_triangle():
    wl = [292e-9, 550e-9, 828e-9]
    cs = [(-8e9, -4e9), (8e9, -4e9), (0.0, 8e9)]
    src = [DiscSource((c[0], c[1], L), A, w) for c, w in zip(cs, wl)]
    res = extract_center_vectors(_map(src, n=241), wl)
    assert res.resolved
    sign = 1.0 if _truth(cs, wl, 0, 1)[0] >= 0 else -1.0
    for p, q in [(0, 1), (0, 2), (1, 2)]:
        want = sign * _truth(cs, wl, p, q)
        got = np.array(res.get(p, q).vector)
        assert np.linalg.norm(got - want) <= 0.01 * np.linalg.norm(want)
        np.testing.assert_array_equal(np.array(res.get(q, p).vector), -got)


def test_center_vectors_two_sources_match_separation():
    res = extract_center_vectors(_map(TWO_STAR), [292e-9, 828e-9])
    v = np.array(res.get(0, 1).vector)
    assert np.linalg.norm(v) == pytest.approx(F_TWO_STAR, rel=1e-2)
    assert abs(v[1]) < 0.01 * abs(v[0])


def test_center_vectors_degenerate_pair_is_dc():
    # c_p / lambda_p = c_q / lambda_q: the cross term does not oscillate
    cp = np.array([4e9, 0.0])
    cq = cp * 828e-9 / 292e-9
    src = [DiscSource((cp[0], cp[1], L), A, 292e-9), DiscSource((cq[0], cq[1], L), A, 828e-9)]
    res = extract_center_vectors(_map(src), [292e-9, 828e-9])
    assert res.dc == [(0, 1)]
    assert not res.vectors
    assert "unresolved_at_dc: 0-1" in report_text(res)


def test_equal_wavelengths_are_ambiguous():
    wl = [292e-9, 828e-9, 828e-9 * 1.01]
    cs = [(-8e9, -4e9), (8e9, -4e9), (0.0, 8e9)]
    src = [DiscSource((c[0], c[1], L), A, w) for c, w in zip(cs, wl)]
    res = extract_center_vectors(_map(src, n=241), wl)
    assert (0, 1) in res.ambiguous and (0, 2) in res.ambiguous
    with pytest.raises(AmbiguousPeaksError) as exc:
        extract_center_vectors(_map(src, n=241), wl, strict=True)
    assert (0, 1) in exc.value.pairs


def test_pair_energy_monotone_in_wavelength():
    assert pair_energy(292e-9, 550e-9) < pair_energy(292e-9, 828e-9) < pair_energy(550e-9, 828e-9)
    # only ratios matter: a common scale factor cancels
    r1 = pair_energy(292e-9, 550e-9) / pair_energy(550e-9, 828e-9)
    r2 = pair_energy(584e-9, 1100e-9) / pair_energy(1100e-9, 1656e-9)
    assert r1 == pytest.approx(r2, rel=1e-6)


def test_reports():
    d = estimate_diameter(_sirius_curve(), 292e-9)
    s = estimate_separation(_delta(), 292e-9, 828e-9, distance=L)
    text = report_text(d, s)
    keys = [line.split(":")[0] for line in text.splitlines()]
    assert keys[:2] == ["angular_diameter", "angular_diameter_uncertainty"]
    assert "separation" in keys and "frequency" in keys and "snr" in keys
    assert all(": " in line for line in text.splitlines())
    csv_text = report_csv(d, s)
    assert csv_text.splitlines()[0] == ",".join(REPORT_CSV_HEADER)
    assert csv_text.splitlines()[1].startswith("angular_diameter,")
