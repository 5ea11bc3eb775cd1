"""Recover source geometry from correlation curves.

Diameters come from the first zero of the Airy envelope. Separations and
relative centers come from the spatial frequencies of the cross-wavelength
term: a pair of sources with centers c_p, c_q at distance L modulates the
curve as cos(2 pi b . (c_p / lambda_p - c_q / lambda_q) / L) over the
baseline vector b.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize, signal

from .correlation import BESSEL_J1_FIRST_ZERO, CorrelationCurve, airy

DEFAULT_SNR_DB = 13.0
DEFAULT_ZERO_PAD = 16
REPORT_CSV_HEADER = ["quantity", "value", "uncertainty", "unit"]


class EstimationError(ValueError):
    """The data do not support the requested estimate."""


class InsufficientSpanError(EstimationError):
    pass


class NoOscillationError(EstimationError):
    pass


class NyquistError(EstimationError):
    pass


class AmbiguousPeaksError(EstimationError):
    def __init__(self, message, pairs):
        super().__init__(message)
        self.pairs = list(pairs)


# -- result types -----------------------------------------------------------

@dataclass(frozen=True)
class DiameterEstimate:
    """Angular diameter from the first envelope zero.

    ``uncertainty`` is in radians. For the zero-locating method it is set by
    half the baseline sample spacing; for the fit it is the 1-sigma error.
    """

    angular_diameter: float
    first_zero: float
    wavelength: float
    uncertainty: float
    method: str = "zero"

    def radius_at(self, distance: float) -> float:
        return 0.5 * self.angular_diameter * distance

    def rows(self):
        rel = self.uncertainty / self.angular_diameter
        return [("angular_diameter", self.angular_diameter, self.uncertainty, "rad"),
                ("first_zero_baseline", self.first_zero, rel * self.first_zero, "m"),
                ("wavelength", self.wavelength, 0.0, "m")]


@dataclass(frozen=True)
class SeparationEstimate:
    """Separation from the dominant oscillation frequency.

    ``width`` is the half width at half maximum of the spectral peak in
    cycles/m; the separation widths are propagated from it.
    ``separation`` is None when no distance was supplied.
    """

    frequency: float
    width: float
    angular_separation: float
    angular_width: float
    snr_db: float
    wavelengths: tuple
    distance: Optional[float] = None

    @property
    def separation(self) -> Optional[float]:
        return None if self.distance is None else self.angular_separation * self.distance

    @property
    def separation_width(self) -> Optional[float]:
        return None if self.distance is None else self.angular_width * self.distance

    def rows(self):
        out = [("frequency", self.frequency, self.width, "1/m"),
               ("angular_separation", self.angular_separation, self.angular_width, "rad")]
        if self.distance is not None:
            out.append(("separation", self.separation, self.separation_width, "m"))
        out.append(("snr", self.snr_db, 0.0, "dB"))
        return out


@dataclass(frozen=True)
class CenterVector:
    """c_p / lambda_p - c_q / lambda_q divided by L, in cycles per meter of baseline."""

    p: int
    q: int
    vector: tuple
    uncertainty: float
    energy: float = float("nan")

    def reversed(self) -> "CenterVector":
        return CenterVector(self.q, self.p, tuple(-v + 0.0 for v in self.vector), self.uncertainty, self.energy)

    def scaled(self, distance: float) -> np.ndarray:
        """The dimensionless combination c_p / lambda_p - c_q / lambda_q."""
        return np.asarray(self.vector) * distance


@dataclass
class CenterVectorSet:
    vectors: list
    wavelengths: tuple
    ambiguous: list = field(default_factory=list)
    dc: list = field(default_factory=list)

    def get(self, p: int, q: int) -> CenterVector:
        for v in self.vectors:
            if (v.p, v.q) == (p, q):
                return v
            if (v.q, v.p) == (p, q):
                return v.reversed()
        raise KeyError((p, q))

    @property
    def resolved(self) -> bool:
        return not self.ambiguous and not self.dc

    def rows(self):
        out = []
        for v in self.vectors:
            for axis, c in zip("xy", v.vector):
                out.append((f"center_{v.p}{v.q}_{axis}", c, v.uncertainty, "1/m"))
        return out


# -- report output ----------------------------------------------------------

def report_text(*estimates) -> str:
    """`key: value` lines for one or more estimates."""
    lines = []
    for est in estimates:
        for name, value, unc, unit in est.rows():
            lines.append(f"{name}: {value:.9g} {unit}")
            if unc:
                lines.append(f"{name}_uncertainty: {unc:.3g} {unit}")
        if isinstance(est, CenterVectorSet):
            if est.ambiguous:
                lines.append("ambiguous_pairs: " + " ".join(f"{p}-{q}" for p, q in est.ambiguous))
            if est.dc:
                lines.append("unresolved_at_dc: " + " ".join(f"{p}-{q}" for p, q in est.dc))
    return "\n".join(lines) + "\n"


def report_csv(*estimates) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_CSV_HEADER)
    for est in estimates:
        for name, value, unc, unit in est.rows():
            w.writerow([name, repr(float(value)), repr(float(unc)), unit])
    return buf.getvalue()


# -- diameter ---------------------------------------------------------------

def _finite(curve: CorrelationCurve):
    ok = np.isfinite(curve.value)
    return curve.separation[ok], curve.value[ok], None if curve.error is None else curve.error[ok]


def estimate_diameter(curve: CorrelationCurve, wavelength: float, plateau: float = 1.0,
                      method: str = "auto") -> DiameterEstimate:
    """Angular diameter of a single disc from its normalized correlation curve.

    Parameters
    ----------
    curve : CorrelationCurve
        Plateau-normalized single-source curve, separations >= 0.
    wavelength : float
        Observing wavelength in meters.
    plateau : float
        Value the curve tends to at long baselines.
    method : {"auto", "zero", "fit"}
        ``zero`` locates the first minimum of ``value - plateau`` and refines
        it with a parabola. ``fit`` does a weighted least-squares fit of the
        Airy envelope, which holds up better on noisy data. ``auto`` fits
        when the curve carries error bars.

    Raises
    ------
    InsufficientSpanError
        If the sweep does not reach the first envelope zero.
    """
    if method == "auto":
        method = "fit" if curve.error is not None else "zero"
    s, v, err = _finite(curve)
    env = v - plateau
    if len(s) < 3:
        raise InsufficientSpanError("insufficient baseline span: fewer than three usable samples")
    i0 = _first_minimum(env)
    if i0 is None:
        raise InsufficientSpanError(
            f"insufficient baseline span: no envelope zero within {s[0]:.4g}..{s[-1]:.4g} m")
    x0 = _parabola_vertex(s, env, i0)
    spacing = float(np.median(np.diff(s)))
    if method == "zero":
        theta = BESSEL_J1_FIRST_ZERO * wavelength / (np.pi * x0)
        return DiameterEstimate(theta, x0, wavelength, theta * 0.5 * spacing / x0, "zero")
    if method != "fit":
        raise ValueError(f"method must be auto, zero or fit, got {method!r}")
    theta0 = BESSEL_J1_FIRST_ZERO * wavelength / (np.pi * x0)
    sigma = None
    if err is not None:
        sigma = np.where(err > 0, err, np.min(err[err > 0]) if np.any(err > 0) else 1.0)

    def model(x, theta):
        return plateau + airy(np.pi * theta * x / wavelength) ** 2

    popt, pcov = optimize.curve_fit(model, s, v, p0=[theta0], sigma=sigma, absolute_sigma=sigma is not None)
    theta = float(popt[0])
    return DiameterEstimate(theta, BESSEL_J1_FIRST_ZERO * wavelength / (np.pi * theta), wavelength,
                            float(np.sqrt(pcov[0, 0])), "fit")


def _first_minimum(env):
    """Index of the first local minimum after the envelope falls below half its start."""
    start = env[0]
    if not start > 0:
        return None
    below = np.flatnonzero(env < 0.5 * start)
    if below.size == 0:
        return None
    i = below[0]
    # walk down to the bottom of the first dip; require it to rise again
    while i + 1 < len(env) and env[i + 1] <= env[i]:
        i += 1
    if i + 1 >= len(env):
        return None
    # the dip must end in a genuine rise, not a noise wiggle near the plateau
    return i


def _parabola_vertex(x, y, i):
    if i == 0:
        return float(x[0])
    a, b, c = np.polyfit(x[i - 1:i + 2] - x[i], y[i - 1:i + 2], 2)
    if a <= 0:
        return float(x[i])
    return float(x[i] - b / (2 * a))


# -- separation -------------------------------------------------------------

def _check_uniform(s):
    d = np.diff(s)
    if len(s) < 4:
        raise EstimationError("need at least four baseline samples")
    if np.max(np.abs(d - d.mean())) > 1e-6 * abs(d.mean()):
        raise EstimationError("baseline samples must be uniformly spaced")
    return float(d.mean())


def _window(n, kind):
    if kind == "hann":
        return signal.windows.hann(n, sym=True)
    if kind == "none":
        return np.ones(n)
    raise ValueError(f"window must be 'hann' or 'none', got {kind!r}")


def spectrum(curve: CorrelationCurve, window: str = "hann", zero_pad: int = DEFAULT_ZERO_PAD,
             even_extend: Optional[bool] = None):
    """Power spectrum of a uniformly sampled curve.

    Curves that start at zero baseline are mirrored to negative baselines
    first (every correlation variant is even in the baseline), which halves
    the bin width. Returns (frequencies in cycles/m, power, spacing).
    """
    s, v = curve.separation, np.asarray(curve.value, float)
    if not np.all(np.isfinite(v)):
        raise EstimationError("curve has empty bins; cannot transform")
    ds = _check_uniform(s)
    if even_extend is None:
        even_extend = abs(s[0]) <= 1e-9 * ds
    if even_extend:
        v = np.concatenate([v[:0:-1], v])
    n = len(v)
    nfft = int(2 ** np.ceil(np.log2(n * zero_pad)))
    power = np.abs(np.fft.rfft(v * _window(n, window), nfft)) ** 2
    return np.fft.rfftfreq(nfft, ds), power, ds


def _dc_lobe_end(power):
    """Index of the first local minimum of the spectrum, bounding the DC lobe."""
    i = 0
    while i + 1 < len(power) and power[i + 1] <= power[i]:
        i += 1
    return i


def spectral_peak_snr(curve: CorrelationCurve, window: str = "hann", zero_pad: int = DEFAULT_ZERO_PAD):
    """Strongest peak beyond the DC lobe: (frequency, snr in dB).

    The noise reference is the larger of the DC lobe maximum and the median
    spectral power, so a curve without oscillation scores near or below 0 dB.
    """
    f, p, _ = spectrum(curve, window, zero_pad)
    k = _dc_lobe_end(p)
    if k + 1 >= len(p):
        return 0.0, -np.inf
    j = k + 1 + int(np.argmax(p[k + 1:]))
    ref = max(float(p[:k + 1].max()), float(np.median(p)))
    if p[j] <= 0:
        return float(f[j]), -np.inf
    if ref <= 0:
        return float(f[j]), np.inf
    return float(f[j]), float(10 * np.log10(p[j] / ref))


def _refine_peak(f, p, j):
    """Sub-bin peak position by a parabola through the log power, plus HWHM."""
    df = f[1] - f[0]
    if 0 < j < len(p) - 1 and np.all(p[j - 1:j + 2] > 0):
        y = np.log(p[j - 1:j + 2])
        den = y[0] - 2 * y[1] + y[2]
        delta = 0.5 * (y[0] - y[2]) / den if den < 0 else 0.0
    else:
        delta = 0.0
    half = 0.5 * p[j]
    lo = j
    while lo > 0 and p[lo] > half:
        lo -= 1
    hi = j
    while hi < len(p) - 1 and p[hi] > half:
        hi += 1
    return float(f[j] + delta * df), 0.5 * (hi - lo) * df


def estimate_separation(delta_curve: CorrelationCurve, wavelength1: float, wavelength2: float,
                        distance: Optional[float] = None, window: str = "hann",
                        zero_pad: int = DEFAULT_ZERO_PAD, snr_threshold_db: float = DEFAULT_SNR_DB,
                        expected_frequency: Optional[float] = None) -> SeparationEstimate:
    """Separation of two sources at different wavelengths.

    The dominant frequency f of the oscillation relates to the angular
    separation by f = (d / L) (1/lambda1 + 1/lambda2) / 2.

    Parameters
    ----------
    delta_curve : CorrelationCurve
        Cross-wavelength curve on a uniform grid. A full e2i2 curve also works
        as long as its envelope spectrum stays inside the DC lobe.
    distance : float, optional
        Source distance L; when given the separation is reported in meters.
    expected_frequency : float, optional
        If given and above the Nyquist frequency of the sampling, the
        estimate is refused instead of returning an aliased peak.

    Raises
    ------
    NoOscillationError
        If the strongest peak beyond DC is below `snr_threshold_db`.
    NyquistError
        If `expected_frequency` exceeds half the sampling rate.
    """
    if np.all(np.asarray(delta_curve.value)[np.isfinite(delta_curve.value)] == 0):
        raise NoOscillationError("no oscillation detected: curve is identically zero")
    f, p, ds = spectrum(delta_curve, window, zero_pad)
    nyquist = 0.5 / ds
    if expected_frequency is not None and expected_frequency >= nyquist:
        raise NyquistError(f"expected frequency {expected_frequency:.4g} 1/m exceeds the Nyquist "
                           f"frequency {nyquist:.4g} 1/m of the baseline sampling")
    k = _dc_lobe_end(p)
    if k + 1 >= len(p):
        raise NoOscillationError("no oscillation detected: spectrum has no peak beyond DC")
    j = k + 1 + int(np.argmax(p[k + 1:]))
    ref = max(float(p[:k + 1].max()), float(np.median(p)))
    snr = float(10 * np.log10(p[j] / ref)) if ref > 0 else np.inf
    if snr < snr_threshold_db:
        raise NoOscillationError(f"no oscillation detected: spectral peak SNR {snr:.1f} dB is below "
                                 f"the {snr_threshold_db:.1f} dB threshold")
    freq, width = _refine_peak(f, p, j)
    k_sum = 0.5 * (1.0 / wavelength1 + 1.0 / wavelength2)
    return SeparationEstimate(freq, width, freq / k_sum, width / k_sum, snr,
                              (float(wavelength1), float(wavelength2)), distance)


# -- center vectors on a 2-d grid --------------------------------------------

def _grid(curves: Sequence[CorrelationCurve]):
    ys = np.array([c.meta.get("offset_m", 0.0) for c in curves], float)
    order = np.argsort(ys)
    ys = ys[order]
    xs = curves[order[0]].separation
    for c in curves:
        if len(c.separation) != len(xs) or np.any(c.separation != xs):
            raise EstimationError("all curves of a 2-d map must share the same separations")
    z = np.array([curves[i].value for i in order], float)
    if not np.all(np.isfinite(z)):
        raise EstimationError("map has empty bins; cannot transform")
    return xs, ys, z


def pair_energy(wavelength_p: float, wavelength_q: float, diameter_p: float = 1.0,
                diameter_q: float = 1.0, weight_p: float = 1.0, weight_q: float = 1.0) -> float:
    """Predicted spectral energy of the cross term of two discs.

    Integral over the baseline plane of the squared envelope product
    (w_p w_q A(z_p) A(z_q))^2, with A(z) = 2 J1(z)/z. Only ratios between pairs
    are meaningful, so the angular diameters need only be given up to a
    common factor.
    """
    sp = np.pi * diameter_p / wavelength_p
    sq = np.pi * diameter_q / wavelength_q
    scale = 1.0 / max(sp, sq)

    def f(r):
        return (airy(sp * r) * airy(sq * r)) ** 2 * 2 * np.pi * r

    upper = 400.0 * scale
    val, _ = integrate.quad(f, 0.0, upper, limit=4000)
    return float(val * (weight_p * weight_q) ** 2)


def _local_peaks(p2, k_dc, count, min_sep):
    """Largest local maxima of a 2-d half-plane spectrum outside the DC disc."""
    from scipy.ndimage import maximum_filter
    peaks = (p2 == maximum_filter(p2, size=3, mode="nearest")) & (p2 > 0)
    peaks &= ~k_dc
    idx = np.argwhere(peaks)
    vals = p2[peaks]
    order = np.argsort(vals)[::-1]
    chosen = []
    for o in order:
        cand = idx[o]
        if all(np.hypot(*(cand - c)) >= min_sep for c in chosen):
            chosen.append(cand)
        if len(chosen) == count:
            break
    return chosen


def extract_center_vectors(curves: Sequence[CorrelationCurve], wavelengths: Sequence[float],
                           diameters: Optional[Sequence[float]] = None,
                           weights: Optional[Sequence[float]] = None, window: str = "hann",
                           zero_pad: int = 4, snr_threshold_db: float = DEFAULT_SNR_DB,
                           ambiguity_ratio: float = 1.05, strict: bool = False) -> CenterVectorSet:
    """Pairwise center combinations from a 2-d map of the cross-wavelength term.

    Parameters
    ----------
    curves : sequence of CorrelationCurve
        One delta curve per perpendicular offset (``meta['offset_m']``), all
        on the same uniform separation grid; the offsets must be uniform too.
    wavelengths : sequence of float
        One wavelength per source, in the labeling used for the output.
    diameters, weights : sequence of float, optional
        Relative angular diameters and weights, used only to predict which
        pair owns which peak. Default: all equal.
    ambiguity_ratio : float
        Pairs whose predicted energies lie within this factor of each other
        cannot be told apart and are reported as ambiguous.
    strict : bool
        Raise AmbiguousPeaksError instead of returning a partial result.

    Notes
    -----
    Peaks are matched to pairs by ordering their integrated spectral energy
    against the predicted energies. The sign of each vector is fixed by
    requiring v_pr = v_pq + v_qr for every triangle; the remaining global
    sign is fixed by making the x component of the first vector nonnegative.
    """
    n = len(wavelengths)
    if n < 2:
        raise EstimationError("need at least two sources")
    pairs = list(itertools.combinations(range(n), 2))
    diameters = [1.0] * n if diameters is None else list(diameters)
    weights = [1.0] * n if weights is None else list(weights)
    xs, ys, z = _grid(curves)
    dx = _check_uniform(xs)
    dy = _check_uniform(ys) if len(ys) > 1 else None
    if dy is None:
        raise EstimationError("a 2-d map needs at least four offsets")
    if np.allclose(z, 0):
        return CenterVectorSet([], tuple(wavelengths), dc=pairs)
    w2 = np.outer(_window(len(ys), window), _window(len(xs), window))
    ny = int(2 ** np.ceil(np.log2(len(ys) * zero_pad)))
    nx = int(2 ** np.ceil(np.log2(len(xs) * zero_pad)))
    spec = np.fft.fftshift(np.abs(np.fft.fft2(z * w2, (ny, nx))) ** 2)
    fy = np.fft.fftshift(np.fft.fftfreq(ny, dy))
    fx = np.fft.fftshift(np.fft.fftfreq(nx, dx))
    # half plane: fy > 0, or fy == 0 and fx >= 0
    half = (fy[:, None] > 0) | ((fy[:, None] == 0) & (fx[None, :] >= 0))
    p2 = np.where(half, spec, 0.0)

    # DC lobe: grow the disc around the origin while the radial maximum falls
    fr = np.hypot(*np.meshgrid(fx / (fx[1] - fx[0]), fy / (fy[1] - fy[0])))
    rmax = int(fr.max())
    radial = np.array([spec[(fr >= r) & (fr < r + 1)].max() for r in range(rmax)])
    r_dc = _dc_lobe_end(radial)
    dc_disc = fr <= r_dc
    ref = max(float(spec[dc_disc].max()), float(np.median(spec)))

    found = _local_peaks(p2, dc_disc, len(pairs), min_sep=max(2.0, zero_pad / 2))
    found = [c for c in found if ref <= 0 or 10 * np.log10(p2[tuple(c)] / ref) >= snr_threshold_db]
    dc_significant = 10 * np.log10(spec[dc_disc].max() / max(float(np.median(spec)), 1e-300)) >= snr_threshold_db

    if not found:
        return CenterVectorSet([], tuple(wavelengths), dc=pairs if dc_significant else [],
                               ambiguous=[] if dc_significant else pairs)

    # integrated energy around each peak
    coords = [np.array([fx[c[1]], fy[c[0]]]) for c in found]
    all_pts = coords + [-c for c in coords] + [np.zeros(2)]
    energies = []
    for i, c in enumerate(coords):
        others = [np.hypot(*(c - o)) for o in all_pts if o is not c]
        radius = 0.5 * min(others) if others else np.inf
        mask = np.hypot(fx[None, :] - c[0], fy[:, None] - c[1]) <= radius
        energies.append(float(spec[mask].sum()))
        # the envelope spectrum is flat-topped, so refine by the centroid of its upper half
        top = mask & (spec >= 0.5 * spec[tuple(found[i])])
        w = spec[top]
        gy, gx = np.nonzero(top)
        coords[i] = np.array([np.sum(w * fx[gx]) / w.sum(), np.sum(w * fy[gy]) / w.sum()])

    predicted = {pq: pair_energy(wavelengths[pq[0]], wavelengths[pq[1]], diameters[pq[0]],
                                 diameters[pq[1]], weights[pq[0]], weights[pq[1]]) for pq in pairs}
    ranked_pairs = sorted(pairs, key=lambda pq: predicted[pq], reverse=True)
    ambiguous = set()
    for a, b in zip(ranked_pairs, ranked_pairs[1:]):
        if predicted[a] <= ambiguity_ratio * predicted[b]:
            ambiguous.update((a, b))
    missing = ranked_pairs[len(found):] if len(found) < len(pairs) else []
    if missing:
        # fewer peaks than pairs: either overlap or a pair sitting at DC
        ambiguous.update(ranked_pairs)
    order = np.argsort(energies)[::-1]
    assigned = {ranked_pairs[r]: (coords[i], found[i], energies[i]) for r, i in enumerate(order)}

    dc = []
    if missing and len(pairs) == 1 and dc_significant:
        dc = list(missing)
        ambiguous.clear()
    if ambiguous and strict:
        raise AmbiguousPeaksError("overlapping or indistinguishable spectral peaks for pairs "
                                  + ", ".join(f"{p}-{q}" for p, q in sorted(ambiguous)), sorted(ambiguous))

    vectors = _fix_signs({pq: v[0] for pq, v in assigned.items()}, n)
    res = float(np.hypot(fx[1] - fx[0], fy[1] - fy[0])) / 2
    out = [CenterVector(p, q, (float(vec[0]), float(vec[1])), res, assigned[(p, q)][2])
           for (p, q), vec in sorted(vectors.items())]
    return CenterVectorSet(out, tuple(wavelengths), sorted(ambiguous), dc)


def _fix_signs(vectors: dict, n: int) -> dict:
    """Choose per-pair signs that close every triangle; first vector gets x >= 0."""
    pairs = sorted(vectors)
    best, best_res = None, np.inf
    triangles = [t for t in itertools.combinations(range(n), 3)
                 if all(pq in vectors for pq in itertools.combinations(t, 2))]
    for signs in itertools.product((1.0, -1.0), repeat=max(len(pairs) - 1, 0)):
        s = dict(zip(pairs, (1.0,) + signs))
        v = {pq: s[pq] * vectors[pq] for pq in pairs}
        res = sum(np.hypot(*(v[(p, q)] + v[(q, r)] - v[(p, r)])) for p, q, r in triangles)
        if res < best_res - 1e-15:
            best, best_res = v, res
    first = best[pairs[0]]
    if first[0] < 0 or (first[0] == 0 and first[1] < 0):
        best = {pq: -v for pq, v in best.items()}
    return best
