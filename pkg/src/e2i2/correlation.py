"""Coherence integrals and two-point intensity correlation functions.

The coherence of a source between detector positions x and y is

    gamma(x, y) = integral I(r) exp(i dphi(r, lambda; x, y)) dr

and every correlation variant is assembled from these values. Each
coherence is carried as a raw real phase plus a slowly varying complex
envelope (``CoherenceValue``). For a far-field source the phase holds the
center and quadratic terms, which are large and fast; the envelope holds
the shape of the source. Phases of different sources are combined as real
numbers before any exponential is taken.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import special

from .sources import (
    EXACT_PHASE_LIMIT,
    TWO_PI,
    Baseline,
    DiscSource,
    PointSource,
    SampledSource,
    expi,
)

VARIANTS = ("single", "no-e2i2", "e2i2", "delta", "multi")
CSV_HEADER = ["separation_m", "value", "variant"]
WAVELENGTH_GROUP_RTOL = 1e-9
BESSEL_J1_FIRST_ZERO = float(special.jn_zeros(1, 1)[0])


class QuadratureError(RuntimeError):
    """Successive quadrature refinements disagree by more than the tolerance."""


@dataclass(frozen=True)
class Quadrature:
    """Gauss-Legendre product rule on the unit disc (radius x angle)."""

    radial: int = 64
    angular: int = 64
    tolerance: float = 1e-9
    check: bool = True
    chunk: int = 256

    def nodes(self, refine: int = 1):
        xr, wr = np.polynomial.legendre.leggauss(self.radial * refine)
        xa, wa = np.polynomial.legendre.leggauss(self.angular * refine)
        rho = 0.5 * (xr + 1.0)
        wr = 0.5 * wr * rho
        ang = np.pi * (xa + 1.0)
        wa = np.pi * wa
        r, a = np.meshgrid(rho, ang, indexing="ij")
        w = np.outer(wr, wa) / np.pi  # unit total weight
        return (r * np.cos(a)).ravel(), (r * np.sin(a)).ravel(), w.ravel()


DEFAULT_QUADRATURE = Quadrature()


@dataclass(frozen=True)
class CoherenceValue:
    """gamma = envelope * exp(i * phase), phase kept unreduced."""

    phase: float
    envelope: complex

    @property
    def value(self) -> complex:
        return complex(self.envelope * expi(self.phase))

    def __complex__(self):
        return self.value


@dataclass(frozen=True)
class DiscEnvelope:
    """f = exp(i * quadratic_phase) * airy, with airy = 2 J1(z) / z."""

    quadratic_phase: float
    airy: float

    @property
    def value(self) -> complex:
        return complex(self.airy * expi(self.quadratic_phase))

    def __abs__(self):
        return abs(self.airy)


def airy(z):
    """2 J1(z) / z with the limit value 1 at z = 0."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = 2.0 * special.j1(z[nz]) / z[nz]
    return out


# -- vectorized core -------------------------------------------------------

def _as_points(r):
    r = np.asarray(r, dtype=float)
    return r.reshape(-1, 3)


def _detectors_in_plane(r_a, r_b):
    return bool(np.all(r_a[:, 2] == 0.0) and np.all(r_b[:, 2] == 0.0))


def _farfield(points, wavelength, r_a, r_b):
    """Far-field phase for each (baseline, point); points at their own z as L."""
    quad = 0.5 * (r_a[:, 0] ** 2 + r_a[:, 1] ** 2 - r_b[:, 0] ** 2 - r_b[:, 1] ** 2)
    bx = r_a[:, 0] - r_b[:, 0]
    by = r_a[:, 1] - r_b[:, 1]
    x, y, L = points[:, 0], points[:, 1], points[:, 2]
    lin = bx[:, None] * x[None, :] + by[:, None] * y[None, :]
    return TWO_PI / (wavelength * L[None, :]) * (quad[:, None] - lin)


def _exact(points, wavelength, r_a, r_b):
    da = np.linalg.norm(points[None, :, :] - r_a[:, None, :], axis=-1)
    db = np.linalg.norm(points[None, :, :] - r_b[:, None, :], axis=-1)
    num = np.sum((r_b - r_a)[:, None, :] * (2.0 * points[None, :, :] - (r_a + r_b)[:, None, :]), axis=-1)
    den = da + db
    diff = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return TWO_PI / wavelength * diff


def _use_farfield(points, wavelength, r_a, r_b):
    if not _detectors_in_plane(r_a, r_b) or np.any(points[:, 2] <= 0):
        return False
    reach = np.max(np.linalg.norm(points, axis=1)) + np.max(np.linalg.norm(np.vstack([r_a, r_b]), axis=1))
    return reach / wavelength >= EXACT_PHASE_LIMIT


def _point_phase(points, wavelength, r_a, r_b):
    if _use_farfield(points, wavelength, r_a, r_b):
        return _farfield(points, wavelength, r_a, r_b)
    return _exact(points, wavelength, r_a, r_b)


def _disc_center_phase(src: DiscSource, r_a, r_b):
    c = src.center
    return _farfield(np.array([[c.x, c.y, c.z]]), src.wavelength, r_a, r_b)[:, 0]


def _disc_z(src: DiscSource, r_a, r_b):
    b = np.hypot(r_a[:, 0] - r_b[:, 0], r_a[:, 1] - r_b[:, 1])
    return TWO_PI / src.wavelength * 0.5 * src.angular_diameter * b


def _disc_quadrature(src: DiscSource, r_a, r_b, quad: Quadrature, refine: int = 1):
    """Normalized envelope integral over the disc, center phase factored out."""
    xs, ys, w = quad.nodes(refine)
    k = TWO_PI / (src.wavelength * src.distance) * src.radius
    bx = r_a[:, 0] - r_b[:, 0]
    by = r_a[:, 1] - r_b[:, 1]
    out = np.empty(len(bx), dtype=complex)
    for lo in range(0, len(bx), quad.chunk):
        sl = slice(lo, lo + quad.chunk)
        arg = -k * (bx[sl, None] * xs[None, :] + by[sl, None] * ys[None, :])
        out[sl] = (w[None, :] * (np.cos(arg) + 1j * np.sin(arg))).sum(axis=1)
    return out


def _coherence_arrays(src, r_a, r_b, method="closed-form", quad: Quadrature = DEFAULT_QUADRATURE):
    """Return (phase, envelope) arrays of gamma(r_a[i], r_b[i])."""
    if isinstance(src, PointSource):
        c = src.center
        phase = _point_phase(np.array([[c.x, c.y, c.z]]), src.wavelength, r_a, r_b)[:, 0]
        return phase, np.full(len(r_a), src.weight, dtype=complex)
    if isinstance(src, DiscSource):
        if not _detectors_in_plane(r_a, r_b):
            raise ValueError("disc coherence requires detectors in the z = 0 plane")
        phase = _disc_center_phase(src, r_a, r_b)
        if method == "closed-form":
            env = airy(_disc_z(src, r_a, r_b)).astype(complex)
        elif method == "quadrature":
            env = _disc_quadrature(src, r_a, r_b, quad)
            if quad.check:
                finer = _disc_quadrature(src, r_a, r_b, quad, refine=2)
                worst = float(np.max(np.abs(finer - env))) if len(env) else 0.0
                if worst > quad.tolerance:
                    raise QuadratureError(
                        f"disc quadrature not converged: refinement changed the envelope by {worst:.3e} "
                        f"(tolerance {quad.tolerance:.1e}); increase the resolution")
        else:
            raise ValueError(f"unknown coherence method {method!r}")
        return phase, src.weight * env
    if isinstance(src, SampledSource):
        pts = src.points
        w = src.intensity * src.cell_weights
        c = src.center
        ref = _point_phase(np.array([[c.x, c.y, c.z]]), src.wavelength, r_a, r_b)[:, 0]
        env = np.empty(len(r_a), dtype=complex)
        for lo in range(0, len(r_a), quad.chunk):
            sl = slice(lo, lo + quad.chunk)
            rel = _point_phase(pts, src.wavelength, r_a[sl], r_b[sl]) - ref[sl, None]
            env[sl] = (w[None, :] * expi(rel)).sum(axis=1)
        return ref, env
    raise TypeError(f"unsupported source type {type(src).__name__}")


def _source_key(src):
    kind = type(src).__name__
    c = src.center
    extra = src.radius if isinstance(src, DiscSource) else 0.0
    if isinstance(src, SampledSource):
        digest = (src.points.sum(), src.intensity.sum(), float(np.dot(src.intensity, src.points[:, 0])))
    else:
        digest = ()
    return (src.wavelength, c.x, c.y, c.z, extra, src.weight, kind, digest)


def canonical_order(sources):
    """Sources sorted by a stable physical key; makes results order-independent."""
    return sorted(sources, key=_source_key)


def wavelength_groups(wavelengths, rtol: float = WAVELENGTH_GROUP_RTOL):
    """Group label per wavelength; values within relative `rtol` share a label."""
    wl = np.asarray(wavelengths, dtype=float)
    order = np.argsort(wl, kind="stable")
    labels = np.empty(len(wl), dtype=int)
    group = -1
    prev = None
    for i in order:
        if prev is None or abs(wl[i] - prev) > rtol * max(wl[i], prev):
            group += 1
            prev = wl[i]
        labels[i] = group
    return labels


def _g2_components(sources, r_a, r_b, method, quad):
    """Complex (diagonal product, same-group pair sum, cross-group pair sum)."""
    srcs = canonical_order(sources)
    if not srcs:
        raise ValueError("at least one source is required")
    groups = wavelength_groups([s.wavelength for s in srcs])
    aa, bb, ab, ba = [], [], [], []
    for s in srcs:
        aa.append(_coherence_arrays(s, r_a, r_a, method, quad))
        bb.append(_coherence_arrays(s, r_b, r_b, method, quad))
        ab.append(_coherence_arrays(s, r_a, r_b, method, quad))
        ba.append(_coherence_arrays(s, r_b, r_a, method, quad))
    s_aa = sum(e * expi(p) for p, e in aa)
    s_bb = sum(e * expi(p) for p, e in bb)
    n = len(srcs)
    same = np.zeros(len(r_a), dtype=complex)
    cross = np.zeros(len(r_a), dtype=complex)
    for p in range(n):
        for q in range(n):
            term = ab[p][1] * ba[q][1] * expi(ab[p][0] + ba[q][0])
            if groups[p] == groups[q]:
                same = same + term
            else:
                cross = cross + term
    return s_aa * s_bb, same, cross


def _baseline_arrays(bl):
    if isinstance(bl, Baseline):
        return bl.r_a.as_array()[None, :], bl.r_b.as_array()[None, :]
    r_a, r_b = bl
    return _as_points(r_a), _as_points(r_b)


def g2_components(sources, baselines, method="closed-form", quad: Quadrature = DEFAULT_QUADRATURE):
    """Vectorized complex components for many baselines.

    `baselines` is a Baseline or a pair of (n, 3) arrays (r_A, r_B). Returns
    complex arrays (diag, same_group, cross_group); the imaginary parts are
    round-off.
    """
    r_a, r_b = _baseline_arrays(baselines)
    return _g2_components(list(sources), r_a, r_b, method, quad)


# -- single-baseline operations ---------------------------------------------

def gamma_quadrature(src, bl: Baseline, quad: Quadrature = DEFAULT_QUADRATURE) -> CoherenceValue:
    """Coherence of `src` between detectors A and B by numerical integration.

    Discs are integrated with a Gauss-Legendre product rule after the center
    phase has been factored out; point sources are exact; sampled sources are
    summed over their samples.

    Raises
    ------
    QuadratureError
        If doubling the resolution changes the result by more than
        ``quad.tolerance`` (relative to the source weight).
    """
    r_a, r_b = _baseline_arrays(bl)
    method = "quadrature" if isinstance(src, DiscSource) else "closed-form"
    phase, env = _coherence_arrays(src, r_a, r_b, method, quad)
    return CoherenceValue(float(phase[0]), complex(env[0]))


def gamma_closed_form(src, bl: Baseline) -> CoherenceValue:
    r_a, r_b = _baseline_arrays(bl)
    phase, env = _coherence_arrays(src, r_a, r_b, "closed-form")
    return CoherenceValue(float(phase[0]), complex(env[0]))


def f_disc_closed_form(src: DiscSource, bl: Baseline) -> DiscEnvelope:
    """Far-field disc envelope exp(i pi (|r_A|^2 - |r_B|^2) / lambda L) * 2 J1(z) / z."""
    ra, rb = bl.r_a, bl.r_b
    qphase = np.pi / (src.wavelength * src.distance) * (
        (ra.x ** 2 + ra.y ** 2) - (rb.x ** 2 + rb.y ** 2))
    r_a, r_b = _baseline_arrays(bl)
    z = _disc_z(src, r_a, r_b)
    return DiscEnvelope(float(qphase), float(airy(z)[0]))


def disc_z(src: DiscSource, bl: Baseline) -> float:
    """Airy argument (2 pi / lambda)(theta / 2)|r_A - r_B|."""
    r_a, r_b = _baseline_arrays(bl)
    return float(_disc_z(src, r_a, r_b)[0])


def g2_single(src, bl: Baseline, method="closed-form", quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """gamma(A,A) gamma(B,B) + gamma(A,B) gamma(B,A) for one source."""
    diag, same, _ = g2_components([src], bl, method, quad)
    return float((diag + same).real[0])


def g2_no_e2i2(sources, bl: Baseline, method="closed-form", quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Joint correlation with wavelength-distinguishing detectors.

    Only sources in the same wavelength group interfere.
    """
    diag, same, _ = g2_components(sources, bl, method, quad)
    return float((diag + same).real[0])


def g2_e2i2(sources, bl: Baseline, method="closed-form", quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Joint correlation when all sources are projected onto a common final state."""
    diag, same, cross = g2_components(sources, bl, method, quad)
    return float((diag + same + cross).real[0])


def g2_delta(sources, bl: Baseline, method="closed-form", quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Cross-wavelength interference terms only: g2_e2i2 - g2_no_e2i2."""
    _, _, cross = g2_components(sources, bl, method, quad)
    return float(cross.real[0])


# -- curves ------------------------------------------------------------------

@dataclass
class CorrelationCurve:
    """Correlation values sampled against baseline separation.

    `separation` is the signed displacement of detector A from detector B
    along the sweep direction. `error` holds one-sigma uncertainties for
    simulated curves and is None for analytic ones.
    """

    separation: np.ndarray
    value: np.ndarray
    variant: str
    error: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.separation = np.asarray(self.separation, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.separation.shape != self.value.shape or self.separation.ndim != 1:
            raise ValueError("separation and value must be 1-d arrays of equal length")
        if np.any(np.diff(self.separation) <= 0):
            raise ValueError("baseline separations must be strictly increasing")
        if not np.all(np.isfinite(self.separation)):
            raise ValueError("separations must be finite")
        if self.error is not None:
            self.error = np.asarray(self.error, dtype=float)
            if self.error.shape != self.value.shape:
                raise ValueError("error must match value in shape")
        bad = np.flatnonzero(~np.isfinite(self.value))
        flagged = set(self.meta.get("empty_bins", ()))
        if any(int(i) not in flagged for i in bad):
            raise ValueError("curve values must be finite outside flagged empty bins")

    def __len__(self):
        return len(self.separation)

    def to_csv(self, path=None) -> str:
        """Write `separation_m,value,variant[,error]` rows; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = list(CSV_HEADER) + (["error"] if self.error is not None else [])
        w.writerow(header)
        for i in range(len(self)):
            row = [repr(float(self.separation[i])), repr(float(self.value[i])), self.variant]
            if self.error is not None:
                row.append(repr(float(self.error[i])))
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="\n")
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "CorrelationCurve":
        text = path_or_text
        if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
            text = Path(path_or_text).read_text(encoding="utf-8")
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        header = rows[0]
        if header[:3] != CSV_HEADER:
            raise ValueError(f"curve CSV header must start with {','.join(CSV_HEADER)}, got {','.join(header)}")
        data = rows[1:]
        variants = {r[2] for r in data}
        if len(variants) != 1:
            raise ValueError(f"a curve file must hold a single variant, found {sorted(variants)}")
        sep = [float(r[0]) for r in data]
        val = [float(r[1]) for r in data]
        err = [float(r[3]) for r in data] if len(header) > 3 and header[3] == "error" else None
        val = np.array(val)
        meta = {"empty_bins": np.flatnonzero(~np.isfinite(val)).tolist()} if not np.all(np.isfinite(val)) else {}
        return cls(np.array(sep), val, variants.pop(), None if err is None else np.array(err), meta)


def sweep_baselines(separations, direction=(1.0, 0.0), reference=(0.0, 0.0), offset=0.0):
    """Detector positions for a linear sweep: B fixed at `reference`, A moving.

    `offset` displaces A perpendicular to `direction` (counter-clockwise).
    """
    s = np.asarray(separations, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    perp = np.array([-d[1], d[0]])
    r_b = np.zeros((len(s), 3))
    r_b[:, 0], r_b[:, 1] = reference
    r_a = r_b.copy()
    r_a[:, 0] += s * d[0] + offset * perp[0]
    r_a[:, 1] += s * d[1] + offset * perp[1]
    return r_a, r_b


def correlation_curve(sources, separations, variant="e2i2", direction=(1.0, 0.0),
                      reference=(0.0, 0.0), offset=0.0, method="closed-form",
                      quad: Quadrature = DEFAULT_QUADRATURE) -> CorrelationCurve:
    """Evaluate one correlation variant along a baseline sweep."""
    sources = list(sources)
    if variant == "single" and len(sources) != 1:
        raise ValueError("variant 'single' needs exactly one source")
    r_a, r_b = sweep_baselines(separations, direction, reference, offset)
    diag, same, cross = _g2_components(sources, r_a, r_b, method, quad)
    if variant in ("single", "no-e2i2"):
        val = diag + same
    elif variant in ("e2i2", "multi"):
        val = diag + same + cross
    elif variant == "delta":
        val = cross
    else:
        raise ValueError(f"unknown variant {variant!r}")
    meta = {"direction": tuple(float(v) for v in direction), "reference": tuple(float(v) for v in reference),
            "offset_m": float(offset), "method": method}
    return CorrelationCurve(np.asarray(separations, float), val.real, variant, meta=meta)


def correlation_map(sources, xs, ys, variant="delta", method="closed-form",
                    quad: Quadrature = DEFAULT_QUADRATURE):
    """Curves along x for each perpendicular offset in `ys` (a 2-d baseline grid)."""
    return [correlation_curve(sources, xs, variant, offset=float(y), method=method, quad=quad) for y in ys]


def map_to_csv(curves: Sequence[CorrelationCurve], path=None) -> str:
    """2-d grid as `separation_m,offset_m,value,variant` rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["separation_m", "offset_m", "value", "variant"])
    for c in curves:
        y = c.meta.get("offset_m", 0.0)
        for s, v in zip(c.separation, c.value):
            w.writerow([repr(float(s)), repr(float(y)), repr(float(v)), c.variant])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    return text


def map_from_csv(path_or_text) -> list:
    text = path_or_text
    if isinstance(path_or_text, Path) or "\n" not in str(path_or_text):
        text = Path(path_or_text).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if rows[0] != ["separation_m", "offset_m", "value", "variant"]:
        raise ValueError("map CSV header must be separation_m,offset_m,value,variant")
    by_offset: dict = {}
    variant = None
    for s, y, v, var in rows[1:]:
        by_offset.setdefault(float(y), []).append((float(s), float(v)))
        variant = var
    curves = []
    for y in sorted(by_offset):
        pts = sorted(by_offset[y])
        curves.append(CorrelationCurve(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]),
                                       variant, meta={"offset_m": y}))
    return curves


def normalize(curve: CorrelationCurve, scale: float) -> CorrelationCurve:
    err = None if curve.error is None else curve.error / scale
    return CorrelationCurve(curve.separation, curve.value / scale, curve.variant, err, dict(curve.meta))


def total_weight(sources: Iterable) -> float:
    return float(sum(s.weight for s in sources))
