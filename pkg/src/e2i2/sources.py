"""Emitters, detector geometry and propagation phases.

Positions are in meters throughout. Detectors normally sit in the z = 0
plane and sources at z = L > 0; the far-field phase assumes exactly that
layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

# |r - r_detector| / wavelength above which the exact phase loses all
# significant digits in double precision.
EXACT_PHASE_LIMIT = 1e12

# 2*pi split into three parts; the first two have 26 significant bits so
# that n * part is exact for |n| < 2**26.
_TWO_PI_A = 6.283185243606567
_TWO_PI_B = 6.357301884918343e-08
_TWO_PI_C = 2.4492935982947064e-16
TWO_PI = 2.0 * np.pi


class PrecisionError(ValueError):
    """Raised when a computation is requested outside its precision contract."""


@dataclass(frozen=True)
class Position3:
    """A point in space, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"Position3.{name} must be finite, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def of(cls, value: Union["Position3", Sequence[float]]) -> "Position3":
        if isinstance(value, Position3):
            return value
        x, y, z = value
        return cls(x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __iter__(self):
        return iter((self.x, self.y, self.z))


@dataclass(frozen=True)
class Baseline:
    """Positions of the two detectors A and B.

    Coincident detectors are allowed; they give the zero-baseline limit.
    """

    r_a: Position3
    r_b: Position3

    def __post_init__(self):
        object.__setattr__(self, "r_a", Position3.of(self.r_a))
        object.__setattr__(self, "r_b", Position3.of(self.r_b))

    @classmethod
    def along(cls, separation: float, direction=(1.0, 0.0), reference=(0.0, 0.0)) -> "Baseline":
        """Detector B at `reference`, detector A displaced by `separation` along `direction`.

        Both detectors lie in the z = 0 plane; `direction` is normalized.
        """
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        rx, ry = reference
        return cls(Position3(rx + separation * d[0], ry + separation * d[1], 0.0),
                   Position3(rx, ry, 0.0))

    @property
    def vector(self) -> np.ndarray:
        """r_A - r_B."""
        return self.r_a.as_array() - self.r_b.as_array()

    @property
    def separation(self) -> float:
        return float(np.linalg.norm(self.vector))

    def swapped(self) -> "Baseline":
        return Baseline(self.r_b, self.r_a)


def _check_wavelength(wavelength):
    if np.any(np.asarray(wavelength) <= 0) or not np.all(np.isfinite(wavelength)):
        raise ValueError(f"wavelength must be positive and finite, got {wavelength}")


@dataclass(frozen=True)
class PointSource:
    center: Position3
    wavelength: float
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", Position3.of(self.center))
        _check_wavelength(self.wavelength)
        if not self.weight >= 0:
            raise ValueError(f"weight must be nonnegative, got {self.weight}")

    @property
    def distance(self) -> float:
        return self.center.z


@dataclass(frozen=True)
class DiscSource:
    """Uniform disc of radius `radius` facing the detector plane at distance center.z."""

    center: Position3
    radius: float
    wavelength: float
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", Position3.of(self.center))
        _check_wavelength(self.wavelength)
        if not self.radius > 0:
            raise ValueError(f"disc radius must be positive, got {self.radius}")
        if not self.center.z > 0:
            raise ValueError(f"disc must sit at positive distance (center.z > 0), got {self.center.z}")
        if not self.weight >= 0:
            raise ValueError(f"weight must be nonnegative, got {self.weight}")

    @property
    def distance(self) -> float:
        return self.center.z

    @property
    def angular_diameter(self) -> float:
        """Small-angle angular diameter 2a/L, the value used by the far-field envelope."""
        return 2.0 * self.radius / self.distance

    @property
    def angular_diameter_exact(self) -> float:
        return 2.0 * np.arctan(self.radius / self.distance)


@dataclass(frozen=True)
class SampledSource:
    """Intensity given on a set of points, with quadrature weights per point.

    ``cell_weights`` defaults to uniform cells, so the samples are treated as
    a regular grid and the intensity values are used directly as weights.
    """

    points: np.ndarray
    intensity: np.ndarray
    wavelength: float
    cell_weights: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        inten = np.asarray(self.intensity, dtype=float).ravel()
        if pts.shape[1] != 3 or pts.shape[0] != inten.size:
            raise ValueError("points must have shape (n, 3) matching intensity of length n")
        if not np.all(np.isfinite(pts)):
            raise ValueError("sample positions must be finite")
        if np.any(inten < 0) or not np.all(np.isfinite(inten)):
            raise ValueError("sampled intensities must be finite and nonnegative")
        _check_wavelength(self.wavelength)
        cw = np.ones_like(inten) if self.cell_weights is None else np.asarray(self.cell_weights, float).ravel()
        if cw.shape != inten.shape or np.any(cw < 0):
            raise ValueError("cell_weights must be nonnegative with one entry per sample")
        pts.flags.writeable = False
        inten.flags.writeable = False
        cw.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "intensity", inten)
        object.__setattr__(self, "cell_weights", cw)

    @property
    def weight(self) -> float:
        return float(np.sum(self.intensity * self.cell_weights))

    @property
    def center(self) -> Position3:
        w = self.intensity * self.cell_weights
        if w.sum() == 0:
            return Position3.of(self.points.mean(axis=0))
        return Position3.of((self.points * w[:, None]).sum(axis=0) / w.sum())

    @property
    def distance(self) -> float:
        return self.center.z


Source = Union[PointSource, DiscSource, SampledSource]


def phase_delta_exact(r, wavelength, baseline: Baseline):
    """Path phase difference (2 pi / lambda)(|r - r_A| - |r - r_B|).

    `r` may be a single point or an (n, 3) array. The difference of the two
    distances is formed as a quotient so that it keeps its relative precision
    even when both distances are large.

    Raises
    ------
    PrecisionError
        If a path length exceeds ``EXACT_PHASE_LIMIT`` wavelengths; use the
        far-field phase there.
    """
    _check_wavelength(wavelength)
    r = np.asarray(r, dtype=float)
    ra = baseline.r_a.as_array()
    rb = baseline.r_b.as_array()
    da = np.linalg.norm(r - ra, axis=-1)
    db = np.linalg.norm(r - rb, axis=-1)
    if np.max(np.maximum(da, db)) / wavelength >= EXACT_PHASE_LIMIT:
        raise PrecisionError(
            "path length exceeds 1e12 wavelengths; the exact phase is meaningless in double "
            "precision, use phase_delta_farfield")
    # |r-ra|^2 - |r-rb|^2 = (rb - ra) . (2r - ra - rb)
    num = np.sum((rb - ra) * (2.0 * r - ra - rb), axis=-1)
    den = da + db
    diff = np.divide(num, den, out=np.zeros_like(np.asarray(num, dtype=float)), where=den > 0)
    return TWO_PI / wavelength * diff


def phase_delta_farfield(x, y, wavelength, distance, baseline: Baseline):
    """Far-field phase difference for a source point (x, y) at distance L.

    (2 pi / lambda L) * (|r_A|^2 / 2 - |r_B|^2 / 2 - [(x_A - x_B) x + (y_A - y_B) y])
    """
    _check_wavelength(wavelength)
    if not np.all(np.asarray(distance) > 0):
        raise ValueError(f"far-field distance must be positive, got {distance}")
    ra, rb = baseline.r_a, baseline.r_b
    if ra.z != 0.0 or rb.z != 0.0:
        raise ValueError("far-field phase requires both detectors in the z = 0 plane")
    quad = 0.5 * (ra.x ** 2 + ra.y ** 2) - 0.5 * (rb.x ** 2 + rb.y ** 2)
    lin = (ra.x - rb.x) * np.asarray(x, float) + (ra.y - rb.y) * np.asarray(y, float)
    return TWO_PI / (wavelength * distance) * (quad - lin)


def reduce_phase(phase):
    """Reduce phases to [-pi, pi] by subtracting the nearest multiple of 2 pi.

    The multiple is removed in three exact-product steps, so the result keeps
    full relative precision for phases up to ~1e7 turns.
    """
    phase = np.asarray(phase, dtype=float)
    n = np.rint(phase / TWO_PI)
    return ((phase - n * _TWO_PI_A) - n * _TWO_PI_B) - n * _TWO_PI_C


def expi(phase):
    """exp(i * phase) with compensated argument reduction."""
    p = reduce_phase(phase)
    return np.cos(p) + 1j * np.sin(p)
