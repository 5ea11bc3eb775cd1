"""Photon-level simulation of coincidence counting.

Every trial draws two photons. Each photon comes from a source chosen in
proportion to its weight, is emitted from a point drawn from the source's
intensity profile, and carries a uniformly random phase. It reaches
detector A or B with amplitude 1/sqrt(2) and a propagation phase. At each
detector the photon is mapped onto a set of final labels (wavelength
channels after conversion and filtering). The probability that both
detectors register a photon sums the two assignment paths coherently
within each pair of final labels. A Bernoulli draw with that probability
decides the coincidence.

Random numbers come from Philox streams keyed by (seed, baseline index,
block index). Trials are cut into blocks of fixed size, so the tallies
are the same however the blocks are scheduled.
"""

from __future__ import annotations

import csv
import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .conversion import ConversionUnitary
from .correlation import CorrelationCurve, _point_phase, canonical_order, wavelength_groups
from .sources import DiscSource, PointSource, SampledSource, expi

BLOCK_SIZE = 1 << 16
TALLY_HEADER = ["separation_m", "coincidences", "singles_a", "singles_b", "trials"]


class LowAcceptanceWarning(UserWarning):
    """Post-selection accepts too few trials for useful statistics."""


@dataclass(frozen=True)
class Detection:
    """How the detectors treat incoming photons.

    mode
        ``e2i2`` erases wavelength information with the chosen `method`;
        ``distinguishable`` reads the wavelength out (standard detectors).
    method
        ``single-crystal`` or ``two-crystal`` (only used in ``e2i2`` mode).
    wavelengths
        The physical wavelengths playing lambda1 and lambda2. Photons at other
        wavelengths are blocked by the filter.
    """

    mode: str = "e2i2"
    method: str = "single-crystal"
    unitary: ConversionUnitary = ConversionUnitary(np.pi / 4)
    wavelengths: tuple = ()
    efficiency: float = 1.0
    extinction: float = 0.0

    def __post_init__(self):
        if self.mode not in ("e2i2", "distinguishable"):
            raise ValueError(f"detection mode must be 'e2i2' or 'distinguishable', got {self.mode!r}")
        if self.mode == "e2i2" and self.method not in ("single-crystal", "two-crystal"):
            raise ValueError(f"Monte Carlo supports single-crystal and two-crystal conversion, got {self.method!r}")
        if not 0 < self.efficiency <= 1:
            raise ValueError("detector efficiency must lie in (0, 1]")
        if not 0 <= self.extinction <= 1:
            raise ValueError("filter extinction must lie in [0, 1]")


def label_table(group_wavelengths: Sequence[float], detection: Detection) -> np.ndarray:
    """Final-label amplitudes, one row per wavelength group.

    Row g gives the amplitude for a photon of group g to be registered in
    each final label channel at a detector.
    """
    n = len(group_wavelengths)
    eta = np.sqrt(detection.efficiency)
    if detection.mode == "distinguishable":
        return eta * np.eye(n, dtype=complex)
    roles = _roles(group_wavelengths, detection.wavelengths)
    leak = np.sqrt(detection.extinction)
    # channels: 0 = converted/common label, 1 = lambda1 leakage, 2.. = other groups leaking
    table = np.zeros((n, 2 + n), dtype=complex)
    for g, role in enumerate(roles):
        if detection.method == "single-crystal":
            m = detection.unitary.matrix()
            if role in (0, 1):
                table[g, 0] = m[1, role]
                table[g, 1] = leak * m[0, role]
            else:
                table[g, 2 + g] = leak
        else:
            if role in (0, 1):
                table[g, 0] = 1 / np.sqrt(2.0)
            else:
                table[g, 2 + g] = leak
    return eta * table


def _roles(group_wavelengths, pair):
    """0 for lambda1, 1 for lambda2, -1 for any other wavelength."""
    roles = []
    for wl in group_wavelengths:
        role = -1
        for i, ref in enumerate(pair):
            if abs(wl - ref) <= 1e-9 * max(wl, ref):
                role = i
        roles.append(role)
    return roles


@dataclass
class CoincidenceTally:
    separation: np.ndarray
    coincidences: np.ndarray
    singles_a: np.ndarray
    singles_b: np.ndarray
    trials: np.ndarray
    seed: int
    acceptance: np.ndarray = None
    scale: float = 2.0
    variant: str = "e2i2"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("coincidences", "singles_a", "singles_b", "trials"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if np.any(arr < 0):
                raise ValueError(f"{name} must be nonnegative")
            setattr(self, name, arr)
        self.separation = np.asarray(self.separation, dtype=float)
        if np.any(self.coincidences > np.minimum(self.singles_a, self.singles_b)):
            raise ValueError("coincidences cannot exceed either singles count")
        if self.acceptance is None:
            self.acceptance = np.full(len(self.separation), np.nan)

    def __add__(self, other: "CoincidenceTally") -> "CoincidenceTally":
        if not np.array_equal(self.separation, other.separation):
            raise ValueError("cannot merge tallies over different baselines")
        t = self.trials + other.trials
        acc = (self.acceptance * self.trials + other.acceptance * other.trials) / np.maximum(t, 1)
        return CoincidenceTally(self.separation, self.coincidences + other.coincidences,
                                self.singles_a + other.singles_a, self.singles_b + other.singles_b,
                                t, self.seed, acc, self.scale, self.variant, dict(self.meta))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        meta = {"seed": self.seed, "variant": self.variant, "scale": repr(self.scale)}
        meta.update({k: v for k, v in self.meta.items() if k in ("scenario_sha256", "method")})
        buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TALLY_HEADER)
        for i in range(len(self.separation)):
            w.writerow([repr(float(self.separation[i])), int(self.coincidences[i]), int(self.singles_a[i]),
                        int(self.singles_b[i]), int(self.trials[i])])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="\n")
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "CoincidenceTally":
        text = path_or_text
        if isinstance(path_or_text, Path) or "\n" not in str(path_or_text):
            text = Path(path_or_text).read_text(encoding="utf-8")
        lines = text.splitlines()
        meta = {}
        if lines and lines[0].startswith("#"):
            for item in lines[0][1:].split():
                k, _, v = item.partition("=")
                meta[k] = v
            lines = lines[1:]
        rows = list(csv.reader(lines))
        if rows[0] != TALLY_HEADER:
            raise ValueError(f"tally CSV header must be {','.join(TALLY_HEADER)}")
        cols = list(zip(*rows[1:])) if len(rows) > 1 else [()] * 5
        return cls(np.array(cols[0], float), np.array(cols[1], np.int64), np.array(cols[2], np.int64),
                   np.array(cols[3], np.int64), np.array(cols[4], np.int64), int(meta.get("seed", 0)),
                   scale=float(meta.get("scale", 2.0)), variant=meta.get("variant", "e2i2"),
                   meta={k: v for k, v in meta.items() if k not in ("seed", "scale", "variant")})


def _emission_points(src, rng, n):
    if isinstance(src, PointSource):
        return np.broadcast_to(np.array([src.center.x, src.center.y, src.center.z]), (n, 3))
    if isinstance(src, DiscSource):
        rad = src.radius * np.sqrt(rng.random(n))
        ang = 2 * np.pi * rng.random(n)
        c = src.center
        return np.column_stack([c.x + rad * np.cos(ang), c.y + rad * np.sin(ang), np.full(n, c.z)])
    if isinstance(src, SampledSource):
        w = src.intensity * src.cell_weights
        idx = np.searchsorted(np.cumsum(w) / w.sum(), rng.random(n), side="right")
        return src.points[np.minimum(idx, len(w) - 1)]
    raise TypeError(f"unsupported source type {type(src).__name__}")


def _path_delta(points, wavelength, r_a, r_b):
    """Phase of the path to A minus the path to B, one entry per emission point."""
    # the phase helpers work baseline x point; one baseline here
    return _point_phase(points, wavelength, r_a[None, :], r_b[None, :])[0]


class _Model:
    def __init__(self, sources, detection: Detection):
        if not sources:
            raise ValueError("at least one source is required")
        if any(s.weight <= 0 for s in sources):
            raise ValueError("every source needs positive intensity; remove zero-weight sources")
        self.sources = canonical_order(sources)
        wl = [s.wavelength for s in self.sources]
        self.groups = wavelength_groups(wl)
        group_wl = [wl[list(self.groups).index(g)] for g in range(self.groups.max() + 1)]
        if detection.mode == "e2i2" and not detection.wavelengths:
            uniq = []
            for s in sources:
                if not any(abs(s.wavelength - u) <= 1e-9 * u for u in uniq):
                    uniq.append(s.wavelength)
            if len(uniq) > 2:
                raise ValueError("conversion needs explicit lambda1/lambda2 wavelengths for more than two colors")
            detection = Detection(detection.mode, detection.method, detection.unitary,
                                  tuple(uniq) + (float("nan"),) * (2 - len(uniq)),
                                  detection.efficiency, detection.extinction)
        self.detection = detection
        self.table = label_table(group_wl, detection)
        w = np.array([s.weight for s in self.sources])
        self.total_weight = float(w.sum())
        self.cum = np.cumsum(w) / w.sum()
        self.n_photon_table = np.sum(np.abs(self.table) ** 2, axis=1)

    def block(self, r_a, r_b, n, rng):
        """Counts (coincidences, singles_a, singles_b, sum of acceptance) for n trials."""
        src_idx = np.minimum(np.searchsorted(self.cum, rng.random((2, n)), side="right"), len(self.sources) - 1)
        delta = np.empty((2, n))
        psi = 2 * np.pi * rng.random((2, n))
        for k, s in enumerate(self.sources):
            for j in (0, 1):
                sel = src_idx[j] == k
                m = int(sel.sum())
                if m:
                    pts = _emission_points(s, rng, m)
                    delta[j, sel] = _path_delta(pts, s.wavelength, r_a, r_b)
        amp = 1 / np.sqrt(2.0)
        # photon j reaches B with phase psi_j and A with psi_j + delta_j
        u_a = amp * expi(psi + delta)
        u_b = amp * expi(psi)
        path1 = u_a[0] * u_b[1]   # photon 1 -> A, photon 2 -> B
        path2 = u_a[1] * u_b[0]   # photon 2 -> A, photon 1 -> B
        g = self.groups[src_idx]
        t1 = self.table[g[0]]
        t2 = self.table[g[1]]
        p = np.zeros(n)
        nl = self.table.shape[1]
        for k in range(nl):
            for l in range(nl):
                a = path1 * t1[:, k] * t2[:, l] + path2 * t2[:, k] * t1[:, l]
                p += a.real ** 2 + a.imag ** 2
        if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise FloatingPointError("per-trial coincidence probability left [0, 1]")
        p = np.clip(p, 0.0, 1.0)
        n1 = self.n_photon_table[g[0]]
        n2 = self.n_photon_table[g[1]]
        s = 0.5 * (n1 + n2)   # probability that a given detector registers a photon
        coinc = rng.random(n) < p
        rest = np.where(p < 1, (s - p) / np.where(p < 1, 1 - p, 1), 0.0)
        rest = np.clip(rest, 0.0, 1.0)
        fire_a = coinc | (rng.random(n) < rest)
        fire_b = coinc | (rng.random(n) < rest)
        return int(coinc.sum()), int(fire_a.sum()), int(fire_b.sum()), float(np.sum(n1 * n2))


def simulate(sources, r_a, r_b, n_trials: int, seed: int, detection: Detection = Detection(),
             separation=None, workers: int = 1, acceptance_floor: float = 1e-3,
             block_size: int = BLOCK_SIZE) -> CoincidenceTally:
    """Tally coincidences for each baseline (rows of r_a, r_b)."""
    if int(n_trials) <= 0:
        raise ValueError("n_trials must be positive")
    n_trials = int(n_trials)
    r_a = np.atleast_2d(np.asarray(r_a, float))
    r_b = np.atleast_2d(np.asarray(r_b, float))
    model = _Model(list(sources), detection)
    nb = len(r_a)
    sep = np.linalg.norm(r_a - r_b, axis=1) if separation is None else np.asarray(separation, float)
    n_blocks = -(-n_trials // block_size)
    tasks = [(i, k) for i in range(nb) for k in range(n_blocks)]

    def run(task):
        i, k = task
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(i, k))))
        n = min(block_size, n_trials - k * block_size)
        return i, model.block(r_a[i], r_b[i], n, rng)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    c = np.zeros(nb, np.int64)
    sa = np.zeros(nb, np.int64)
    sb = np.zeros(nb, np.int64)
    acc = np.zeros(nb)
    for i, (ci, ai, bi, acci) in results:
        c[i] += ci
        sa[i] += ai
        sb[i] += bi
        acc[i] += acci
    acc = acc / n_trials
    if np.any(acc < acceptance_floor):
        warnings.warn(f"post-selection acceptance {acc.min():.2e} is below the floor {acceptance_floor:.1e}; "
                      "expect poor statistics", LowAcceptanceWarning, stacklevel=2)
    variant = "e2i2" if detection.mode == "e2i2" else "no-e2i2"
    if len(model.sources) == 1:
        variant = "single"
    return CoincidenceTally(sep, c, sa, sb, np.full(nb, n_trials, np.int64), int(seed), acc,
                            scale=2.0 * model.total_weight ** 2, variant=variant,
                            meta={"method": detection.method if detection.mode == "e2i2" else "none"})


def run_trials(scenario, n_trials: Optional[int] = None, seed: Optional[int] = None,
               variant: str = "e2i2", workers: int = 1) -> CoincidenceTally:
    """Simulate the baseline sweep of a ScenarioConfig.

    `variant` selects wavelength-erasing (``e2i2``) or standard
    (``no-e2i2``) detectors. The trial count and seed default to the
    scenario's Monte Carlo settings.
    """
    mc = scenario.montecarlo
    n = mc.trials if n_trials is None else n_trials
    s = mc.seed if seed is None else seed
    detection = scenario.detection(variant)
    r_a, r_b = scenario.baseline_arrays()
    tally = simulate(scenario.build_sources(), r_a, r_b, n, s, detection,
                     separation=scenario.mc_separations(), workers=workers,
                     acceptance_floor=mc.acceptance_floor, block_size=mc.block_size)
    tally.meta["scenario_sha256"] = scenario.digest()
    return tally


def histogram_to_curve(tally: CoincidenceTally, scale: Optional[float] = None) -> CorrelationCurve:
    """Coincidences over the singles product, scaled to the analytic convention.

    G = scale * C * T / (S_A * S_B); the default scale 2 W^2 (W the total
    source weight) puts a single unit source on a plateau of 1. Errors
    combine independent binomial errors of C, S_A and S_B, which
    overestimates the spread slightly because the three counts are
    positively correlated. Bins without singles are NaN and listed under
    ``meta['empty_bins']``.
    """
    scale = tally.scale if scale is None else scale
    c = tally.coincidences.astype(float)
    a = tally.singles_a.astype(float)
    b = tally.singles_b.astype(float)
    t = tally.trials.astype(float)
    empty = (a == 0) | (b == 0) | (t == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = scale * c * t / (a * b)
        rel2 = np.zeros_like(g)
        for count in (c, a, b):
            q = count / t
            rel2 += np.where(count > 0, (1 - q) / np.where(count > 0, count, 1), 0.0)
        err = np.abs(g) * np.sqrt(rel2)
        # zero counts: one-count upper scale for the error
        err = np.where(c == 0, scale * t / (a * b), err)
    g[empty] = np.nan
    err[empty] = np.nan
    meta = {"seed": tally.seed, "trials": tally.trials.tolist(),
            "raw_rate": (c / np.maximum(t, 1)).tolist(),
            "acceptance": np.asarray(tally.acceptance).tolist()}
    with np.errstate(divide="ignore", invalid="ignore"):
        meta["acceptance_corrected_rate"] = (c / np.maximum(t, 1) / np.asarray(tally.acceptance)).tolist()
    if np.any(empty):
        meta["empty_bins"] = np.flatnonzero(empty).tolist()
    if np.all(empty) or c.sum() == 0:
        meta["empty"] = True
    return CorrelationCurve(tally.separation, g, tally.variant, err, meta)
