"""Declarative scenario files.

A scenario is a YAML document describing sources, the detector sweep,
conversion hardware, and numerical settings. Lengths are strings with an
explicit unit ("292 nm", "8.611 ly") and are converted to meters when
parsed. Unknown keys are errors. Diagnostics name the offending field and,
when the text came from a file, its line.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import yaml

from .conversion import ConversionUnitary
from .correlation import Quadrature
from .montecarlo import Detection
from .sources import DiscSource, PointSource, SampledSource

LIGHT_YEAR = 9460730472580800.0
LENGTH_UNITS = {
    "m": 1.0, "nm": 1e-9, "um": 1e-6, "mm": 1e-3, "cm": 1e-2, "km": 1e3, "ly": LIGHT_YEAR,
}
ANGLE_UNITS = {"rad": 1.0, "deg": np.pi / 180.0}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]+)\s*$")

SCENARIO_DIR = Path(__file__).parent / "scenarios"


class ConfigError(ValueError):
    """Invalid scenario; `field` is a dotted path, `line` 1-based when known."""

    def __init__(self, message, field=None, line=None, source=None):
        self.field = field
        self.line = line
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line:
            where.append(f"line {line}")
        prefix = ":".join(where)
        loc = f"field '{field}': " if field else ""
        super().__init__(f"{prefix + ': ' if prefix else ''}{loc}{message}")


def parse_quantity(text, units=LENGTH_UNITS, kind="length"):
    """Parse "<number> <unit>" into SI. Bare numbers are rejected."""
    if isinstance(text, bool) or not isinstance(text, str):
        raise ValueError(f"{kind} needs an explicit unit, e.g. '1.5 m'; got {text!r}")
    m = _QUANTITY.match(text)
    if not m:
        raise ValueError(f"malformed {kind} {text!r}; expected '<number> <unit>'")
    value, unit = m.groups()
    if unit not in units:
        raise ValueError(f"unknown {kind} unit {unit!r} in {text!r}; accepted: {', '.join(units)}")
    return float(value) * units[unit]


def parse_angle(value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    return parse_quantity(value, ANGLE_UNITS, "angle")


def format_length(meters: float) -> str:
    return f"{float(meters)!r} m"


@dataclass(frozen=True)
class SourceSpec:
    kind: str
    wavelength: float
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: Optional[float] = None
    weight: float = 1.0
    points: Optional[Tuple[Tuple[float, float, float], ...]] = None
    intensity: Optional[Tuple[float, ...]] = None

    def build(self):
        if self.kind == "point":
            return PointSource(self.center, self.wavelength, self.weight)
        if self.kind == "disc":
            return DiscSource(self.center, self.radius, self.wavelength, self.weight)
        return SampledSource(np.array(self.points), np.array(self.intensity), self.wavelength)


@dataclass(frozen=True)
class SweepSpec:
    start: float = 0.0
    stop: float = 10.0
    samples: int = 101
    direction: Tuple[float, float] = (1.0, 0.0)
    reference: Tuple[float, float] = (0.0, 0.0)
    offsets: Optional[Tuple[float, float, int]] = None


@dataclass(frozen=True)
class ConversionSpec:
    method: str = "single-crystal"
    theta: float = float(np.pi / 4)
    phi: float = 0.0
    wavelengths: Tuple[float, ...] = ()
    efficiency: float = 1.0
    extinction: float = 0.0


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "closed-form"
    radial: int = 64
    angular: int = 64
    tolerance: float = 1e-9


@dataclass(frozen=True)
class MonteCarloSpec:
    trials: int = 100000
    seed: int = 0
    samples: Optional[int] = None
    acceptance_floor: float = 1e-3
    block_size: int = 1 << 16


@dataclass(frozen=True)
class EstimationSpec:
    window: str = "hann"
    snr_threshold_db: float = 13.0
    zero_pad: int = 16
    distance: Optional[float] = None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    sources: Tuple[SourceSpec, ...]
    baseline: SweepSpec = SweepSpec()
    conversion: Optional[ConversionSpec] = None
    quadrature: QuadratureSpec = QuadratureSpec()
    montecarlo: MonteCarloSpec = MonteCarloSpec()
    estimation: EstimationSpec = EstimationSpec()
    variants: Tuple[str, ...] = ("e2i2",)
    notes: str = ""

    # -- derived views ------------------------------------------------------

    def build_sources(self):
        return [s.build() for s in self.sources]

    def separations(self, samples: Optional[int] = None) -> np.ndarray:
        b = self.baseline
        return np.linspace(b.start, b.stop, b.samples if samples is None else samples)

    def mc_separations(self) -> np.ndarray:
        return self.separations(self.montecarlo.samples)

    def offsets(self) -> np.ndarray:
        if self.baseline.offsets is None:
            return np.array([0.0])
        lo, hi, n = self.baseline.offsets
        return np.linspace(lo, hi, int(n))

    def baseline_arrays(self, offset: float = 0.0, samples: Optional[int] = None):
        from .correlation import sweep_baselines
        b = self.baseline
        n = self.montecarlo.samples if samples is None else samples
        return sweep_baselines(self.separations(n), b.direction, b.reference, offset)

    def quadrature_rule(self) -> Quadrature:
        q = self.quadrature
        return Quadrature(q.radial, q.angular, q.tolerance)

    def distance(self) -> Optional[float]:
        if self.estimation.distance is not None:
            return self.estimation.distance
        zs = {s.center[2] for s in self.sources if s.kind != "sampled"}
        return zs.pop() if len(zs) == 1 else None

    def wavelengths(self):
        out = []
        for s in self.sources:
            if not any(abs(s.wavelength - w) <= 1e-9 * w for w in out):
                out.append(s.wavelength)
        return out

    def detection(self, variant: str = "e2i2") -> Detection:
        c = self.conversion
        if variant in ("no-e2i2", "single") or c is None:
            eff = 1.0 if c is None else c.efficiency
            return Detection(mode="distinguishable", efficiency=eff)
        if c.method == "reference":
            raise ConfigError("Monte Carlo supports single-crystal and two-crystal conversion only",
                              field="conversion.method")
        return Detection("e2i2", c.method, ConversionUnitary(c.theta, c.phi), tuple(c.wavelengths),
                         c.efficiency, c.extinction)

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        d = {"name": self.name, "sources": [_source_to_dict(s) for s in self.sources]}
        b = self.baseline
        bd = {"start": format_length(b.start), "stop": format_length(b.stop), "samples": b.samples,
              "direction": list(b.direction), "reference": [format_length(v) for v in b.reference]}
        if b.offsets is not None:
            bd["offsets"] = {"start": format_length(b.offsets[0]), "stop": format_length(b.offsets[1]),
                             "samples": int(b.offsets[2])}
        d["baseline"] = bd
        if self.conversion is not None:
            c = self.conversion
            d["conversion"] = {"method": c.method, "theta": c.theta, "phi": c.phi,
                               "wavelengths": [format_length(w) for w in c.wavelengths],
                               "efficiency": c.efficiency, "extinction": c.extinction}
        d["quadrature"] = asdict(self.quadrature)
        mc = asdict(self.montecarlo)
        if mc["samples"] is None:
            del mc["samples"]
        d["montecarlo"] = mc
        est = asdict(self.estimation)
        if est["distance"] is None:
            del est["distance"]
        else:
            est["distance"] = format_length(est["distance"])
        d["estimation"] = est
        d["variants"] = list(self.variants)
        if self.notes:
            d["notes"] = self.notes
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, allow_unicode=True)

    def digest(self) -> str:
        return hashlib.sha256(self.dump().encode("utf-8")).hexdigest()

    @classmethod
    def parse(cls, text: str, source=None) -> "ScenarioConfig":
        return _Parser(text, source).parse()

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        if not path.exists() and (SCENARIO_DIR / path.name).exists():
            path = SCENARIO_DIR / path.name
        return cls.parse(path.read_text(encoding="utf-8"), source=str(path))


def bundled(name: str) -> ScenarioConfig:
    """Load a scenario shipped with the package (sirius, two_star, triangle3)."""
    return ScenarioConfig.load(SCENARIO_DIR / f"{name}.scenario")


def _source_to_dict(s: SourceSpec) -> dict:
    d = {"kind": s.kind, "wavelength": format_length(s.wavelength)}
    if s.kind == "sampled":
        d["points"] = [[format_length(v) for v in p] for p in s.points]
        d["intensity"] = list(s.intensity)
    else:
        d["center"] = [format_length(v) for v in s.center]
        if s.kind == "disc":
            d["radius"] = format_length(s.radius)
        d["weight"] = s.weight
    return d


class _Parser:
    def __init__(self, text, source):
        self.source = source
        try:
            self.data = yaml.safe_load(text)
            self.lines = {}
            self._index(yaml.compose(text), ())
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                              line=mark.line + 1 if mark else None, source=source) from None

    def _index(self, node, path):
        if node is None:
            return
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                self.lines[path + (k.value,)] = k.start_mark.line + 1
                self._index(v, path + (k.value,))
                self.lines[path + (k.value,)] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._index(v, path + (i,))

    def error(self, path, message):
        name = ".".join(f"[{p}]" if isinstance(p, int) else p for p in path).replace(".[", "[")
        line = None
        for n in range(len(path), -1, -1):
            if path[:n] in self.lines:
                line = self.lines[path[:n]]
                break
        return ConfigError(message, field=name or None, line=line, source=self.source)

    def mapping(self, value, path, allowed, required=()):
        if not isinstance(value, dict):
            raise self.error(path, "expected a mapping")
        unknown = [k for k in value if k not in allowed]
        if unknown:
            raise self.error(path + (unknown[0],), f"unknown key {unknown[0]!r}; allowed: {', '.join(allowed)}")
        for k in required:
            if k not in value:
                raise self.error(path, f"missing required key {k!r}")
        return value

    def length(self, value, path, positive=False):
        try:
            v = parse_quantity(value)
        except ValueError as exc:
            raise self.error(path, str(exc)) from None
        if positive and not v > 0:
            raise self.error(path, f"must be positive, got {value!r}")
        return v

    def number(self, value, path, kind=float, minimum=None):
        if isinstance(value, bool):
            raise self.error(path, f"expected a number, got {value!r}")
        try:
            v = kind(value) if kind is float else _as_int(value)
        except (TypeError, ValueError):
            raise self.error(path, f"expected {'an integer' if kind is int else 'a number'}, got {value!r}") from None
        if minimum is not None and v < minimum:
            raise self.error(path, f"must be at least {minimum}, got {value!r}")
        return v

    def vector(self, value, path, n, conv):
        if not isinstance(value, list) or len(value) != n:
            raise self.error(path, f"expected a list of {n} entries")
        return tuple(conv(v, path + (i,)) for i, v in enumerate(value))

    def parse(self) -> ScenarioConfig:
        top = self.mapping(self.data, (), [f.name for f in fields(ScenarioConfig)], required=("name", "sources"))
        if not isinstance(top["sources"], list) or not top["sources"]:
            raise self.error(("sources",), "expected a non-empty list of sources")
        sources = tuple(self.source_spec(s, ("sources", i)) for i, s in enumerate(top["sources"]))
        kw = {"name": str(top["name"]), "sources": sources}
        if "baseline" in top:
            kw["baseline"] = self.sweep(top["baseline"], ("baseline",))
        if "conversion" in top and top["conversion"] is not None:
            kw["conversion"] = self.conversion(top["conversion"], ("conversion",))
        if "quadrature" in top:
            kw["quadrature"] = self.quadrature(top["quadrature"], ("quadrature",))
        if "montecarlo" in top:
            kw["montecarlo"] = self.montecarlo(top["montecarlo"], ("montecarlo",))
        if "estimation" in top:
            kw["estimation"] = self.estimation(top["estimation"], ("estimation",))
        if "variants" in top:
            from .correlation import VARIANTS
            vs = top["variants"]
            if not isinstance(vs, list) or any(v not in VARIANTS for v in vs):
                raise self.error(("variants",), f"expected a list drawn from {', '.join(VARIANTS)}")
            kw["variants"] = tuple(vs)
        if "notes" in top:
            kw["notes"] = str(top["notes"])
        return ScenarioConfig(**kw)

    def source_spec(self, v, path):
        v = self.mapping(v, path, ["kind", "center", "radius", "wavelength", "weight", "points", "intensity"],
                         required=("kind", "wavelength"))
        kind = v["kind"]
        if kind not in ("point", "disc", "sampled"):
            raise self.error(path + ("kind",), f"kind must be point, disc or sampled, got {kind!r}")
        wl = self.length(v["wavelength"], path + ("wavelength",), positive=True)
        if kind == "sampled":
            for bad in ("center", "radius", "weight"):
                if bad in v:
                    raise self.error(path + (bad,), f"{bad!r} does not apply to sampled sources")
            if "points" not in v or "intensity" not in v:
                raise self.error(path, "sampled sources need 'points' and 'intensity'")
            pts = v["points"]
            if not isinstance(pts, list) or not pts:
                raise self.error(path + ("points",), "expected a non-empty list of [x, y, z] points")
            points = tuple(self.vector(p, path + ("points", i), 3, self.length) for i, p in enumerate(pts))
            inten = v["intensity"]
            if not isinstance(inten, list) or len(inten) != len(points):
                raise self.error(path + ("intensity",), "expected one intensity per point")
            intensity = tuple(self.number(x, path + ("intensity", i), minimum=0.0) for i, x in enumerate(inten))
            return SourceSpec(kind, wl, points=points, intensity=intensity)
        if "points" in v or "intensity" in v:
            raise self.error(path, "'points'/'intensity' only apply to sampled sources")
        if "center" not in v:
            raise self.error(path, "missing required key 'center'")
        center = self.vector(v["center"], path + ("center",), 3, self.length)
        weight = self.number(v.get("weight", 1.0), path + ("weight",), minimum=0.0)
        radius = None
        if kind == "disc":
            if "radius" not in v:
                raise self.error(path, "disc sources need a 'radius'")
            radius = self.length(v["radius"], path + ("radius",), positive=True)
            if not center[2] > 0:
                raise self.error(path + ("center",), "disc centers must lie at positive z (the distance L)")
        elif "radius" in v:
            raise self.error(path + ("radius",), "'radius' only applies to disc sources")
        return SourceSpec(kind, wl, center, radius, weight)

    def sweep(self, v, path):
        v = self.mapping(v, path, ["start", "stop", "samples", "direction", "reference", "offsets"])
        kw = {}
        if "start" in v:
            kw["start"] = self.length(v["start"], path + ("start",))
        if "stop" in v:
            kw["stop"] = self.length(v["stop"], path + ("stop",))
        if "samples" in v:
            kw["samples"] = self.number(v["samples"], path + ("samples",), int, minimum=2)
        if "direction" in v:
            d = self.vector(v["direction"], path + ("direction",), 2, lambda x, p: self.number(x, p))
            if d == (0.0, 0.0):
                raise self.error(path + ("direction",), "direction must be nonzero")
            kw["direction"] = d
        if "reference" in v:
            kw["reference"] = self.vector(v["reference"], path + ("reference",), 2, self.length)
        if "offsets" in v:
            o = self.mapping(v["offsets"], path + ("offsets",), ["start", "stop", "samples"],
                             required=("start", "stop", "samples"))
            kw["offsets"] = (self.length(o["start"], path + ("offsets", "start")),
                             self.length(o["stop"], path + ("offsets", "stop")),
                             self.number(o["samples"], path + ("offsets", "samples"), int, minimum=1))
        spec = SweepSpec(**kw)
        if not spec.stop > spec.start:
            raise self.error(path + ("stop",), "stop must exceed start")
        return spec

    def conversion(self, v, path):
        v = self.mapping(v, path, [f.name for f in fields(ConversionSpec)])
        kw = {}
        if "method" in v:
            if v["method"] not in ("single-crystal", "two-crystal", "reference"):
                raise self.error(path + ("method",), "method must be single-crystal, two-crystal or reference")
            kw["method"] = v["method"]
        for key in ("theta", "phi"):
            if key in v:
                try:
                    kw[key] = parse_angle(v[key])
                except ValueError as exc:
                    raise self.error(path + (key,), str(exc)) from None
        if "wavelengths" in v:
            wl = v["wavelengths"]
            if not isinstance(wl, list) or len(wl) != 2:
                raise self.error(path + ("wavelengths",), "expected [lambda1, lambda2]")
            kw["wavelengths"] = tuple(self.length(x, path + ("wavelengths", i), positive=True)
                                      for i, x in enumerate(wl))
        if "efficiency" in v:
            kw["efficiency"] = self.number(v["efficiency"], path + ("efficiency",), minimum=0.0)
            if kw["efficiency"] == 0 or kw["efficiency"] > 1:
                raise self.error(path + ("efficiency",), "efficiency must lie in (0, 1]")
        if "extinction" in v:
            kw["extinction"] = self.number(v["extinction"], path + ("extinction",), minimum=0.0)
            if kw["extinction"] > 1:
                raise self.error(path + ("extinction",), "extinction must lie in [0, 1]")
        return ConversionSpec(**kw)

    def quadrature(self, v, path):
        v = self.mapping(v, path, [f.name for f in fields(QuadratureSpec)])
        kw = {}
        if "method" in v:
            if v["method"] not in ("closed-form", "quadrature"):
                raise self.error(path + ("method",), "method must be closed-form or quadrature")
            kw["method"] = v["method"]
        for key in ("radial", "angular"):
            if key in v:
                kw[key] = self.number(v[key], path + (key,), int, minimum=2)
        if "tolerance" in v:
            kw["tolerance"] = self.number(v["tolerance"], path + ("tolerance",), minimum=0.0)
        return QuadratureSpec(**kw)

    def montecarlo(self, v, path):
        v = self.mapping(v, path, [f.name for f in fields(MonteCarloSpec)])
        kw = {}
        if "trials" in v:
            kw["trials"] = self.number(v["trials"], path + ("trials",), int, minimum=1)
        if "seed" in v:
            kw["seed"] = self.number(v["seed"], path + ("seed",), int, minimum=0)
        if "samples" in v:
            kw["samples"] = self.number(v["samples"], path + ("samples",), int, minimum=2)
        if "acceptance_floor" in v:
            kw["acceptance_floor"] = self.number(v["acceptance_floor"], path + ("acceptance_floor",), minimum=0.0)
        if "block_size" in v:
            kw["block_size"] = self.number(v["block_size"], path + ("block_size",), int, minimum=1)
        return MonteCarloSpec(**kw)

    def estimation(self, v, path):
        v = self.mapping(v, path, [f.name for f in fields(EstimationSpec)])
        kw = {}
        if "window" in v:
            if v["window"] not in ("hann", "none"):
                raise self.error(path + ("window",), "window must be hann or none")
            kw["window"] = v["window"]
        if "snr_threshold_db" in v:
            kw["snr_threshold_db"] = self.number(v["snr_threshold_db"], path + ("snr_threshold_db",))
        if "zero_pad" in v:
            kw["zero_pad"] = self.number(v["zero_pad"], path + ("zero_pad",), int, minimum=1)
        if "distance" in v:
            kw["distance"] = self.length(v["distance"], path + ("distance",), positive=True)
        return EstimationSpec(**kw)


def _as_int(value):
    """Integers, also written as 1e6 or 1_000_000."""
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value.is_integer():
            return int(value)
        raise ValueError(value)
    text = str(value).replace("_", "")
    try:
        return int(text)
    except ValueError:
        f = float(text)
        if not f.is_integer():
            raise
        return int(f)
