"""Photon-state transformations behind wavelength-erasing detection.

States are small dictionaries over (wavelength label, spatial mode) basis
labels. Three mechanisms are modeled:

* single crystal: a two-level mixing of lambda1 and lambda2 followed by an
  ideal lambda2 filter;
* two crystals: lambda1 and lambda2 both upconverted to lambda3 in distinct
  spatio-temporal modes, then post-selected on their symmetric superposition;
* reference source: a four-fold coincidence with an entangled red/blue pair.

The pump is a strong coherent state and is left out of the state vector;
``pump_fidelity`` gives the size of that approximation.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Tuple

import numpy as np

LAMBDA1, LAMBDA2, LAMBDA3 = "lambda1", "lambda2", "lambda3"
WAVELENGTH_LABELS = (LAMBDA1, LAMBDA2, LAMBDA3)
MODES = (0, 1, 2, 3)
NORM_TOLERANCE = 1e-9

Label = Tuple[str, int]


@dataclass(frozen=True)
class PhotonState:
    """A single-photon superposition over (wavelength, mode) labels.

    `success_probability` is the accumulated probability of every
    post-selection applied so far; `null` marks the empty state left by a
    projection that could never succeed.
    """

    amplitudes: Mapping[Label, complex]
    success_probability: float = 1.0
    null: bool = False

    def __post_init__(self):
        amps = {}
        for (wl, mode), a in dict(self.amplitudes).items():
            if wl not in WAVELENGTH_LABELS:
                raise ValueError(f"unknown wavelength label {wl!r}")
            if mode not in MODES:
                raise ValueError(f"unknown mode label {mode!r}")
            if a != 0:
                amps[(wl, int(mode))] = complex(a)
        object.__setattr__(self, "amplitudes", MappingProxyType(dict(sorted(amps.items()))))

    @classmethod
    def basis(cls, wavelength: str, mode: int = 0) -> "PhotonState":
        return cls({(wavelength, mode): 1.0})

    @classmethod
    def superposition(cls, terms: Mapping[Label, complex]) -> "PhotonState":
        """Normalized superposition of the given (unnormalized) terms."""
        norm = np.sqrt(sum(abs(a) ** 2 for a in terms.values()))
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls({k: a / norm for k, a in terms.items()})

    def amplitude(self, wavelength: str, mode: int = 0) -> complex:
        return self.amplitudes.get((wavelength, mode), 0j)

    @property
    def norm_squared(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def to_text(self) -> str:
        """Canonical form, one `(wavelength,mode): re+im i` line per label."""
        lines = []
        for (wl, mode), a in self.amplitudes.items():
            re = a.real + 0.0
            im = a.imag + 0.0
            lines.append(f"({wl},{mode}): {re:.12f}{im:+.12f}i")
        return "\n".join(lines)

    def __str__(self):
        return self.to_text() or "(null)"


def _require_normalized(state: PhotonState):
    dev = abs(state.norm_squared - 1.0)
    if dev > NORM_TOLERANCE:
        raise ValueError(f"state is not normalized (|norm^2 - 1| = {dev:.3e})")


@dataclass(frozen=True)
class ConversionUnitary:
    """Mixing of lambda1 and lambda2 at angle `theta` with conversion phase `phi`.

    lambda1 -> cos(theta) lambda1 + exp(i phi) sin(theta) lambda2
    lambda2 -> -exp(-i phi) sin(theta) lambda1 + cos(theta) lambda2
    """

    theta: float
    phi: float = 0.0

    def matrix(self) -> np.ndarray:
        """2x2 matrix in the (lambda1, lambda2) basis; columns are images."""
        c, s = np.cos(self.theta), np.sin(self.theta)
        e = np.exp(1j * self.phi)
        return np.array([[c, -np.conj(e) * s],
                         [e * s, c]], dtype=complex)

    def transmission(self) -> Tuple[complex, complex]:
        """Amplitudes for lambda1 and lambda2 inputs to leave as lambda2."""
        m = self.matrix()
        return m[1, 0], m[1, 1]


def apply_conversion(state: PhotonState, u: ConversionUnitary) -> PhotonState:
    """Apply the crystal unitary to the lambda1/lambda2 subspace of every mode."""
    _require_normalized(state)
    m = u.matrix()
    out = {}
    for (wl, mode), a in state.amplitudes.items():
        if wl == LAMBDA1:
            col = m[:, 0]
        elif wl == LAMBDA2:
            col = m[:, 1]
        else:
            out[(wl, mode)] = out.get((wl, mode), 0j) + a
            continue
        out[(LAMBDA1, mode)] = out.get((LAMBDA1, mode), 0j) + a * col[0]
        out[(LAMBDA2, mode)] = out.get((LAMBDA2, mode), 0j) + a * col[1]
    return PhotonState(out, state.success_probability)


def filter_project(state: PhotonState, keep: str = LAMBDA2):
    """Ideal wavelength filter: keep only labels with wavelength `keep`.

    Returns the renormalized state and the probability of passing. A state
    with no component at `keep` yields a null state and probability 0.
    """
    _require_normalized(state)
    kept = {k: a for k, a in state.amplitudes.items() if k[0] == keep}
    p = float(sum(abs(a) ** 2 for a in kept.values()))
    if p == 0.0:
        return PhotonState({}, 0.0, null=True), 0.0
    scale = 1.0 / np.sqrt(p)
    return PhotonState({k: a * scale for k, a in kept.items()}, state.success_probability * p), p


@dataclass(frozen=True)
class CoherentPump:
    mean_photons: float
    wavelength: float = float("nan")
    phase: float = 0.0

    def __post_init__(self):
        if not self.mean_photons >= 0:
            raise ValueError(f"mean photon number must be nonnegative, got {self.mean_photons}")


def pump_fidelity(pump: CoherentPump) -> float:
    """Overlap norm squared between the pump with one extra photon and the original."""
    return 1 - 1 / (1 + pump.mean_photons)


@dataclass(frozen=True)
class AmplitudeSet:
    """Source-to-detector propagators D_{1A}, D_{1B}, D_{2A}, D_{2B}."""

    d1a: complex
    d1b: complex
    d2a: complex
    d2b: complex

    def __post_init__(self):
        for name in ("d1a", "d1b", "d2a", "d2b"):
            v = complex(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
            if abs(v) > 1 + 1e-12:
                raise ValueError(f"|{name}| = {abs(v)} exceeds 1")
            object.__setattr__(self, name, v)

    @classmethod
    def from_phases(cls, phi1a, phi1b, phi2a, phi2b, magnitude=1 / np.sqrt(2)):
        return cls(*(magnitude * np.exp(1j * p) for p in (phi1a, phi1b, phi2a, phi2b)))


def hbt_coincidence(amps: AmplitudeSet, mode: str = "e2i2") -> float:
    """Coincidence probability for one photon from each of two sources.

    ``distinguishable`` keeps the two assignments apart; ``e2i2`` adds their
    interference term 2 Re(D1A D2B D2A* D1B*).
    """
    direct = abs(amps.d1a * amps.d2b) ** 2 + abs(amps.d2a * amps.d1b) ** 2
    if mode == "distinguishable":
        return float(direct)
    if mode == "e2i2":
        return float(direct + 2 * (amps.d1a * amps.d2b * np.conj(amps.d2a) * np.conj(amps.d1b)).real)
    raise ValueError(f"mode must be 'distinguishable' or 'e2i2', got {mode!r}")


def two_photon_filtered(amps: AmplitudeSet, u: ConversionUnitary, keep: str = LAMBDA2):
    """Run the two-photon HBT state through a converter and filter at each detector.

    Source 1 emits lambda1 and source 2 emits lambda2. Returns the probability
    that both detectors pass a photon (unnormalized norm squared of the
    projected two-photon state) and the projected amplitudes keyed by the
    (A label, B label) pair.
    """
    images = {wl: apply_conversion(PhotonState.basis(wl), u) for wl in (LAMBDA1, LAMBDA2)}
    paths = [((LAMBDA1, LAMBDA2), amps.d1a * amps.d2b),   # 1 -> A, 2 -> B
             ((LAMBDA2, LAMBDA1), amps.d2a * amps.d1b)]   # 2 -> A, 1 -> B
    out = {}
    for (wa, wb), d in paths:
        for la, aa in images[wa].amplitudes.items():
            for lb, ab in images[wb].amplitudes.items():
                out[(la, lb)] = out.get((la, lb), 0j) + d * aa * ab
    kept = {k: a for k, a in out.items() if k[0][0] == keep and k[1][0] == keep}
    return float(sum(abs(a) ** 2 for a in kept.values())), kept


def _require_two_crystal_input(state: PhotonState):
    allowed = {(LAMBDA1, 0), (LAMBDA2, 0)}
    extra = [k for k, a in state.amplitudes.items() if k not in allowed and abs(a) > 0]
    if extra:
        raise ValueError(f"two-crystal input must live on (lambda1,0) and (lambda2,0); got {extra}")


def two_crystal_evolve(state: PhotonState):
    """Staggered upconversion to lambda3 and post-selection on (|1> + |2>)/sqrt(2).

    Returns the renormalized (lambda3, 3) state and the post-selection
    probability.
    """
    _require_normalized(state)
    _require_two_crystal_input(state)
    a1 = state.amplitude(LAMBDA1, 0)   # -> (lambda3, 1)
    a2 = state.amplitude(LAMBDA2, 0)   # -> (lambda3, 2)
    overlap = (a1 + a2) / np.sqrt(2.0)
    p = float(abs(overlap) ** 2)
    if p == 0.0:
        return PhotonState({}, 0.0, null=True), 0.0
    return PhotonState({(LAMBDA3, 3): overlap / np.sqrt(p)}, state.success_probability * p), p


@dataclass(frozen=True)
class ReferencePhases:
    """Path phases for the reference-source method; every propagator has modulus 1/sqrt(2)."""

    phi_1a: float = 0.0
    phi_1b: float = 0.0
    phi_2a: float = 0.0
    phi_2b: float = 0.0
    phi_3a_red: float = 0.0
    phi_3b_red: float = 0.0
    phi_3a_blue: float = 0.0
    phi_3b_blue: float = 0.0

    def combination(self) -> float:
        return (self.phi_1a - self.phi_1b - self.phi_2a + self.phi_2b
                - self.phi_3a_red + self.phi_3b_red + self.phi_3a_blue - self.phi_3b_blue)


def reference_fourfold(phases: ReferencePhases) -> float:
    """Four-fold coincidence probability, 1/8 + cos(combination) / 8.

    Post-selection requires each detector to hold one red and one blue
    photon, so source 1 (red) and the reference red photon go to opposite
    detectors, as do source 2 (blue) and the reference blue photon.
    """
    return 0.125 + 0.125 * float(np.cos(phases.combination()))
