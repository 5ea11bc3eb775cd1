"""Three ways to make a red and a blue photon interfere.

1. A crystal that mixes the two colors, followed by a filter.
2. Two crystals that convert both colors to a third one in different
   time bins, followed by a post-selection on their symmetric superposition.
3. An entangled red/blue reference pair, with four-fold coincidences.
"""

import numpy as np

from e2i2 import (
    AmplitudeSet,
    ConversionUnitary,
    PhotonState,
    ReferencePhases,
    hbt_coincidence,
    pump_fidelity,
    CoherentPump,
    reference_fourfold,
    two_crystal_evolve,
    two_photon_filtered,
)
from e2i2.conversion import LAMBDA1, LAMBDA2

amps = AmplitudeSet.from_phases(0.0, 0.4, 1.3, -0.2)
print("single crystal, theta = pi/4")
print(f"  standard detectors:     P = {hbt_coincidence(amps, 'distinguishable'):.4f}")
print(f"  with interference term: P = {hbt_coincidence(amps, 'e2i2'):.4f}")
p, _ = two_photon_filtered(amps, ConversionUnitary(np.pi / 4))
print(f"  after conversion + filter at both detectors: P = {p:.4f} (a quarter of the above)")

print("\ntwo crystals: post-selection probability against the input phase")
for delta in np.linspace(0, np.pi, 5):
    state = PhotonState.superposition({(LAMBDA1, 0): 1.0, (LAMBDA2, 0): np.exp(1j * delta)})
    _, p = two_crystal_evolve(state)
    print(f"  delta = {delta:.3f}: {p:.4f}")

print("\nreference pair: four-fold coincidence against the path-phase combination")
for phase in np.linspace(0, np.pi, 5):
    print(f"  {phase:.3f}: {reference_fourfold(ReferencePhases(phi_1a=phase)):.4f}")

print("\nthe pump is treated as unchanged by one photon; the overlap is")
for n in (1, 100, 1e6):
    print(f"  <n> = {n:g}: {pump_fidelity(CoherentPump(n)):.8f}")
