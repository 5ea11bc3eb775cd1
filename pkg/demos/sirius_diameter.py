"""Measure the angular size of Sirius from the fall-off of its correlation curve.

A uniform disc gives G2 = 1 + |2 J1(z)/z|^2 with z = pi * theta * rho / lambda.
The curve starts at 2 for coincident detectors and settles to 1; the first
zero of the envelope fixes theta.
"""

import numpy as np

from e2i2 import bundled, correlation_curve, estimate_diameter, histogram_to_curve, run_trials

scenario = bundled("sirius")
(star,) = scenario.build_sources()
print(f"Sirius: radius {star.radius:.3g} m at {star.distance:.4g} m, lambda {star.wavelength * 1e9:.0f} nm")
print(f"true angular diameter 2a/L = {star.angular_diameter:.5e} rad")

curve = correlation_curve([star], scenario.separations(), "single")
for rho in (0.0, 2.5, 5.0, 7.25, 10.0, 20.0):
    i = int(np.argmin(np.abs(curve.separation - rho)))
    print(f"  G2({curve.separation[i]:5.2f} m) = {curve.value[i]:.6f}")

est = estimate_diameter(curve, star.wavelength)
print(f"\nnoiseless estimate: theta = {est.angular_diameter:.5e} rad, "
      f"first zero at {est.first_zero:.4f} m")

# the same measurement with simulated photon counts
tally = run_trials(scenario, n_trials=200_000, seed=1, variant="single")
noisy = histogram_to_curve(tally)
est = estimate_diameter(noisy, star.wavelength)
print(f"from 2e5 photon pairs per baseline: theta = {est.angular_diameter:.5e} "
      f"+/- {est.uncertainty:.1e} rad")
