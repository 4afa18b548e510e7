"""
Periodized wavelet transforms
=============================

Analyse a noisy chirp with three filter families, check that the transform
is orthonormal, and look at where the energy lands.
"""

import numpy as np

from wavshrink import DAUB4, DAUB8, HAAR, dwt, idwt

n = 1024
t = np.arange(n) / n
x = np.sin(2 * np.pi * 40 * t**2) + 0.1 * np.random.default_rng(0).standard_normal(n)

for fam in (HAAR, DAUB4, DAUB8):
    coeffs = dwt(x, fam)
    back = idwt(coeffs, fam)
    energy = (coeffs.flatten() ** 2).sum()
    print(f"{fam.name:6s} taps={len(fam)}  recon err={np.abs(back - x).max():.1e}  "
          f"energy ratio={energy / (x**2).sum():.12f}")

# Energy per level, coarse to fine: the chirp sweeps through the mid levels.
coeffs = dwt(x, DAUB8)
for j in coeffs.levels:
    print(f"level {j:2d}  {np.sum(coeffs.detail(j) ** 2):8.3f}")

# A pyramid flattens to one vector in coarse-to-fine order and back again.
flat = coeffs.flatten()
assert np.array_equal(type(coeffs).unflatten(flat).flatten(), flat)
