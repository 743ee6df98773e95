"""
Adiabatic preparation of the lower band
=======================================

Ramp the couplings on from |1,0> and watch the band populations. The
equal-coupling preset prepares the lower band cleanly; the literal couplings
lose weight at the final approach to theta = (0, 0).
"""

# %%
import numpy as np

from enantio_tfc.dynamics import band_populations, evolve
from enantio_tfc.model import bundled_config

for name in ("propanediol_balanced", "propanediol"):
    cfg = bundled_config(name).replace(tstar_periods=5)
    tr = evolve(cfg, "R", samples_per_period=16)
    bp = band_populations(tr, cfg)
    i0 = tr.i_zero
    print(f"{name}: L(0) = {bp.L[i0]:.4f}  M(0) = {bp.M[i0]:.2e}  dark max = {bp.dark.max():.1e}")
    # population history through the ramp
    for k in np.linspace(0, i0, 6).astype(int):
        print(f"   t = {tr.t[k]:+.3e}  alpha = {tr.alpha[k]:.3f}  L = {bp.L[k]:.4f}")
