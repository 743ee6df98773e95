"""
Ensemble signal and shot-noise limit
====================================

Net pumped power for an enantiomeric excess, and the photon-counting
estimate of the smallest detectable excess.
"""

# %%
import math

from enantio_tfc.ensemble import EnsembleSpec, ee_limit_percent, ensemble_pumping, shot_noise_limit
from enantio_tfc.model import bundled_config
from enantio_tfc.spectrum import SidebandLine, line_frequencies

cfg = bundled_config("propanediol")
d = cfg.drive
for nr, ns in ((1e10, 1e10), (1e10 + 1e8, 1e10)):
    p = ensemble_pumping(EnsembleSpec(nr, ns), -2, d)
    print(f"N_R - N_S = {nr - ns:.1e}  P = {p.power:+.4e} a.u.")
print("reference -omega1 omega2 / pi * 1e8 =", -d.omega1 * d.omega2 / math.pi * 1e8)

# %% noise budget with a flat illustrative line set
labels = [("21", 1, 1), ("21", 1, -1), ("31", 1, 1), ("31", 1, -1),
          ("32", 2, 1), ("32", 2, -1), ("31", 2, 1), ("31", 2, -1)]
lines = [SidebandLine(c, k, s, f, 1e-19) for (c, k, s), f in zip(labels, line_frequencies(cfg))]
est = shot_noise_limit(EnsembleSpec(1e8, 0, t_star=cfg.t_star), d, cfg.molecule, lines)
print(f"photons N = {est.photons:.3g}, sqrt(N) = {est.noise:.3g}")
print(f"photons per molecule {est.per_molecule:.3g}, threshold {est.threshold:.3g}")
print(f"EE limit {ee_limit_percent(est.threshold):.3g} % of 1 mL at 1 uM")
