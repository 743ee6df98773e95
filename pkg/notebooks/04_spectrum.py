"""
Sideband spectrum and the enantiomer difference
===============================================

Demodulated powers of the eight sidebands, the Chern numbers read back from
the line powers, and the R - S difference spectrum.
"""

# %%
from enantio_tfc.dynamics import evolve_many
from enantio_tfc.model import bundled_config
from enantio_tfc.spectrum import (antisymmetry_error, chern_from_spectrum, difference_spectrum,
                                  sideband_powers)

cfg = bundled_config("propanediol_balanced").replace(tstar_periods=144)
runs = dict(zip("RS", evolve_many(cfg, ("R", "S"))))
spec = {e: sideband_powers(tr, cfg, e, 144) for e, tr in runs.items()}

for ln in spec["R"]:
    print(f"{ln.label:6s} f = {ln.frequency:.6e} a.u.  P_R = {ln.P_av:+.3e}")

for e, s in spec.items():
    q1, q2 = chern_from_spectrum(s, cfg.drive)
    print(f"{e}: q1 = {q1:+.4f}  q2 = {q2:+.4f}")

rows = difference_spectrum(spec["R"], spec["S"])
print("antisymmetry error", antisymmetry_error(rows))
