"""
Where adiabatic following breaks down
=====================================

The non-adiabaticity ratio max omega |<m|dH|L>| / gap^2 for the literal and
equal-coupling sets, and the pumped q against a slower drive.
"""

# %%
from enantio_tfc.dynamics import evolve, pumping_rate
from enantio_tfc.model import bundled_config
from enantio_tfc.topology import nonadiabaticity

for name in ("propanediol", "propanediol_balanced"):
    cfg = bundled_config(name)
    eta, at = nonadiabaticity(cfg, "R")
    print(f"{name}: eta = {eta:.3g} at theta = {at}")

# %% literal couplings, 144 periods
cfg = bundled_config("propanediol").replace(tstar_periods=144)
tr = evolve(cfg, "R")
print("literal q(144) =", pumping_rate(tr, cfg, "R", 144).q)
