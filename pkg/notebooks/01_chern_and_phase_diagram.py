"""
Band topology over the drive-phase torus
========================================

Lattice Chern numbers of the three bright bands for both enantiomers, then a
coarse (m, delta) sweep of the lower band.
"""

# %%
import numpy as np

from enantio_tfc.model import bundled_config
from enantio_tfc.topology import chern_numbers, default_sweep, phase_diagram

cfg = bundled_config("propanediol")
for e in ("R", "S"):
    for N in (8, 40, 80):
        CL, CM, CU, gap = chern_numbers(cfg, e, N)
        print(f"{e} N={N:3d}  C=({CL:+d}, {CM:+d}, {CU:+d})  min gap {gap:.3g} a.u.")

# %% coarse phase diagram, lower band of R
m, d = default_sweep(cfg)
m, d = m[::3], d[::4]
cells = phase_diagram(cfg, m, d, "R", N=24)
grid = np.array([np.nan if c.boundary else c.C_L for c in cells]).reshape(len(m), len(d))

print("m      " + " ".join(f"{x:+.1e}"[:6] for x in d))
for mv, row in zip(m, grid):
    print(f"{mv:+.2f}  " + " ".join("  .   " if np.isnan(c) else f"{int(c):+3d}   " for c in row))

# %% optional figure
try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.pcolormesh(d, m, grid, shading="nearest", cmap="RdBu", vmin=-2, vmax=2)
    ax.set_xlabel("delta (a.u.)")
    ax.set_ylabel("m")
    fig.colorbar(im, label="C_L (R)")
    fig.savefig("phase_diagram_R.png", dpi=120)
