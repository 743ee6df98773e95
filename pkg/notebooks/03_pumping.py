"""
Quantized energy pumping between the two tones
==============================================

Equal-coupling preset, full ramp, 377 omega2 periods. The pumped quantity
q = 2 pi P21 / (omega1 omega2) is read at Fibonacci windows.
"""

# %%
from enantio_tfc.dynamics import evolve_many, fibonacci_windows, pumping_rate
from enantio_tfc.model import bundled_config

cfg = bundled_config("propanediol_balanced").replace(tstar_periods=377)
runs = dict(zip("RS", evolve_many(cfg, ("R", "S"))))

for e, tr in runs.items():
    for w in fibonacci_windows(cfg.tstar_periods):
        r = pumping_rate(tr, cfg, e, w)
        print(f"{e} window {w:4d}  q = {r.q:+.5f}  balance {r.balance:.1e}")

# %% time-averaged energy exchange with the first tone
import numpy as np

tr = runs["R"]
i = slice(tr.i_zero, None)
t = tr.t[i]
w1 = cfg.drive.omega1 * tr.acc[i, 0].real
print("E1(t*) / (omega1 omega2 t* / 2 pi) =", w1[-1] / (cfg.drive.omega1 * cfg.drive.omega2 * t[-1] / (2 * np.pi)))
