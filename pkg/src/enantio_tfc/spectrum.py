"""Lab-frame sideband powers, Chern numbers recovered from them, and R - S differences.

Each of the three transitions radiates at its carrier Omega_ij shifted by
the modulation tones. The slow coherences of the rotating-frame state are
demodulated against exp(-+i theta_k) inside the integrator, so the carrier
itself is never sampled. For a sideband at Omega_ij +- omega_k the photon
rate absorbed from that line is n = <dH/d(phase of the line)> averaged over
the window, and the line power is P_av = Omega_line * n.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import FIBONACCI
from .errors import ConfigError, WindowError
from .model import AU_POWER, Enantiomer, carrier_frequencies

MIN_WINDOW = 144

# (carrier, tone, sign, accumulator index, coupling kind)
_LINES = (
    ("21", 1, +1, 2),
    ("21", 1, -1, 3),
    ("31", 1, +1, 4),
    ("31", 1, -1, 5),
    ("32", 2, +1, 6),
    ("32", 2, -1, 7),
    ("31", 2, +1, 8),
    ("31", 2, -1, 9),
)


@dataclass(frozen=True)
class SidebandLine:
    carrier: str
    tone: int
    sign: int
    frequency: float
    P_av: float

    @property
    def sideband(self):
        return f"{'+' if self.sign > 0 else '-'}w{self.tone}"

    @property
    def label(self):
        return f"{self.carrier}{'+' if self.sign > 0 else '-'}{self.tone}"

    @property
    def photon_rate(self):
        return self.P_av / self.frequency


@dataclass(frozen=True)
class SidebandSpectrum:
    lines: tuple
    window_periods: float
    enantiomer: Enantiomer | None = None
    warnings: tuple = field(default=())

    def __iter__(self):
        return iter(self.lines)

    def __len__(self):
        return len(self.lines)

    def __getitem__(self, k):
        if isinstance(k, str):
            for ln in self.lines:
                if ln.label == k:
                    return ln
            raise KeyError(k)
        return self.lines[k]


def line_frequencies(cfg):
    o21, o32, o31 = carrier_frequencies(cfg.molecule, cfg.drive)
    base = {"21": o21, "32": o32, "31": o31}
    w = {1: cfg.drive.omega1, 2: cfg.drive.omega2}
    return [base[c] + s * w[k] for c, k, s, _ in _LINES]


def sideband_powers(traj, cfg, e=None, window_periods=None):
    """Time-averaged power carried by each of the eight sidebands over [0, T]."""
    e = traj.enantiomer if e is None else Enantiomer.parse(e)
    d = cfg.drive
    if window_periods is None:
        avail = (traj.t[-1]) / d.period2 if traj.i_zero >= 0 else 0.0
        window_periods = min(cfg.tstar_periods, math.floor(avail + 1e-9))
    if window_periods < MIN_WINDOW:
        raise WindowError(f"sideband demodulation needs at least {MIN_WINDOW} omega2 periods, "
                          f"got {window_periods}")
    notes = []
    if window_periods not in FIBONACCI:
        msg = f"window of {window_periods} periods is not a Fibonacci number"
        notes.append(msg)
        warnings.warn(msg, stacklevel=2)
    i = traj.index_at_periods(window_periods, d.period2)
    T = traj.t[i]
    mu_a, mu_b, mu_c = cfg.molecule.dipoles(e)
    # prefactors of Re(integral) for each line, from d/d(phase) of the RWA couplings
    k21 = mu_b / math.sqrt(6.0) * d.E21 / 2
    k32 = mu_a / (2 * math.sqrt(2.0)) * d.E32 / 2
    k31 = mu_c * d.E31 / (2 * math.sqrt(3.0))
    pref = {("21", +1): -k21, ("21", -1): k21, ("32", +1): -k32, ("32", -1): k32,
            ("31", +1): -k31, ("31", -1): -k31}
    freqs = line_frequencies(cfg)
    lines = []
    for (c, k, s, idx), f in zip(_LINES, freqs):
        n = pref[(c, s)] * traj.acc[i, idx].real / T
        lines.append(SidebandLine(c, k, s, float(f), float(f * n)))
    return SidebandSpectrum(tuple(lines), float(window_periods), e, tuple(notes))


def tone_photon_rates(lines):
    """P(omega_k) / omega_k for k = 1, 2 from the line photon rates."""
    by = {ln.label: ln for ln in lines}
    need = [f"{c}{'+' if s > 0 else '-'}{k}" for c, k, s, _ in _LINES]
    missing = [lab for lab in need if lab not in by]
    if missing:
        raise ValueError(f"missing sideband line(s): {', '.join(missing)}")
    r = {1: 0.0, 2: 0.0}
    for lab in need:
        ln = by[lab]
        r[ln.tone] += ln.sign * ln.photon_rate
    return r[1], r[2]


def chern_from_spectrum(lines, drive):
    """Dimensionless q_k = 2 pi P(omega_k) / (omega1 omega2) from the eight lines."""
    n1, n2 = tone_photon_rates(lines)
    w1, w2 = drive.omega1, drive.omega2
    return 2 * math.pi * n1 * w1 / (w1 * w2), 2 * math.pi * n2 * w2 / (w1 * w2)


def family_balance(lines, drive):
    """|P(omega1) + P(omega2)| / |P(omega1)|: energy taken from one tone is given to the other."""
    n1, n2 = tone_photon_rates(lines)
    p1, p2 = n1 * drive.omega1, n2 * drive.omega2
    return abs(p1 + p2) / abs(p1) if p1 != 0 else 0.0


def net_converted_power(lines, tone=1):
    """|sum over one tone's lines of sign * P_av|, the carrier-level power moved between sidebands."""
    return abs(sum(ln.sign * ln.P_av for ln in lines if ln.tone == tone))


def intensity_per_molecule(power_au, beam_area=1e-4):
    """Convert a per-molecule power in a.u. to W m^-2 over ``beam_area`` (m^2)."""
    return power_au * AU_POWER / beam_area


@dataclass(frozen=True)
class DifferenceRow:
    label: str
    carrier: str
    sideband: str
    frequency: float
    P_R: float
    P_S: float

    @property
    def diff(self):
        return self.P_R - self.P_S


def difference_spectrum(lines_R, lines_S, rtol=1e-12):
    """Frequency-aligned merge of two line sets; ``diff`` is the enantioselective signal."""
    lr = list(lines_R)
    ls = list(lines_S)
    if len(lr) != len(ls):
        raise ConfigError("line sets have different sizes")
    by_s = {ln.label: ln for ln in ls}
    rows = []
    for a in lr:
        b = by_s.get(a.label)
        if b is None or abs(a.frequency - b.frequency) > rtol * abs(a.frequency):
            raise ConfigError(f"line {a.label} does not match between the two runs")
        rows.append(DifferenceRow(a.label, a.carrier, a.sideband, a.frequency, a.P_av, b.P_av))
    return rows


def antisymmetry_error(rows):
    """max |P_R + P_S| / max |P_R|: zero when the S spectrum mirrors the R spectrum."""
    scale = max(abs(r.P_R) for r in rows)
    if scale == 0:
        return 0.0
    return max(abs(r.P_R + r.P_S) for r in rows) / scale


def spectrum_rows(lines_R=None, lines_S=None):
    """CSV text: carrier,sideband,frequency_au,P_av_R_au,P_av_S_au,diff_au (columns of absent runs dropped)."""
    if lines_R is not None and lines_S is not None:
        out = ["carrier,sideband,frequency_au,P_av_R_au,P_av_S_au,diff_au"]
        for r in difference_spectrum(lines_R, lines_S):
            out.append(f"{r.carrier},{r.sideband},{r.frequency:.17e},{r.P_R:.17e},{r.P_S:.17e},{r.diff:.17e}")
    else:
        lines = lines_R if lines_R is not None else lines_S
        tag = "R" if lines_R is not None else "S"
        out = [f"carrier,sideband,frequency_au,P_av_{tag}_au"]
        for ln in lines:
            out.append(f"{ln.carrier},{ln.sideband},{ln.frequency:.17e},{ln.P_av:.17e}")
    return "\n".join(out) + "\n"


def plot_spectrum(path, lines_R=None, lines_S=None, cfg=None):
    """Stem plot of line powers against detuning from each carrier (SVG)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 3.5))
    for lines, mark, lab in ((lines_R, "o", "R"), (lines_S, "s", "S")):
        if lines is None:
            continue
        x = np.arange(len(lines)) + (0.1 if lab == "S" else -0.1)
        y = [ln.P_av for ln in lines]
        ax.vlines(x, 0, y, lw=1)
        ax.plot(x, y, mark, label=lab)
        ax.set_xticks(np.arange(len(lines)), [ln.label for ln in lines])
    ax.axhline(0, color="k", lw=0.5)
    ax.set_ylabel("P_av (a.u.)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
