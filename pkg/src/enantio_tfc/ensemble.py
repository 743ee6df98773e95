"""Ensemble pumping signal and a shot-noise estimate of the detection limit.

The noise estimate is built from textbook relations (intensity of a plane
wave, photon counting statistics); its outputs are order-of-magnitude
estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParametersError
from .model import AU_POWER, BOHR, C_AU, EPS0_AU, carrier_frequencies

AVOGADRO = 6.02214076e23


@dataclass(frozen=True)
class EnsembleSpec:
    N_R: float
    N_S: float
    beam_area: float = 1e-4     # m^2
    t_star: float = 0.0         # a.u.

    def __post_init__(self):
        if self.N_R < 0 or self.N_S < 0:
            raise InvalidParametersError("molecule counts must be non-negative")

    @property
    def excess(self):
        return self.N_R - self.N_S


@dataclass(frozen=True)
class EnsemblePumping:
    power: float          # a.u.
    excess: float         # |N_R - N_S|
    chirality: int        # sign of N_R - N_S


def ensemble_pumping(spec, C_L_R, drive):
    """Net pumping rate omega1 omega2 C_L^R (N_R - N_S) / (2 pi)."""
    d = spec.N_R - spec.N_S
    p = drive.omega1 * drive.omega2 * C_L_R / (2 * math.pi) * d + 0.0   # no signed zero
    return EnsemblePumping(p, abs(d), int((d > 0) - (d < 0)))


@dataclass(frozen=True)
class NoiseEstimate:
    photons: float                # N
    noise: float                  # sqrt(N)
    per_molecule: float           # smallest sideband photon change per molecule over t*
    threshold: float              # minimum detectable |N_R - N_S|
    field: str                    # which amplitude fed the photon budget
    intensity_w_m2: float


def photon_count(drive, mol, beam_area, t_star, which=None):
    """Photons of one drive field crossing ``beam_area`` in ``t_star``."""
    amps = {"21": drive.E21, "32": drive.E32, "31": drive.E31}
    if which is None:
        which = max(amps, key=amps.get)
    E = amps[which]
    if E <= 0:
        raise InvalidParametersError("field amplitude is zero; shot noise undefined")
    o21, o32, o31 = carrier_frequencies(mol, drive)
    omega = {"21": o21, "32": o32, "31": o31}[which]
    intensity = EPS0_AU * C_AU * E * E / 2            # a.u. power per a.u. area
    area = beam_area / BOHR ** 2
    n = intensity * area * t_star / omega
    return n, which, intensity


def shot_noise_limit(spec, drive, mol, lines, which=None):
    """Photon count, its shot noise, and the minimum detectable enantiomeric excess."""
    if spec.beam_area <= 0 or spec.t_star <= 0:
        raise InvalidParametersError("beam_area and t_star must be positive")
    n, which, intensity = photon_count(drive, mol, spec.beam_area, spec.t_star, which)
    per = min(abs(ln.P_av * spec.t_star / ln.frequency) for ln in lines)
    noise = math.sqrt(n)
    thr = noise / per if per > 0 else math.inf
    i_si = intensity * AU_POWER / BOHR ** 2
    return NoiseEstimate(n, noise, per, thr, which, i_si)


def ee_limit_percent(threshold, volume_l=1e-3, concentration_molar=1e-6):
    """Detection threshold as a percentage of all molecules in the sample."""
    total = AVOGADRO * volume_l * concentration_molar
    return 100.0 * threshold / total


def detectable(spec, estimate):
    return abs(spec.excess) >= estimate.threshold
