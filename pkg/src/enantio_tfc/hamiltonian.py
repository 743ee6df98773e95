"""Lab-frame, rotating-frame and effective spin-1 Hamiltonians.

Basis order for 4x4 objects is |1,0>, |2,+1>, |2,-1>, |3,0>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Enantiomer, carrier_frequencies, dipole_matrix_elements, envelopes

SQ2 = math.sqrt(2.0)
SQ3 = math.sqrt(3.0)

# spin-1 matrices in the |+1>, |0>, |-1> ordering used by the effective model
LX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / SQ2
LY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / SQ2
LZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
LP = LX + 1j * LY
LM = LX - 1j * LY

# antisymmetric M=+-1 combination that no drive couples to
DARK = np.array([0.0, 1.0 / SQ2, -1.0 / SQ2, 0.0], dtype=complex)

# isometry from the coupled (bright) 3-space into the 4-state basis
BRIGHT = np.array([[1, 0, 0],
                   [0, 1 / SQ2, 0],
                   [0, 1 / SQ2, 0],
                   [0, 0, 1]], dtype=complex)


def _stack(shape, dtype=complex):
    return np.zeros(tuple(shape) + (4, 4), dtype=dtype)


def _h4_from_envelopes(e21, e32, e31, mu, delta):
    mu_a, mu_b, mu_c = mu
    e21, e32, e31 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (e21, e32, e31)))
    a = -mu_b / math.sqrt(6.0) * e21
    b = -mu_a / (2 * SQ2) * e32
    c = -1j * mu_c / SQ3 * e31
    h = _stack(a.shape)
    h[..., 0, 0] = -2 * delta
    h[..., 3, 3] = 2 * delta
    for k in (1, 2):
        h[..., 0, k] = h[..., k, 0] = a
        h[..., k, 3] = h[..., 3, k] = b
    h[..., 0, 3] = c
    h[..., 3, 0] = np.conj(c)
    return 0.5 * h


def rotating_h4(p, cfg, e, scale=1.0):
    """Rotating-frame Hamiltonian at torus point ``p``.

    ``p`` may hold arrays of angles, in which case a stack of matrices is
    returned. ``scale`` multiplies every envelope (the preparation ramp).
    """
    e21, e32, e31 = envelopes(p, cfg.drive)
    s = np.asarray(scale, dtype=float)
    mu = cfg.molecule.dipoles(e)
    return _h4_from_envelopes(s * e21, s * e32, s * e31, mu, cfg.drive.delta)


def dh4_dtheta(p, cfg, e, scale=1.0):
    """Analytic derivatives (dH4/dtheta1, dH4/dtheta2) at ``p``."""
    t1, t2 = (np.asarray(x, dtype=float) for x in p)
    d = cfg.drive
    s = np.asarray(scale, dtype=float)
    mu = cfg.molecule.dipoles(e)
    zero = np.zeros(np.broadcast(t1, t2).shape)
    # the 2*delta diagonal is independent of theta
    h1 = _h4_from_envelopes(s * d.E21 * np.cos(t1) + zero, zero, s * d.E31 * np.sin(t1) + zero, mu, 0.0)
    h2 = _h4_from_envelopes(zero, s * d.E32 * np.cos(t2) + zero, s * d.E31 * np.sin(t2) + zero, mu, 0.0)
    return h1, h2


def effective_h3(p, cfg, e):
    """Effective spin-1 Hamiltonian on the three coupled states."""
    e21, e32, e31 = envelopes(p, cfg.drive)
    mu_a, mu_b, mu_c = cfg.molecule.dipoles(e)
    cx = -mu_b * np.asarray(e21) / (2 * SQ3)
    cy = -mu_a * np.asarray(e32) / 4.0
    cz = mu_c * np.asarray(e31) / (2 * SQ3)
    cx, cy, cz = (np.asarray(x)[..., None, None] for x in (cx, cy, cz))
    return cx * LX + cy * LY + cz * LZ - cfg.drive.delta / 2.0 * (LP @ LP + LM @ LM)


def bright_h3(p, cfg, e, scale=1.0):
    """Rotating-frame Hamiltonian restricted to the bright subspace, B^H H4 B."""
    h = rotating_h4(p, cfg, e, scale)
    return BRIGHT.conj().T @ h @ BRIGHT


@dataclass(frozen=True)
class FrameTransform:
    t: float
    phases: np.ndarray
    omega21: float
    omega32: float
    omega31: float

    @property
    def matrix(self):
        return np.diag(np.exp(-1j * self.phases))

    def to_lab(self, psi_rot):
        return np.exp(-1j * self.phases) * np.asarray(psi_rot)

    def to_rot(self, psi_lab):
        return np.exp(1j * self.phases) * np.asarray(psi_lab)


def frame_rates(cfg):
    """Angular rates u_i with U(t) = diag(exp(-i u_i t))."""
    mol = cfg.molecule
    o21, o32, _ = carrier_frequencies(mol, cfg.drive)
    e2 = mol.eps21
    return np.array([e2 - o21, e2, e2, e2 + o32])


def frame_transform(t, cfg):
    o21, o32, o31 = carrier_frequencies(cfg.molecule, cfg.drive)
    return FrameTransform(float(t), frame_rates(cfg) * t, o21, o32, o31)


def lab_hamiltonian(t, cfg, e, theta=None, scale=1.0):
    """Lab-frame RWA Hamiltonian at time ``t``.

    By default the drive phases are theta_i = omega_i t and the envelopes are
    unscaled; pass ``theta`` and ``scale`` to evaluate along a ramped path.
    """
    d = cfg.drive
    if theta is None:
        theta = (d.omega1 * t, d.omega2 * t)
    e21, e32, e31 = (scale * x for x in envelopes(theta, d))
    o21, o32, o31 = carrier_frequencies(cfg.molecule, d)
    mu = dipole_matrix_elements(cfg.molecule, e)
    mol = cfg.molecule
    h = np.diag([0.0, mol.eps21, mol.eps21, mol.eps31]).astype(complex)
    for k in (1, 2):
        v = -e21 * 1j * mu[(k, 0)] * np.exp(-1j * o21 * t) / 2
        h[k, 0] += v
        h[0, k] += np.conj(v)
        v = -e32 * mu[(3, k)] * np.exp(-1j * o32 * t) / 2
        h[3, k] += v
        h[k, 3] += np.conj(v)
    v = -e31 * mu[(3, 0)] * np.exp(-1j * o31 * t) / 2
    h[3, 0] += v
    h[0, 3] += np.conj(v)
    return h


def lab_dipole_operator(cfg, e):
    """Hermitian transition-dipole operator on the working states."""
    mu = dipole_matrix_elements(cfg.molecule, e)
    d = np.zeros((4, 4), dtype=complex)
    for (i, j), v in mu.items():
        d[i, j] = v
        d[j, i] = np.conj(v)
    return d
