"""Adiabatic bands over the drive torus, Berry curvature and Chern numbers.

Sign convention: the Berry curvature of a band |u> is
F = -2 Im <d1 u|d2 u> and C = (1/2 pi) * integral of F over the torus.
With this choice the adiabatic response reads
<d1 H> = d1 eps - omega2 F and <d2 H> = d2 eps + omega1 F, and the
pumping rate from tone 2 to tone 1 equals omega1 omega2 C / (2 pi).
On the lattice the overlap loop around a plaquette carries the phase -F,
hence the minus sign in ``_lattice_flux``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryError, GapClosingError
from .hamiltonian import LX, LY, LZ, bright_h3, effective_h3
from .model import TorusPoint, coupling_strengths

BANDS = ("L", "M", "U")
BOUNDARY_TOL = 1e-9
DEGENERACY_TOL = 1e-6
# a band gap below this fraction of ||H|| means the eigenvectors are not defined
SINGULAR_GAP = 1e-10


def _hamiltonian(form):
    if form == "effective":
        return effective_h3
    if form == "rotating":
        return bright_h3
    raise ValueError(f"unknown form {form!r}; expected 'effective' or 'rotating'")


def _fix_gauge(vecs):
    """Make the largest-magnitude component of every eigenvector real and positive."""
    idx = np.argmax(np.abs(vecs), axis=-2)
    lead = np.take_along_axis(vecs, idx[..., None, :], axis=-2)
    return vecs * (np.abs(lead) / lead)


def band_decomposition(p, cfg, e, form="effective"):
    """Energies (ascending: L, M, U) and gauge-fixed eigenvectors at ``p``.

    Works on scalar or array angles. Returns ``(energies, vectors, degenerate)``
    where ``vectors[..., :, l]`` is band l and ``degenerate`` flags points whose
    smallest gap is below 1e-6 of the matrix norm.
    """
    h = _hamiltonian(form)(p, cfg, e)
    w, v = np.linalg.eigh(h)
    v = _fix_gauge(v)
    norm = np.max(np.abs(w), axis=-1)
    gap = np.min(np.diff(w, axis=-1), axis=-1)
    degenerate = gap < DEGENERACY_TOL * np.where(norm > 0, norm, 1.0)
    return w, v, degenerate


def torus_grid(N):
    th = 2 * math.pi * np.arange(N) / N
    return np.meshgrid(th, th, indexing="ij")


@dataclass(frozen=True)
class BandData:
    N: int
    energies: np.ndarray       # (N, N, 3)
    vectors: np.ndarray        # (N, N, 3, 3), column l is band l
    curvature: np.ndarray      # (N, N, 3) lattice flux per plaquette
    chern: tuple               # (C_L, C_M, C_U)
    min_gap: float
    gaps: np.ndarray = field(repr=False, default=None)  # (N, N, 2): M-L and U-M

    @property
    def C_L(self):
        return self.chern[0]

    @property
    def C_M(self):
        return self.chern[1]

    @property
    def C_U(self):
        return self.chern[2]


def _lattice_flux(v):
    """Plaquette Berry flux for every band from link variables on a periodic grid."""
    def link(axis):
        ov = np.einsum("...il,...il->...l", v.conj(), np.roll(v, -1, axis=axis))
        return ov
    u1 = link(0)
    u2 = link(1)
    n1 = np.abs(u1)
    n2 = np.abs(u2)
    loop = u1 * np.roll(u2, -1, axis=0) * np.roll(u1, -1, axis=1).conj() * u2.conj()
    return -np.angle(loop), min(n1.min(), n2.min())


def band_data(cfg, e, N=40, form="effective"):
    """Full band structure on an N x N torus grid with lattice Chern numbers.

    Raises GapClosingError naming a torus point when the grid cannot resolve
    the topology (touching bands, vanishing link or a plaquette flux of pi).
    """
    if N < 8:
        raise ValueError("grid size must be at least 8")
    t1, t2 = torus_grid(N)
    h = _hamiltonian(form)((t1, t2), cfg, e)
    w, v = np.linalg.eigh(h)
    v = _fix_gauge(v)
    gaps = np.diff(w, axis=-1)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    min_gap = float(gaps.min())
    if min_gap <= SINGULAR_GAP * scale:
        i, j = np.unravel_index(np.argmin(gaps.min(axis=-1)), gaps.shape[:2])
        th = TorusPoint(float(t1[i, j]), float(t2[i, j]))
        raise GapClosingError(f"bands touch at theta=({th.theta1:.6g}, {th.theta2:.6g})", th)
    flux, min_link = _lattice_flux(v)
    if min_link <= BOUNDARY_TOL:
        raise GapClosingError("zero-norm link variable on the grid")
    bad = np.abs(flux) >= math.pi - BOUNDARY_TOL
    if bad.any():
        i, j = np.argwhere(bad.any(axis=-1))[0]
        th = TorusPoint(float(t1[i, j]), float(t2[i, j]))
        raise GapClosingError(
            f"plaquette flux reaches pi at theta=({th.theta1:.6g}, {th.theta2:.6g})", th)
    raw = flux.sum(axis=(0, 1)) / (2 * math.pi)
    chern = tuple(int(round(x)) for x in raw)
    if max(abs(raw - np.array(chern))) > 1e-6:
        raise GapClosingError(f"non-integer lattice sum {raw}")
    return BandData(N, w, v, flux, chern, min_gap, gaps)


def chern_numbers(cfg, e, N=40, form="effective"):
    """(C_L, C_M, C_U, min_gap) from the lattice link method."""
    bd = band_data(cfg, e, N, form)
    return (*bd.chern, bd.min_gap)


def expected_chern(m, ks_sign):
    """Lower-band Chern number predicted at zero detuning."""
    for b in (0.0, 2.0):
        if abs(abs(m) - b) <= BOUNDARY_TOL:
            raise BoundaryError(f"m={m} sits on a phase boundary")
    if abs(m) < 2:
        return int(-2 * np.sign(m) * ks_sign)
    return 0


def torus_average(samples):
    """Grid mean, the discrete counterpart of the normalized torus integral."""
    return float(np.mean(samples))


# ----------------------------------------------------------------- curvature

def h3_derivatives(p, cfg, e, form="effective"):
    """Analytic dH/dtheta1 and dH/dtheta2 of the chosen 3x3 form."""
    t1, t2 = (np.asarray(x, dtype=float) for x in p)
    d = cfg.drive
    mu_a, mu_b, mu_c = cfg.molecule.dipoles(e)
    s3 = math.sqrt(3.0)
    zero = np.zeros(np.broadcast(t1, t2).shape)
    c1 = (-mu_b * d.E21 * np.cos(t1) / (2 * s3) + zero, zero, mu_c * d.E31 * np.sin(t1) / (2 * s3) + zero)
    c2 = (zero, -mu_a * d.E32 * np.cos(t2) / 4 + zero, mu_c * d.E31 * np.sin(t2) / (2 * s3) + zero)
    if form == "effective":
        ops = (LX, LY, LZ)
        return tuple(sum(np.asarray(c)[..., None, None] * op for c, op in zip(cs, ops)) for cs in (c1, c2))
    if form == "rotating":
        # bright block: [[-d, x, -iz], [x, 0, y], [iz, y, d]] with x, y, z the effective-form weights
        out = []
        for cx, cy, cz in (c1, c2):
            m = np.zeros(cx.shape + (3, 3), dtype=complex)
            m[..., 0, 1] = m[..., 1, 0] = cx
            m[..., 1, 2] = m[..., 2, 1] = cy
            m[..., 0, 2] = -1j * cz
            m[..., 2, 0] = 1j * cz
            out.append(m)
        return tuple(out)
    raise ValueError(form)


def berry_curvature(p, cfg, e, band=0, form="effective"):
    """Continuous Berry curvature of ``band`` from the sum-over-states formula."""
    h = _hamiltonian(form)(p, cfg, e)
    w, v = np.linalg.eigh(h)
    d1, d2 = h3_derivatives(p, cfg, e, form)
    vh = np.conj(np.swapaxes(v, -1, -2))
    m1 = vh @ d1 @ v
    m2 = vh @ d2 @ v
    f = np.zeros(np.shape(w)[:-1])
    for k in range(3):
        if k == band:
            continue
        de = w[..., band] - w[..., k]
        f = f - 2 * np.imag(m1[..., band, k] * m2[..., k, band]) / de ** 2
    return f


def berry_curvature_fd(p, cfg, e, band=0, form="effective", step=1e-4):
    """Berry curvature F = i Tr(P [d1 P, d2 P]) with central differences of the projector."""
    t1, t2 = (float(x) for x in p)

    def proj(a, b):
        _, v, _ = band_decomposition((a, b), cfg, e, form)
        u = v[:, band]
        return np.outer(u, u.conj())

    P = proj(t1, t2)
    d1 = (proj(t1 + step, t2) - proj(t1 - step, t2)) / (2 * step)
    d2 = (proj(t1, t2 + step) - proj(t1, t2 - step)) / (2 * step)
    return float(np.real(1j * np.trace(P @ (d1 @ d2 - d2 @ d1))))


def energy_gradient_fd(p, cfg, e, band=0, form="effective", step=1e-4):
    t1, t2 = (float(x) for x in p)

    def en(a, b):
        return band_decomposition((a, b), cfg, e, form)[0][band]

    return ((en(t1 + step, t2) - en(t1 - step, t2)) / (2 * step),
            (en(t1, t2 + step) - en(t1, t2 - step)) / (2 * step))


def nonadiabaticity(cfg, e, N=200, form="effective", band=0):
    """Largest first-order mixing amplitude of ``band`` along the drive.

    eta(theta) = sum_i omega_i max_m |<m|d_i H|l>| / (eps_m - eps_l)^2; values
    well below 1 everywhere are needed for the driven state to follow the band.
    Returns ``(eta_max, theta_at_max)``.
    """
    t1, t2 = torus_grid(N)
    h = _hamiltonian(form)((t1, t2), cfg, e)
    w, v = np.linalg.eigh(h)
    d1, d2 = h3_derivatives((t1, t2), cfg, e, form)
    vh = np.conj(np.swapaxes(v, -1, -2))
    eta = np.zeros(t1.shape)
    for om, dh in ((cfg.drive.omega1, d1), (cfg.drive.omega2, d2)):
        mm = np.abs(vh @ dh @ v)
        best = np.zeros(t1.shape)
        for k in range(3):
            if k != band:
                best = np.maximum(best, mm[..., k, band] / (w[..., k] - w[..., band]) ** 2)
        eta += om * best
    i, j = np.unravel_index(np.argmax(eta), eta.shape)
    return float(eta[i, j]), TorusPoint(float(t1[i, j]), float(t2[i, j]))


# ----------------------------------------------------------------- phase diagram

@dataclass(frozen=True)
class PhaseCell:
    m: float
    delta: float
    chern: tuple | None
    min_gap: float
    boundary: bool

    @property
    def C_L(self):
        return None if self.chern is None else self.chern[0]


def default_sweep(cfg):
    g = min(coupling_strengths(cfg.molecule, cfg.drive))
    return np.linspace(-3.0, 3.0, 61), np.linspace(-g, g, 21)


def _cell(args):
    cfg, e, N, m, delta = args
    c = cfg.with_drive(m=float(m), delta=float(delta))
    try:
        bd = band_data(c, e, N)
        return PhaseCell(float(m), float(delta), bd.chern, bd.min_gap, False)
    except GapClosingError:
        t1, t2 = torus_grid(N)
        w = np.linalg.eigvalsh(effective_h3((t1, t2), c, e))
        return PhaseCell(float(m), float(delta), None, float(np.diff(w, axis=-1).min()), True)


def worker_count(requested=None):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("ENANTIO_TFC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def phase_diagram(cfg, m_values, delta_values, e, N=40, workers=None):
    """Lattice Chern numbers over an (m, delta) grid, row-major in m then delta.

    Cells where the gap closes on the torus grid are returned with
    ``boundary=True`` and no Chern numbers.
    """
    m_values = list(m_values)
    delta_values = list(delta_values)
    if not m_values or not delta_values:
        raise ValueError("m and delta value lists must be nonempty")
    jobs = [(cfg, e, N, m, d) for m in m_values for d in delta_values]
    n = worker_count(workers)
    if n == 1 or len(jobs) < 8:
        return [_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(_cell, jobs, chunksize=max(1, len(jobs) // (4 * n))))


PHASE_HEADER = "m,delta,C_L,C_M,C_U,min_gap,boundary_flag"


def phase_rows(cells):
    out = [PHASE_HEADER]
    for c in cells:
        cs = ("", "", "") if c.chern is None else tuple(str(x) for x in c.chern)
        out.append(f"{c.m:.17e},{c.delta:.17e},{cs[0]},{cs[1]},{cs[2]},{c.min_gap:.17e},{int(c.boundary)}")
    return "\n".join(out) + "\n"
