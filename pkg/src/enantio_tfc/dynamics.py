"""Time evolution through the preparation ramp and the steady two-tone drive.

The run is split into a ramp segment (t < 0) and a steady segment (t >= 0).
The steady step is adjusted so that one period of the second tone is an
integer number of steps and every whole period lands on a stored sample;
averaging windows then start and end exactly on samples.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ConfigError, IntegratorError, WindowError
from .hamiltonian import BRIGHT, DARK, bright_h3
from .model import Enantiomer, TorusPoint
from .topology import berry_curvature, berry_curvature_fd, energy_gradient_fd, h3_derivatives, worker_count

NORM_TOL = 1e-9
MAX_STEP_PHASE = 0.5
SCHEMES = {"midpoint": K.SCHEME_MIDPOINT, "magnus4": K.SCHEME_MAGNUS4}
FIBONACCI = (1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987, 1597, 2584, 4181)


def ramps(t, omega_r):
    """Preparation envelopes (alpha, beta) at time t (scalar or array)."""
    t = np.asarray(t, dtype=float)
    a = np.where(t <= -2 * np.pi / omega_r, 0.0,
                 np.where(t < -np.pi / omega_r, 0.5 * (1 - np.cos(omega_r * t)), 1.0))
    b = np.where(t <= -np.pi / omega_r, 0.0,
                 np.where(t < 0, 0.5 * (1 + np.cos(omega_r * t)), 1.0))
    if a.ndim == 0:
        return float(a), float(b)
    return a, b


def drive_phases(t, drive, chirp="product"):
    """Drive phases (theta1, theta2) at time t.

    ``chirp="product"`` gives theta_i = omega_i beta(t) t: the phases sit at 0
    while the amplitudes rise and sweep out and back during the chirp.
    ``chirp="accumulated"`` integrates the chirped frequency omega_i beta(t),
    so the phases rest at -omega_i pi / (2 omega_r) before the chirp.
    Both conventions give theta = omega t for t >= 0.
    """
    t = np.asarray(t, dtype=float)
    wr = drive.omega_r
    _, beta = ramps(t, wr)
    out = []
    for w in (drive.omega1, drive.omega2):
        if chirp == "product":
            th = w * beta * t
        elif chirp == "accumulated":
            th = np.where(t >= 0, w * t,
                          np.where(t <= -np.pi / wr, -w * np.pi / (2 * wr),
                                   w * (0.5 * t + np.sin(wr * t) / (2 * wr))))
        else:
            raise ValueError(f"unknown chirp convention {chirp!r}")
        out.append(float(th) if np.ndim(th) == 0 else th)
    return tuple(out)


def _params(cfg, e):
    mu_a, mu_b, mu_c = cfg.molecule.dipoles(e)
    d = cfg.drive
    return np.array([mu_a, mu_b, mu_c, d.E21, d.E32, d.E31, d.m, d.delta, d.omega1, d.omega2, d.omega_r])


def max_norm(cfg, e):
    """Upper bound on ||H4|| over the torus and the ramp."""
    mu_a, mu_b, mu_c = cfg.molecule.dipoles(e)
    d = cfg.drive
    x = abs(mu_b) * d.E21 / (2 * math.sqrt(3))
    y = abs(mu_a) * d.E32 / 4
    z = abs(mu_c) * d.E31 * (abs(d.m) + 2) / (2 * math.sqrt(3))
    return abs(d.delta) + math.sqrt(x * x + y * y + z * z)


@dataclass(frozen=True)
class Trajectory:
    """Stored samples of a run. Integrals in ``acc`` start at t = 0."""
    enantiomer: Enantiomer
    t: np.ndarray
    bright: np.ndarray          # (n, 3) bright amplitudes
    dark: complex               # conserved dark amplitude
    obs: np.ndarray             # (n, 10) instantaneous observables
    acc: np.ndarray             # (n, 10) running integrals from t = 0
    theta: np.ndarray           # (n, 2)
    alpha: np.ndarray           # (n,)
    i_zero: int                 # index of the t = 0 sample (or -1)
    samples_per_period: int
    dt_ramp: float
    dt: float
    steps: int
    mode: int
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def psi(self):
        """Rotating-frame state in the 4-state basis, shape (n, 4)."""
        return self.bright @ BRIGHT.T + self.dark * DARK[None, :]

    @property
    def norm_err(self):
        n = np.sum(np.abs(self.bright) ** 2, axis=1) + abs(self.dark) ** 2
        return np.abs(n - 1.0)

    @property
    def dH(self):
        return self.obs[:, :2].real

    @property
    def t_end(self):
        return float(self.t[-1])

    def index_at_periods(self, periods, period):
        """Sample index at t = periods * (2 pi / omega2) for whole-sample windows."""
        if self.i_zero < 0:
            raise WindowError("trajectory does not contain t = 0")
        k = periods * self.samples_per_period
        if abs(k - round(k)) > 1e-9:
            raise WindowError(f"window of {periods} periods does not end on a stored sample")
        i = self.i_zero + int(round(k))
        if i >= len(self.t):
            raise WindowError(f"window of {periods} periods exceeds the trajectory "
                              f"({(self.t[-1]) / period:.6g} periods)")
        return i


def _initial_bright(psi0, cfg, e, t0, mode):
    if psi0 is None:
        return np.array([1, 0, 0], dtype=complex), 0j
    if isinstance(psi0, str):
        band = {"L": 0, "M": 1, "U": 2}[psi0.upper()]
        a = float(K.scale(t0, cfg.drive.omega_r, mode))
        th = (K.phase(t0, cfg.drive.omega1, cfg.drive.omega_r, mode),
              K.phase(t0, cfg.drive.omega2, cfg.drive.omega_r, mode))
        w, v = np.linalg.eigh(bright_h3(th, cfg, e, a))
        return v[:, band].astype(complex), 0j
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (4,):
        raise ValueError("psi0 must be a 4-vector or one of 'L', 'M', 'U'")
    psi0 = psi0 / np.linalg.norm(psi0)
    return BRIGHT.conj().T @ psi0, complex(DARK.conj() @ psi0)


def evolve(cfg, e, t_start=None, t_end=None, *, ramp=None, psi0=None, dt=None,
           samples_per_period=None, norm_tol=NORM_TOL, integrator=None):
    """Integrate the rotating-frame Schrodinger equation from t_start to t_end.

    With the ramp enabled the run starts (by default) at -2 pi / omega_r in
    |1,0>, with envelopes scaled by alpha(t) and phases from drive_phases.
    ``psi0`` may be a 4-vector or a band name ('L', 'M', 'U') for an
    eigenstate of the Hamiltonian at t_start. ``integrator`` selects the
    fourth-order Magnus step ('magnus4') or the exponential midpoint step.
    """
    e = Enantiomer.parse(e)
    d = cfg.drive
    ramp = cfg.ramp if ramp is None else ramp
    mode = (K.MODE_PRODUCT if cfg.chirp == "product" else K.MODE_ACCUMULATED) if ramp else K.MODE_STEADY
    t_ramp0 = -2 * math.pi / d.omega_r
    if t_start is None:
        t_start = t_ramp0 if ramp else 0.0
    if t_end is None:
        t_end = cfg.t_star
    if ramp and t_start > t_ramp0:
        raise ConfigError("adiabatic preparation needs t_start <= -2 pi / omega_r")
    if t_end <= t_start:
        raise ValueError("t_end must be after t_start")
    dt = cfg.dt if dt is None else dt
    integrator = cfg.integrator if integrator is None else integrator
    if integrator not in SCHEMES:
        raise ConfigError(f"unknown integrator {integrator!r}")
    scheme = SCHEMES[integrator]
    spp = cfg.samples_per_period if samples_per_period is None else samples_per_period
    hn = max_norm(cfg, e)
    if hn * dt > MAX_STEP_PHASE:
        raise ConfigError(f"step too large: ||H|| dt = {hn * dt:.3g} > {MAX_STEP_PHASE}")

    period = d.period2
    per_step = spp * math.ceil(period / dt / spp)
    dt_main = period / per_step
    stride = per_step // spp
    par = _params(cfg, e)
    b, dark = _initial_bright(psi0, cfg, e, t_start, mode)
    target = 1.0 - abs(dark) ** 2
    acc = np.zeros(10, dtype=complex)

    pieces = []
    steps = 0
    dt_ramp = 0.0
    if t_start < 0:
        t_neg_end = min(0.0, t_end)
        length = t_neg_end - t_start
        n = stride * max(1, math.ceil(length / dt / stride))
        dt_ramp = length / n
        pieces.append(_run(par, mode, b, t_start, dt_ramp, n, stride, False, acc, target, norm_tol, scheme))
        steps += n
    i_zero = -1
    if t_end > 0:
        n = int(round((t_end - max(t_start, 0.0)) / dt_main))
        n = max(stride, stride * round(n / stride))
        t0 = max(t_start, 0.0)
        seg = _run(par, mode, b, t0, dt_main, n, stride, t0 == 0.0, acc, target, norm_tol, scheme)
        if pieces:
            # t = 0 is stored twice; keep the copy that carries t >= 0 observables
            pieces[-1] = tuple(x[:-1] for x in pieces[-1])
        if t0 == 0.0:
            i_zero = sum(len(p[0]) for p in pieces)
        pieces.append(seg)
        steps += n
    t = np.concatenate([p[0] for p in pieces])
    bright = np.concatenate([p[1] for p in pieces])
    obs = np.concatenate([p[2] for p in pieces])
    accs = np.concatenate([p[3] for p in pieces])
    th = np.stack(drive_phases(t, d, cfg.chirp) if ramp else (d.omega1 * t, d.omega2 * t), axis=1)
    alpha = ramps(t, d.omega_r)[0] if ramp else np.ones_like(t)
    return Trajectory(e, t, bright, dark, obs, accs, th, np.asarray(alpha, dtype=float), i_zero, spp,
                      dt_ramp, dt_main, steps, mode,
                      meta={"norm_tol": norm_tol, "chirp": cfg.chirp, "ramp": bool(ramp),
                            "integrator": integrator})


def _run(par, mode, b, t0, dt, n, stride, accumulate, acc, target, norm_tol, scheme):
    ns = n // stride + 1
    out_t = np.empty(ns)
    out_b = np.empty((ns, 3), dtype=complex)
    out_obs = np.empty((ns, 10), dtype=complex)
    out_acc = np.empty((ns, 10), dtype=complex)
    k = K.propagate(par, mode, b, float(t0), float(dt), int(n), int(stride), bool(accumulate), acc,
                    out_t, out_b, out_obs, out_acc, float(target), float(norm_tol), int(scheme))
    if k < 0:
        raise IntegratorError(f"norm drift above {norm_tol:g} at t = {out_t[-k - 1]:.6g}")
    return out_t, out_b, out_obs, out_acc


def _evolve_job(args):
    cfg, e, kw = args
    return evolve(cfg, e, **kw)


def evolve_many(cfg, enantiomers=None, workers=None, **kw):
    """Run independent trajectories (one per enantiomer) in parallel processes."""
    ens = cfg.enantiomers if enantiomers is None else tuple(Enantiomer.parse(x) for x in enantiomers)
    n = min(worker_count(workers), len(ens))
    if n <= 1:
        return [evolve(cfg, e, **kw) for e in ens]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(_evolve_job, [(cfg, e, kw) for e in ens]))


# ----------------------------------------------------------------- analysis

@dataclass(frozen=True)
class BandPopulations:
    t: np.ndarray
    L: np.ndarray
    M: np.ndarray
    U: np.ndarray
    dark: np.ndarray
    ambiguous: np.ndarray

    @property
    def total(self):
        return self.L + self.M + self.U + self.dark


def band_populations(traj, cfg, e=None):
    """Projections of the stored states onto the instantaneous bands and the dark state."""
    e = traj.enantiomer if e is None else Enantiomer.parse(e)
    h = bright_h3((traj.theta[:, 0], traj.theta[:, 1]), cfg, e, traj.alpha)
    w, v = np.linalg.eigh(h)
    amp = np.einsum("nil,ni->nl", v.conj(), traj.bright)
    pops = np.abs(amp) ** 2
    norm = np.max(np.abs(w), axis=1)
    gap = np.min(np.diff(w, axis=1), axis=1)
    ambiguous = gap < 1e-6 * np.where(norm > 0, norm, 1.0)
    dark = np.full(len(traj.t), abs(traj.dark) ** 2)
    return BandPopulations(traj.t, pops[:, 0], pops[:, 1], pops[:, 2], dark, ambiguous)


@dataclass(frozen=True)
class PumpingReport:
    P1: float
    P2: float
    P21: float
    q: float
    window_periods: float

    @property
    def balance(self):
        """|P(omega1) + P(omega2)| / |P(omega1)|, small when no energy is retained."""
        return abs(self.P1 + self.P2) / abs(self.P1) if self.P1 != 0 else 0.0


def pumping_rate(traj, cfg, e=None, window_periods=None):
    """Average powers absorbed from each tone over [0, T], T a whole number of omega2 periods."""
    d = cfg.drive
    if window_periods is None:
        window_periods = cfg.tstar_periods
    if window_periods < 1:
        raise WindowError("averaging window must cover at least one omega2 period")
    i = traj.index_at_periods(window_periods, d.period2)
    T = traj.t[i]
    P1 = d.omega1 * traj.acc[i, 0].real / T
    P2 = d.omega2 * traj.acc[i, 1].real / T
    P21 = 0.5 * (P2 - P1)
    q = 2 * math.pi * P21 / (d.omega1 * d.omega2)
    return PumpingReport(float(P1), float(P2), float(P21), float(q), float(window_periods))


def fibonacci_windows(max_periods, minimum=144):
    return [f for f in FIBONACCI if minimum <= f <= max_periods]


def time_averaged_curvature(cfg, e, window_periods, samples_per_period=4096, band=0):
    """Average of F_band(omega1 t, omega2 t) over [0, window] on a uniform time grid."""
    d = cfg.drive
    n = int(window_periods * samples_per_period)
    t = (np.arange(n) + 0.5) * d.period2 / samples_per_period
    total = 0.0
    for chunk in np.array_split(t, max(1, n // 200000)):
        total += berry_curvature((d.omega1 * chunk, d.omega2 * chunk), cfg, e, band).sum()
    return total / n


# ----------------------------------------------------------------- adiabatic response

@dataclass(frozen=True)
class ResponseCheck:
    point: TorusPoint
    band: int
    measured: tuple
    predicted: tuple
    grad: tuple
    curvature: float
    skipped: bool = False

    @property
    def residual(self):
        if self.skipped:
            return (float("nan"), float("nan"))
        return tuple(m - p for m, p in zip(self.measured, self.predicted))

    @property
    def residual_norm(self):
        return float(np.hypot(*self.residual))


def adiabatic_response_check(p, cfg, e, band=0, *, omega_scale=1.0, switch_periods=40, dt_phase=0.02):
    """Measure <dH/dtheta_i> on a state driven adiabatically into ``p``.

    The band-l eigenstate is prepared at rest and the drive velocity is switched
    on smoothly (sin^2 profile) over ``switch_periods`` periods of the local gap,
    reaching (omega1, omega2) exactly at ``p``. The result is compared with
    d_i eps - (+) omega_j F from finite differences.
    """
    e = Enantiomer.parse(e)
    p = TorusPoint(*p)
    w1 = cfg.drive.omega1 * omega_scale
    w2 = cfg.drive.omega2 * omega_scale
    ev = np.linalg.eigvalsh(bright_h3(tuple(p), cfg, e))
    gaps = [abs(ev[k] - ev[band]) for k in range(3) if k != band]
    gap = min(gaps)
    grad = energy_gradient_fd(tuple(p), cfg, e, band, form="rotating")
    F = berry_curvature_fd(tuple(p), cfg, e, band, form="rotating")
    predicted = (grad[0] - w2 * F, grad[1] + w1 * F)
    if gap <= 10 * max(cfg.drive.omega1, cfg.drive.omega2):
        return ResponseCheck(p, band, (float("nan"),) * 2, predicted, grad, F, skipped=True)
    tau = switch_periods * 2 * math.pi / gap
    n = int(math.ceil(tau * max_norm(cfg, e) / dt_phase))
    dt = tau / n

    def theta(t):
        # t in [-tau, 0]; S(t) = integral of sin^2 switch from -tau, shifted so theta(0) = p
        u = (t + tau) / tau
        s = 0.5 * (t + tau) - tau / (2 * math.pi) * math.sin(math.pi * u) - 0.5 * tau
        return p.theta1 + w1 * s, p.theta2 + w2 * s

    _, v = np.linalg.eigh(bright_h3(theta(-tau), cfg, e))
    psi = v[:, band].astype(complex)
    U = np.empty((3, 3), dtype=complex)
    V = np.empty((3, 3), dtype=complex)
    lam = np.empty(3)
    for k in range(n):
        tm = -tau + (k + 0.5) * dt
        h = np.ascontiguousarray(bright_h3(theta(tm), cfg, e))
        K.expm_herm3(h, dt, U, V, lam)
        psi = U @ psi
    d1, d2 = h3_derivatives(tuple(p), cfg, e, form="rotating")
    measured = (float(np.real(psi.conj() @ d1 @ psi)), float(np.real(psi.conj() @ d2 @ psi)))
    return ResponseCheck(p, band, measured, predicted, grad, F)


# ----------------------------------------------------------------- export

TRAJECTORY_HEADER = "t,pop_L,pop_M,pop_U,pop_dark,norm_err,inst_P_w1,inst_P_w2"


def trajectory_rows(traj, cfg, stride=1):
    pops = band_populations(traj, cfg)
    d = cfg.drive
    lines = [TRAJECTORY_HEADER]
    ne = traj.norm_err
    for i in range(0, len(traj.t), stride):
        lines.append(",".join(f"{x:.17e}" for x in (
            traj.t[i], pops.L[i], pops.M[i], pops.U[i], pops.dark[i], ne[i],
            d.omega1 * traj.obs[i, 0].real, d.omega2 * traj.obs[i, 1].real)))
    return "\n".join(lines) + "\n"
