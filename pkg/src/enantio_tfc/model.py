"""Physical parameters, quantum-number bookkeeping and configuration handling.

Everything is expressed in atomic units with hbar = 1, so energies and
angular frequencies share one unit.
"""

from __future__ import annotations

import configparser
import dataclasses
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateCycleError, InvalidParametersError

# 1 a.u. of angular frequency in rad/s
AU_ANGULAR_FREQUENCY = 4.134137333518e16
# 1 a.u. of time in s
AU_TIME = 2.4188843265857e-17
# 1 a.u. of power in W (Hartree energy / a.u. time)
AU_POWER = 4.3597447222071e-18 / AU_TIME
# Bohr radius in m
BOHR = 5.29177210903e-11
# vacuum permittivity in a.u. (4 pi eps0 = 1)
EPS0_AU = 1.0 / (4.0 * math.pi)
# speed of light in a.u.
C_AU = 137.035999084

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def au_to_mhz(omega):
    """Convert an angular frequency in a.u. to an ordinary frequency in MHz."""
    return np.asarray(omega) * AU_ANGULAR_FREQUENCY / (2.0 * math.pi) / 1e6


class Enantiomer(str, enum.Enum):
    R = "R"
    S = "S"

    def mirror(self):
        return Enantiomer.S if self is Enantiomer.R else Enantiomer.R

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ConfigError(f"unknown enantiomer {value!r}; expected R or S") from None


def mirror(e):
    return Enantiomer.parse(e).mirror()


@dataclass(frozen=True)
class RotationalConstants:
    A: float
    B: float
    C: float

    def __post_init__(self):
        if not (self.A > self.B > self.C > 0):
            raise InvalidParametersError(
                f"rotational constants must satisfy A > B > C > 0, got {self.A}, {self.B}, {self.C}")


@dataclass(frozen=True)
class StateLabel:
    J: int
    tau: int
    M: int

    def __post_init__(self):
        if self.J < 0 or abs(self.M) > self.J:
            raise InvalidParametersError(f"invalid state label {self}")


# ordering used by every 4x4 matrix in the package
WORKING_STATES = (StateLabel(0, 1, 0), StateLabel(1, 2, 1), StateLabel(1, 2, -1), StateLabel(1, 3, 0))


def asymmetric_top_levels(rc):
    """J=0 and J=1 rigid-rotor energies of H0 = A Ja^2 + B Jb^2 + C Jc^2.

    The J=1 block is diagonalized numerically in the Cartesian basis where
    (J_k^2)_{ij} = delta_ij - delta_ik delta_jk, so the result is an
    independent check of the closed form {B+C, A+C, A+B}.

    Returns a list of ``(J, energy)`` pairs, J=0 first, J=1 ascending.
    """
    if not isinstance(rc, RotationalConstants):
        rc = RotationalConstants(*rc)
    # spin-1 Cartesian generators: (J_k)_{ij} = -i eps_kij
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = eps[j, k, i] = eps[k, i, j] = 1.0
        eps[i, k, j] = eps[k, j, i] = eps[j, i, k] = -1.0
    gens = [-1j * eps[k] for k in range(3)]
    h = sum(c * g @ g for c, g in zip((rc.A, rc.B, rc.C), gens))
    e1 = np.linalg.eigvalsh(h)
    return [(0, 0.0)] + [(1, float(x)) for x in np.sort(e1)]


@dataclass(frozen=True)
class MolecularParams:
    """Dipole components of the R species and the two transition energies.

    ``mirror_axis`` names the component whose sign flips between the two
    enantiomers.
    """
    mu_a: float
    mu_b: float
    mu_c: float
    eps21: float
    eps31: float
    mirror_axis: str = "c"

    def __post_init__(self):
        if not (self.eps31 > self.eps21 > 0):
            raise InvalidParametersError(
                f"need eps31 > eps21 > 0, got eps21={self.eps21}, eps31={self.eps31}")
        if self.mirror_axis not in ("a", "b", "c"):
            raise InvalidParametersError(f"mirror_axis must be a, b or c, got {self.mirror_axis!r}")

    def dipoles(self, e):
        """Signed (mu_a, mu_b, mu_c) for enantiomer ``e``."""
        mu = {"a": self.mu_a, "b": self.mu_b, "c": self.mu_c}
        if Enantiomer.parse(e) is Enantiomer.S:
            mu[self.mirror_axis] = -mu[self.mirror_axis]
        return mu["a"], mu["b"], mu["c"]

    @property
    def eps32(self):
        return self.eps31 - self.eps21


@dataclass(frozen=True)
class DriveParams:
    E21: float
    E32: float
    E31: float
    m: float
    delta: float
    omega1: float
    omega2: float
    omega_r: float

    def __post_init__(self):
        for k in ("E21", "E32", "E31"):
            if getattr(self, k) < 0:
                raise InvalidParametersError(f"{k} must be non-negative")
        for k in ("omega1", "omega2", "omega_r"):
            if not getattr(self, k) > 0:
                raise InvalidParametersError(f"{k} must be positive")

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    @property
    def period2(self):
        """Period of the second modulation tone, the unit of averaging windows."""
        return 2.0 * math.pi / self.omega2


@dataclass(frozen=True)
class TorusPoint:
    theta1: float
    theta2: float

    def wrapped(self):
        return TorusPoint(self.theta1 % (2 * math.pi), self.theta2 % (2 * math.pi))

    def __iter__(self):
        yield self.theta1
        yield self.theta2


def dipole_matrix_elements(mol, e):
    """Transition dipoles between the working states.

    Keys are ``(upper, lower)`` pairs of state indices in WORKING_STATES order.
    The elements do not depend on M.
    """
    mu_a, mu_b, mu_c = mol.dipoles(e)
    d21 = -1j * mu_b / math.sqrt(6.0)
    d32 = complex(mu_a / (2.0 * math.sqrt(2.0)))
    d31 = -1j * mu_c / math.sqrt(3.0)
    return {(1, 0): d21, (2, 0): d21, (3, 1): d32, (3, 2): d32, (3, 0): d31}


def ks_product_sign(mol, drive, e):
    """Sign of the cyclic coupling product (mu_b E21)(mu_a E32)(mu_c E31)."""
    mu_a, mu_b, mu_c = mol.dipoles(e)
    # multiply signs, not values, so tiny factors cannot underflow to zero
    factors = np.sign([mu_b, drive.E21, mu_a, drive.E32, mu_c, drive.E31])
    if not factors.all():
        raise DegenerateCycleError("a dipole component or field amplitude is zero")
    return int(np.prod(factors))


def envelopes(p, drive):
    """Slow field envelopes at torus point ``p``; works elementwise on arrays."""
    t1, t2 = p
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    e21 = drive.E21 * np.sin(t1)
    e32 = drive.E32 * np.sin(t2)
    e31 = drive.E31 * (drive.m - np.cos(t1) - np.cos(t2))
    if e21.ndim == 0:
        return float(e21), float(e32), float(e31)
    return e21, e32, e31


def coupling_strengths(mol, drive):
    """Peak Rabi couplings |mu_ij| E_ij for the 21, 32 and 31 transitions."""
    d = dipole_matrix_elements(mol, Enantiomer.R)
    return (abs(d[(1, 0)]) * drive.E21, abs(d[(3, 1)]) * drive.E32, abs(d[(3, 0)]) * drive.E31)


def carrier_frequencies(mol, drive):
    """(Omega21, Omega32, Omega31) detuned by delta from the molecular lines."""
    o21 = mol.eps21 - drive.delta
    o32 = mol.eps32 - drive.delta
    return o21, o32, o21 + o32


@dataclass(frozen=True)
class SimConfig:
    molecule: MolecularParams
    drive: DriveParams
    enantiomer: str = "both"
    dt: float = 1e7
    tstar_periods: int = 2000
    grid: int = 40
    samples_per_period: int = 16
    ramp: bool = True
    chirp: str = "product"
    integrator: str = "magnus4"

    def __post_init__(self):
        if self.enantiomer not in ("R", "S", "both"):
            raise ConfigError(f"enantiomer must be R, S or both, got {self.enantiomer!r}")
        if self.chirp not in ("product", "accumulated"):
            raise ConfigError(f"chirp must be 'product' or 'accumulated', got {self.chirp!r}")
        if self.integrator not in ("magnus4", "midpoint"):
            raise ConfigError(f"integrator must be 'magnus4' or 'midpoint', got {self.integrator!r}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.tstar_periods < 1 or self.grid < 1 or self.samples_per_period < 1:
            raise ConfigError("tstar_periods, grid and samples_per_period must be positive")

    @property
    def enantiomers(self):
        if self.enantiomer == "both":
            return (Enantiomer.R, Enantiomer.S)
        return (Enantiomer(self.enantiomer),)

    @property
    def t_star(self):
        return self.tstar_periods * self.drive.period2

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def with_drive(self, **kw):
        return dataclasses.replace(self, drive=dataclasses.replace(self.drive, **kw))


# ----------------------------------------------------------------- validation

@dataclass(frozen=True)
class Violation:
    """One failed validity condition.

    ``severity`` is ``"error"`` for conditions the simulation relies on and
    ``"warning"`` for the rotating-wave check, which concerns how well the
    simulated model describes the real molecule rather than the simulation.
    """
    check: str
    ratio: float
    limit: float
    message: str
    severity: str = "error"


RWA_LIMIT = 0.01
ORDERING_LIMIT = 0.2
RAMP_LIMIT = 0.1
RATIONAL_TOL = 1e-6
RATIONAL_MAX_Q = 10


def validate_config(cfg):
    """Return a list of Violation objects; empty means every check passed."""
    mol, drive = cfg.molecule, cfg.drive
    out = []
    couplings = coupling_strengths(mol, drive)
    carriers = carrier_frequencies(mol, drive)
    if min(carriers) <= 0:
        out.append(Violation("rwa", float("inf"), RWA_LIMIT,
                             "detuning pushes a carrier frequency to zero or below"))
    else:
        r = max(couplings) / 2.0 / min(carriers)
        if r > RWA_LIMIT:
            out.append(Violation("rwa", r, RWA_LIMIT,
                                 f"max coupling/2 is {r:.3g} of the lowest carrier", "warning"))
    slow = max(abs(drive.delta), drive.omega1, drive.omega2)
    cmin = min(couplings) / 2.0
    if cmin > 0:
        r = slow / cmin
        if r > ORDERING_LIMIT:
            out.append(Violation("ordering", r, ORDERING_LIMIT,
                                 f"max(|delta|, omega1, omega2) is {r:.3g} of the min coupling/2"))
    else:
        # a switched-off field is a valid null experiment; topology calls reject it separately
        out.append(Violation("ordering", float("inf"), ORDERING_LIMIT,
                             "a field amplitude or dipole is zero; band ordering undefined", "warning"))
    r = drive.omega_r / drive.omega1
    if r > RAMP_LIMIT:
        out.append(Violation("ramp", r, RAMP_LIMIT, f"omega_r/omega1 = {r:.3g}"))
    ratio = drive.omega1 / drive.omega2
    frac = Fraction(ratio).limit_denominator(RATIONAL_MAX_Q)
    dev = abs(ratio - float(frac))
    if dev <= RATIONAL_TOL * max(1.0, ratio):
        out.append(Violation("commensurate", dev, RATIONAL_TOL,
                             f"omega1/omega2 = {ratio:.12g} is within {dev:.2g} of {frac}"))
    return out


def is_ok(violations):
    return not any(v.severity == "error" for v in violations)


# ----------------------------------------------------------------- config files

_SECTIONS = {
    "molecule": {"mu_a", "mu_b", "mu_c", "eps21", "eps31", "mirror_axis"},
    "drive": {"E21", "E32", "E31", "m", "delta", "omega1", "omega2", "omega_r"},
    "simulation": {"enantiomer", "dt", "tstar_periods", "grid", "samples_per_period",
                   "ramp", "chirp", "integrator"},
}
_INT_KEYS = {"tstar_periods", "grid", "samples_per_period"}
_STR_KEYS = {"enantiomer", "chirp", "integrator", "mirror_axis"}


def _convert(key, raw):
    if key in _STR_KEYS:
        return raw.strip()
    if key == "ramp":
        v = raw.strip().lower()
        if v in ("on", "true", "yes", "1"):
            return True
        if v in ("off", "false", "no", "0"):
            return False
        raise ConfigError(f"ramp must be on/off, got {raw!r}")
    try:
        if key in _INT_KEYS:
            f = float(raw)
            if f != int(f):
                raise ValueError
            return int(f)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as a number") from None


def parse_config(text, source="<string>"):
    """Parse ``key = value`` text with [molecule], [drive], [simulation] sections."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
            values.setdefault(sec, {})[key] = _convert(key, raw)
    for sec in ("molecule", "drive"):
        if sec not in values:
            raise ConfigError(f"{source}: missing section [{sec}]")
        required = _SECTIONS[sec] - {"mirror_axis"}
        missing = sorted(required - set(values[sec]))
        if missing:
            raise ConfigError(f"{source}: [{sec}] is missing {', '.join(missing)}")
    try:
        mol = MolecularParams(**values["molecule"])
        drive = DriveParams(**values["drive"])
        return SimConfig(molecule=mol, drive=drive, **values.get("simulation", {}))
    except InvalidParametersError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))


def dump_config(cfg):
    """Serialize a SimConfig back to the config-file format (round-trips exactly)."""
    lines = ["[molecule]"]
    for f in dataclasses.fields(cfg.molecule):
        lines.append(f"{f.name} = {_fmt(getattr(cfg.molecule, f.name))}")
    lines += ["", "[drive]"]
    for f in dataclasses.fields(cfg.drive):
        lines.append(f"{f.name} = {_fmt(getattr(cfg.drive, f.name))}")
    lines += ["", "[simulation]"]
    for f in dataclasses.fields(cfg):
        if f.name in ("molecule", "drive"):
            continue
        v = getattr(cfg, f.name)
        if f.name == "ramp":
            v = "on" if v else "off"
        lines.append(f"{f.name} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def bundled_config_path(name="propanediol"):
    return resources.files("enantio_tfc") / "data" / f"{name}.ini"


def bundled_config(name="propanediol"):
    """Load one of the shipped parameter sets (``propanediol`` or ``propanediol_balanced``)."""
    p = bundled_config_path(name)
    if not p.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return parse_config(p.read_text(), source=name)


def propanediol():
    """Literal 1,2-propanediol parameter set in atomic units."""
    e0 = 4.0e-9
    s3 = math.sqrt(3.0)
    mol = MolecularParams(mu_a=0.47, mu_b=0.75, mu_c=0.14, eps21=4.4e-8, eps31=4.7e-8)
    w1 = 1e-11
    drive = DriveParams(E21=5 * s3 * e0, E32=6 * e0, E31=s3 * e0, m=1.4, delta=w1,
                        omega1=w1, omega2=GOLDEN * w1, omega_r=2e-13)
    return SimConfig(molecule=mol, drive=drive)


def balanced_drive(mol, coupling, base):
    """Field amplitudes giving |mu_ij| E_ij = ``coupling`` on all three transitions."""
    d = dipole_matrix_elements(mol, Enantiomer.R)
    return dataclasses.replace(base, E21=coupling / abs(d[(1, 0)]), E32=coupling / abs(d[(3, 1)]),
                               E31=coupling / abs(d[(3, 0)]))
