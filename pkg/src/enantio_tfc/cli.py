"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 gap closing or degenerate
cycle, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import dynamics as dyn
from . import ensemble as ens
from . import spectrum as spec
from . import topology as topo
from .errors import (BoundaryError, ConfigError, DegenerateCycleError, GapClosingError,
                     IntegratorError, InvalidParametersError, WindowError)
from .model import (Enantiomer, bundled_config, bundled_config_path, dump_config, is_ok,
                    ks_product_sign, load_config, validate_config)

EXIT_OK, EXIT_CONFIG, EXIT_GAP, EXIT_NUMERIC = 0, 1, 2, 3


# ----------------------------------------------------------------- arguments

def _global_flags(suppress):
    """Global options, accepted before or after the subcommand.

    The copy attached to subcommands suppresses defaults so that a flag given
    before the subcommand is not overwritten.
    """
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")

    def dflt(v):
        return argparse.SUPPRESS if suppress else v

    g.add_argument("--config", metavar="PATH", default=dflt(None),
                   help="config file (default: bundled propanediol set)")
    g.add_argument("--out", metavar="DIR", default=dflt("out"), help="output directory (default: out)")
    g.add_argument("--enantiomer", choices=("R", "S", "both"), default=dflt(None), help="species to simulate")
    g.add_argument("--grid", type=int, metavar="N", default=dflt(None), help="torus grid size")
    g.add_argument("--tstar-periods", type=int, metavar="K", default=dflt(None),
                   help="horizon in omega2 periods")
    g.add_argument("--dt", type=float, metavar="VALUE_AU", default=dflt(None), help="integrator step in a.u.")
    g.add_argument("--plot", action="store_true", default=dflt(False), help="also write SVG figures")
    return p


def build_parser():
    common = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(prog="enantio-tfc", description=__doc__.splitlines()[0],
                                     parents=[_global_flags(suppress=False)])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chern", parents=[common], help="lattice Chern numbers of the three bands")
    p.add_argument("--m", type=float, help="override the offset m")
    p.add_argument("--delta", type=float, help="override the detuning (a.u.)")

    p = sub.add_parser("phase-diagram", parents=[common], help="Chern number over an (m, delta) sweep")
    p.add_argument("--m-min", type=float, default=-3.0)
    p.add_argument("--m-max", type=float, default=3.0)
    p.add_argument("--m-points", type=int, default=61)
    p.add_argument("--delta-max", type=float, help="half-width of the delta sweep (default: smallest coupling)")
    p.add_argument("--delta-points", type=int, default=21)

    for name, hlp in (("dynamics", "ramp, evolve and measure the pumping rate"),
                      ("spectrum", "sideband powers and the R - S difference spectrum")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("--ramp", choices=("on", "off"), help="adiabatic preparation ramp")
        p.add_argument("--chirp", choices=("product", "accumulated"), help="phase convention during the chirp")
        p.add_argument("--integrator", choices=("magnus4", "midpoint"), help="one-step scheme")
        p.add_argument("--window", type=int, metavar="K", help="averaging window in omega2 periods")
        p.add_argument("--samples-per-period", type=int)
        if name == "dynamics":
            p.add_argument("--stride", type=int, default=1, help="row stride of the trajectory CSV")

    p = sub.add_parser("ensemble", parents=[common], help="ensemble signal and shot-noise limit")
    p.add_argument("--nr", type=float, required=True, help="number of R molecules")
    p.add_argument("--ns", type=float, required=True, help="number of S molecules")
    p.add_argument("--beam-area", type=float, default=1e-4, help="beam area in m^2 (default 1 cm^2)")
    p.add_argument("--volume-ml", type=float, default=1.0)
    p.add_argument("--concentration-um", type=float, default=1.0)
    p.add_argument("--spectrum-csv", metavar="PATH", help="reuse line powers from a spectrum run")
    return parser


# ----------------------------------------------------------------- helpers

class Failure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _resolve_config(args):
    cfg = load_config(args.config) if args.config else bundled_config()
    over = {}
    if args.enantiomer:
        over["enantiomer"] = args.enantiomer
    if args.grid is not None:
        over["grid"] = args.grid
    if args.tstar_periods is not None:
        over["tstar_periods"] = args.tstar_periods
    if args.dt is not None:
        over["dt"] = args.dt
    for key in ("ramp", "chirp", "integrator", "samples_per_period"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = (v == "on") if key == "ramp" else v
    drive = {}
    for key in ("m", "delta"):
        v = getattr(args, key, None)
        if v is not None:
            drive[key] = v
    try:
        cfg = cfg.replace(**over)
        if drive:
            cfg = cfg.with_drive(**drive)
    except (InvalidParametersError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    violations = validate_config(cfg)
    if not is_ok(violations):
        report = "; ".join(f"[{v.check}] {v.message} (limit {v.limit:g})" for v in violations)
        raise ConfigError(f"configuration rejected: {report}")
    return cfg, violations


class Output:
    """Collects files for one run and writes them plus a single manifest."""

    def __init__(self, root, command, cfg, violations, argv):
        self.root = Path(root)
        self.command = command
        self.cfg = cfg
        self.files = {}
        self.results = {}
        self.steps = 0
        self.start = time.perf_counter()
        self.manifest = {
            "tool": "enantio-tfc",
            "version": __version__,
            "subcommand": command,
            "argv": list(argv),
            "config": dump_config(cfg),
            "warnings": [v.message for v in violations],
        }

    def add(self, name, text):
        self.files[name] = text

    def write(self):
        self.root.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            # newline="\n" keeps bytes identical across platforms
            with open(self.root / name, "w", newline="\n") as fh:
                fh.write(text)
        self.manifest.update({
            "outputs": sorted(self.files) + sorted(getattr(self, "extra", [])),
            "results": self.results,
            "steps": self.steps,
            "wall_clock_s": round(time.perf_counter() - self.start, 3),
        })
        with open(self.root / "manifest.json", "w", newline="\n") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Enantiomer):
        return x.value
    return str(x)


def _f(x):
    return f"{x:.17e}"


# ----------------------------------------------------------------- commands

def cmd_chern(args, cfg, out):
    rows = ["enantiomer,m,delta,grid,C_L,C_M,C_U,min_gap,ks_sign"]
    for e in cfg.enantiomers:
        try:
            ks = ks_product_sign(cfg.molecule, cfg.drive, e)
            C_L, C_M, C_U, gap = topo.chern_numbers(cfg, e, cfg.grid)
        except (GapClosingError, DegenerateCycleError) as exc:
            raise Failure(EXIT_GAP, f"{e.value}: {exc}") from None
        rows.append(f"{e.value},{_f(cfg.drive.m)},{_f(cfg.drive.delta)},{cfg.grid},{C_L},{C_M},{C_U},{_f(gap)},{ks}")
        out.results[e.value] = {"C_L": C_L, "C_M": C_M, "C_U": C_U, "min_gap": gap}
    out.add("chern.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_phase_diagram(args, cfg, out):
    m_vals, d_vals = topo.default_sweep(cfg)
    m_vals = np.linspace(args.m_min, args.m_max, args.m_points)
    g = args.delta_max if args.delta_max is not None else float(d_vals[-1])
    d_vals = np.linspace(-g, g, args.delta_points) if args.delta_points > 1 else np.array([g])
    for e in cfg.enantiomers:
        cells = topo.phase_diagram(cfg, m_vals, d_vals, e, cfg.grid)
        name = f"phase_diagram_{e.value}.csv"
        out.add(name, topo.phase_rows(cells))
        out.results[e.value] = {"cells": len(cells), "boundary_cells": sum(c.boundary for c in cells)}
        if args.plot:
            _try_plot(out, f"phase_diagram_{e.value}.svg", _plot_phase, cells, m_vals, d_vals)
    return EXIT_OK


def _run_trajectories(cfg, args, out):
    try:
        trs = dyn.evolve_many(cfg)
    except IntegratorError as exc:
        raise Failure(EXIT_NUMERIC, str(exc)) from None
    except ConfigError:
        raise
    out.steps += sum(t.steps for t in trs)
    return trs


def _window(args, cfg):
    w = args.window if getattr(args, "window", None) is not None else cfg.tstar_periods
    if w > cfg.tstar_periods:
        raise ConfigError(f"window of {w} periods exceeds the horizon of {cfg.tstar_periods}")
    return w


def cmd_dynamics(args, cfg, out):
    w = _window(args, cfg)
    trs = _run_trajectories(cfg, args, out)
    rows = ["enantiomer,window_periods,P_w1_au,P_w2_au,P_2to1_au,q,balance,pop_L_t0,pop_dark_max,norm_err_max"]
    for tr in trs:
        e = tr.enantiomer
        rep = dyn.pumping_rate(tr, cfg, e, w)
        pops = dyn.band_populations(tr, cfg, e)
        i0 = max(tr.i_zero, 0)
        rows.append(",".join([e.value, str(w), _f(rep.P1), _f(rep.P2), _f(rep.P21), _f(rep.q),
                              _f(rep.balance), _f(pops.L[i0]), _f(pops.dark.max()), _f(tr.norm_err.max())]))
        out.add(f"trajectory_{e.value}.csv", dyn.trajectory_rows(tr, cfg, max(1, args.stride)))
        out.results[e.value] = {"q": rep.q, "P_w1": rep.P1, "P_w2": rep.P2, "P_2to1": rep.P21,
                                "pop_L_t0": float(pops.L[i0])}
        if args.plot:
            _try_plot(out, f"populations_{e.value}.svg", _plot_populations, pops)
    out.add("pumping.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_spectrum(args, cfg, out):
    w = _window(args, cfg)
    if w < spec.MIN_WINDOW:
        raise ConfigError(f"spectrum needs a window of at least {spec.MIN_WINDOW} periods")
    trs = _run_trajectories(cfg, args, out)
    lines = {}
    for tr in trs:
        sp = spec.sideband_powers(tr, cfg, tr.enantiomer, w)
        lines[tr.enantiomer.value] = sp
        q1, q2 = spec.chern_from_spectrum(sp, cfg.drive)
        out.results[tr.enantiomer.value] = {
            "chern_from_spectrum": [q1, q2],
            "q_dynamics": dyn.pumping_rate(tr, cfg, tr.enantiomer, w).q,
            "net_converted_W_m2": spec.intensity_per_molecule(spec.net_converted_power(sp)),
        }
        if sp.warnings:
            out.manifest.setdefault("spectrum_warnings", []).extend(sp.warnings)
    text = spec.spectrum_rows(lines.get("R"), lines.get("S"))
    out.add("spectrum.csv", text)
    if "R" in lines and "S" in lines:
        rows = spec.difference_spectrum(lines["R"], lines["S"])
        out.results["antisymmetry_error"] = spec.antisymmetry_error(rows)
    if args.plot:
        _try_plot(out, "spectrum.svg", lambda p: spec.plot_spectrum(p, lines.get("R"), lines.get("S")))
    return EXIT_OK


def _read_spectrum_csv(path):
    import csv
    out = {}
    with open(path) as fh:
        for row in csv.DictReader(fh):
            for tag in ("R", "S"):
                key = f"P_av_{tag}_au"
                if key in row and row[key] != "":
                    sb = row["sideband"]
                    out.setdefault(tag, []).append(spec.SidebandLine(
                        row["carrier"], int(sb[-1]), 1 if sb[0] == "+" else -1,
                        float(row["frequency_au"]), float(row[key])))
    if not out:
        raise ConfigError(f"{path}: no line powers found")
    return out


def cmd_ensemble(args, cfg, out):
    e = Enantiomer.R
    try:
        C_L, _, _, _ = topo.chern_numbers(cfg, e, cfg.grid)
    except (GapClosingError, DegenerateCycleError) as exc:
        raise Failure(EXIT_GAP, str(exc)) from None
    es = ens.EnsembleSpec(args.nr, args.ns, args.beam_area, cfg.t_star)
    pump = ens.ensemble_pumping(es, C_L, cfg.drive)
    if args.spectrum_csv:
        lines = _read_spectrum_csv(args.spectrum_csv).get("R") or _read_spectrum_csv(args.spectrum_csv)["S"]
    else:
        c1 = cfg.replace(enantiomer="R")
        trs = _run_trajectories(c1, args, out)
        lines = spec.sideband_powers(trs[0], c1, e, cfg.tstar_periods)
    noise = ens.shot_noise_limit(es, cfg.drive, cfg.molecule, lines)
    ee = ens.ee_limit_percent(noise.threshold, args.volume_ml * 1e-3, args.concentration_um * 1e-6)
    verdict = "above-threshold" if ens.detectable(es, noise) else "below-threshold"
    if pump.excess == 0:
        verdict = "zero-signal"
    fields = [
        ("N_R", es.N_R), ("N_S", es.N_S), ("beam_area_m2", es.beam_area), ("t_star_au", es.t_star),
        ("C_L_R", C_L), ("P_2to1_au", pump.power), ("excess", pump.excess), ("chirality", pump.chirality),
        ("photon_field", noise.field), ("photons_N_estimate", noise.photons),
        ("shot_noise_estimate", noise.noise), ("photons_per_molecule_estimate", noise.per_molecule),
        ("threshold_molecules_estimate", noise.threshold), ("ee_limit_percent_estimate", ee),
        ("verdict", verdict),
    ]
    csv = "quantity,value\n" + "".join(
        f"{k},{_f(v) if isinstance(v, float) else v}\n" for k, v in fields)
    out.add("ensemble.csv", csv)
    out.add("ensemble.txt", "".join(f"{k:32s} {v}\n" for k, v in fields))
    out.results.update({k: v for k, v in fields})
    return EXIT_OK


COMMANDS = {
    "chern": cmd_chern,
    "phase-diagram": cmd_phase_diagram,
    "dynamics": cmd_dynamics,
    "spectrum": cmd_spectrum,
    "ensemble": cmd_ensemble,
}


# ----------------------------------------------------------------- plotting

def _try_plot(out, name, fn, *a):
    try:
        path = out.root / name
        out.root.mkdir(parents=True, exist_ok=True)
        fn(path, *a)
        out.extra = getattr(out, "extra", []) + [name]
    except Exception as exc:  # plots never change the exit code
        out.manifest.setdefault("plot_errors", []).append(f"{name}: {exc}")


def _plot_phase(path, cells, m_vals, d_vals):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    z = np.array([np.nan if c.boundary else c.C_L for c in cells]).reshape(len(m_vals), len(d_vals))
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.pcolormesh(m_vals, d_vals, z.T, cmap="coolwarm", vmin=-2, vmax=2, shading="nearest")
    fig.colorbar(im, ax=ax, label="C_L")
    ax.set_xlabel("m")
    ax.set_ylabel("delta (a.u.)")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_populations(path, pops):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for k in ("L", "M", "U"):
        ax.plot(pops.t, getattr(pops, k), label=k, lw=0.8)
    ax.set_xlabel("t (a.u.)")
    ax.set_ylabel("population")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ----------------------------------------------------------------- main

def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, violations = _resolve_config(args)
        for v in violations:
            print(f"warning: [{v.check}] {v.message}", file=sys.stderr)
        out = Output(args.out, args.command, cfg, violations, argv)
        code = COMMANDS[args.command](args, cfg, out)
        out.write()
        _summary(args.command, out)
        return code
    except (ConfigError, WindowError, BoundaryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except IntegratorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _summary(command, out):
    for k, v in out.results.items():
        print(f"{k}: {v}")
    print(f"wrote {len(out.files)} file(s) and manifest.json to {out.root}")


if __name__ == "__main__":
    sys.exit(main())
