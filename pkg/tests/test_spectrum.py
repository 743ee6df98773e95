import math
import warnings

import numpy as np
import pytest

from enantio_tfc.dynamics import evolve, pumping_rate
from enantio_tfc.errors import ConfigError, WindowError
from enantio_tfc.spectrum import (SidebandLine, antisymmetry_error, chern_from_spectrum,
                                  difference_spectrum, family_balance, intensity_per_molecule,
                                  line_frequencies, net_converted_power, plot_spectrum,
                                  sideband_powers, spectrum_rows)
from enantio_tfc.model import carrier_frequencies

LABELS = ["21+1", "21-1", "31+1", "31-1", "32+2", "32-2", "31+2", "31-2"]


@pytest.fixture(scope="module")
def spectra(balanced_runs):
    cfg, runs = balanced_runs
    return cfg, {e: sideband_powers(tr, cfg, e, 377) for e, tr in runs.items()}


def test_line_inventory(literal):
    f = line_frequencies(literal)
    o21, o32, o31 = carrier_frequencies(literal.molecule, literal.drive)
    w1, w2 = literal.drive.omega1, literal.drive.omega2
    assert f == [o21 + w1, o21 - w1, o31 + w1, o31 - w1, o32 + w2, o32 - w2, o31 + w2, o31 - w2]
    assert len(set(f)) == 8


def test_eight_labeled_lines(spectra):
    cfg, sp = spectra
    for s in sp.values():
        assert [ln.label for ln in s] == LABELS
        assert s["32-2"].sideband == "-w2"
        with pytest.raises(KeyError):
            s["99+1"]


def test_frames_agree(spectra, balanced_runs):
    cfg, sp = spectra
    _, runs = balanced_runs
    for e, s in sp.items():
        q1, q2 = chern_from_spectrum(s, cfg.drive)
        q = pumping_rate(runs[e], cfg, e, 377).q
        # q from dynamics is -q1 = q2 in the shared sign convention
        assert -q1 == pytest.approx(q, rel=0.05)
        assert q2 == pytest.approx(q, rel=0.05)
    qR = chern_from_spectrum(sp["R"], cfg.drive)
    qS = chern_from_spectrum(sp["S"], cfg.drive)
    assert qR[0] == pytest.approx(2.0, abs=0.2) and qR[1] == pytest.approx(-2.0, abs=0.2)
    assert np.allclose(qS, [-x for x in qR], atol=0.05)


def test_family_balance(spectra):
    cfg, sp = spectra
    for s in sp.values():
        assert family_balance(s, cfg.drive) <= 0.05


def test_difference_antisymmetric(spectra):
    cfg, sp = spectra
    rows = difference_spectrum(sp["R"], sp["S"])
    assert antisymmetry_error(rows) <= 0.01
    assert sorted(r.frequency for r in rows) == sorted(line_frequencies(cfg))
    for r in rows:
        assert r.diff == pytest.approx(2 * r.P_R, rel=0.02)


def test_window_stability(balanced_runs, spectra):
    cfg, sp = spectra
    _, runs = balanced_runs
    short = sideband_powers(runs["R"], cfg, "R", 144)
    scale = max(abs(ln.P_av) for ln in sp["R"])
    for a, b in zip(short, sp["R"]):
        # lines large enough to matter move by less than 2%
        if abs(b.P_av) > 0.1 * scale:
            assert abs(a.P_av - b.P_av) <= 0.02 * abs(b.P_av)


def test_converted_intensity_order(spectra):
    cfg, sp = spectra
    w = intensity_per_molecule(net_converted_power(sp["R"]))
    assert 1e-16 <= w <= 1e-14


def test_racemic_difference_is_zero(spectra):
    _, sp = spectra
    rows = difference_spectrum(sp["R"], sp["R"])
    assert all(r.diff == 0 for r in rows)


def test_mismatched_sets_rejected(spectra):
    _, sp = spectra
    shifted = [SidebandLine(ln.carrier, ln.tone, ln.sign, ln.frequency * 1.01, ln.P_av) for ln in sp["S"]]
    with pytest.raises(ConfigError):
        difference_spectrum(sp["R"], shifted)
    with pytest.raises(ConfigError):
        difference_spectrum(sp["R"], list(sp["S"])[:7])


def test_missing_line_named(spectra):
    cfg, sp = spectra
    with pytest.raises(ValueError, match="31-2"):
        chern_from_spectrum(list(sp["R"])[:7], cfg.drive)


def test_all_zero_lines(literal):
    lines = [SidebandLine(c, int(l[-1]), 1 if l[2] == "+" else -1, f, 0.0)
             for l, c, f in zip(LABELS, [x[:2] for x in LABELS], line_frequencies(literal))]
    assert chern_from_spectrum(lines, literal.drive) == (0.0, 0.0)


def test_zero_drive_spectrum(literal):
    cfg = literal.with_drive(E21=0.0, E32=0.0, E31=0.0).replace(tstar_periods=144)
    tr = evolve(cfg, "R", dt=1e9, samples_per_period=1)
    sp = sideband_powers(tr, cfg, "R", 144)
    assert [ln.P_av for ln in sp] == [0.0] * 8


def test_window_rules(balanced_runs):
    cfg, runs = balanced_runs
    with pytest.raises(WindowError):
        sideband_powers(runs["R"], cfg, "R", 89)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        sp = sideband_powers(runs["R"], cfg, "R", 200)
    assert sp.warnings and any("Fibonacci" in str(x.message) for x in w)


def test_csv_columns(spectra):
    _, sp = spectra
    both = spectrum_rows(sp["R"], sp["S"]).splitlines()
    assert both[0] == "carrier,sideband,frequency_au,P_av_R_au,P_av_S_au,diff_au"
    assert len(both) == 9
    only = spectrum_rows(sp["R"]).splitlines()
    assert only[0] == "carrier,sideband,frequency_au,P_av_R_au"
    assert all(len(r.split(",")) == 4 for r in only)


def test_plot(tmp_path, spectra):
    pytest.importorskip("matplotlib")
    _, sp = spectra
    p = tmp_path / "s.svg"
    plot_spectrum(p, sp["R"], sp["S"])
    assert p.read_text().lstrip().startswith("<?xml")
