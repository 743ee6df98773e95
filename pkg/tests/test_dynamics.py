import math

import numpy as np
import pytest
from scipy.integrate import quad

from enantio_tfc.dynamics import (TRAJECTORY_HEADER, adiabatic_response_check, band_populations,
                                  drive_phases, evolve, evolve_many, fibonacci_windows,
                                  pumping_rate, ramps, time_averaged_curvature, trajectory_rows)
from enantio_tfc.errors import ConfigError, IntegratorError, WindowError
from enantio_tfc.topology import berry_curvature, chern_numbers, torus_average


def test_ramp_endpoints(literal):
    wr = literal.drive.omega_r
    assert ramps(-2 * math.pi / wr, wr) == (0.0, 0.0)
    assert ramps(-math.pi / wr, wr) == pytest.approx((1.0, 0.0))
    assert ramps(0.0, wr) == (1.0, 1.0)
    assert ramps(5e12, wr) == (1.0, 1.0)
    a, b = ramps(np.linspace(-4 * math.pi / wr, 1e12, 101), wr)
    assert np.all(np.diff(a) >= -1e-15) and np.all(np.diff(b) >= -1e-15)


def test_phases_examples(literal):
    d = literal.drive
    for chirp in ("product", "accumulated"):
        assert drive_phases(0.0, d, chirp) == (0.0, 0.0)
        t1, _ = drive_phases(2 * math.pi / d.omega1, d, chirp)
        assert t1 == pytest.approx(2 * math.pi, rel=1e-15)
    # product form rests at the origin before the chirp
    assert drive_phases(-1.5 * math.pi / d.omega_r, d, "product") == (0.0, 0.0)
    with pytest.raises(ValueError):
        drive_phases(0.0, d, "linear")


def test_accumulated_phase_closed_form(literal):
    d = literal.drive
    wr = d.omega_r
    t1, t2 = drive_phases(-1.2 * math.pi / wr, d, "accumulated")
    assert t1 == pytest.approx(-d.omega1 * math.pi / (2 * wr), rel=1e-14)
    assert t2 == pytest.approx(-d.omega2 * math.pi / (2 * wr), rel=1e-14)
    for t in (-0.9 * math.pi / wr, -0.5 * math.pi / wr, -0.1 * math.pi / wr):
        integral, _ = quad(lambda s: ramps(s, wr)[1], t, 0.0, epsabs=0, epsrel=1e-13)
        assert drive_phases(t, d, "accumulated")[0] == pytest.approx(-d.omega1 * integral, rel=1e-11)


def test_phases_continuous(literal):
    d = literal.drive
    eps = 1.0
    for chirp in ("product", "accumulated"):
        for t in (-math.pi / d.omega_r, 0.0):
            a = np.array(drive_phases(t - eps, d, chirp))
            b = np.array(drive_phases(t + eps, d, chirp))
            assert np.max(np.abs(a - b)) < 1e-9


def test_zero_drive_constant_populations(literal):
    cfg = literal.with_drive(E21=0.0, E32=0.0, E31=0.0).replace(tstar_periods=3)
    tr = evolve(cfg, "R", samples_per_period=4)
    pops = band_populations(tr, cfg)
    # phase-only evolution; populations move only by rounding (unitarity budget 1e-9)
    np.testing.assert_allclose(np.abs(tr.psi[:, 0]) ** 2, 1.0, atol=1e-10)
    assert np.all(tr.bright[:, 1:] == 0)
    rep = pumping_rate(tr, cfg, "R", 3)
    assert rep.P1 == 0 and rep.P2 == 0 and rep.q == 0
    np.testing.assert_allclose(pops.total, 1.0, atol=1e-9)


def test_dt_halving_converges(literal):
    cfg = literal.replace(tstar_periods=10)
    a = evolve(cfg, "R", ramp=False, psi0="L", dt=1e7, samples_per_period=1)
    b = evolve(cfg, "R", ramp=False, psi0="L", dt=5e6, samples_per_period=1)
    assert np.linalg.norm(a.psi[-1] - b.psi[-1]) < 1e-6


def test_midpoint_is_second_order(literal):
    cfg = literal.replace(tstar_periods=2)
    r = [evolve(cfg, "R", ramp=False, psi0="L", dt=d, samples_per_period=1, integrator="midpoint").psi[-1]
         for d in (2e7, 1e7, 5e6)]
    e1 = np.linalg.norm(r[0] - r[1])
    e2 = np.linalg.norm(r[1] - r[2])
    assert 3.0 < e1 / e2 < 5.0


def test_dark_population_stays_zero(literal):
    cfg = literal.replace(tstar_periods=2)
    tr = evolve(cfg, "S", samples_per_period=8)
    pops = band_populations(tr, cfg)
    assert np.max(pops.dark) == 0.0
    assert np.max(np.abs(pops.total - 1.0)) < 1e-9
    # before the amplitudes rise the state is still |1,0>
    assert pops.L[0] == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(tr.psi[:, 1], tr.psi[:, 2], atol=1e-15)


def test_dark_amplitude_is_conserved(literal):
    cfg = literal.replace(tstar_periods=1)
    psi0 = np.array([0.6, 0.5, -0.3, 0.2j])
    tr = evolve(cfg, "R", ramp=False, psi0=psi0)
    d = tr.psi @ np.array([0, 1, -1, 0]) / math.sqrt(2)
    np.testing.assert_allclose(np.abs(d), abs(d[0]), atol=1e-15)
    assert tr.norm_err.max() < 1e-12


def test_norm_guard_trips():
    from enantio_tfc.model import bundled_config
    cfg = bundled_config().replace(tstar_periods=1)
    with pytest.raises(IntegratorError):
        evolve(cfg, "R", ramp=False, psi0="L", norm_tol=0.0)


def test_step_too_large(literal):
    with pytest.raises(ConfigError, match="step too large"):
        evolve(literal.replace(tstar_periods=1), "R", dt=1e9)


def test_ramp_needs_early_start(literal):
    with pytest.raises(ConfigError):
        evolve(literal, "R", t_start=-1e12)


def test_whole_periods_on_samples(literal):
    cfg = literal.replace(tstar_periods=3)
    tr = evolve(cfg, "R", ramp=False, psi0="L", samples_per_period=16)
    i = tr.index_at_periods(3, cfg.drive.period2)
    assert tr.t[i] == pytest.approx(3 * cfg.drive.period2, rel=1e-12)
    assert tr.theta[tr.i_zero, 0] == 0.0
    with pytest.raises(WindowError):
        tr.index_at_periods(4, cfg.drive.period2)
    with pytest.raises(WindowError):
        pumping_rate(tr, cfg, "R", 0.5)


def test_evolve_many_matches_serial(literal):
    cfg = literal.replace(tstar_periods=1)
    a = evolve_many(cfg, workers=1, ramp=False, psi0="L")
    b = evolve_many(cfg, workers=2, ramp=False, psi0="L")
    for x, y in zip(a, b):
        assert x.enantiomer == y.enantiomer
        np.testing.assert_array_equal(x.bright, y.bright)
        np.testing.assert_array_equal(x.acc, y.acc)


def test_trajectory_rows(literal):
    cfg = literal.replace(tstar_periods=1)
    tr = evolve(cfg, "R", ramp=False, psi0="L", samples_per_period=4)
    text = trajectory_rows(tr, cfg, stride=2)
    lines = text.splitlines()
    assert lines[0] == TRAJECTORY_HEADER
    assert len(lines) == 1 + len(range(0, len(tr.t), 2))
    assert trajectory_rows(tr, cfg, stride=2) == text


def test_fibonacci_windows():
    assert fibonacci_windows(2000) == [144, 233, 377, 610, 987, 1597]


# ----------------------------------------------------------------- equal-coupling set

def test_preparation(balanced_runs):
    cfg, runs = balanced_runs
    for e, tr in runs.items():
        pops = band_populations(tr, cfg)
        assert pops.L[tr.i_zero] >= 0.99
        assert pops.dark.max() <= 1e-10
        assert tr.norm_err.max() <= 1e-9


def test_quantized_pumping(balanced_runs):
    cfg, runs = balanced_runs
    qs = {e: pumping_rate(tr, cfg, e, 377) for e, tr in runs.items()}
    assert qs["R"].q == pytest.approx(-2.0, abs=0.2)
    assert qs["S"].q == pytest.approx(2.0, abs=0.2)
    assert abs(qs["R"].q + qs["S"].q) <= 0.05
    for rep in qs.values():
        assert rep.balance <= 0.05
        assert rep.P21 == pytest.approx(0.5 * (rep.P2 - rep.P1))


def test_fibonacci_windows_converge(balanced_runs):
    cfg, runs = balanced_runs
    for e, tr in runs.items():
        C = chern_numbers(cfg, e)[0]
        err = [abs(pumping_rate(tr, cfg, e, w).q - C) for w in (144, 233, 377)]
        assert err[-1] < err[0]


def test_ramp_off_matches(balanced):
    # start in the lower band at t = 0 without preparation
    cfg = balanced.replace(tstar_periods=144)
    tr = evolve(cfg, "R", ramp=False, psi0="L")
    assert pumping_rate(tr, cfg, "R", 144).q == pytest.approx(-2.0, abs=0.2)


def test_time_average_matches_torus_average(literal, balanced):
    for cfg, N in ((balanced, 64), (literal, 1024)):
        g = (np.arange(N) + 0.5) * 2 * np.pi / N
        t1, t2 = np.meshgrid(g, g, indexing="ij")
        torus = torus_average(berry_curvature((t1, t2), cfg, "R", 0))
        timed = time_averaged_curvature(cfg, "R", 377, samples_per_period=512)
        assert timed == pytest.approx(torus, rel=0.05)


# ----------------------------------------------------------------- adiabatic response

@pytest.mark.parametrize("p", [(1.0, 2.0), (2.5, 0.7), (0.3, 4.0)])
def test_response_residual_shrinks(literal, p):
    r1 = adiabatic_response_check(p, literal, "R", 0, omega_scale=1.0)
    r2 = adiabatic_response_check(p, literal, "R", 0, omega_scale=0.1)
    assert not r1.skipped and not r2.skipped
    # first-order theory: at least linear shrinkage
    assert r2.residual_norm <= r1.residual_norm / 10
    # at the slower drive the curvature term stands well above the residual
    wF = 0.1 * literal.drive.omega2 * abs(r2.curvature)
    assert r2.residual_norm < 0.1 * wF


def test_hellmann_feynman(literal):
    r = adiabatic_response_check((1.0, 2.0), literal, "R", 0, omega_scale=0.0)
    np.testing.assert_allclose(r.measured, r.grad, rtol=1e-6)


def test_response_skips_small_gap(literal):
    cfg = literal.with_drive(delta=0.0, m=2.0 - 1e-4)
    r = adiabatic_response_check((0.0, 0.0), cfg, "R", 0)
    assert r.skipped
    assert math.isnan(r.residual_norm)
