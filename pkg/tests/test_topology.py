import math
import time

import numpy as np
import pytest

from enantio_tfc.errors import BoundaryError, GapClosingError
from enantio_tfc.model import MolecularParams, ks_product_sign
from enantio_tfc.topology import (PHASE_HEADER, band_data, band_decomposition, berry_curvature,
                                  berry_curvature_fd, chern_numbers, default_sweep,
                                  energy_gradient_fd, expected_chern, nonadiabaticity,
                                  phase_diagram, phase_rows, torus_average, torus_grid, worker_count)


def test_band_decomposition_origin(literal):
    cfg = literal.with_drive(delta=0.0)
    w, v, deg = band_decomposition((0.0, 0.0), cfg, "R")
    d = cfg.drive
    c = 0.14 * d.E31 * (d.m - 2) / (2 * math.sqrt(3))
    assert c < 0
    np.testing.assert_allclose(w, [c, 0.0, -c], atol=1e-25)
    assert not deg


def test_eigenvector_orthonormality_and_gauge(literal, rng):
    t = rng.uniform(0, 2 * np.pi, (2, 30))
    w, v, _ = band_decomposition(t, literal, "R")
    eye = np.einsum("nil,nik->nlk", v.conj(), v)
    np.testing.assert_allclose(eye, np.broadcast_to(np.eye(3), eye.shape), atol=1e-13)
    lead = np.take_along_axis(v, np.argmax(np.abs(v), axis=-2)[:, None, :], axis=-2)
    assert np.all(np.abs(lead.imag) < 1e-15) and np.all(lead.real > 0)


def test_middle_band_zero_without_detuning(literal, rng):
    cfg = literal.with_drive(delta=0.0)
    t = rng.uniform(0, 2 * np.pi, (2, 100))
    w, _, _ = band_decomposition(t, cfg, "R")
    assert np.max(np.abs(w[:, 1])) <= 1e-12 * np.max(np.abs(w))


@pytest.mark.parametrize("N", [8, 40, 80])
def test_literal_chern_numbers(literal, N):
    assert chern_numbers(literal, "R", N)[:3] == (-2, 0, 2)
    assert chern_numbers(literal, "S", N)[:3] == (2, 0, -2)


def test_chern_fast(literal):
    t = time.perf_counter()
    chern_numbers(literal, "R", 40)
    chern_numbers(literal, "S", 40)
    assert time.perf_counter() - t < 5


def test_trivial_outside(literal):
    assert chern_numbers(literal.with_drive(m=3.0, delta=0.0), "R", 40)[:3] == (0, 0, 0)


def test_forms_agree(literal):
    # the bright block of the 4x4 and the spin-1 form carry the same Chern numbers
    a = chern_numbers(literal, "R", 40, form="effective")
    b = chern_numbers(literal, "R", 40, form="rotating")
    assert a[:3] == b[:3]
    assert a[3] == pytest.approx(b[3], rel=1e-10)


@pytest.mark.parametrize("m", [-1.7, -1.0, -0.4, 0.4, 1.0, 1.4, 1.7, -2.6, 2.6])
def test_expected_chern_at_zero_detuning(literal, m):
    for e in ("R", "S"):
        cfg = literal.with_drive(m=m, delta=0.0)
        ks = ks_product_sign(cfg.molecule, cfg.drive, e)
        C = chern_numbers(cfg, e, 40)
        assert C[0] == expected_chern(m, ks)
        assert sum(C[:3]) == 0
        # odd in m, refinement stable
        assert chern_numbers(literal.with_drive(m=-m, delta=0.0), e, 40)[0] == -C[0]
        assert chern_numbers(cfg, e, 80)[:3] == C[:3]


def test_expected_chern_examples():
    assert expected_chern(1.4, 1) == -2
    assert expected_chern(-1.4, 1) == 2
    assert expected_chern(2.5, 1) == 0 and expected_chern(2.5, -1) == 0
    for m in (0.0, 2.0, -2.0, 2.0 + 1e-10):
        with pytest.raises(BoundaryError):
            expected_chern(m, 1)


def test_gap_closing_raises(literal):
    with pytest.raises(GapClosingError) as exc:
        band_data(literal.with_drive(m=2.0, delta=0.0), "R", 40)
    assert exc.value.theta is not None
    with pytest.raises(ValueError):
        band_data(literal, "R", 4)


def test_torus_average(literal):
    assert torus_average(np.full((7, 7), 3.5)) == 3.5
    bd = band_data(literal, "R", 40)
    for l in range(3):
        assert torus_average(bd.curvature[..., l] * bd.N ** 2 / (2 * np.pi)) == pytest.approx(bd.chern[l], abs=1e-9)
    t1, t2 = torus_grid(64)
    g = np.array([energy_gradient_fd((a, b), literal, "R", 0) for a, b in zip(t1.ravel(), t2.ravel())])
    assert abs(torus_average(g[:, 0])) <= 1e-10 * np.abs(g).max() + 1e-22


def test_curvature_methods_agree(literal, rng):
    for _ in range(5):
        p = tuple(rng.uniform(0, 2 * np.pi, 2))
        for form in ("effective", "rotating"):
            a = berry_curvature(p, literal, "R", 0, form)
            b = berry_curvature_fd(p, literal, "R", 0, form)
            assert a == pytest.approx(b, rel=1e-5, abs=1e-8)


def test_curvature_integrates_to_chern(literal, balanced):
    for cfg, N in ((balanced, 32), (literal, 512)):
        g = (np.arange(N) + 0.5) * 2 * np.pi / N
        t1, t2 = np.meshgrid(g, g, indexing="ij")
        C = torus_average(berry_curvature((t1, t2), cfg, "R", 0)) * 2 * np.pi
        assert C == pytest.approx(-2, rel=0.02)


def test_nonadiabaticity(literal, balanced):
    eta_lit, p = nonadiabaticity(literal, "R")
    eta_bal, _ = nonadiabaticity(balanced, "R")
    assert eta_lit > 1.0
    assert eta_bal < 0.1
    assert min(abs(p.theta1), abs(2 * np.pi - p.theta1)) < 0.1


def test_phase_diagram_structure(literal):
    m = np.array([-2.6, -1.0, 1.0, 2.6])
    cells = phase_diagram(literal, m, [0.0], "R", 24, workers=1)
    assert [c.C_L for c in cells] == [0, 2, -2, 0]
    cells_s = phase_diagram(literal, m, [0.0], "S", 24, workers=1)
    assert [c.C_L for c in cells_s] == [0, -2, 2, 0]


def test_phase_diagram_marks_boundary(literal):
    cells = phase_diagram(literal, [2.0], [0.0], "R", 40, workers=1)
    assert cells[0].boundary and cells[0].C_L is None
    text = phase_rows(cells)
    assert text.splitlines()[0] == PHASE_HEADER
    assert text.splitlines()[1].endswith(",1")


def test_phase_diagram_parallel_matches_serial(literal):
    m = np.linspace(-2.5, 2.5, 6)
    d = np.linspace(-1e-10, 1e-10, 3)
    a = phase_rows(phase_diagram(literal, m, d, "R", 16, workers=1))
    b = phase_rows(phase_diagram(literal, m, d, "R", 16, workers=2))
    assert a == b


def test_default_sweep(literal):
    m, d = default_sweep(literal)
    assert len(m) == 61 and len(d) == 21
    assert m[0] == -3 and m[-1] == 3 and d[10] == 0
    assert d[-1] == pytest.approx(0.14 / math.sqrt(3) * literal.drive.E31)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("ENANTIO_TFC_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(1) == 1
    monkeypatch.setenv("ENANTIO_TFC_THREADS", "zero")
    assert worker_count() >= 1


def test_general_mirror_negates(literal):
    # mirror carried by mu_a instead of mu_c
    mol = MolecularParams(0.47, 0.75, 0.14, 4.4e-8, 4.7e-8, mirror_axis="a")
    cfg = literal.replace(molecule=mol)
    r = chern_numbers(cfg, "R", 40)[:3]
    s = chern_numbers(cfg, "S", 40)[:3]
    assert s == tuple(-x for x in r)
