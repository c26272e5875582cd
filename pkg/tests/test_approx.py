"""Tests for the assembled approximant, seminorms, and error decay."""

import numpy as np
import pytest

from qhlab import fixtures, gallery
from qhlab.grid import DomainError, GridDomain
from qhlab.qh import QhMetric
from qhlab.whitney import whitney_decompose
from qhlab.decomposition import build_core_tentacle
from qhlab.pou import build_partition
from qhlab.approx import (
    EvalGrid,
    SampledFunction,
    assemble,
    check_analysts_trick,
    core_mask_at_level,
    error_decay,
    error_localization,
    reproduction_error,
    seminorm,
)


@pytest.fixture(scope="module")
def disk_setup():
    dom = gallery.disk(1 / 128)
    qh = QhMetric(dom)
    dec = whitney_decompose(dom)
    ct = build_core_tentacle(dec, qh, 6)
    grid = EvalGrid(dom, 2)
    return dom, qh, dec, ct, grid


@pytest.fixture(scope="module")
def pou2(disk_setup):
    return build_partition(disk_setup[3], kmax=2)


def unit_square(n=32):
    return GridDomain(np.ones((n, n), dtype=bool), 1.0 / n,
                      (n // 2, n // 2), name="full", trim=False)


def test_eval_grid_refines_and_caps():
    dom = gallery.disk(1 / 128)
    g = EvalGrid(dom, 2)
    assert g.spacing == pytest.approx(dom.h / 2)
    assert len(g.x) == 4 * dom.interior.sum()
    capped = EvalGrid(dom, 64)  # 128*64 > 1024 -> falls back
    assert max(dom.shape) * capped.refine <= EvalGrid.MAX_SIDE


def test_sampled_function_guards():
    g = EvalGrid(gallery.disk(1 / 64), 2)
    f = fixtures.smooth_background(order=2)
    with pytest.raises(DomainError):
        SampledFunction(g, f, 3, 2.0)  # k beyond field order
    with pytest.raises(DomainError):
        SampledFunction(g, f, 1, 0.5)  # p < 1
    u = SampledFunction(g, f, 2, 2.0)
    assert u.self_check() < 1e-6


def test_seminorm_linear_field():
    dom = unit_square()
    grid = EvalGrid(dom, 2)
    u = SampledFunction(grid, fixtures.polynomial({(1, 0): 1.0}, order=1),
                        1, 2.0)
    assert seminorm(u.jets, None, 1, 2.0, grid.cell_area) == pytest.approx(1.0)
    zero = SampledFunction(grid, fixtures.constant(0.0, order=1), 1, 2.0)
    assert seminorm(zero.jets, None, 1, 2.0, grid.cell_area) == 0.0


def test_seminorm_radial_vs_analytic():
    # f = |x|^s on the quarter-plane square: int |grad f|^p has a closed form
    dom = unit_square(64)
    grid = EvalGrid(dom, 2)
    s, p = 1.4, 2.0
    f = fixtures.radial_power((0.0, 0.0), s, order=1)
    u = SampledFunction(grid, f, 1, p)
    # integrate |grad f|^p = s^p r^(p(s-1)) over the unit square
    # numerically on a fine reference grid; the domain gets padded with an
    # exterior ring, so the square physically occupies [h, 1+h]^2
    t = dom.h + (np.arange(2048) + 0.5) / 2048
    xx, yy = np.meshgrid(t, t, indexing="ij")
    rr = np.hypot(xx, yy)
    ref = ((s * rr ** (s - 1)) ** p).mean() ** (1 / p)
    assert seminorm(u.jets, None, 1, p, grid.cell_area) == \
        pytest.approx(ref, rel=0.01)


def test_constant_reproduction(disk_setup, pou2):
    dom, qh, dec, ct, grid = disk_setup
    u = SampledFunction(grid, fixtures.constant(3.25, order=2), 2, 2.0)
    ap = assemble(u, pou2, ct)
    assert reproduction_error(u, ap) < 1e-12
    assert ap.sup_norms[(1, 0)] < 1e-10


def test_polynomial_reproduction(disk_setup, pou2):
    dom, qh, dec, ct, grid = disk_setup
    f = fixtures.polynomial({(0, 0): 1, (1, 0): 2, (0, 1): -0.7}, order=2)
    u = SampledFunction(grid, f, 2, 2.0)
    ap = assemble(u, pou2, ct)
    assert reproduction_error(u, ap) < 1e-10
    diff = ap.error_jets(u)
    assert seminorm(diff, None, 2, 2.0, grid.cell_area) < 1e-10


@pytest.fixture(scope="module")
def singular_approx(disk_setup):
    dom, qh, dec, ct, grid = disk_setup
    f = fixtures.singular_fixture(dom, 1, 2.0, s=0.6, order=1)
    u = SampledFunction(grid, f, 1, 2.0)
    pou = build_partition(ct, kmax=1)
    return u, assemble(u, pou, ct), pou, ct


def test_singular_sup_norms_bounded(singular_approx):
    u, ap, pou, ct = singular_approx
    for a, v in ap.sup_norms.items():
        assert np.isfinite(v)
    # the approximant flattens the singular gradient: its sup stays orders
    # of magnitude below the field's values arbitrarily close to the corner
    bx, by = fixtures.boundary_point(u.grid.domain)
    close = np.hypot(u.field.derivative((1, 0), np.array([bx + 1e-8]),
                                        np.array([by])), 0.0)
    assert ap.sup_norms[(1, 0)] < close[0] / 10


def test_error_localized_to_band_supports(singular_approx):
    u, ap, pou, ct = singular_approx
    assert abs(error_localization(u, ap)) < 1e-12
    # the selector is a strict subset of the grid
    assert 0 < ap.error_selector.sum() < len(u.grid.x)


def test_telescoped_derivative_identity(singular_approx):
    u, ap, pou, ct = singular_approx
    assert check_analysts_trick(u, ap, pou, ct, n_cubes=2, seed=1) < 1e-8


def test_core_mask_levels_nest(disk_setup):
    dom, qh, dec, ct, grid = disk_setup
    m3 = core_mask_at_level(dec, 3.0)
    m5 = core_mask_at_level(dec, 5.0)
    assert m3.sum() <= m5.sum()
    assert (~m3 | m5).all()


def test_error_decay_reports():
    dom = gallery.disk(1 / 64)
    f = fixtures.singular_fixture(dom, 1, 2.0, s=0.6, order=1)
    rep = error_decay(f, dom, 1, 2.0, [5, 6, 7])
    assert rep.passed
    done = [r for r in rep.samples if "error" in r]
    assert done, "at least one level built"
    for r in done:
        assert np.isfinite(r["error"]) and np.isfinite(r["tail"])
        assert abs(r["localization_leak"]) < 1e-12
    skipped = [r for r in rep.samples if "skipped" in r]
    assert len(done) + len(skipped) == 3


def test_error_decay_zero_for_low_degree():
    # a constant has degree <= k-1 for k=1, so every fit reproduces it
    dom = gallery.disk(1 / 64)
    f = fixtures.constant(2.5, order=1)
    rep = error_decay(f, dom, 1, 2.0, [6])
    done = [r for r in rep.samples if "error" in r]
    assert done and done[0]["error"] < 1e-10
