"""Tests for the exponential-density deformation of the qh metric."""

import numpy as np
import pytest

from qhlab import gallery
from qhlab.grid import DomainError
from qhlab.properties import sample_pairs
from qhlab.qh import QhMetric
from qhlab.uniformize import (
    EPSILON_SWEEP,
    build_deformation,
    check_bilipschitz,
    check_deformed_uniformity,
)


@pytest.fixture(scope="module")
def disk_qh():
    return QhMetric(gallery.disk(1 / 128))


@pytest.fixture(scope="module")
def disk_def(disk_qh):
    return build_deformation(disk_qh, 0.2)


def test_epsilon_must_be_positive(disk_qh):
    with pytest.raises(DomainError):
        build_deformation(disk_qh, 0.0)
    with pytest.raises(DomainError):
        build_deformation(disk_qh, -1.0)


def test_density_invariants(disk_qh, disk_def):
    dom = disk_qh.domain
    rho = disk_def.rho
    assert rho[dom.require_interior(dom.x0)] == pytest.approx(1.0)
    assert 0 < rho.min() and rho.max() <= 1.0 + 1e-12
    # multiplicative Lipschitz along edges: |log rho(a)-log rho(b)| <= eps*w
    ia, ib, _ = dom.edges(16)
    gap = np.abs(np.log(rho[ia]) - np.log(rho[ib]))
    assert (gap <= 0.2 * disk_qh.edge_weights + 1e-9).all()


def test_rho_monotone_along_tree_paths(disk_qh, disk_def):
    tree = disk_qh.radial_tree()
    from qhlab.qh import sample_nodes

    for v in sample_nodes(disk_qh.domain, 10, seed=3):
        path = tree.path_nodes(int(v))
        vals = disk_def.rho[path]
        assert (np.diff(vals) <= 1e-12).all()


def test_small_epsilon_limit_matches_k(disk_qh):
    dm = build_deformation(disk_qh, 1e-4)
    pairs = sample_pairs(disk_qh.domain, 6, seed=5)
    for x, y in pairs:
        if tuple(x) == tuple(y):
            continue
        k = disk_qh.distance(x, y)
        assert dm.distance(x, y) == pytest.approx(k, rel=2e-3)


def test_radial_integral_bound(disk_qh, disk_def):
    # along any path from x0, d_eps <= (1 - exp(-eps k))/eps; the trapezoid
    # rule overestimates the convex integrand, hence the quadrature slack
    pairs = sample_pairs(disk_qh.domain, 8, seed=7)
    eps = disk_def.epsilon
    x0 = disk_qh.domain.x0
    for _, y in pairs:
        k = disk_qh.distance(x0, y)
        bound = (1.0 - np.exp(-eps * k)) / eps
        assert disk_def.distance(x0, y) <= bound * (1 + 1e-3)


def test_deformed_weights_below_qh(disk_def):
    assert (disk_def.edge_weights <= disk_def.qh.edge_weights + 1e-15).all()


def test_symmetry_and_triangle(disk_def):
    dom = disk_def.domain
    a, b, c = dom.cell_at((0.3, 0.4)), dom.cell_at((0.7, 0.6)), dom.cell_at((0.5, 0.8))
    ab, bc, ac = (disk_def.distance(a, b), disk_def.distance(b, c),
                  disk_def.distance(a, c))
    assert ab == pytest.approx(disk_def.distance(b, a), rel=1e-12)
    assert ac <= ab + bc + 1e-12


def test_space_is_bounded(disk_qh):
    # deformed diameter about 2/eps regardless of how deep k runs
    for eps in (0.2, 0.4):
        dm = build_deformation(disk_qh, eps)
        assert dm.diameter_from(dm.domain.x0) <= 1.0 / eps + 1e-9


def test_deformed_uniformity_disk(disk_def):
    pairs = sample_pairs(disk_def.domain, 10, seed=9)
    rep = check_deformed_uniformity(disk_def, pairs)
    assert rep.extra["A1"] == pytest.approx(1.0, abs=1e-9)
    assert np.isfinite(rep.extra["A2"]) and rep.extra["A2"] > 0
    assert np.isfinite(rep.extra["deformed_diameter_bound"])


def test_deformed_uniformity_refinement_stable():
    vals = []
    for h in (1 / 128, 1 / 256):
        qh = QhMetric(gallery.disk(h))
        dm = build_deformation(qh, 0.2)
        pairs = sample_pairs(qh.domain, 10, seed=9)
        vals.append(check_deformed_uniformity(dm, pairs).extra["A2"])
    assert abs(vals[0] - vals[1]) / vals[1] < 0.15


def test_bilipschitz_disk_stable():
    consts = []
    for h in (1 / 128, 1 / 256):
        qh = QhMetric(gallery.disk(h))
        dm = build_deformation(qh, 0.2)
        pairs = sample_pairs(qh.domain, 12, seed=11)
        rep = check_bilipschitz(dm, pairs)
        assert np.isfinite(rep.constant) and rep.constant >= 1.0
        consts.append(rep.constant)
    assert abs(consts[0] - consts[1]) / consts[1] < 0.10


def test_epsilon_sweep_reports(disk_qh):
    pairs = sample_pairs(disk_qh.domain, 6, seed=13)
    rows = []
    for eps in EPSILON_SWEEP:
        dm = build_deformation(disk_qh, eps)
        rep = check_bilipschitz(dm, pairs)
        rows.append((eps, rep.constant, dm.stats()["d_rho_max"]))
    assert all(np.isfinite(c) for _, c, _ in rows)
    # larger eps shrinks the space: max deformed boundary distance decreases
    drho = [r[2] for r in rows]
    assert drho == sorted(drho, reverse=True)
