"""Tests for the hyperbolicity/uniformity property checkers."""

import numpy as np
import pytest

from qhlab import gallery
from qhlab.properties import (
    check_ball_separation,
    check_gehring_hayman,
    check_geodesic_tail_diameter,
    check_local_gehring_hayman,
    check_radially_hyperbolic,
    check_uniformity,
    midpoint_john_check,
    pair_geodesics,
    sample_pairs,
)
from qhlab.qh import QhMetric


@pytest.fixture(scope="module")
def disk_qh():
    return QhMetric(gallery.disk(1 / 128))


@pytest.fixture(scope="module")
def slit_qh():
    return QhMetric(gallery.slit_disk(1 / 128))


def test_ball_separation_disk_minimal_c(disk_qh):
    pairs = sample_pairs(disk_qh.domain, 6, seed=3)
    geos = pair_geodesics(disk_qh, pairs)
    rep = check_ball_separation(disk_qh, geos, z_per_geodesic=2)
    assert rep.passed
    assert 0 < rep.constant < 64
    # at that c every sample separates (or is vacuous)
    rep2 = check_ball_separation(disk_qh, geos, c=rep.constant * 1.05,
                                 z_per_geodesic=2)
    assert rep2.passed


def test_ball_separation_fails_below_minimal(disk_qh):
    pairs = sample_pairs(disk_qh.domain, 6, seed=3)
    geos = pair_geodesics(disk_qh, pairs)
    rep = check_ball_separation(disk_qh, geos, z_per_geodesic=2)
    # well below the minimal constant, some midpoint ball must fail to
    # separate a long geodesic's endpoints
    small = check_ball_separation(disk_qh, geos, c=rep.constant / 8,
                                  z_per_geodesic=2)
    states = {s["state"] for s in small.samples}
    assert "connected" in states or all(s == "skip" for s in states)


def test_gehring_hayman_constants_finite_and_stable():
    consts = {"length": [], "diameter": []}
    for h in (1 / 128, 1 / 256):
        qh = QhMetric(gallery.slit_disk(h))
        pairs = sample_pairs(qh.domain, 12, seed=7)
        for mode in consts:
            rep = check_gehring_hayman(qh, pairs, mode=mode)
            assert np.isfinite(rep.constant) and rep.constant >= 1.0
            consts[mode].append(rep.constant)
    for mode, (c0, c1) in consts.items():
        assert abs(c0 - c1) / c1 < 0.10, mode


def test_local_gehring_hayman_filters(slit_qh):
    pairs = sample_pairs(slit_qh.domain, 20, seed=11)
    rep = check_local_gehring_hayman(slit_qh, pairs, c=4.0, R=2.0,
                                     mode="diameter")
    assert rep.extra["qualifying_pairs"] <= len(pairs)
    # every qualifying ratio is also a global ratio, so local <= global
    glob = check_gehring_hayman(slit_qh, pairs, mode="diameter")
    assert rep.constant <= glob.constant + 1e-12
    alt = check_local_gehring_hayman(slit_qh, pairs, c=4.0, R=2.0,
                                     mode="diameter", alternate=True)
    assert alt.extra["qualifying_pairs"] >= 0


def test_uniformity_disk_modest_constants(disk_qh):
    pairs = sample_pairs(disk_qh.domain, 15, seed=13)
    rep = check_uniformity(disk_qh, pairs)
    # quasihyperbolic geodesics in a disk are uniform with small constants
    assert 1.0 <= rep.extra["A1"] < 3.0
    assert rep.extra["A2"] < 30.0
    assert rep.constant == max(rep.extra["A1"], rep.extra["A2"])


def test_uniformity_comb_larger_than_disk(disk_qh):
    comb = QhMetric(gallery.comb(1 / 128))
    pd = sample_pairs(disk_qh.domain, 15, seed=13)
    pc = sample_pairs(comb.domain, 15, seed=13)
    a1_disk = check_uniformity(disk_qh, pd).extra["A1"]
    a1_comb = check_uniformity(comb, pc).extra["A1"]
    assert a1_comb > a1_disk  # detours around teeth stretch geodesics


def test_radially_hyperbolic_disk(disk_qh):
    rep = check_radially_hyperbolic(disk_qh, c0=10.0, c=8.0, R=3.0,
                                    n_samples=10, seed=17)
    assert rep.passed
    assert rep.extra["separation_passed"]


def test_geodesic_tail_diameter_disk(disk_qh):
    pairs = sample_pairs(disk_qh.domain, 8, seed=19)
    rep = check_geodesic_tail_diameter(disk_qh, pairs)
    assert rep.passed
    assert rep.constant <= 16.0
    # the per-M records are monotone: once passing, stays passing
    oks = [s["ok"] for s in rep.samples]
    assert oks == sorted(oks)


def test_midpoint_john_bound(disk_qh):
    pairs = sample_pairs(disk_qh.domain, 10, seed=23)
    A = check_uniformity(disk_qh, pairs).extra["doubly_john_A"]
    rows = midpoint_john_check(disk_qh, pairs, A)
    assert rows and all(ok for _, _, ok in rows)


def test_report_serializes(disk_qh):
    import json

    pairs = sample_pairs(disk_qh.domain, 4, seed=29)
    rep = check_gehring_hayman(disk_qh, pairs, mode="length")
    blob = json.dumps(rep.as_dict())
    assert "gehring_hayman_length" in blob
