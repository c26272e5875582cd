"""Tests for the core/tentacle decomposition and its verification passes."""

import json

import numpy as np
import pytest
from scipy import ndimage

from qhlab import gallery
from qhlab.grid import DomainError, _STRUCT8
from qhlab.qh import QhMetric
from qhlab.whitney import whitney_decompose
from qhlab.decomposition import (
    build_core_tentacle,
    chain_pair_classes,
    mask_rectangles,
    verify_bounded_overlap,
    verify_chain_overlap,
    verify_cover,
    verify_distance_lemmas,
    verify_remark_inclusion,
    verify_tiling,
)


@pytest.fixture(scope="module")
def disk_ctx():
    dom = gallery.disk(1 / 128)
    qh = QhMetric(dom)
    dec = whitney_decompose(dom)
    return dom, qh, dec


@pytest.fixture(scope="module")
def ct6(disk_ctx):
    dom, qh, dec = disk_ctx
    return build_core_tentacle(dec, qh, 6)


@pytest.fixture(scope="module")
def ct7(disk_ctx):
    dom, qh, dec = disk_ctx
    return build_core_tentacle(dec, qh, 7)


@pytest.fixture(scope="module")
def dumbbell_ctx():
    dom = gallery.dumbbell(1 / 128)
    qh = QhMetric(dom)
    dec = whitney_decompose(dom)
    return dom, qh, dec, build_core_tentacle(dec, qh, 7)


def test_dilation_constant_guard(disk_ctx):
    dom, qh, dec = disk_ctx
    with pytest.raises(DomainError):
        build_core_tentacle(dec, qh, 6, c0=9.0)


def test_level_too_coarse_raises(disk_ctx):
    # the base point's cube has side 1/8 < 1/2
    dom, qh, dec = disk_ctx
    with pytest.raises(DomainError, match="too coarse"):
        build_core_tentacle(dec, qh, 1)


def test_degenerate_level_swallows_base_point(disk_ctx):
    # at m=5 the dilated band neighborhoods reach the base point
    dom, qh, dec = disk_ctx
    with pytest.raises(DomainError, match="swallowed"):
        build_core_tentacle(dec, qh, 5)


def test_core_contains_base_point_and_is_connected(ct6):
    dom = ct6.domain
    assert ct6.core_mask[dom.x0]
    _, n = ndimage.label(ct6.core_mask, structure=_STRUCT8)
    assert n == 1
    assert ct6.core_mask.sum() <= dom.interior.sum()


def test_band_cubes_in_size_window(ct6, ct7):
    for ct in (ct6, ct7):
        lo, hi = 2.0 ** (-ct.m), 2.0 ** (-(ct.m - 2))
        w1 = set(ct.W1)
        for q in ct.P1:
            cube = ct.dec.cubes[q]
            assert not cube.flagged
            assert lo - 1e-12 <= cube.l < hi - 1e-12
            assert q in w1


def test_core_cubes_fully_inside(ct6):
    for q in ct6.W1:
        assert ct6.core_mask[ct6.dec.cubes[q].cell_slices()].all()


def test_disk_has_no_tentacles(ct6):
    assert ct6.U_ids == [0]
    assert ct6.V_ids == []
    assert ct6.groups == []
    assert sorted(ct6.Um) == sorted(ct6.P)


def test_halo_inside_neighborhood(ct6):
    for q in ct6.P1[:20]:
        halo = {tuple(c) for c in ct6.halo[q]}
        bq = {tuple(c) for c in ct6.bq[q]}
        assert halo <= bq
        # both contain the cube itself
        cells = {tuple(c) for c in ct6.dec.cube_cells(q)}
        assert cells <= halo


def test_tiling_cell_exact(ct6, ct7, dumbbell_ctx):
    assert verify_tiling(ct6)
    assert verify_tiling(ct7)
    assert verify_tiling(dumbbell_ctx[3])


def test_bounded_overlap(ct6, ct7, dumbbell_ctx):
    for ct in (ct6, ct7, dumbbell_ctx[3]):
        rep = verify_bounded_overlap(ct)
        assert rep.passed
        assert rep.extra["min"] >= 1
        assert np.isfinite(rep.constant) and rep.constant >= 1


def test_core_fraction_grows_with_level(disk_ctx, ct6, ct7):
    dom, qh, dec = disk_ctx
    ct8 = build_core_tentacle(dec, qh, 8)
    fracs = [ct6.core_fraction(), ct7.core_fraction(), ct8.core_fraction()]
    assert fracs[0] <= fracs[1] <= fracs[2]
    assert 0 < fracs[0] < 1


def test_dumbbell_has_one_tentacle(dumbbell_ctx):
    dom, qh, dec, ct = dumbbell_ctx
    assert len(ct.U_ids) == 1 and ct.U_ids[0] == 0
    assert len(ct.V_ids) == 1
    assert len(ct.groups) == 1
    g = ct.groups[0]
    assert g.members == [0]
    assert g.assigned_cube == min(g.cubes)
    assert g.cubes <= set(ct.P)
    assert sorted(set(ct.Um) | g.cubes) == sorted(ct.P)


def test_dumbbell_blocking(dumbbell_ctx):
    dom, qh, dec, ct = dumbbell_ctx
    cells = np.argwhere(dom.interior)
    far = cells[(cells[:, 0] + 0.5) * dom.h > 0.65]
    blockers = [q for q in ct.P1 if ct.blocks(q, far)[0]]
    assert blockers, "some band cube separates the far chamber"
    # cells next to the base point are never blocked off
    near = np.array([list(dom.x0)])
    assert not any(ct.blocks(q, near)[0] for q in ct.P1[:10])
    with pytest.raises(DomainError):
        ct.blocks(ct.P1[0], np.empty((0, 2), dtype=int))


def test_blocking_degenerate_inside_halo(dumbbell_ctx):
    dom, qh, dec, ct = dumbbell_ctx
    q = ct.P1[0]
    blocked, degenerate = ct.blocks(q, ct.halo[q])
    assert degenerate and not blocked


def test_tentacle_mask_disjoint_from_core_component(dumbbell_ctx):
    dom, qh, dec, ct = dumbbell_ctx
    tm = ct.tentacle_mask(ct.groups[0])
    assert tm.any()
    assert not tm[dom.x0]


def test_trail_contains_own_cube(ct6):
    dom = ct6.domain
    for q in ct6.P1[:10]:
        mask = ct6.trail_nodes(q)
        cells = ct6.dec.cube_cells(q)
        nodes = dom.cell_node[cells[:, 0], cells[:, 1]]
        assert mask[nodes[nodes >= 0]].all()


def test_cover_at_resolved_levels(ct6, ct7, dumbbell_ctx):
    for ct in (ct6, ct7, dumbbell_ctx[3]):
        rep = verify_cover(ct)
        assert rep.extra["level_resolved"]
        assert rep.passed, rep.samples[:2]
        assert rep.constant >= 1


def test_cover_gate_below_resolution(disk_ctx):
    dom, qh, dec = disk_ctx
    ct8 = build_core_tentacle(dec, qh, 8)
    rep = verify_cover(ct8)
    assert not rep.extra["level_resolved"]


def test_chains_face_adjacent(ct6):
    adj = ct6.dec.adjacency
    plist = sorted(ct6.P)
    q = plist[0]
    assert ct6.chain(q, q) == [q]
    # a face-adjacent band pair chains in two cubes
    pair = next(
        (a, b) for a in plist for b in plist if b in adj[a]
    )
    assert ct6.chain(*pair) == list(pair)
    # symmetry and consecutive adjacency on arbitrary pairs
    for a, b in [(plist[0], plist[-1]), (plist[3], plist[40])]:
        ch = ct6.chain(a, b)
        assert ch[0] == a and ch[-1] == b
        assert ct6.chain(b, a) == ch[::-1]
        for u, v in zip(ch, ch[1:]):
            assert v in adj[u]


def test_distance_lemma_maxima(ct6):
    rep = verify_distance_lemmas(ct6)
    assert rep.passed
    assert rep.extra["trail_pairs_max"] > 0
    assert rep.extra["band_overlap_max"] > 0
    assert rep.extra["group_assigned_max"] == 0.0  # no groups on the disk


def test_distance_lemma_group_max(dumbbell_ctx):
    rep = verify_distance_lemmas(dumbbell_ctx[3])
    assert rep.passed and np.isfinite(rep.constant)


def test_chain_overlap_bounded(ct6):
    pairs = chain_pair_classes(ct6)
    assert pairs and all(a < b for a, b in pairs)
    rep = verify_chain_overlap(ct6)
    assert rep.passed
    assert rep.constant >= 1
    assert rep.extra["longest_chain"] >= 2


def test_remark_inclusion_vacuous_when_unqualified(ct6, disk_ctx):
    # with c0=10 a qualifying coarse level needs m >= 10
    dom, qh, dec = disk_ctx
    assert verify_remark_inclusion(ct6, dec, qh) is None


def test_as_dict_roundtrip(ct6, dumbbell_ctx):
    for ct in (ct6, dumbbell_ctx[3]):
        blob = json.dumps(ct.as_dict())
        back = json.loads(blob)
        assert back["m"] == ct.m
        assert sorted(back["P"]) == sorted(ct.P)
        assert back["V_components"] == len(ct.V_ids)


def test_mask_rectangles_exact_cover():
    rng = np.random.default_rng(5)
    for _ in range(20):
        mask = rng.random((17, 23)) < 0.4
        rects = mask_rectangles(mask)
        rebuilt = np.zeros_like(mask)
        count = np.zeros(mask.shape, dtype=int)
        for i0, j0, ni, nj in rects:
            rebuilt[i0:i0 + ni, j0:j0 + nj] = True
            count[i0:i0 + ni, j0:j0 + nj] += 1
        assert np.array_equal(rebuilt, mask)
        assert count.max(initial=0) <= 1  # disjoint
    assert mask_rectangles(np.zeros((4, 4), dtype=bool)) == []
    assert mask_rectangles(np.ones((3, 2), dtype=bool)) == [(0, 0, 3, 2)]
