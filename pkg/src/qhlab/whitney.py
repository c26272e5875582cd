"""Dyadic Whitney decomposition of a grid domain.

Cubes are dyadic blocks of cells anchored at the bounding-box corner.  A block
is accepted as soon as it is fully interior and satisfies diam(Q) <= dist(Q),
with dist measured cell-accurately as the boundary-distance field sampled at
the block's center cell; descending from the (always rejected) root then gives
dist(Q) <= 4 diam(Q) for every accepted cube.  Boundary cells too close to
the boundary for even a one-cell cube are attached as flagged one-cell cubes
so the cover stays exact; flagged cubes are excluded from size-layer queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DomainError, GridDomain

SQRT2 = float(np.sqrt(2.0))


@dataclass
class WhitneyCube:
    index: int
    corner: tuple[int, int]  # cell coordinates of the low corner
    size: int  # side length in cells (power of two)
    l: float  # euclidean side length
    dist: float  # boundary distance sampled at the center cell
    flagged: bool  # True when diam > dist (sub-scale boundary cell)

    @property
    def diam(self) -> float:
        return self.l * SQRT2

    @property
    def level(self) -> int:
        return int(self.size).bit_length() - 1

    def cell_slices(self) -> tuple[slice, slice]:
        i0, j0 = self.corner
        return slice(i0, i0 + self.size), slice(j0, j0 + self.size)

    def center_cell(self) -> tuple[int, int]:
        i0, j0 = self.corner
        return (i0 + (self.size - 1) // 2, j0 + (self.size - 1) // 2)

    def box(self, h: float, scale: float = 1.0) -> tuple[float, float, float, float]:
        """Physical closed box (x0, x1, y0, y1) of the cube dilated by ``scale``."""
        i0, j0 = self.corner
        cx, cy = (i0 + self.size / 2.0) * h, (j0 + self.size / 2.0) * h
        half = scale * self.l / 2.0
        return (cx - half, cx + half, cy - half, cy + half)


class WhitneyDecomposition:
    def __init__(self, domain: GridDomain, cubes: list[WhitneyCube]):
        self.domain = domain
        self.cubes = cubes
        self.cell_cube = np.full(domain.shape, -1, dtype=np.int64)
        for q in cubes:
            self.cell_cube[q.cell_slices()] = q.index
        self.by_size: dict[int, list[int]] = {}
        for q in cubes:
            if not q.flagged:
                self.by_size.setdefault(q.size, []).append(q.index)
        self._adjacency: list[set[int]] | None = None

    def __len__(self) -> int:
        return len(self.cubes)

    @property
    def adjacency(self) -> list[set[int]]:
        """Face-adjacency (shared edge segment) between distinct cubes."""
        if self._adjacency is None:
            adj: list[set[int]] = [set() for _ in self.cubes]
            cc = self.cell_cube
            for a, b in (
                (cc[:-1, :], cc[1:, :]),
                (cc[:, :-1], cc[:, 1:]),
            ):
                pairs = np.column_stack([a.ravel(), b.ravel()])
                pairs = pairs[(pairs[:, 0] >= 0) & (pairs[:, 1] >= 0)]
                pairs = pairs[pairs[:, 0] != pairs[:, 1]]
                for u, v in np.unique(pairs, axis=0):
                    adj[u].add(int(v))
                    adj[v].add(int(u))
            self._adjacency = adj
        return self._adjacency

    def locate(self, cell) -> WhitneyCube:
        idx = self.cell_cube[int(cell[0]), int(cell[1])]
        if idx < 0:
            raise DomainError(f"cell {tuple(cell)} is exterior")
        return self.cubes[int(idx)]

    def cube_cells(self, index: int) -> np.ndarray:
        """(n, 2) array of cell coordinates of a cube."""
        q = self.cubes[index]
        si, sj = q.cell_slices()
        ii, jj = np.meshgrid(
            np.arange(si.start, si.stop), np.arange(sj.start, sj.stop), indexing="ij"
        )
        return np.column_stack([ii.ravel(), jj.ravel()])

    def sizes_at_least(self, min_size_cells: int) -> list[int]:
        return [
            i for s, idxs in self.by_size.items() if s >= min_size_cells for i in idxs
        ]

    def rects(self):
        """(x0, y0, side, level, flagged) tuples in physical units, for SVG."""
        h = self.domain.h
        return [
            (q.corner[0] * h, q.corner[1] * h, q.l, q.level, q.flagged)
            for q in self.cubes
        ]


def center_distance(domain: GridDomain, i0: int, j0: int, size: int) -> float:
    """Rasterized dist(Q, boundary): the d field at the block's center cell."""
    ci, cj = i0 + size // 2, j0 + size // 2
    if size > 1:
        ci, cj = min(ci, domain.shape[0] - 1), min(cj, domain.shape[1] - 1)
    if not domain.interior[ci, cj]:
        return 0.0
    return float(domain.dist[ci, cj])


def whitney_decompose(domain: GridDomain) -> WhitneyDecomposition:
    interior = domain.interior
    size_top = 1 << int(np.ceil(np.log2(max(domain.shape))))

    # all-interior pyramid per dyadic level; partial blocks count as exterior
    all_int = [interior]
    while all_int[-1].shape[0] > 1 or all_int[-1].shape[1] > 1:
        a = all_int[-1]
        ni = (a.shape[0] + 1) // 2
        nj = (a.shape[1] + 1) // 2
        pa = np.zeros((2 * ni, 2 * nj), dtype=bool)
        pa[: a.shape[0], : a.shape[1]] = a
        all_int.append(
            pa[0::2, 0::2] & pa[1::2, 0::2] & pa[0::2, 1::2] & pa[1::2, 1::2]
        )

    cubes: list[WhitneyCube] = []
    h = domain.h

    stack = [(0, 0, size_top)]
    while stack:
        i0, j0, size = stack.pop()
        lvl = size.bit_length() - 1
        bi, bj = i0 >> lvl, j0 >> lvl
        if lvl < len(all_int) and bi < all_int[lvl].shape[0] and bj < all_int[lvl].shape[1]:
            full = bool(all_int[lvl][bi, bj])
        else:
            full = False
        d = center_distance(domain, i0, j0, size) if full else 0.0
        if full and size * h * SQRT2 <= d and size < size_top:
            cubes.append(WhitneyCube(len(cubes), (i0, j0), size, size * h, d, False))
            continue
        if size == 1:
            if 0 <= i0 < domain.shape[0] and 0 <= j0 < domain.shape[1] and interior[i0, j0]:
                d1 = float(domain.dist[i0, j0])
                cubes.append(
                    WhitneyCube(
                        len(cubes), (i0, j0), 1, h, d1, flagged=not (h * SQRT2 <= d1)
                    )
                )
            continue
        half = size // 2
        for di in (0, half):
            for dj in (0, half):
                stack.append((i0 + di, j0 + dj, half))

    # deterministic order: by corner, then size
    cubes.sort(key=lambda q: (q.corner[0], q.corner[1], q.size))
    for new_idx, q in enumerate(cubes):
        q.index = new_idx
    return WhitneyDecomposition(domain, cubes)
