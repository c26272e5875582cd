"""Occupancy-grid domains and the three base metrics d, lambda, delta.

A domain is a boolean occupancy bitmap over an axis-aligned bounding box with
square cells of side ``h``.  Cell ``(i, j)`` has center ``((i+0.5)h, (j+0.5)h)``;
the first index runs along the x-axis.  Interior cells carry a positive
boundary-distance value, paths live on a 16-neighbor cell graph (8 neighbors
plus knight moves) whose metrication error for euclidean length is below 2.8%.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

Cell = tuple[int, int]


class DomainError(ValueError):
    """Invalid domain construction or query (exterior point, bad bitmap...)."""


class UnreachableError(DomainError):
    """Two query points lie in different connected components."""


# Offsets of the 16-neighborhood (half of it; edges are symmetric) together
# with the cells a segment to that neighbor passes next to.  Requiring those
# clearance cells to be interior prevents paths from cutting exterior corners.
_HALF_OFFSETS: list[tuple[Cell, list[Cell]]] = [
    ((1, 0), []),
    ((0, 1), []),
    ((1, 1), [(1, 0), (0, 1)]),
    ((1, -1), [(1, 0), (0, -1)]),
    ((2, 1), [(1, 0), (1, 1)]),
    ((2, -1), [(1, 0), (1, -1)]),
    ((1, 2), [(0, 1), (1, 1)]),
    ((1, -2), [(0, -1), (1, -1)]),
]

_STRUCT8 = np.ones((3, 3), dtype=bool)


def _euclid_diameter(points: np.ndarray) -> float:
    """Max pairwise distance of an (n, 2) float array."""
    if len(points) <= 1:
        return 0.0
    pts = points
    if len(pts) > 400:
        try:
            from scipy.spatial import ConvexHull

            hull = ConvexHull(pts)
            pts = pts[hull.vertices]
        except Exception:
            pass  # degenerate (collinear) input: fall through to O(n^2)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


@dataclass
class Polyline:
    """A path through interior cell centers with cached euclidean summaries."""

    cells: np.ndarray  # (n, 2) int cell indices
    h: float

    @property
    def points(self) -> np.ndarray:
        return (self.cells + 0.5) * self.h

    @property
    def length(self) -> float:
        pts = self.points
        if len(pts) < 2:
            return 0.0
        return float(np.sqrt((np.diff(pts, axis=0) ** 2).sum(1)).sum())

    @property
    def diameter(self) -> float:
        return _euclid_diameter(self.points)

    def __len__(self) -> int:
        return len(self.cells)


class _DijkstraCache:
    """Single-source shortest paths on a fixed sparse graph, LRU-cached."""

    def __init__(self, matrix: sparse.csr_matrix, maxsize: int = 128):
        self.matrix = matrix
        self.maxsize = maxsize
        self._cache: OrderedDict[int, tuple[np.ndarray, np.ndarray]] = OrderedDict()

    def from_source(self, node: int) -> tuple[np.ndarray, np.ndarray]:
        node = int(node)
        if node in self._cache:
            self._cache.move_to_end(node)
            return self._cache[node]
        dist, pred = csgraph.dijkstra(
            self.matrix, directed=False, indices=node, return_predecessors=True
        )
        self._cache[node] = (dist, pred)
        if len(self._cache) > self.maxsize:
            self._cache.popitem(last=False)
        return dist, pred

    def min_from_set(self, nodes) -> np.ndarray:
        return csgraph.dijkstra(
            self.matrix, directed=False, indices=list(nodes), min_only=True
        )

    def path(self, src: int, dst: int) -> list[int]:
        dist, pred = self.from_source(src)
        if not np.isfinite(dist[dst]):
            raise UnreachableError(f"nodes {src} and {dst} are not connected")
        out = [int(dst)]
        while out[-1] != src:
            out.append(int(pred[out[-1]]))
        out.reverse()
        return out


class GridDomain:
    """Rasterized open domain with boundary-distance field and metric oracles."""

    def __init__(
        self,
        interior: np.ndarray,
        h: float,
        x0: Cell,
        name: str = "domain",
        trim: bool = False,
    ):
        interior = np.asarray(interior, dtype=bool)
        if interior.ndim != 2:
            raise DomainError("occupancy bitmap must be 2-dimensional")
        if h <= 0:
            raise DomainError("cell size h must be positive")
        x0 = (int(x0[0]), int(x0[1]))
        if not (0 <= x0[0] < interior.shape[0] and 0 <= x0[1] < interior.shape[1]):
            raise DomainError(f"base point {x0} outside the bounding box")
        if not interior[x0]:
            raise DomainError(f"base point {x0} is not an interior cell")
        border = (
            interior[0, :].any()
            or interior[-1, :].any()
            or interior[:, 0].any()
            or interior[:, -1].any()
        )
        if border:  # keep an exterior ring so every facet is representable
            interior = np.pad(interior, 1)
            x0 = (x0[0] + 1, x0[1] + 1)
        labels, _ = ndimage.label(interior, structure=_STRUCT8)
        keep = labels == labels[x0]
        if not trim and keep.sum() != interior.sum():
            raise DomainError(
                "interior is not a single connected component containing x0 "
                "(pass trim=True to keep only the component of x0)"
            )
        interior = keep
        if not interior.any() or interior.all():
            raise DomainError("domain must have interior and exterior cells")

        self.interior = interior
        self.h = float(h)
        self.x0 = x0
        self.name = name
        # Distance to the nearest exterior-cell boundary facet: exact EDT to
        # exterior cell centers minus the half-cell offset keeps d positive on
        # boundary-adjacent interior cells and 1-Lipschitz across the grid.
        edt = ndimage.distance_transform_edt(interior, sampling=self.h)
        self.dist = np.where(interior, edt - self.h / 2.0, 0.0)

        idx = np.flatnonzero(interior.ravel())
        self.node_cells = np.column_stack(np.unravel_index(idx, interior.shape))
        self.cell_node = np.full(interior.shape, -1, dtype=np.int64)
        self.cell_node[tuple(self.node_cells.T)] = np.arange(len(idx))
        self._edge_cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._length_engine: dict[int, _DijkstraCache] = {}

    # -- basic queries ------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.interior.shape

    @property
    def n_nodes(self) -> int:
        return len(self.node_cells)

    def position(self, cell: Cell) -> np.ndarray:
        return (np.asarray(cell, dtype=float) + 0.5) * self.h

    def cell_at(self, point) -> Cell:
        """Interior cell containing a physical point (nearest if rasterized out)."""
        raw = np.floor(np.asarray(point, dtype=float) / self.h).astype(int)
        raw = np.clip(raw, 0, np.asarray(self.shape) - 1)
        cell = (int(raw[0]), int(raw[1]))
        if self.interior[cell]:
            return cell
        near = self.node_cells - raw
        best = int(np.argmin((near**2).sum(1)))
        return tuple(self.node_cells[best])

    def require_interior(self, cell: Cell) -> int:
        cell = (int(cell[0]), int(cell[1]))
        if not (0 <= cell[0] < self.shape[0] and 0 <= cell[1] < self.shape[1]):
            raise DomainError(f"cell {cell} out of bounds")
        node = self.cell_node[cell]
        if node < 0:
            raise DomainError(f"cell {cell} is exterior")
        return int(node)

    def boundary_distance(self, cell: Cell) -> float:
        self.require_interior(cell)
        return float(self.dist[tuple(cell)])

    def node_dist(self) -> np.ndarray:
        """Boundary distance per graph node."""
        return self.dist[tuple(self.node_cells.T)]

    # -- cell graph ---------------------------------------------------------

    def edges(self, connectivity: int = 16):
        """Undirected edge arrays (ia, ib, length) for the cell graph."""
        if connectivity not in (4, 8, 16):
            raise DomainError("connectivity must be 4, 8 or 16")
        if connectivity in self._edge_cache:
            return self._edge_cache[connectivity]
        n_off = {4: 2, 8: 4, 16: 8}[connectivity]
        inter = self.interior
        ia_all, ib_all, w_all = [], [], []
        for (di, dj), clearance in _HALF_OFFSETS[:n_off]:
            ok = np.zeros(inter.shape, dtype=bool)
            i_hi = inter.shape[0] - max(di, 0)
            j_lo, j_hi = max(-dj, 0), inter.shape[1] - max(dj, 0)
            src = np.s_[max(-di, 0) : i_hi, j_lo:j_hi]
            dst = np.s_[max(-di, 0) + di : i_hi + di, j_lo + dj : j_hi + dj]
            ok[src] = inter[src] & inter[dst]
            for (ci, cj) in clearance:
                mid = np.s_[max(-di, 0) + ci : i_hi + ci, j_lo + cj : j_hi + cj]
                ok[src] &= inter[mid]
            cells = np.argwhere(ok)
            if len(cells):
                ia_all.append(self.cell_node[tuple(cells.T)])
                ib_all.append(self.cell_node[cells[:, 0] + di, cells[:, 1] + dj])
                w_all.append(
                    np.full(len(cells), self.h * float(np.hypot(di, dj)))
                )
        ia = np.concatenate(ia_all) if ia_all else np.empty(0, dtype=np.int64)
        ib = np.concatenate(ib_all) if ib_all else np.empty(0, dtype=np.int64)
        w = np.concatenate(w_all) if w_all else np.empty(0)
        self._edge_cache[connectivity] = (ia, ib, w)
        return ia, ib, w

    def graph(self, weights: np.ndarray, connectivity: int = 16) -> sparse.csr_matrix:
        ia, ib, _ = self.edges(connectivity)
        n = self.n_nodes
        return sparse.csr_matrix((weights, (ia, ib)), shape=(n, n))

    def length_engine(self, connectivity: int = 16) -> _DijkstraCache:
        if connectivity not in self._length_engine:
            _, _, w = self.edges(connectivity)
            self._length_engine[connectivity] = _DijkstraCache(
                self.graph(w, connectivity)
            )
        return self._length_engine[connectivity]

    def polyline(self, nodes) -> Polyline:
        return Polyline(self.node_cells[np.asarray(nodes, dtype=int)], self.h)

    # -- serialization ------------------------------------------------------

    def to_pbm(self, path) -> None:
        path = FsPath(path)
        nx, ny = self.shape
        with open(path, "w") as fh:
            fh.write(f"P1\n{nx} {ny}\n")
            for j in range(ny):
                fh.write(" ".join("1" if self.interior[i, j] else "0" for i in range(nx)))
                fh.write("\n")
        with open(path.with_suffix(path.suffix + ".meta"), "w") as fh:
            fh.write(f"h = {self.h!r}\nx0 = {self.x0[0]} {self.x0[1]}\n")
            fh.write(f"name = {self.name}\n")

    @classmethod
    def from_pbm(cls, path) -> "GridDomain":
        path = FsPath(path)
        tokens: list[str] = []
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0]
                tokens.extend(line.split())
        if not tokens or tokens[0] != "P1":
            raise DomainError(f"{path}: not a plain PBM (P1) file")
        nx, ny = int(tokens[1]), int(tokens[2])
        bits = np.array(tokens[3 : 3 + nx * ny], dtype=int)
        if len(bits) != nx * ny:
            raise DomainError(f"{path}: bitmap size mismatch")
        interior = bits.reshape(ny, nx).T.astype(bool)
        meta: dict[str, str] = {}
        with open(path.with_suffix(path.suffix + ".meta")) as fh:
            for line in fh:
                if "=" in line:
                    key, val = line.split("=", 1)
                    meta[key.strip()] = val.strip()
        h = float(meta["h"])
        x0 = tuple(int(t) for t in meta["x0"].split())
        return cls(interior, h, x0, name=meta.get("name", path.stem))


# -- module-level metric operations ----------------------------------------


def components(domain: GridDomain, forbidden: np.ndarray | None = None) -> np.ndarray:
    """Connected-component labels of interior cells minus ``forbidden``.

    Returns an int array over the bitmap: -1 outside the remaining set, and
    component ids 0,1,... with the component of x0 labeled 0 when present,
    the rest ordered by first raster-scan occurrence.
    """
    mask = domain.interior.copy()
    if forbidden is not None:
        mask &= ~forbidden
    raw, n = ndimage.label(mask, structure=_STRUCT8)
    out = np.full(domain.shape, -1, dtype=np.int64)
    if n == 0:
        return out
    order: list[int] = []
    if mask[domain.x0]:
        order.append(int(raw[domain.x0]))
    first = ndimage.minimum(
        np.arange(mask.size).reshape(domain.shape), raw, index=range(1, n + 1)
    )
    for lab in np.argsort(first) + 1:
        if lab not in order:
            order.append(int(lab))
    for new, lab in enumerate(order):
        out[raw == lab] = new
    return out


def intrinsic_distance(
    domain: GridDomain, x: Cell, y: Cell, with_path: bool = False
):
    """Shortest euclidean path length inside the domain (lambda metric)."""
    nx, ny = domain.require_interior(x), domain.require_interior(y)
    eng = domain.length_engine()
    dist, _ = eng.from_source(nx)
    if not np.isfinite(dist[ny]):
        raise UnreachableError(f"{x} and {y} lie in different components")
    if not with_path:
        return float(dist[ny])
    return float(dist[ny]), domain.polyline(eng.path(nx, ny))


def _masked_geodesic(domain: GridDomain, mask: np.ndarray, x: Cell, y: Cell):
    """Shortest-length path between x and y restricted to a cell mask."""
    ia, ib, w = domain.edges(16)
    node_ok = mask[tuple(domain.node_cells.T)]
    keep = node_ok[ia] & node_ok[ib]
    n = domain.n_nodes
    sub = sparse.csr_matrix((w[keep], (ia[keep], ib[keep])), shape=(n, n))
    nx, ny = domain.require_interior(x), domain.require_interior(y)
    dist, pred = csgraph.dijkstra(
        sub, directed=False, indices=nx, return_predecessors=True
    )
    if not np.isfinite(dist[ny]):
        return None
    nodes = [ny]
    while nodes[-1] != nx:
        nodes.append(int(pred[nodes[-1]]))
    nodes.reverse()
    return domain.polyline(nodes)


def intrinsic_diameter_distance(
    domain: GridDomain, x: Cell, y: Cell, detail: bool = False
):
    """Min over in-domain paths of the path's euclidean diameter (delta metric).

    Binary search over candidate diameters D.  A path of diameter <= D stays
    within distance D of both endpoints, so connectivity of x,y inside that
    lens is a necessary condition -- its failure certifies the lower bound.
    The reported value is the actual diameter of a shortest path found in the
    smallest feasible lens, a certified upper bound.
    """
    domain.require_interior(x), domain.require_interior(y)
    if tuple(x) == tuple(y):
        return (0.0, 0.0, domain.polyline([domain.require_interior(x)])) if detail else 0.0
    lam, lam_path = intrinsic_distance(domain, x, y, with_path=True)
    best_path = lam_path
    best = lam_path.diameter
    px, py = domain.position(x), domain.position(y)
    centers = (domain.node_cells + 0.5) * domain.h
    dxf = np.full(domain.shape, np.inf)
    dyf = np.full(domain.shape, np.inf)
    dxf[tuple(domain.node_cells.T)] = np.sqrt(((centers - px) ** 2).sum(1))
    dyf[tuple(domain.node_cells.T)] = np.sqrt(((centers - py) ** 2).sum(1))
    lo = float(np.hypot(*(px - py)))
    hi = best
    feasible_mask = None
    for _ in range(24):
        if hi - lo <= max(domain.h / 4.0, 1e-12):
            break
        mid = 0.5 * (lo + hi)
        mask = domain.interior & (dxf <= mid) & (dyf <= mid)
        labels, _ = ndimage.label(mask, structure=_STRUCT8)
        if labels[tuple(x)] and labels[tuple(x)] == labels[tuple(y)]:
            hi = mid
            feasible_mask = mask
        else:
            lo = mid
    if feasible_mask is not None:
        path = _masked_geodesic(domain, feasible_mask, x, y)
        if path is not None and path.diameter < best:
            best = path.diameter
            best_path = path
    value = float(best)
    return (value, float(lo), best_path) if detail else value
