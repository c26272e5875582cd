"""Conformal deformation of the quasihyperbolic metric by an exponential
density, and empirical uniformity/bilipschitz checks of the deformed space.

The density rho_eps(x) = exp(-eps k(x, x0)) rescales quasihyperbolic length:
d_eps(x, y) = inf over paths of the integral of rho_eps against k-arclength.
The deformed space is bounded (diameter about 2/eps) and, on Gromov
hyperbolic domains, uniform; its own quasihyperbolic metric k_rho built from
the deformed boundary distance d_rho is bilipschitz to k.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .grid import DomainError, UnreachableError, _DijkstraCache
from .properties import PropertyReport
from .qh import QhMetric


class DeformedMetric:
    """Deformed length metric d_eps over one domain's cell graph.

    ``d_rho`` is the deformed distance to the boundary: distance to the
    boundary-adjacent cell layer plus the closed-form tail integral of the
    density along the remaining fall to the boundary.  With k growing like
    -log t at distance t from the boundary, the density decays like t^eps and
    the tail from a cell with value rho(b) integrates to rho(b)/eps.
    """

    def __init__(self, qh: QhMetric, epsilon: float):
        if epsilon <= 0:
            raise DomainError(f"deformation parameter must be positive, got {epsilon}")
        self.qh = qh
        self.domain = qh.domain
        self.epsilon = float(epsilon)
        tree = qh.radial_tree()
        self.rho = np.exp(-self.epsilon * tree.dist)

        ia, ib, _ = self.domain.edges(qh.connectivity)
        self.edge_weights = qh.edge_weights * 0.5 * (self.rho[ia] + self.rho[ib])
        n = self.domain.n_nodes
        self.matrix = sparse.csr_matrix(
            (self.edge_weights, (ia, ib)), shape=(n, n)
        )
        self.engine = _DijkstraCache(self.matrix, maxsize=64)

        # deformed boundary distance: one Dijkstra from a virtual boundary
        # node attached to every boundary-adjacent cell with the tail weight
        dvals = self.domain.node_dist()
        near = np.flatnonzero(dvals <= self.domain.h)
        tails = self.rho[near] / self.epsilon
        rows = np.concatenate([ia, near])
        cols = np.concatenate([ib, np.full(len(near), n)])
        data = np.concatenate([self.edge_weights, tails])
        aug = sparse.csr_matrix((data, (rows, cols)), shape=(n + 1, n + 1))
        self.d_rho = csgraph.dijkstra(
            aug, directed=False, indices=n, min_only=True
        )[:n]

        self._k_rho_engine: _DijkstraCache | None = None

    # -- metric queries -----------------------------------------------------

    def node(self, x) -> int:
        return self.domain.require_interior(x)

    def distance(self, x, y, with_path: bool = False):
        nx, ny = self.node(x), self.node(y)
        dist, _ = self.engine.from_source(nx)
        value = float(dist[ny])
        if not np.isfinite(value):
            raise UnreachableError(f"{x} and {y} are not connected")
        if not with_path:
            return value
        return value, np.asarray(self.engine.path(nx, ny))

    def path_length(self, nodes) -> float:
        """Deformed length of a node path (same quadrature as the edges)."""
        nodes = np.asarray(nodes, dtype=int)
        if len(nodes) < 2:
            return 0.0
        klen = np.empty(len(nodes) - 1)
        pts = (self.domain.node_cells[nodes] + 0.5) * self.domain.h
        seg = np.sqrt((np.diff(pts, axis=0) ** 2).sum(1))
        d = self.domain.node_dist()[nodes]
        klen = seg * 0.5 * (1.0 / d[:-1] + 1.0 / d[1:])
        return float((klen * 0.5 * (self.rho[nodes[:-1]] + self.rho[nodes[1:]])).sum())

    def diameter_from(self, x) -> float:
        """Max deformed distance from x (the space is bounded)."""
        dist, _ = self.engine.from_source(self.node(x))
        return float(dist[np.isfinite(dist)].max())

    # -- quasihyperbolic metric of the deformed space -----------------------

    def k_rho_engine(self) -> _DijkstraCache:
        if self._k_rho_engine is None:
            ia, ib, _ = self.domain.edges(self.qh.connectivity)
            # harmonic mean of the density 1/d_rho at the edge endpoints
            w = self.edge_weights * 2.0 / (self.d_rho[ia] + self.d_rho[ib])
            n = self.domain.n_nodes
            self._k_rho_engine = _DijkstraCache(
                sparse.csr_matrix((w, (ia, ib)), shape=(n, n)), maxsize=64
            )
        return self._k_rho_engine

    def k_rho(self, x, y) -> float:
        nx, ny = self.node(x), self.node(y)
        value = float(self.k_rho_engine().from_source(nx)[0][ny])
        if not np.isfinite(value):
            raise UnreachableError(f"{x} and {y} are not connected")
        return value

    def stats(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "rho_min": float(self.rho.min()),
            "rho_max": float(self.rho.max()),
            "d_rho_min": float(self.d_rho.min()),
            "d_rho_max": float(self.d_rho.max()),
        }


def build_deformation(qh: QhMetric, epsilon: float = 0.2) -> DeformedMetric:
    return DeformedMetric(qh, epsilon)


EPSILON_SWEEP = (0.05, 0.1, 0.2, 0.4)


def check_deformed_uniformity(
    metric: DeformedMetric, pairs, seed: int = 0
) -> PropertyReport:
    """Uniform-space constants of (domain, d_eps) measured on d_eps-geodesics.

    A1 = max path-length/d_eps (1 up to quadrature, geodesics realize the
    metric); A2 = max over path points z of the smaller sub-length divided by
    the deformed boundary distance d_rho(z).
    """
    report = PropertyReport("deformed_uniformity", 0.0, seed=seed,
                            resolution=metric.domain.h)
    a1 = a2 = 0.0
    for x, y in pairs:
        if tuple(x) == tuple(y):
            continue
        value, nodes = metric.distance(x, y, with_path=True)
        if value <= 0:
            continue
        # cumulative deformed length along the path
        sub = np.array([0.0] + [
            metric.matrix[nodes[i], nodes[i + 1]]
            or metric.matrix[nodes[i + 1], nodes[i]]
            for i in range(len(nodes) - 1)
        ]).cumsum()
        r1 = float(sub[-1]) / value
        cone = np.minimum(sub, sub[-1] - sub)
        r2 = float((cone / metric.d_rho[nodes]).max())
        report.samples.append({"x": list(map(int, x)), "y": list(map(int, y)),
                               "A1": r1, "A2": r2})
        a1, a2 = max(a1, r1), max(a2, r2)
    report.constant = max(a1, a2)
    report.extra = {
        "A1": a1,
        "A2": a2,
        "deformed_diameter_bound": 2 * metric.diameter_from(metric.domain.x0),
        "epsilon": metric.epsilon,
    }
    return report


def check_bilipschitz(
    metric: DeformedMetric, pairs, seed: int = 0
) -> PropertyReport:
    """C = max over pairs of max(k_rho/k, k/k_rho) between the deformed and
    original quasihyperbolic metrics."""
    report = PropertyReport("bilipschitz", 1.0, seed=seed,
                            resolution=metric.domain.h)
    for x, y in pairs:
        if tuple(x) == tuple(y):
            continue
        k = metric.qh.distance(x, y)
        kr = metric.k_rho(x, y)
        if k <= 0 or kr <= 0:
            continue
        ratio = max(kr / k, k / kr)
        report.samples.append({"x": list(map(int, x)), "y": list(map(int, y)),
                               "k": k, "k_rho": kr, "ratio": ratio})
        report.constant = max(report.constant, ratio)
    report.extra = {"epsilon": metric.epsilon}
    return report
