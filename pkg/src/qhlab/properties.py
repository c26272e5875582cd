"""Empirical checkers for separation / Gehring-Hayman / uniformity properties.

Every checker returns a PropertyReport whose ``constant`` is the measured
extremal ratio over the sampled witnesses (or the minimal passing constant
found by bisection).  Reports are plain data and serialize to JSON/CSV in the
report module.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np

from .grid import GridDomain, components, intrinsic_diameter_distance
from .qh import Geodesic, QhMetric, sample_nodes

LOG2 = float(np.log(2.0))


@dataclass
class PropertyReport:
    name: str
    constant: float
    bound: float | None = None
    passed: bool | None = None
    seed: int | None = None
    resolution: float | None = None
    samples: list[dict] = dfield(default_factory=list)
    extra: dict = dfield(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "constant": self.constant,
            "bound": self.bound,
            "passed": self.passed,
            "seed": self.seed,
            "resolution": self.resolution,
            "n_samples": len(self.samples),
            "samples": self.samples,
            "extra": self.extra,
        }


def sample_pairs(domain: GridDomain, n: int, seed: int):
    nodes = sample_nodes(domain, 2 * n, seed)
    return [
        (tuple(domain.node_cells[int(nodes[2 * t])]),
         tuple(domain.node_cells[int(nodes[2 * t + 1])]))
        for t in range(n)
    ]


def pair_geodesics(qh: QhMetric, pairs) -> list[Geodesic]:
    out = []
    for x, y in pairs:
        if tuple(x) == tuple(y):
            continue
        out.append(qh.distance(x, y, with_geodesic=True)[1])
    return out


def _cumlen(points: np.ndarray) -> np.ndarray:
    seg = np.sqrt((np.diff(points, axis=0) ** 2).sum(1))
    return np.concatenate([[0.0], np.cumsum(seg)])


# -- ball separation ---------------------------------------------------------


def _separation_state(domain: GridDomain, lam_field: np.ndarray, z_d: float,
                      c: float, nx: int, ny: int) -> str:
    """'skip' (an endpoint inside the ball), 'separated' or 'connected'."""
    radius = c * z_d
    in_ball = lam_field <= radius
    # endpoints within grid slack of the ball boundary count as inside: the
    # pair x, y must lie in the geodesic minus the ball, and metrication can
    # push a continuum boundary case marginally outside
    slack = 2.0 * domain.h
    if lam_field[nx] <= radius + slack or lam_field[ny] <= radius + slack:
        return "skip"
    ball = np.zeros(domain.shape, dtype=bool)
    ball[tuple(domain.node_cells[in_ball].T)] = True
    labels = components(domain, ball)
    lx = labels[tuple(domain.node_cells[nx])]
    ly = labels[tuple(domain.node_cells[ny])]
    if lx < 0 or ly < 0:
        return "skip"
    return "separated" if lx != ly else "connected"


def check_ball_separation(
    qh: QhMetric,
    geodesics: list[Geodesic],
    c: float | None = None,
    z_per_geodesic: int = 3,
    seed: int = 0,
) -> PropertyReport:
    """Minimal c such that B(z, c d(z)) (intrinsic lambda-ball) separates the
    two geodesic endpoints for every sampled interior geodesic point z.

    When ``c`` is given, reports pass/fail at that value instead.
    """
    domain = qh.domain
    dvals = domain.node_dist()
    eng = domain.length_engine()
    report = PropertyReport("ball_separation", 0.0, bound=c, seed=seed,
                            resolution=domain.h)
    c_lo_all, c_hi_all = 0.05, 64.0
    worst = 0.0
    all_pass = True
    for gi, geo in enumerate(geodesics):
        n = len(geo.nodes)
        if n < 5:
            continue
        z_idx = np.linspace(1, n - 2, z_per_geodesic).astype(int)
        nx, ny = int(geo.nodes[0]), int(geo.nodes[-1])
        for zi in np.unique(z_idx):
            nz = int(geo.nodes[zi])
            lam_field = eng.from_source(nz)[0]
            z_d = float(dvals[nz])

            def state(cv):
                return _separation_state(domain, lam_field, z_d, cv, nx, ny)

            if c is not None:
                st = state(c)
                ok = st in ("skip", "separated")
                all_pass &= ok
                report.samples.append(
                    {"geodesic": gi, "z_index": int(zi), "state": st, "c": c})
                continue
            # bisection (log scale) for the minimal passing c
            if state(c_hi_all) == "connected":
                worst = float("inf")
                all_pass = False
                report.samples.append(
                    {"geodesic": gi, "z_index": int(zi), "state": "connected",
                     "c": c_hi_all})
                continue
            lo, hi = c_lo_all, c_hi_all
            while hi / lo > 1.01:
                mid = float(np.sqrt(lo * hi))
                if state(mid) == "connected":
                    lo = mid
                else:
                    hi = mid
            worst = max(worst, hi)
            report.samples.append(
                {"geodesic": gi, "z_index": int(zi), "minimal_c": hi})
    report.constant = worst if c is None else float(c)
    report.passed = all_pass if c is not None else np.isfinite(worst)
    return report


# -- Gehring-Hayman ----------------------------------------------------------


def check_gehring_hayman(
    qh: QhMetric, pairs, mode: str = "length", seed: int = 0
) -> PropertyReport:
    """Max over pairs of l(geodesic)/lambda or diam(geodesic)/delta."""
    if mode not in ("length", "diameter"):
        raise ValueError("mode must be 'length' or 'diameter'")
    domain = qh.domain
    report = PropertyReport(f"gehring_hayman_{mode}", 1.0, seed=seed,
                            resolution=domain.h)
    from .grid import intrinsic_distance

    for x, y in pairs:
        if tuple(x) == tuple(y):
            continue
        _, geo = qh.distance(x, y, with_geodesic=True)
        if mode == "length":
            denom = intrinsic_distance(domain, x, y)
            num = geo.length
        else:
            denom = intrinsic_diameter_distance(domain, x, y)
            num = geo.diameter
        if denom <= 0:
            continue
        ratio = num / denom
        report.samples.append({"x": list(map(int, x)), "y": list(map(int, y)),
                               "ratio": ratio})
        report.constant = max(report.constant, ratio)
    return report


def check_local_gehring_hayman(
    qh: QhMetric, pairs, c: float, R: float, mode: str = "length",
    alternate: bool = False, seed: int = 0,
) -> PropertyReport:
    """(c, R)-local Gehring-Hayman: the mode inequality restricted to pairs
    with Lambda (length) or Delta (diameter) at most R.

    With ``alternate`` the reformulated filter is used instead: comparable
    boundary distances (1/R <= d(x)/d(y) <= R) and lambda-or-delta <= R (d^d).
    """
    from .qh import capital_lambda_delta

    domain = qh.domain
    report = PropertyReport(
        f"local_gehring_hayman_{mode}" + ("_alt" if alternate else ""),
        1.0, bound=c, seed=seed, resolution=domain.h)
    from .grid import intrinsic_distance

    qualifying = 0
    for x, y in pairs:
        if tuple(x) == tuple(y):
            continue
        dx, dy = domain.boundary_distance(x), domain.boundary_distance(y)
        lam_cap, dia_cap = capital_lambda_delta(domain, x, y)
        if mode == "length":
            denom = intrinsic_distance(domain, x, y)
        else:
            denom = intrinsic_diameter_distance(domain, x, y)
        if alternate:
            ratio_d = max(dx / dy, dy / dx)
            ok = ratio_d <= R and denom <= R * min(dx, dy)
        else:
            ok = (lam_cap if mode == "length" else dia_cap) <= R
        if not ok:
            continue
        qualifying += 1
        _, geo = qh.distance(x, y, with_geodesic=True)
        num = geo.length if mode == "length" else geo.diameter
        if denom <= 0:
            continue
        ratio = num / denom
        report.samples.append({"x": list(map(int, x)), "y": list(map(int, y)),
                               "ratio": ratio})
        report.constant = max(report.constant, ratio)
    report.extra["qualifying_pairs"] = qualifying
    report.passed = report.constant <= c
    return report


# -- uniformity --------------------------------------------------------------


def check_uniformity(qh: QhMetric, pairs, seed: int = 0) -> PropertyReport:
    """Measured uniformity constants of the geodesic family (Def of uniform
    curves: length bounded by A|x-y|, and double-cone: min of the two
    sub-lengths at each curve point bounded by A d(z))."""
    domain = qh.domain
    dvals = domain.node_dist()
    a1 = a2 = 0.0
    report = PropertyReport("uniformity", 0.0, seed=seed, resolution=domain.h)
    for x, y in pairs:
        if tuple(x) == tuple(y):
            continue
        _, geo = qh.distance(x, y, with_geodesic=True)
        eu = float(np.hypot(*(domain.position(x) - domain.position(y))))
        if eu <= 0:
            continue
        cum = _cumlen(geo.polyline.points)
        r1 = cum[-1] / eu
        sub = np.minimum(cum, cum[-1] - cum)
        with np.errstate(divide="ignore"):
            r2 = float((sub / dvals[geo.nodes]).max())
        report.samples.append({"x": list(map(int, x)), "y": list(map(int, y)),
                               "A1": r1, "A2": r2})
        a1, a2 = max(a1, r1), max(a2, r2)
    report.constant = max(a1, a2)
    report.extra = {"A1": a1, "A2": a2, "doubly_john_A": a2}
    return report


# -- radial hyperbolicity ----------------------------------------------------


def check_radially_hyperbolic(
    qh: QhMetric, c0: float, c: float, R: float,
    n_samples: int = 20, seed: int = 0,
) -> PropertyReport:
    """(c0, c, R)-radial hyperbolicity with center x0.

    Checks the c0/10-ball separation on radial geodesics, the
    (c, R)-diameter Gehring-Hayman property along each sampled radial
    geodesic, and for pairs of radial geodesics sharing a non-root node the
    (c, R)-length-or-diameter property of the union curve.
    """
    domain = qh.domain
    tree = qh.radial_tree()
    nodes = sample_nodes(domain, n_samples, seed)
    report = PropertyReport("radially_hyperbolic", 0.0, bound=c, seed=seed,
                            resolution=domain.h)
    geos = [qh.geodesic_from_nodes(tree.path_nodes(int(v))) for v in nodes
            if int(v) != tree.root]
    sep = check_ball_separation(qh, geos[: max(4, n_samples // 4)],
                                c=c0 / 10.0, seed=seed)
    worst = 0.0
    ok_all = sep.passed

    # (i) diameter GH along each radial geodesic
    rng = np.random.default_rng(seed + 1)
    for geo in geos:
        n = len(geo.nodes)
        if n < 4:
            continue
        i, j = sorted(rng.choice(n, size=2, replace=False))
        if i == j:
            continue
        u = tuple(domain.node_cells[int(geo.nodes[i])])
        v = tuple(domain.node_cells[int(geo.nodes[j])])
        from .qh import capital_lambda_delta

        _, dia_cap = capital_lambda_delta(domain, u, v)
        if dia_cap > R:
            continue
        sub = qh.geodesic_from_nodes(geo.nodes[i : j + 1])
        denom = intrinsic_diameter_distance(domain, u, v)
        if denom <= 0:
            continue
        ratio = sub.diameter / denom
        worst = max(worst, ratio)
        ok = ratio <= c
        ok_all = ok_all and ok
        report.samples.append({"kind": "radial_diameter", "ratio": ratio,
                               "ok": bool(ok)})

    # (ii) unions of two radial geodesics sharing a non-root node
    for a in range(0, len(geos) - 1, 2):
        gx, gy = geos[a], geos[a + 1]
        shared = set(map(int, gx.nodes)) & set(map(int, gy.nodes)) - {tree.root}
        if not shared:
            report.samples.append({"kind": "union", "vacuous": True})
            continue
        # union curve from x down to the divergence node and up to y
        common = [int(v) for v in gx.nodes if int(v) in set(map(int, gy.nodes))]
        meet = common[-1]
        ix = int(np.nonzero(gx.nodes == meet)[0][0])
        iy = int(np.nonzero(gy.nodes == meet)[0][0])
        union_nodes = np.concatenate([gx.nodes[ix:][::-1], gy.nodes[iy + 1 :]])
        x = tuple(domain.node_cells[int(union_nodes[0])])
        y = tuple(domain.node_cells[int(union_nodes[-1])])
        if x == y:
            continue
        from .qh import capital_lambda_delta
        from .grid import intrinsic_distance

        lam_cap, dia_cap = capital_lambda_delta(domain, x, y)
        curve = qh.geodesic_from_nodes(union_nodes)
        held = []
        if lam_cap <= R:
            lam = intrinsic_distance(domain, x, y)
            if lam > 0 and curve.length / lam <= c:
                held.append("length")
        if dia_cap <= R:
            dd = intrinsic_diameter_distance(domain, x, y)
            if dd > 0 and curve.diameter / dd <= c:
                held.append("diameter")
        applicable = (lam_cap <= R) or (dia_cap <= R)
        ok = (not applicable) or bool(held)
        ok_all = ok_all and ok
        report.samples.append({"kind": "union", "held": held,
                               "applicable": bool(applicable), "ok": bool(ok)})
    report.constant = worst
    report.passed = bool(ok_all)
    report.extra = {"separation_minimal_c": sep.constant,
                    "separation_passed": sep.passed}
    return report


# -- geodesic tail diameter --------------------------------------------------


def check_geodesic_tail_diameter(
    qh: QhMetric, pairs, M_grid=None, tol: float = 0.05, seed: int = 0,
) -> PropertyReport:
    """Minimal M in a grid such that every component of geodesic minus the
    euclidean ball B(x, M delta(x,y)) has quasihyperbolic diameter at most
    log 2 (plus tolerance)."""
    domain = qh.domain
    if M_grid is None:
        M_grid = [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0]
    threshold = LOG2 * (1.0 + tol)
    data = []
    for x, y in pairs:
        if tuple(x) == tuple(y):
            continue
        _, geo = qh.distance(x, y, with_geodesic=True)
        delta = intrinsic_diameter_distance(domain, x, y)
        px = domain.position(x)
        radii = np.sqrt(((geo.polyline.points - px) ** 2).sum(1))
        data.append((geo, delta, radii))
    report = PropertyReport("geodesic_tail_diameter", float("inf"),
                            bound=threshold, seed=seed, resolution=domain.h)
    chosen = None
    for M in M_grid:
        ok = True
        worst = 0.0
        for geo, delta, radii in data:
            outside = radii > M * delta
            if not outside.any():
                continue
            # consecutive runs of nodes outside the ball are the components
            edges = np.flatnonzero(np.diff(outside.astype(int)))
            starts = [0] if outside[0] else []
            starts += [int(e) + 1 for e in edges if outside[int(e) + 1]]
            for s in starts:
                e = s
                while e + 1 < len(outside) and outside[e + 1]:
                    e += 1
                kdiam = qh.k_length_of(geo.nodes[s : e + 1])
                worst = max(worst, kdiam)
                if kdiam > threshold:
                    ok = False
        report.samples.append({"M": M, "worst_component_kdiam": worst,
                               "ok": bool(ok)})
        if ok and chosen is None:
            chosen = M
    report.constant = chosen if chosen is not None else float("inf")
    report.passed = chosen is not None
    return report


# -- auxiliary bound checks (used by the test suite) -------------------------


def midpoint_john_check(qh: QhMetric, pairs, A: float, tol: float = 0.2):
    """At geodesic midpoints z with delta(x,y) >= d(z)/2, the half-geodesic
    length is bounded by 3 A delta(x,y) (forward John/diameter bound)."""
    domain = qh.domain
    dvals = domain.node_dist()
    out = []
    for x, y in pairs:
        if tuple(x) == tuple(y):
            continue
        _, geo = qh.distance(x, y, with_geodesic=True)
        cum = _cumlen(geo.polyline.points)
        mid = int(np.searchsorted(cum, cum[-1] / 2))
        mid = min(mid, len(geo.nodes) - 1)
        dz = float(dvals[int(geo.nodes[mid])])
        delta = intrinsic_diameter_distance(domain, x, y)
        if delta < dz / 2:
            continue
        lhs = float(cum[mid])
        out.append((lhs, 3 * A * delta, lhs <= 3 * A * delta * (1 + tol) + 2 * domain.h))
    return out
