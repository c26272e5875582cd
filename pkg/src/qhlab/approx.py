"""Assembly of the smooth approximant and its error/decay measurements.

The approximant at level m is

    u_m = ( sum_Q psi-hat_Q * P_Q  +  sum_i phi-hat_i * P_i
            + sum_j xi-hat_j * u ) / S,

with S the raw hat-sum, P_Q the averaged-derivative polynomial of u on the
band cube Q, and P_i the polynomial of the tentacle group's assigned cube.
All factors carry closed-form jets, so derivatives of u_m up to order k come
from exact product and quotient rules on the evaluation grid -- u_m is smooth
with bounded derivatives even when u blows up at the boundary.

Since the xi-terms reproduce u exactly, u - u_m is supported precisely in
the union of the psi/phi supports, which concentrates near the boundary as
m grows; the error decay check measures the L^{k,p} error against the
tail seminorm of u outside a fractional-level core.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np
from scipy import ndimage

from .decomposition import CoreTentacleDecomposition, build_core_tentacle
from .fixtures import AnalyticField, multi_indices
from .grid import DomainError, GridDomain, _STRUCT8
from .pou import PartitionOfUnity, Jet, build_partition, jet_product, \
    jet_quotient, jet_zero
from .poly import PolyApprox, fit_polynomial
from .properties import PropertyReport
from .qh import QhMetric
from .whitney import WhitneyDecomposition, whitney_decompose


class EvalGrid:
    """Refinement of the domain's cell grid for quadrature and sampling.

    Points are the centers of refined cells whose parent domain cell is
    interior; the refinement factor is capped so grids stay at desk scale.
    """

    MAX_SIDE = 1024

    def __init__(self, domain: GridDomain, refine: int = 2):
        refine = int(refine)
        while refine > 1 and max(domain.shape) * refine > self.MAX_SIDE:
            refine //= 2
        self.domain = domain
        self.refine = max(refine, 1)
        self.spacing = domain.h / self.refine
        fine = np.kron(domain.interior,
                       np.ones((self.refine, self.refine), dtype=bool))
        self.cells = np.argwhere(fine)
        self.x = (self.cells[:, 0] + 0.5) * self.spacing
        self.y = (self.cells[:, 1] + 0.5) * self.spacing
        self.parent = self.cells // self.refine
        self.cell_area = self.spacing ** 2

    def region(self, domain_mask: np.ndarray) -> np.ndarray:
        """Boolean selector of evaluation points over a domain-cell mask."""
        return domain_mask[self.parent[:, 0], self.parent[:, 1]]


@dataclass
class SampledFunction:
    """A field with its jet materialized on an evaluation grid."""

    grid: EvalGrid
    field: AnalyticField
    k: int
    p: float
    jets: Jet = dfield(default_factory=dict, repr=False)

    def __post_init__(self):
        if not 1 <= self.p < np.inf:
            raise DomainError(f"integrability exponent out of range: {self.p}")
        if self.k > self.field.order:
            raise DomainError(
                f"order k={self.k} exceeds the field's jet order")
        for alpha in multi_indices(self.k):
            self.jets[alpha] = self.field.derivative(
                alpha, self.grid.x, self.grid.y)

    def self_check(self, n_probe: int = 200, seed: int = 0) -> float:
        """Central-difference consistency of the derivative fields."""
        from .fixtures import verify_jets

        rng = np.random.default_rng(seed)
        idx = rng.choice(len(self.grid.x), size=min(n_probe, len(self.grid.x)),
                         replace=False)
        step = self.grid.spacing / 64.0
        return verify_jets(self.field, self.grid.x[idx], self.grid.y[idx],
                           step, order=self.k)


def seminorm(jets: Jet, sel: np.ndarray, k: int, p: float,
             cell_area: float) -> float:
    """L^{k,p} seminorm (top-order derivatives) by midpoint quadrature."""
    total = 0.0
    for alpha in multi_indices(k):
        if sum(alpha) != k:
            continue
        vals = jets[alpha][sel] if sel is not None else jets[alpha]
        total += float((np.abs(vals) ** p).sum() * cell_area)
    return total ** (1.0 / p)


@dataclass
class Approximant:
    m: int
    k: int
    p: float
    grid: EvalGrid
    jets: Jet = dfield(repr=False, default=None)  # u_m and derivatives
    sum_jet: Jet = dfield(repr=False, default=None)
    polynomials: dict = dfield(default_factory=dict)
    sup_norms: dict = dfield(default_factory=dict)
    error_selector: np.ndarray = dfield(repr=False, default=None)

    def error_jets(self, u: SampledFunction) -> Jet:
        return {a: u.jets[a] - self.jets[a] for a in self.jets}


def assemble(u: SampledFunction, pou: PartitionOfUnity,
             ct: CoreTentacleDecomposition) -> Approximant:
    """Evaluate u_m and its derivatives up to order k on the grid."""
    k = u.k
    alphas = multi_indices(k)
    grid = u.grid
    dom = ct.domain
    x, y = grid.x, grid.y

    polys: dict = {}

    def poly_of_cube(q: int) -> PolyApprox:
        if q not in polys:
            polys[q] = fit_polynomial(u.field, ct.dec.cube_cells(q), k, dom.h)
        return polys[q]

    S = pou.sum_jet(x, y, alphas)
    N = jet_zero(x.shape, alphas)
    err_sel = np.zeros(len(x), dtype=bool)  # union of psi/phi supports
    for hat in pou.hats:
        b = hat.bump.bbox
        sel = (x > b[0]) & (x < b[1]) & (y > b[2]) & (y < b[3])
        if not sel.any():
            continue
        hj = hat.bump.jet(x[sel], y[sel], alphas)
        if hat.kind == "psi":
            coeff = poly_of_cube(hat.key)
            fj = {a: coeff.derivative(a, x[sel], y[sel]) for a in alphas}
            err_sel[np.flatnonzero(sel)[hj[(0, 0)] > 0]] = True
        elif hat.kind == "phi":
            g = ct.groups[hat.key]
            coeff = poly_of_cube(g.assigned_cube)
            fj = {a: coeff.derivative(a, x[sel], y[sel]) for a in alphas}
            err_sel[np.flatnonzero(sel)[hj[(0, 0)] > 0]] = True
        else:  # xi: reproduce u itself
            fj = {a: u.jets[a][sel] for a in alphas}
        term = jet_product(hj, fj, alphas)
        for a in alphas:
            N[a][sel] += term[a]
    um = jet_quotient(N, S, alphas)

    out = Approximant(ct.m, k, u.p, grid, um, S, polys, {}, err_sel)
    for a in alphas:
        out.sup_norms[a] = float(np.abs(um[a]).max())
    return out


def reproduction_error(u: SampledFunction, approx: Approximant) -> float:
    """Max pointwise |u - u_m| over the grid (0 for degree <= k-1 inputs)."""
    return float(np.abs(u.jets[(0, 0)] - approx.jets[(0, 0)]).max())


def check_analysts_trick(u: SampledFunction, approx: Approximant,
                         pou: PartitionOfUnity, ct: CoreTentacleDecomposition,
                         n_cubes: int = 3, seed: int = 0) -> float:
    """Max mismatch between the direct jet of u_m and the telescoped
    expansion that subtracts a reference cube polynomial from every term.

    For |alpha| = k and points in a band cube's neighborhood:
      grad^a u_m = sum_{b<a} [ sum_Q grad^b(P_Q - P_ref) grad^(a-b) psi_Q
                   + sum_i grad^b(P_i - P_ref) grad^(a-b) phi_i
                   + sum_j grad^b(u - P_ref) grad^(a-b) xi_j ]
                   + grad^a u * sum_j xi_j.
    """
    from math import comb

    k = u.k
    alphas = multi_indices(k)
    rng = np.random.default_rng(seed)
    psi_cubes = [h.key for h in pou.hats if h.kind == "psi"]
    if not psi_cubes:
        return 0.0
    pick = rng.choice(psi_cubes, size=min(n_cubes, len(psi_cubes)),
                      replace=False)
    worst = 0.0
    top = [a for a in alphas if sum(a) == k]
    for q in pick:
        ref = approx.polynomials[q]
        sel = u.grid.region(_cells_to_mask(ct.domain.shape, ct.bq[q]))
        idx = np.flatnonzero(sel)
        if len(idx) > 400:
            idx = idx[rng.choice(len(idx), size=400, replace=False)]
        x, y = u.grid.x[idx], u.grid.y[idx]
        S = pou.sum_jet(x, y, alphas)
        xi_sum = np.zeros(len(x))
        rebuilt = {a: np.zeros(len(x)) for a in top}
        for hat in pou.hats:
            b = hat.bump.bbox
            insel = (x > b[0]) & (x < b[1]) & (y > b[2]) & (y < b[3])
            if not insel.any():
                continue
            nj = jet_quotient(hat.bump.jet(x, y, alphas), S, alphas)
            if hat.kind == "psi":
                coeff = approx.polynomials[hat.key]
                fj = {a: coeff.derivative(a, x, y) - ref.derivative(a, x, y)
                      for a in alphas}
            elif hat.kind == "phi":
                coeff = approx.polynomials[ct.groups[hat.key].assigned_cube]
                fj = {a: coeff.derivative(a, x, y) - ref.derivative(a, x, y)
                      for a in alphas}
            else:
                fj = {a: u.field.derivative(a, x, y) - ref.derivative(a, x, y)
                      for a in alphas}
                xi_sum = xi_sum + nj[(0, 0)]
            for a in top:
                acc = np.zeros(len(x))
                for b1 in range(a[0] + 1):
                    for b2 in range(a[1] + 1):
                        if (b1, b2) == a:
                            continue  # beta < alpha terms only
                        c = comb(a[0], b1) * comb(a[1], b2)
                        acc += c * fj[(b1, b2)] \
                            * nj[(a[0] - b1, a[1] - b2)]
                rebuilt[a] += acc
        for a in top:
            direct = approx.jets[a][idx]
            full = rebuilt[a] + u.field.derivative(a, x, y) * xi_sum
            scale = np.abs(direct).max() + 1.0
            worst = max(worst, float(np.abs(full - direct).max() / scale))
    return worst


def _cells_to_mask(shape, cells):
    out = np.zeros(shape, dtype=bool)
    out[cells[:, 0], cells[:, 1]] = True
    return out


def error_localization(u: SampledFunction, approx: Approximant) -> float:
    """Fraction of the p-mass of |grad^k (u - u_m)| lying outside the
    psi/phi supports (zero up to rounding: the xi-terms reproduce u)."""
    diff = approx.error_jets(u)
    inside = seminorm(diff, approx.error_selector, u.k, u.p,
                      u.grid.cell_area) ** u.p
    total = seminorm(diff, None, u.k, u.p, u.grid.cell_area) ** u.p
    if total == 0:
        return 0.0
    return (total - inside) / total


def core_mask_at_level(dec: WhitneyDecomposition, level: float) -> np.ndarray:
    """Component of the base point in the union of unflagged cubes of side
    at least 2^-level (fractional levels allowed)."""
    dom = dec.domain
    l_min = 2.0 ** (-level)
    big = np.zeros(dom.shape, dtype=bool)
    for q in dec.cubes:
        if not q.flagged and q.l >= l_min - 1e-12:
            big[q.cell_slices()] = True
    if not big[dom.x0]:
        return np.zeros(dom.shape, dtype=bool)
    labels, _ = ndimage.label(big, structure=_STRUCT8)
    return labels == labels[dom.x0]


def error_decay(field: AnalyticField, domain: GridDomain, k: int, p: float,
                m_list, alpha_tail: float = 0.6, refine: int = 2,
                qh: QhMetric | None = None,
                dec: WhitneyDecomposition | None = None) -> PropertyReport:
    """Per-level error, tail seminorm, and sup-norms of the approximant.

    Levels whose decomposition degenerates (base point swallowed at coarse
    m) are recorded as skipped.  The caller asserts decay/boundedness.
    """
    qh = qh or QhMetric(domain)
    dec = dec or whitney_decompose(domain)
    grid = EvalGrid(domain, refine)
    u = SampledFunction(grid, field, k, p)
    total = seminorm(u.jets, None, k, p, grid.cell_area)
    rep = PropertyReport("error_decay", 0.0, resolution=domain.h)
    rows = []
    for m in m_list:
        try:
            ct = build_core_tentacle(dec, qh, m)
        except DomainError as exc:
            rows.append({"m": int(m), "skipped": str(exc)})
            continue
        pou = build_partition(ct, kmax=k)
        approx = assemble(u, pou, ct)
        diff = approx.error_jets(u)
        err = seminorm(diff, None, k, p, grid.cell_area)
        tail_sel = grid.region(~core_mask_at_level(dec, alpha_tail * m))
        tail = seminorm(u.jets, tail_sel, k, p, grid.cell_area)
        rows.append({
            "m": int(m),
            "error": err,
            "tail": tail,
            "ratio": err / tail if tail > 0 else float("inf"),
            "sup_norms": {str(a): v for a, v in approx.sup_norms.items()},
            "localization_leak": error_localization(u, approx),
        })
    done = [r for r in rows if "error" in r]
    rep.samples = rows
    rep.extra = {
        "k": k, "p": p, "alpha_tail": alpha_tail,
        "total_seminorm": total,
        "errors": [r["error"] for r in done],
        "ratios": [r["ratio"] for r in done],
        "levels": [r["m"] for r in done],
    }
    rep.constant = done[-1]["error"] / done[0]["error"] if len(done) > 1 else 0.0
    rep.passed = bool(done) and all(np.isfinite(r["error"]) for r in done)
    return rep
