"""Averaged-derivative polynomial approximation on cell sets, and the norm
equivalence / chaining constants it relies on.

For a degree-(k-1) polynomial P fitted to u on a cell set E, the defining
moment conditions are: for every multi-index alpha with |alpha| <= k-1, the
average of grad^alpha (u - P) over E is zero.  In the shifted monomial basis
the system is triangular in derivative order and is solved top-down, after
an affine normalization of E that makes conditioning independent of the cell
set's physical size.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield
from math import factorial

import numpy as np

from .fixtures import multi_indices
from .grid import DomainError
from .properties import PropertyReport

MOMENT_TOL = 1e-10


@dataclass
class PolyApprox:
    """Polynomial in normalized coordinates t = (x - center)/scale."""

    coeffs: dict[tuple[int, int], float]  # basis t1^a t2^b
    center: tuple[float, float]
    scale: float
    k: int
    cells: np.ndarray = dfield(repr=False, default=None)
    moment_residuals: dict[tuple[int, int], float] = dfield(default_factory=dict)

    def derivative(self, alpha: tuple[int, int], px: np.ndarray,
                   py: np.ndarray) -> np.ndarray:
        """grad^alpha P at physical points (closed form)."""
        tx = (np.asarray(px, dtype=float) - self.center[0]) / self.scale
        ty = (np.asarray(py, dtype=float) - self.center[1]) / self.scale
        out = np.zeros(np.shape(tx), dtype=float)
        a1, a2 = alpha
        for (b1, b2), c in self.coeffs.items():
            if b1 < a1 or b2 < a2:
                continue
            f = (factorial(b1) // factorial(b1 - a1)) * \
                (factorial(b2) // factorial(b2 - a2))
            out += c * f * tx ** (b1 - a1) * ty ** (b2 - a2)
        return out / self.scale ** (a1 + a2)

    def __call__(self, px, py):
        return self.derivative((0, 0), px, py)


def _points_of_cells(cells: np.ndarray, spacing: float) -> tuple[np.ndarray, np.ndarray]:
    cells = np.asarray(cells)
    return (cells[:, 0] + 0.5) * spacing, (cells[:, 1] + 0.5) * spacing


def fit_polynomial(field, cells: np.ndarray, k: int, spacing: float
                   ) -> PolyApprox:
    """Fit the degree-(k-1) polynomial matching all averaged derivatives of
    the field over the cell set (cells at the given grid spacing).

    ``field`` provides ``derivative(alpha, px, py)``.  Solved top-down:
    coefficients of degree k-1 come directly from the top-order derivative
    averages; each lower order then subtracts the known higher terms.
    """
    cells = np.asarray(cells)
    if len(cells) == 0:
        raise DomainError("cannot fit a polynomial on an empty cell set")
    px, py = _points_of_cells(cells, spacing)
    cx, cy = float(px.mean()), float(py.mean())
    scale = float(max(px.max() - px.min(), py.max() - py.min(), spacing))
    tx, ty = (px - cx) / scale, (py - cy) / scale

    # averaged field derivatives, expressed in normalized coordinates
    avg_u = {
        alpha: float(field.derivative(alpha, px, py).mean())
        * scale ** (alpha[0] + alpha[1])
        for alpha in multi_indices(k - 1)
    }
    # normalized monomial moments avg of t^beta, needed up to degree k-1
    mom = {
        (a, b): float((tx ** a * ty ** b).mean())
        for (a, b) in multi_indices(k - 1)
    }

    coeffs: dict[tuple[int, int], float] = {}
    for order in range(k - 1, -1, -1):
        for alpha in [m for m in multi_indices(k - 1) if sum(m) == order]:
            a1, a2 = alpha
            # avg grad^alpha P = sum over beta >= alpha of
            #   c_beta * beta!/(beta-alpha)! * avg t^(beta-alpha)
            rhs = avg_u[alpha]
            for (b1, b2), c in coeffs.items():
                if b1 >= a1 and b2 >= a2 and (b1, b2) != alpha:
                    f = (factorial(b1) // factorial(b1 - a1)) * \
                        (factorial(b2) // factorial(b2 - a2))
                    rhs -= c * f * mom[(b1 - a1, b2 - a2)]
            coeffs[alpha] = rhs / (factorial(a1) * factorial(a2))

    poly = PolyApprox(coeffs, (cx, cy), scale, k, cells)
    # residuals: |alpha| <= k-1 asserted, |alpha| = k reported only
    for alpha in multi_indices(min(k, field.order)):
        res = float((field.derivative(alpha, px, py)
                     - poly.derivative(alpha, px, py)).mean())
        den = abs(avg_u.get(alpha, 0.0)) / scale ** sum(alpha) + 1.0
        poly.moment_residuals[alpha] = res / den
        if sum(alpha) <= k - 1 and abs(res / den) > MOMENT_TOL:
            raise DomainError(
                f"moment condition {alpha} violated: residual {res:.2e}")
    return poly


def poly_difference_norm(p1: PolyApprox, p2: PolyApprox,
                         alpha: tuple[int, int], cells: np.ndarray,
                         spacing: float, p: float) -> float:
    px, py = _points_of_cells(cells, spacing)
    diff = p1.derivative(alpha, px, py) - p2.derivative(alpha, px, py)
    return float((np.abs(diff) ** p).sum() * spacing ** 2) ** (1.0 / p)


def norm_equivalence_check(dec, k: int, p: float, eta: float = 0.25,
                           n_cubes: int = 20, n_pairs: int = 8,
                           seed: int = 0) -> PropertyReport:
    """Measured constant in ||P||_Lp(E) <= C ||P||_Lp(F) over random subsets
    E, F of Whitney cubes with |E|, |F| > eta |Q|, for random degree-(k-1)
    polynomials."""
    rng = np.random.default_rng(seed)
    dom = dec.domain
    rep = PropertyReport("norm_equivalence", 1.0, seed=seed, resolution=dom.h)
    unflagged = [q.index for q in dec.cubes if not q.flagged and q.size >= 2]
    idx = rng.choice(len(unflagged), size=min(n_cubes, len(unflagged)),
                     replace=False)
    for qi in (unflagged[i] for i in idx):
        cells = dec.cube_cells(qi)
        nq = len(cells)
        keep = max(int(np.ceil(eta * nq)) + 1, 1)
        for _ in range(n_pairs):
            e = cells[rng.choice(nq, size=min(nq, keep + rng.integers(0, nq - keep + 1)), replace=False)]
            f = cells[rng.choice(nq, size=min(nq, keep + rng.integers(0, nq - keep + 1)), replace=False)]
            coeffs = {a: float(rng.normal()) for a in multi_indices(k - 1)}
            center = tuple((cells.mean(0) + 0.5) * dom.h)
            poly = PolyApprox(coeffs, center, dec.cubes[qi].l, k)
            ne = poly_norm(poly, e, dom.h, p)
            nf = poly_norm(poly, f, dom.h, p)
            if nf == 0:
                continue
            rep.constant = max(rep.constant, ne / nf)
    rep.extra = {"eta": eta, "k": k, "p": p,
                 "bound_for_constants": eta ** (-1.0 / p)}
    rep.passed = np.isfinite(rep.constant)
    return rep


def poly_norm(poly: PolyApprox, cells: np.ndarray, spacing: float,
              p: float) -> float:
    px, py = _points_of_cells(cells, spacing)
    return float((np.abs(poly(px, py)) ** p).sum() * spacing ** 2) ** (1.0 / p)


def chaining_check(ct, field, k: int, p: float, pairs=None,
                   max_pairs: int = 60, seed: int = 0) -> PropertyReport:
    """Measured constant in the chained-oscillation estimate: for cube pairs
    (Q, Q') joined by a face-adjacent chain, and |alpha| <= k-1,

      ||grad^alpha (P_Q - P_Q')||_Lp(Q)
          <= C l(Q)^(k - |alpha|) ||grad^k u||_Lp(union of chain cubes)
             * |Q|^(1/p) / |union|^(1/p-ish)

    Reports the max ratio with the size factors of the oscillation
    estimate; asserts finiteness."""
    dec, dom = ct.dec, ct.domain
    rng = np.random.default_rng(seed)
    if pairs is None:
        from .decomposition import chain_pair_classes

        all_pairs = chain_pair_classes(ct)
        if len(all_pairs) > max_pairs:
            sel = rng.choice(len(all_pairs), size=max_pairs, replace=False)
            pairs = [all_pairs[i] for i in sel]
        else:
            pairs = all_pairs
    rep = PropertyReport("chaining", 0.0, seed=seed, resolution=dom.h)
    fits: dict[int, PolyApprox] = {}

    def fit(q):
        if q not in fits:
            fits[q] = fit_polynomial(field, dec.cube_cells(q), k, dom.h)
        return fits[q]

    top = [a for a in multi_indices(k) if sum(a) == k]
    for q1, q2 in pairs:
        chain = ct.chain(q1, q2)
        cells1 = dec.cube_cells(q1)
        px, py = _points_of_cells(
            np.concatenate([dec.cube_cells(q) for q in chain]), dom.h)
        grad_k = sum(np.abs(field.derivative(a, px, py)) ** p for a in top)
        rhs_norm = float(grad_k.sum() * dom.h ** 2) ** (1.0 / p)
        l1 = dec.cubes[q1].l
        p1, p2 = fit(q1), fit(q2)
        for alpha in multi_indices(k - 1):
            lhs = poly_difference_norm(p1, p2, alpha, cells1, dom.h, p)
            denom = l1 ** (k - sum(alpha)) * rhs_norm
            if denom > 0:
                rep.constant = max(rep.constant, lhs / denom)
        rep.samples.append({"pair": [int(q1), int(q2)], "chain_len": len(chain)})
    rep.extra = {"k": k, "p": p, "n_pairs": len(pairs)}
    rep.passed = np.isfinite(rep.constant)
    return rep
