"""Smooth partition of unity subordinate to the core/tentacle cover.

Every bump is assembled from closed-form tensor box bumps, so values and
all partial derivatives up to order 3 are evaluated analytically at any
point -- no numeric convolution and no grid dependence.  Each covered set is
decomposed into disjoint axis-aligned rectangles; the set's raw bump is the
complemented product 1 - prod(1 - b_rect) of per-rectangle plateau bumps,
which is exactly 1 on the set, supported in the rectangles' dilations, and
smooth.

The 1-D ramp is g(t) = f(t) / (f(t) + f(1 - t)) with f(t) = exp(-1/t):
identically 0 for t <= 0, identically 1 for t >= 1, C-infinity in between
with closed-form derivatives.  Ramp widths scale with the level (2^-m), so
the derivative bounds grow like 2^(m |alpha|).

Three bump families mirror the cover:
  psi  - per unused band cube Q: 1 on the cube's blocking neighborhood,
         supported in (a half-cell of) the 11/10-dilated concentric box;
  phi  - per tentacle group: 1 on the member components and the group cubes'
         blocking neighborhoods, supported in their 2^-m/100-neighborhoods
         and 11/10-dilated boxes;
  xi   - per thick component U: 1 on U, supported in B(U, 2^-m/100).
The normalized partition divides each raw bump by the total sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .decomposition import CoreTentacleDecomposition, mask_rectangles
from .fixtures import multi_indices
from .grid import DomainError

KMAX = 3
ALPHAS = multi_indices(KMAX)

Jet = dict  # alpha -> ndarray


def _ramp_inside(t: np.ndarray, d: int) -> np.ndarray:
    """Ramp derivatives on (0, 1) via the numerically stable logistic form
    g(t) = sigma(z(t)) with z = 1/t - 1/(1-t) and sigma(z) = 1/(1+e^z):
    the exponential is only ever taken of a non-positive argument, so large
    |z| underflows to 0/1 instead of overflowing."""
    z = 1.0 / t - 1.0 / (1.0 - t)
    ez = np.exp(-np.abs(z))
    sig = np.where(z > 0, ez / (1.0 + ez), 1.0 / (1.0 + ez))
    if d == 0:
        return sig
    s1 = -sig * (1.0 - sig)  # d sigma / dz
    z1 = -1.0 / t**2 - 1.0 / (1.0 - t) ** 2
    if d == 1:
        return s1 * z1
    s2 = s1 * (1.0 - 2.0 * sig)
    z2 = 2.0 / t**3 - 2.0 / (1.0 - t) ** 3
    if d == 2:
        return s2 * z1**2 + s1 * z2
    s3 = s1 * (1.0 - 6.0 * sig + 6.0 * sig**2)
    z3 = -6.0 / t**4 - 6.0 / (1.0 - t) ** 4
    return s3 * z1**3 + 3.0 * s2 * z1 * z2 + s1 * z3


@lru_cache(maxsize=1)
def ramp_derivative_maxima() -> tuple[float, ...]:
    """sup |g^(d)| on [0, 1] by dense sampling (g is fixed, so this is a
    constant of the construction)."""
    tt = np.linspace(1e-9, 1 - 1e-9, 20001)
    return tuple(float(np.abs(_ramp_inside(tt, d)).max())
                 for d in range(KMAX + 1))


def _ramp(t: np.ndarray, d: int) -> np.ndarray:
    """d-th derivative of the unit ramp at t (0 below 0, 1 above 1)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    inside = (t > 0) & (t < 1)
    if d == 0:
        out[t >= 1] = 1.0
    if inside.any():
        out[inside] = _ramp_inside(t[inside], d)
    return out


@dataclass(frozen=True)
class Profile:
    """1-D plateau profile: 0 -> 1 over [lo-w_lo, lo], 1 on [lo, hi],
    1 -> 0 over [hi, hi+w_hi]."""

    lo: float
    hi: float
    w_lo: float
    w_hi: float

    def eval(self, t: np.ndarray, d: int) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        up = _ramp((t - (self.lo - self.w_lo)) / self.w_lo, d) / self.w_lo**d
        out = np.where(t <= self.lo, up, 0.0 if d else 1.0)
        down_arg = ((self.hi + self.w_hi) - t) / self.w_hi
        down = _ramp(down_arg, d) * (-1.0 / self.w_hi) ** d
        return np.where(t >= self.hi, down, out)

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo - self.w_lo, self.hi + self.w_hi)


@dataclass(frozen=True)
class BoxBump:
    """Tensor-product bump: plateau on [lo,hi]^2 rectangle with per-side
    ramps; value and all derivatives up to KMAX are closed-form."""

    px: Profile
    py: Profile

    def jet(self, x: np.ndarray, y: np.ndarray, alphas=ALPHAS) -> Jet:
        vx = {d: self.px.eval(x, d) for d in {a[0] for a in alphas}}
        vy = {d: self.py.eval(y, d) for d in {a[1] for a in alphas}}
        return {a: vx[a[0]] * vy[a[1]] for a in alphas}

    @property
    def support(self) -> tuple[float, float, float, float]:
        sx, sy = self.px.support, self.py.support
        return (sx[0], sx[1], sy[0], sy[1])


def jet_product(j1: Jet, j2: Jet, alphas=ALPHAS) -> Jet:
    out = {}
    for a in alphas:
        acc = 0.0
        for b1 in range(a[0] + 1):
            for b2 in range(a[1] + 1):
                c = comb(a[0], b1) * comb(a[1], b2)
                acc = acc + c * j1[(b1, b2)] * j2[(a[0] - b1, a[1] - b2)]
        out[a] = acc
    return out


def jet_quotient(num: Jet, den: Jet, alphas=ALPHAS) -> Jet:
    """Jet of num/den, solved triangularly from the Leibniz identity."""
    out: Jet = {}
    for a in alphas:  # graded order: lower |a| first
        acc = num[a]
        for b1 in range(a[0] + 1):
            for b2 in range(a[1] + 1):
                if (b1, b2) == a:
                    continue
                c = comb(a[0], b1) * comb(a[1], b2)
                acc = acc - c * out[(b1, b2)] * den[(a[0] - b1, a[1] - b2)]
        out[a] = acc / den[(0, 0)]
    return out


def jet_zero(shape, alphas=ALPHAS) -> Jet:
    return {a: np.zeros(shape) for a in alphas}


class SetBump:
    """Smooth bump equal to 1 on a cell set, supported in its dilation.

    ``rects`` are physical plateau rectangles (x0, x1, y0, y1) with per-side
    ramp widths (wx0, wx1, wy0, wy1).
    """

    def __init__(self, boxes: list[BoxBump]):
        if not boxes:
            raise DomainError("bump over an empty rectangle list")
        self.boxes = boxes
        sups = np.array([b.support for b in boxes])
        self.bbox = (sups[:, 0].min(), sups[:, 1].max(),
                     sups[:, 2].min(), sups[:, 3].max())

    def jet(self, x: np.ndarray, y: np.ndarray, alphas=ALPHAS) -> Jet:
        """1 - prod(1 - b) over the boxes, accumulated only where boxes act."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        acc = jet_zero(x.shape, alphas)
        acc[(0, 0)] = np.ones(x.shape)
        for box in self.boxes:
            s = box.support
            sel = (x > s[0]) & (x < s[1]) & (y > s[2]) & (y < s[3])
            if not sel.any():
                continue
            bj = box.jet(x[sel], y[sel], alphas)
            comp = {a: (1.0 - bj[a] if a == (0, 0) else -bj[a])
                    for a in alphas}
            sub = {a: acc[a][sel] for a in alphas}
            prod = jet_product(sub, comp, alphas)
            for a in alphas:
                acc[a][sel] = prod[a]
        out = {a: -acc[a] for a in alphas}
        out[(0, 0)] = 1.0 - acc[(0, 0)]
        return out


@dataclass
class Hat:
    """One raw (un-normalized) member of the partition."""

    kind: str  # "psi" | "phi" | "xi"
    key: int  # cube index / group position / thick-component position
    bump: SetBump
    plateau_rects: list[tuple[float, float, float, float]]
    support_rects: list[tuple[float, float, float, float]]
    allowed_rects: list[tuple[float, float, float, float]]  # for (iv) checks

    def jet(self, x, y, alphas=ALPHAS) -> Jet:
        return self.bump.jet(x, y, alphas)

    def probe_points(self, samples_per_ramp: int = 6
                     ) -> tuple[np.ndarray, np.ndarray]:
        """Points straddling every ramp band of every box (for sup-norm
        measurement of sub-grid ramps)."""
        xs, ys = [], []
        for box in self.bump.boxes:
            sx, sy = box.px.support, box.py.support
            gx = np.concatenate([
                np.linspace(sx[0], box.px.lo, samples_per_ramp + 2)[1:-1],
                np.linspace(box.px.hi, sx[1], samples_per_ramp + 2)[1:-1],
                np.linspace(box.px.lo, box.px.hi, 4),
            ])
            gy = np.concatenate([
                np.linspace(sy[0], box.py.lo, samples_per_ramp + 2)[1:-1],
                np.linspace(box.py.hi, sy[1], samples_per_ramp + 2)[1:-1],
                np.linspace(box.py.lo, box.py.hi, 4),
            ])
            mx, my = np.meshgrid(gx, gy, indexing="ij")
            xs.append(mx.ravel())
            ys.append(my.ravel())
        return np.concatenate(xs), np.concatenate(ys)


def _rects_physical(mask: np.ndarray, h: float
                    ) -> list[tuple[float, float, float, float]]:
    return [(i0 * h, (i0 + ni) * h, j0 * h, (j0 + nj) * h)
            for i0, j0, ni, nj in mask_rectangles(mask)]


def _cells_rects(shape, cells: np.ndarray, h: float):
    mask = np.zeros(shape, dtype=bool)
    mask[cells[:, 0], cells[:, 1]] = True
    return _rects_physical(mask, h)


def _uniform_bump(rects, delta: float) -> SetBump:
    boxes = [
        BoxBump(Profile(x0, x1, delta, delta), Profile(y0, y1, delta, delta))
        for x0, x1, y0, y1 in rects
    ]
    return SetBump(boxes)


def _clipped_bump(rects, ramp: float, allowed, h: float) -> SetBump:
    """Per-side ramps clipped to the allowed outer box, never exceeding it by
    more than half a domain cell, and never thinner than h/4."""
    ax0, ax1, ay0, ay1 = allowed
    boxes = []
    for x0, x1, y0, y1 in rects:
        def w(gap):
            return max(min(ramp, gap + 0.5 * h), 0.25 * h)

        boxes.append(BoxBump(
            Profile(x0, x1, w(x0 - ax0), w(ax1 - x1)),
            Profile(y0, y1, w(y0 - ay0), w(ay1 - y1)),
        ))
    return SetBump(boxes)


class PartitionOfUnity:
    """All hats of a level-m decomposition plus the normalizing sum."""

    def __init__(self, ct: CoreTentacleDecomposition, kmax: int = KMAX):
        if kmax > KMAX:
            raise DomainError(f"derivative order capped at {KMAX}")
        self.ct = ct
        self.domain = ct.domain
        self.alphas = multi_indices(kmax)
        self.delta = 2.0 ** (-ct.m) / 100.0
        h = self.domain.h
        shape = self.domain.shape
        dec = ct.dec
        self.hats: list[Hat] = []

        def cube_hat(kind: str, key: int, q: int) -> Hat:
            cube = dec.cubes[q]
            ramp = 0.05 * ct.c0 * cube.l
            allowed = cube.box(h, 1.1 * ct.c0)
            rects = _cells_rects(shape, ct.halo[q], h)
            bump = _clipped_bump(rects, ramp, allowed, h)
            return Hat(kind, key, bump, rects,
                       [b.support for b in bump.boxes], [allowed])

        for q in ct.Um:
            self.hats.append(cube_hat("psi", q, q))

        for gi, g in enumerate(ct.groups):
            boxes: list[BoxBump] = []
            plateau, support, allowed = [], [], []
            for q in sorted(g.cubes):
                hat_q = cube_hat("phi", gi, q)
                boxes.extend(hat_q.bump.boxes)
                plateau += hat_q.plateau_rects
                support += hat_q.support_rects
                allowed += hat_q.allowed_rects
            delta_box = self.delta / np.sqrt(2.0)
            for vpos in g.members:
                rects = _rects_physical(
                    ct.component_mask(ct.V_ids[vpos]), h)
                vb = _uniform_bump(rects, delta_box)
                boxes.extend(vb.boxes)
                plateau += rects
                support += [b.support for b in vb.boxes]
                allowed += [(x0 - self.delta, x1 + self.delta,
                             y0 - self.delta, y1 + self.delta)
                            for x0, x1, y0, y1 in rects]
            self.hats.append(Hat("phi", gi, SetBump(boxes),
                                 plateau, support, allowed))

        for ui, lab in enumerate(ct.U_ids):
            rects = _rects_physical(ct.component_mask(lab), h)
            bump = _uniform_bump(rects, self.delta / np.sqrt(2.0))
            allowed = [(x0 - self.delta, x1 + self.delta,
                        y0 - self.delta, y1 + self.delta)
                       for x0, x1, y0, y1 in rects]
            self.hats.append(Hat("xi", ui, bump,
                                 rects, [b.support for b in bump.boxes],
                                 allowed))

    # -- evaluation ---------------------------------------------------------

    def active_hats(self, x: np.ndarray, y: np.ndarray) -> list[Hat]:
        out = []
        for hat in self.hats:
            b = hat.bump.bbox
            if ((x > b[0]) & (x < b[1]) & (y > b[2]) & (y < b[3])).any():
                out.append(hat)
        return out

    def sum_jet(self, x: np.ndarray, y: np.ndarray, alphas=None) -> Jet:
        """Jet of the raw hat-sum S (>= 1 on the domain)."""
        alphas = alphas or self.alphas
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        total = jet_zero(x.shape, alphas)
        for hat in self.hats:
            b = hat.bump.bbox
            sel = (x > b[0]) & (x < b[1]) & (y > b[2]) & (y < b[3])
            if not sel.any():
                continue
            hj = hat.jet(x[sel], y[sel], alphas)
            for a in alphas:
                total[a][sel] += hj[a]
        return total

    def check_coverage(self, x: np.ndarray, y: np.ndarray) -> None:
        s = self.sum_jet(x, y, alphas=[(0, 0)])[(0, 0)]
        if (s < 1.0 - 1e-9).any():
            i = int(np.argmin(s))
            raise DomainError(
                f"partition coverage hole at ({x.flat[i]:.4f}, "
                f"{y.flat[i]:.4f}): hat sum {s.flat[i]:.6f} < 1")

    def normalized_jet(self, hat: Hat, x, y, sum_jet: Jet | None = None,
                       alphas=None) -> Jet:
        alphas = alphas or self.alphas
        if sum_jet is None:
            sum_jet = self.sum_jet(x, y, alphas)
        return jet_quotient(hat.jet(x, y, alphas), sum_jet, alphas)

    # -- measurements -------------------------------------------------------

    def measured_sup(self, hat: Hat, alpha: tuple[int, int],
                     normalized: bool = True) -> float:
        """sup |grad^alpha| over ramp-straddling probe points (accurate even
        when ramps are narrower than any evaluation grid)."""
        x, y = hat.probe_points()
        ok = self.domain.interior[
            np.clip((x / self.domain.h).astype(int), 0,
                    self.domain.shape[0] - 1),
            np.clip((y / self.domain.h).astype(int), 0,
                    self.domain.shape[1] - 1),
        ]
        x, y = x[ok], y[ok]
        if not len(x):
            return 0.0
        if normalized:
            jet = self.normalized_jet(hat, x, y, alphas=self.alphas)
        else:
            jet = hat.jet(x, y, self.alphas)
        return float(np.abs(jet[alpha]).max())

    def support_violation(self, hat: Hat, x: np.ndarray, y: np.ndarray,
                          tol: float = 1e-12) -> int:
        """Number of points where the hat is positive outside its allowed
        support region."""
        val = hat.jet(x, y, alphas=[(0, 0)])[(0, 0)]
        inside = np.zeros(len(x), dtype=bool)
        for x0, x1, y0, y1 in hat.allowed_rects:
            inside |= (x >= x0 - tol) & (x <= x1 + tol) & \
                      (y >= y0 - tol) & (y <= y1 + tol)
        return int(((val > tol) & ~inside).sum())


def build_partition(ct: CoreTentacleDecomposition, kmax: int = KMAX
                    ) -> PartitionOfUnity:
    return PartitionOfUnity(ct, kmax)
