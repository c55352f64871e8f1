"""Hermite-Gaussian transverse modes, gain masks and overlap integrals.

All mode functions are real, normalised amplitudes at the waist plane.  A
mode pattern rotated by ``orientation`` is evaluated in the frame
``x' = x cos + y sin``, ``y' = -x sin + y cos``, so TEM10 rotated by pi/4 is
``(TEM10 + TEM01)/sqrt2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite import hermval
from numpy.polynomial.legendre import leggauss

from .errors import InvalidMask, InvalidParameter

QUAD_TOL = 1e-9
WINDOW_RADII = 6.0


@dataclass(frozen=True)
class HGMode:
    n: int
    m: int
    waist: float = 1.0
    orientation: float = 0.0

    def __post_init__(self):
        if self.n < 0 or self.m < 0:
            raise InvalidParameter(f"mode indices must be non-negative, got ({self.n}, {self.m})")
        if not self.waist > 0:
            raise InvalidParameter(f"waist must be positive, got {self.waist}")

    @property
    def order(self) -> int:
        return self.n + self.m


def hg_1d(n: int, u, waist: float = 1.0):
    """Normalised 1D Hermite-Gaussian amplitude."""
    u = np.asarray(u, dtype=float)
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    norm = (2.0 / np.pi) ** 0.25 / math.sqrt(2.0**n * math.factorial(n) * waist)
    return norm * hermval(np.sqrt(2.0) * u / waist, coeffs) * np.exp(-((u / waist) ** 2))


def hg_amplitude(mode: HGMode, x, y):
    """Amplitude ``u_nm(x, y)`` of ``mode``; broadcasts over array arguments."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c, s = np.cos(mode.orientation), np.sin(mode.orientation)
    xr = c * x + s * y
    yr = -s * x + c * y
    return hg_1d(mode.n, xr, mode.waist) * hg_1d(mode.m, yr, mode.waist)


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle in the mask frame, possibly unbounded."""

    x0: float
    x1: float
    y0: float
    y1: float
    gain: float
    label: str = ""


@dataclass(frozen=True)
class GainMask:
    """Piecewise-constant gain over the transverse plane.

    Regions are rectangles in the detector frame; the detector frame is the
    beam frame rotated by ``rotation`` and shifted by ``offset``.
    """

    regions: tuple[Region, ...]
    description: str = ""
    rotation: float = 0.0
    offset: tuple[float, float] = (0.0, 0.0)

    def gain_at(self, x, y):
        """Gain at beam-frame coordinates; a slow path used by tests and plots."""
        u, v = self.to_mask_frame(np.asarray(x, float), np.asarray(y, float))
        g = np.zeros(np.broadcast(u, v).shape)
        for r in self.regions:
            inside = (u >= r.x0) & (u < r.x1) & (v >= r.y0) & (v < r.y1)
            g = np.where(inside, r.gain, g)
        return g

    def to_mask_frame(self, x, y):
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        xs, ys = x - self.offset[0], y - self.offset[1]
        return c * xs + s * ys, -s * xs + c * ys

    def to_beam_frame(self, u, v):
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        return c * u - s * v + self.offset[0], s * u + c * v + self.offset[1]

    def rotated(self, angle: float) -> "GainMask":
        return GainMask(self.regions, self.description, self.rotation + angle, self.offset)

    def shifted(self, dx: float, dy: float) -> "GainMask":
        ox, oy = self.offset
        return GainMask(self.regions, self.description, self.rotation, (ox + dx, oy + dy))

    def with_gains(self, gains: dict[str, float], description: str = "") -> "GainMask":
        regions = tuple(
            Region(r.x0, r.x1, r.y0, r.y1, gains.get(r.label, r.gain), r.label)
            for r in self.regions
        )
        return GainMask(regions, description or self.description, self.rotation, self.offset)


def uniform_mask(gain: float = 1.0) -> GainMask:
    inf = np.inf
    return GainMask((Region(-inf, inf, -inf, inf, gain, "all"),), "uniform")


def quadrant_mask(
    gains: Sequence[float] = (1.0, 1.0, 1.0, 1.0), gap: float = 0.0, description: str = ""
) -> GainMask:
    """Quadrant detector with pixel gains ``(A, B, C, D)``.

    Pixel layout: A at x>0,y>0; B at x>0,y<0; C at x<0,y>0; D at x<0,y<0, so
    ``(A+B)-(C+D)`` is odd in x and ``(A+C)-(B+D)`` is odd in y.  A non-zero
    ``gap`` adds dead (zero-gain) strips of that width along both axes.
    """
    if len(gains) != 4:
        raise InvalidParameter(f"a quadrant detector has 4 pixel gains, got {len(gains)}")
    if gap < 0:
        raise InvalidParameter(f"gap must be non-negative, got {gap}")
    a, b, c, d = (float(g) for g in gains)
    inf, h = np.inf, gap / 2.0
    regions = [
        Region(h, inf, h, inf, a, "A"),
        Region(h, inf, -inf, -h, b, "B"),
        Region(-inf, -h, h, inf, c, "C"),
        Region(-inf, -h, -inf, -h, d, "D"),
    ]
    if gap > 0:
        regions += [
            Region(-inf, inf, -h, h, 0.0, "gap"),
            Region(-h, h, h, inf, 0.0, "gap"),
            Region(-h, h, -inf, -h, 0.0, "gap"),
        ]
    return GainMask(tuple(regions), description or f"quadrant gains {gains}")


def x_flip_mask(gap: float = 0.0) -> GainMask:
    return quadrant_mask((1, 1, -1, -1), gap, "(A+B)-(C+D)")


def y_flip_mask(gap: float = 0.0) -> GainMask:
    return quadrant_mask((1, -1, 1, -1), gap, "(A+C)-(B+D)")


def _clip(region: Region, half: float, cu: float, cv: float):
    x0, x1 = max(region.x0, cu - half), min(region.x1, cu + half)
    y0, y1 = max(region.y0, cv - half), min(region.y1, cv + half)
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, x1, y0, y1


def check_partition(mask: GainMask, half: float, center=(0.0, 0.0)) -> None:
    """Raise InvalidMask unless the regions tile the integration window."""
    boxes = [b for b in (_clip(r, half, *center) for r in mask.regions) if b is not None]
    area = sum((x1 - x0) * (y1 - y0) for x0, x1, y0, y1 in boxes)
    full = (2 * half) ** 2
    scale = full * 1e-12
    for i, p in enumerate(boxes):
        for q in boxes[i + 1 :]:
            w = min(p[1], q[1]) - max(p[0], q[0])
            h = min(p[3], q[3]) - max(p[2], q[2])
            if w > 0 and h > 0 and w * h > scale:
                raise InvalidMask(f"{mask.description or 'mask'}: regions overlap")
    if abs(area - full) > scale:
        raise InvalidMask(
            f"{mask.description or 'mask'}: regions cover {area / full:.6f} of the plane"
        )


@lru_cache(maxsize=32)
def _nodes(order: int):
    return leggauss(order)


def _rect_quad(func, x0, x1, y0, y1, order: int) -> float:
    t, w = _nodes(order)
    xs = 0.5 * (x1 - x0) * t + 0.5 * (x1 + x0)
    ys = 0.5 * (y1 - y0) * t + 0.5 * (y1 + y0)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vals = func(X, Y)
    return 0.25 * (x1 - x0) * (y1 - y0) * float(w @ vals @ w)


def adaptive_rect_quad(func, x0, x1, y0, y1, tol=QUAD_TOL, order=24, depth=0) -> float:
    """Tensor-product Gauss-Legendre with order doubling, then bisection.

    ``func`` must accept 2D arrays.  Accepts the estimate once two successive
    orders agree to ``tol``.
    """
    coarse = _rect_quad(func, x0, x1, y0, y1, order)
    while order < 192:
        order *= 2
        fine = _rect_quad(func, x0, x1, y0, y1, order)
        if abs(fine - coarse) <= tol:
            return fine
        coarse = fine
    if depth > 6:
        return fine
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return sum(
        adaptive_rect_quad(func, a, b, c, d, tol / 4, 24, depth + 1)
        for a, b, c, d in ((x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1))
    )


def masked_overlap(
    mode_a: HGMode, mode_b: HGMode, mask: GainMask | None = None, tol: float = QUAD_TOL
) -> float:
    """``integral u_A g u_B dx dy`` over the plane, region by region."""
    if not np.isclose(mode_a.waist, mode_b.waist, rtol=1e-12):
        raise InvalidParameter("overlaps are only defined here for equal waists")
    mask = uniform_mask() if mask is None else mask
    w = mode_a.waist
    half = WINDOW_RADII * w
    # window centred on the beam, expressed in the mask frame
    center = tuple(float(v) for v in mask.to_mask_frame(np.float64(0.0), np.float64(0.0)))
    check_partition(mask, half, center)

    def integrand(u, v):
        x, y = mask.to_beam_frame(u, v)
        return hg_amplitude(mode_a, x, y) * hg_amplitude(mode_b, x, y)

    total = 0.0
    for region in mask.regions:
        if region.gain == 0.0:
            continue
        box = _clip(region, half, *center)
        if box is None:
            continue
        total += region.gain * adaptive_rect_quad(integrand, *box, tol=tol / len(mask.regions))
    return total


def masked_norm(mode: HGMode, mask: GainMask) -> float:
    """L2 norm of the masked mode ``g u``, i.e. ``sqrt(integral g^2 u^2)``."""
    squared = GainMask(
        tuple(Region(r.x0, r.x1, r.y0, r.y1, r.gain**2, r.label) for r in mask.regions),
        mask.description,
        mask.rotation,
        mask.offset,
    )
    return float(np.sqrt(masked_overlap(mode, mode, squared)))


def projection_efficiency(lo: HGMode, mask: GainMask, signal: HGMode) -> float:
    """Fraction of ``signal`` seen by a detector with LO ``lo`` and gain ``mask``.

    The detector's eigenmode is ``g u_LO`` normalised; the efficiency is its
    squared overlap with the signal mode.
    """
    norm = masked_norm(lo, mask)
    if norm == 0.0:
        return 0.0
    return (masked_overlap(lo, signal, mask) / norm) ** 2


@dataclass(frozen=True)
class DetectorEfficiencies:
    eta_x: float
    eta_y: float

    @property
    def residual_x(self) -> float:
        """Part of the x eigenmode outside TEM10, treated as vacuum coupling."""
        return 1.0 - self.eta_x

    @property
    def residual_y(self) -> float:
        return 1.0 - self.eta_y


def detector_efficiencies(
    lo: HGMode | None = None,
    gap: float = 0.0,
    rotation: float = 0.0,
    offset: tuple[float, float] = (0.0, 0.0),
    signal_orientation: float | None = None,
) -> DetectorEfficiencies:
    """Efficiency of the two quadrant-detector combinations for TEM10 and TEM01.

    The detector may be rotated and offset relative to the beam; the signal
    modes follow the detector rotation unless ``signal_orientation`` is given.
    """
    lo = HGMode(0, 0) if lo is None else lo
    orient = rotation if signal_orientation is None else signal_orientation
    sx = HGMode(1, 0, lo.waist, orient)
    sy = HGMode(0, 1, lo.waist, orient)
    mx = x_flip_mask(gap).rotated(rotation).shifted(*offset)
    my = y_flip_mask(gap).rotated(rotation).shifted(*offset)
    return DetectorEfficiencies(projection_efficiency(lo, mx, sx), projection_efficiency(lo, my, sy))


def order_basis(order: int) -> list[tuple[int, int]]:
    """Same-order HG indices ordered ``(order, 0), (order-1, 1), ..., (0, order)``."""
    return [(order - k, k) for k in range(order + 1)]


@dataclass(frozen=True)
class Decomposition:
    basis: tuple[tuple[int, int], ...]
    coefficients: np.ndarray
    numerical: bool = False
    notes: str = field(default="")


def rotated_decomposition(n: int, m: int, theta: float, waist: float = 1.0) -> Decomposition:
    """Expand TEM_nm rotated by ``theta`` over the unrotated modes of equal order."""
    if n < 0 or m < 0:
        raise InvalidParameter(f"mode indices must be non-negative, got ({n}, {m})")
    order = n + m
    basis = tuple(order_basis(order))
    c, s = np.cos(theta), np.sin(theta)
    if order == 0:
        return Decomposition(basis, np.array([1.0]))
    if order == 1:
        coeffs = np.array([c, s]) if n == 1 else np.array([-s, c])
        return Decomposition(basis, coeffs)
    rotated = HGMode(n, m, waist, theta)
    coeffs = np.array([masked_overlap(rotated, HGMode(i, j, waist)) for i, j in basis])
    return Decomposition(basis, coeffs, numerical=True, notes="numerical projection")


def rotation_in_order(order: int, theta: float, waist: float = 1.0) -> np.ndarray:
    """Matrix whose column k holds the decomposition of basis mode k rotated by theta."""
    cols = [rotated_decomposition(i, j, theta, waist).coefficients for i, j in order_basis(order)]
    return np.column_stack(cols)
