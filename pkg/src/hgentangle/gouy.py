"""ABCD propagation and Gouy phase of an astigmatic cylindrical-lens mode converter.

A beam is described per transverse axis by its complex beam parameter
``q = z + i z_R`` (``z`` measured from the waist).  Thin lenses add no Gouy
phase; a free-space segment of length ``d`` adds ``-arg(1 + d/q)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameter


def free_space(d: float) -> np.ndarray:
    return np.array([[1.0, d], [0.0, 1.0]])


def thin_lens(f: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [-1.0 / f, 1.0]])


def propagate_q(q: complex, abcd: np.ndarray) -> complex:
    (a, b), (c, d) = abcd
    return (a * q + b) / (c * q + d)


def segment_gouy(q: complex, abcd: np.ndarray) -> float:
    """Gouy phase picked up by the fundamental mode across one ABCD element.

    Only valid when the element adds less than pi, which holds for a single
    lens or free-space segment.
    """
    a, b = abcd[0]
    return -float(np.angle(a + b / q))


def accumulated_gouy(q_in: complex, elements: Iterable[np.ndarray]) -> tuple[float, complex]:
    """Propagate ``q_in`` element by element; return (total Gouy phase, q_out)."""
    q = complex(q_in)
    if q.imag <= 0:
        raise InvalidParameter(f"beam parameter needs a positive Rayleigh range, got q = {q}")
    psi = 0.0
    for element in elements:
        psi += segment_gouy(q, element)
        q = propagate_q(q, element)
    return psi, q


def beam_parameter(rayleigh_range: float, waist_position: float = 0.0) -> complex:
    """``q`` at the reference plane for a waist located ``waist_position`` downstream."""
    if rayleigh_range <= 0:
        raise InvalidParameter(f"Rayleigh range must be positive, got {rayleigh_range}")
    return complex(-waist_position, rayleigh_range)


def rayleigh_range(waist: float, wavelength: float) -> float:
    return np.pi * waist**2 / wavelength


@dataclass(frozen=True)
class CylLensSystem:
    """Two identical cylindrical lenses acting on one transverse axis.

    ``q_x`` and ``q_y`` are the input beam parameters at the first lens;
    ``trailing_distance`` is free propagation after the second lens.  Leave
    both ``q`` values as None to use the mode-matched input.
    """

    focal_length: float
    separation: float
    axis: str = "x"
    q_x: complex | None = None
    q_y: complex | None = None
    trailing_distance: float = 0.0

    def __post_init__(self):
        if self.focal_length <= 0:
            raise InvalidParameter(f"focal length must be positive, got {self.focal_length}")
        if self.separation < 0:
            raise InvalidParameter(f"lens separation must be non-negative, got {self.separation}")
        if self.axis not in ("x", "y"):
            raise InvalidParameter(f"lens axis must be 'x' or 'y', got {self.axis!r}")

    def lens_axis_elements(self) -> list[np.ndarray]:
        f, d = self.focal_length, self.separation
        return [thin_lens(f), free_space(d), thin_lens(f), free_space(self.trailing_distance)]

    def plain_axis_elements(self) -> list[np.ndarray]:
        return [free_space(self.separation + self.trailing_distance)]

    def input_parameters(self) -> tuple[complex, complex]:
        if self.q_x is None and self.q_y is None:
            q = mode_matched_q(self.focal_length, self.separation)
            return q, q
        if self.q_x is None or self.q_y is None:
            raise InvalidParameter("give both q_x and q_y, or neither for a mode-matched input")
        return complex(self.q_x), complex(self.q_y)


def mode_matched_q(f: float, d: float) -> complex:
    """Input beam that leaves the converter round, i.e. stigmatic again.

    Solves ``M q = q + d`` where ``M = L(f) F(d) L(f)``: after the converter the
    lens axis carries the same beam as the axis that only saw free space.
    """
    if d <= 0:
        raise InvalidParameter("a mode-matched input needs a positive lens separation")
    (a, b), (c, dd) = thin_lens(f) @ free_space(d) @ thin_lens(f)
    # c q^2 + (dd + c d - a) q + (dd d - b) = 0
    roots = np.roots([c, dd + c * d - a, dd * d - b])
    upper = [complex(r) for r in roots if np.imag(r) > 0]
    if not upper:
        raise InvalidParameter(
            f"no stable mode-matched beam for f={f}, d={d}; the converter needs d < 2f"
        )
    return upper[0]


@dataclass(frozen=True)
class GouyResult:
    psi_x: float
    psi_y: float

    @property
    def differential(self) -> float:
        """Relative phase between TEM10 and TEM01: ``psi_x - psi_y``."""
        return self.psi_x - self.psi_y

    def mode_phase(self, n: int, m: int) -> float:
        return (n + 0.5) * self.psi_x + (m + 0.5) * self.psi_y


def gouy_phase(system: CylLensSystem) -> GouyResult:
    q_x, q_y = system.input_parameters()
    if system.axis == "x":
        lens_q, plain_q = q_x, q_y
    else:
        lens_q, plain_q = q_y, q_x
    psi_lens, _ = accumulated_gouy(lens_q, system.lens_axis_elements())
    psi_plain, _ = accumulated_gouy(plain_q, system.plain_axis_elements())
    if system.axis == "x":
        return GouyResult(psi_lens, psi_plain)
    return GouyResult(psi_plain, psi_lens)


def gouy_shift(focal_length: float, separation: float, axis: str = "x") -> float:
    """Relative TEM10/TEM01 phase of a mode-matched converter."""
    return gouy_phase(CylLensSystem(focal_length, separation, axis)).differential


def differential_for(systems: Sequence[CylLensSystem]) -> float:
    return float(sum(gouy_phase(s).differential for s in systems))
