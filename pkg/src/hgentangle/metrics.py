"""Inseparability of two modes from sum/difference quadrature variances.

``I(phi) = sqrt(V_sum(phi) * V_diff(phi + pi/2))`` with both variances in
shot-noise units; ``I < 1`` certifies entanglement.  The LO phase ``phi_0`` is
the minimiser of ``I``.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InvalidInput, InvalidParameter, NoiseFloorError
from .gaussian import GaussianState, sum_diff_variances

GRID_POINTS = 1024
# rounding slack: vacuum and other separable states must not read as entangled
ENTANGLEMENT_SLACK = 1e-9
RESULT_FIELDS = ("phi0_rad", "V_sum", "V_diff", "I_raw", "I_corrected", "V_el")


@dataclass(frozen=True)
class InseparabilityResult:
    phi0: float
    v_sum: float
    v_diff: float
    i_raw: float
    i_corrected: float
    v_el: float = 0.0
    uncertainty: float | None = None
    refined: bool = True

    @property
    def entangled(self) -> bool:
        return self.i_corrected < 1.0 - ENTANGLEMENT_SLACK

    def row(self) -> dict[str, float]:
        return dict(
            zip(
                RESULT_FIELDS,
                (self.phi0, self.v_sum, self.v_diff, self.i_raw, self.i_corrected, self.v_el),
            )
        )

    def to_dict(self) -> dict:
        return asdict(self)


def correct_electronic_noise(
    v_meas, v_el: float, v_shot: float = 1.0, method: str = "renormalize"
):
    """Remove electronic noise from a measured variance.

    ``renormalize`` returns ``(V_meas - V_el)/(V_shot - V_el)`` so that a vacuum
    measurement maps to 1.  ``subtract`` returns ``V_meas - V_el`` and is kept
    for sensitivity studies.
    """
    v_meas = np.asarray(v_meas, dtype=float)
    if v_el < 0 or v_el >= v_shot:
        raise InvalidParameter(f"need 0 <= V_el < V_shot, got V_el={v_el}, V_shot={v_shot}")
    if np.any(v_meas <= v_el):
        raise NoiseFloorError(f"measured variance at or below the electronic floor {v_el}")
    if method == "renormalize":
        out = (v_meas - v_el) / (v_shot - v_el)
    elif method == "subtract":
        out = v_meas - v_el
    else:
        raise InvalidParameter(f"unknown correction method {method!r}")
    return float(out) if out.ndim == 0 else out


def _vertex(h: float, ym: float, y0: float, yp: float) -> float:
    """Offset of the vertex of the parabola through (-h, ym), (0, y0), (h, yp)."""
    denom = ym - 2 * y0 + yp
    if denom <= 0:
        return 0.0
    return 0.5 * h * (ym - yp) / denom


def _parabola(h: float, ym: float, y0: float, yp: float, t: float) -> float:
    a = (ym - 2 * y0 + yp) / (2 * h * h)
    b = (yp - ym) / (2 * h)
    return y0 + b * t + a * t * t


def refine_minimum(f: Callable[[float], float], phi: float, h: float, tol: float = 1e-10) -> float:
    """Successive parabolic interpolation around a bracketed minimum."""
    for _ in range(200):
        if h <= tol:
            break
        ym, y0, yp = f(phi - h), f(phi), f(phi + h)
        if y0 > min(ym, yp):
            phi = phi - h if ym < yp else phi + h
            continue
        phi += _vertex(h, ym, y0, yp)
        h /= 8.0
    return phi


def inseparability_analytic(
    state: GaussianState,
    mode_a: str,
    mode_b: str,
    electronic_noise: float = 0.0,
    correction: str = "renormalize",
    grid_points: int = GRID_POINTS,
) -> InseparabilityResult:
    """Minimise the inseparability of two modes of ``state`` over the LO phase.

    With ``electronic_noise = e`` the variances are first mapped to what the
    detector would read, ``(1 - e) V + e``; ``phi_0`` minimises that raw value
    and the corrected criterion is evaluated at the same phase.
    """
    e = float(electronic_noise)

    def measured(phi: float) -> tuple[float, float]:
        vs, vd = sum_diff_variances(state, mode_a, mode_b, phi)
        return (1 - e) * vs + e, (1 - e) * vd + e

    def i_raw(phi: float) -> float:
        vs, vd = measured(phi)
        return float(np.sqrt(vs * vd))

    grid = np.arange(grid_points) * np.pi / grid_points
    values = np.array([i_raw(p) for p in grid])
    # first minimiser, ignoring rounding-level ties
    k = int(np.flatnonzero(values <= values.min() + 1e-12)[0])
    h = grid[1] - grid[0]
    if np.ptp(values) > 1e-12:
        phi0 = refine_minimum(i_raw, grid[k], h) % np.pi
    else:
        phi0 = float(grid[k])
    vs, vd = measured(phi0)
    return _result(phi0, vs, vd, e, correction)


def _result(phi0, vs, vd, e, correction, uncertainty=None, refined=True) -> InseparabilityResult:
    if e > 0:
        vs_c = correct_electronic_noise(vs, e, method=correction)
        vd_c = correct_electronic_noise(vd, e, method=correction)
    else:
        vs_c, vd_c = vs, vd
    return InseparabilityResult(
        phi0=float(phi0),
        v_sum=float(vs),
        v_diff=float(vd),
        i_raw=float(np.sqrt(vs * vd)),
        i_corrected=float(np.sqrt(vs_c * vd_c)),
        v_el=float(e),
        uncertainty=uncertainty,
        refined=refined,
    )


def inseparability_from_traces(
    phi,
    v_sum,
    v_diff,
    sum_error=None,
    diff_error=None,
    electronic_noise: float = 0.0,
    correction: str = "renormalize",
) -> InseparabilityResult:
    """Criterion from measured traces sharing one phase grid.

    ``v_diff[k]`` must already be the difference variance at ``phi[k] + pi/2``.
    If standard errors are given and the local curvature of ``I`` at the grid
    minimum is not significant against them, the grid minimum is returned
    unrefined with its uncertainty.
    """
    phi = np.asarray(phi, dtype=float)
    v_sum = np.asarray(v_sum, dtype=float)
    v_diff = np.asarray(v_diff, dtype=float)
    if phi.ndim != 1 or v_sum.shape != phi.shape or v_diff.shape != phi.shape:
        raise InvalidInput(
            f"traces must share one phase grid; got {phi.shape}, {v_sum.shape}, {v_diff.shape}"
        )
    if len(phi) < 3:
        raise InvalidInput("need at least 3 grid points")
    if np.any(np.diff(phi) <= 0):
        raise InvalidInput("phase grid must be strictly increasing")
    if phi[-1] - phi[0] < np.pi * (1 - 1.0 / len(phi)) - 1e-12:
        raise InvalidInput(f"phase grid covers {phi[-1] - phi[0]:.4f} rad, need at least pi")

    values = np.sqrt(v_sum * v_diff)
    k = int(np.argmin(values))
    sigma = None
    if sum_error is not None and diff_error is not None:
        rel = 0.5 * np.hypot(np.asarray(sum_error) / v_sum, np.asarray(diff_error) / v_diff)
        sigma = rel * values
    e = float(electronic_noise)

    if k == 0 or k == len(phi) - 1:
        return _result(phi[k], v_sum[k], v_diff[k], e, correction, _sig(sigma, k), False)
    curvature = values[k - 1] - 2 * values[k] + values[k + 1]
    if sigma is not None:
        noise = np.sqrt(sigma[k - 1] ** 2 + 4 * sigma[k] ** 2 + sigma[k + 1] ** 2)
        if curvature <= 2 * noise:
            return _result(phi[k], v_sum[k], v_diff[k], e, correction, _sig(sigma, k), False)

    h_left, h_right = phi[k] - phi[k - 1], phi[k + 1] - phi[k]
    if not np.isclose(h_left, h_right, rtol=1e-6):
        return _result(phi[k], v_sum[k], v_diff[k], e, correction, _sig(sigma, k), False)
    t = _vertex(h_left, values[k - 1], values[k], values[k + 1])
    vs = _parabola(h_left, v_sum[k - 1], v_sum[k], v_sum[k + 1], t)
    vd = _parabola(h_left, v_diff[k - 1], v_diff[k], v_diff[k + 1], t)
    return _result(phi[k] + t, vs, vd, e, correction, _sig(sigma, k), True)


def _sig(sigma, k):
    return None if sigma is None else float(sigma[k])


def write_result(path: str | Path, result: InseparabilityResult) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_FIELDS)
        writer.writerow([f"{v:.12g}" for v in result.row().values()])
    return path
